#pragma once

#include "vseg/core.hpp"

#include <optional>
#include <string>
#include <vector>

namespace vseg {

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
    double f = 0.0;
};

/// Harmonic mean of precision and recall; 0 when both are 0.
double f_measure(double precision, double recall);

enum class MetricKind { bpr, vpr, am, hm };
const char* to_string(MetricKind kind);
MetricKind metric_kind_from_string(const std::string& text);

struct FrameBoundaryCounts {
    int frame = 0;
    std::size_t matched = 0;
    std::size_t predicted = 0;
    std::size_t ground_truth = 0;
};

struct MetricReport {
    PrecisionRecall bpr;
    PrecisionRecall vpr;
    double am_bvpr = 0.0;
    double hm_bvpr = 0.0;
    std::vector<FrameBoundaryCounts> per_frame;

    double score(MetricKind kind) const;
};

struct Fusion {
    double am = 0.0;
    double hm = 0.0;
};

/// Arithmetic and harmonic mean of the BPR and VPR F-measures.
Fusion fuse(double bpr_f, double vpr_f);

/// Pixel marked iff a 4-neighbour carries a different label.
std::vector<bool> boundary_map(std::span<const Label> labels, int width, int height);

struct BoundaryOptions {
    /// Match radius as a fraction of the image diagonal.
    double tolerance = 0.0075;
    /// Maximum-cardinality matching instead of greedy distance-sorted matching.
    bool exact_matching = false;
};

/// Number of one-to-one matches between two boundary maps within `radius` pixels.
std::size_t match_boundaries(const std::vector<bool>& predicted, const std::vector<bool>& ground_truth, int width,
                             int height, double radius, bool exact);

/// Boundary precision-recall over the annotated frames. Counts are summed over
/// frames before dividing; an empty predicted (ground-truth) boundary set has
/// precision (recall) 1.
PrecisionRecall bpr(const LabelVolume& pred, const GroundTruth& gt, const BoundaryOptions& options = {},
                    std::vector<FrameBoundaryCounts>* per_frame = nullptr);

/// Volume precision-recall: best-overlap precision over predicted volumes and
/// recall over ground-truth volumes, restricted to annotated voxels with all
/// annotated frames pooled so temporal splits are penalised.
PrecisionRecall vpr(const LabelVolume& pred, const GroundTruth& gt);

MetricReport evaluate(const LabelVolume& pred, const GroundTruth& gt, const BoundaryOptions& options = {});

/// Component-wise mean of reports (Table-style corpus aggregation).
MetricReport average(std::span<const MetricReport> reports);

} // namespace vseg
