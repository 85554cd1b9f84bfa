#pragma once

#include "vseg/core.hpp"

#include <array>
#include <memory>
#include <string>
#include <vector>

namespace vseg {

/// Intersection partition of all pooled outputs, split into 6-connected components.
struct MinOverlapSuperpixels {
    VoxelGrid grid;
    std::vector<std::uint32_t> assignment;  ///< per voxel super-node id
    std::vector<std::size_t> sizes;         ///< voxel count |I| per super-node
    std::vector<std::size_t> first_voxel;   ///< scan-order representative of each super-node

    std::size_t count() const { return sizes.size(); }
};

MinOverlapSuperpixels compute_min_overlap_superpixels(const SegmentationPool& pool);

/// Per-cue mean descriptors of a set of voxels: colour (3), flow (2), depth (1).
using CueMeans = std::array<double, 6>;

struct GroupingNode {
    std::uint32_t pool_index = 0;
    Label segment_id = 0;
    std::size_t size = 0;
    CueMeans mean_features{};
    std::vector<std::uint32_t> neighbors;  ///< indices into the grouping-node list
};

/// One node per (output, segment), ordered by output then segment id.
/// Image-level outputs use in-frame 4-adjacency, video-level outputs 6-adjacency.
std::vector<GroupingNode> grouping_nodes(const SegmentationPool& pool, const CueVolumes& cues);

/// Per-cue distance normalisers sigma_c.
struct CueScales {
    std::array<double, kNumCues> sigma{1.0, 1.0, 1.0};
};

/// Raw (unscaled) Euclidean distance between the per-cue means.
double raw_cue_distance(const CueMeans& a, const CueMeans& b, int cue);
double cue_distance(const GroupingNode& a, const GroupingNode& b, int cue, const CueScales& scales = {});

/// exp(-sum_c beta_c d_c) for a pair of neighbouring groupings of one output.
double beta_edge_weight(const GroupingNode& a, const GroupingNode& b, const CombinationParams& params,
                        const CueScales& scales = {});
double beta_edge_weight(const std::array<double, kNumCues>& distances, std::span<const double> beta);

/// Median of the non-zero neighbour distances per cue, pooled over all inputs.
/// Cues with no non-zero distance keep sigma = 1.
CueScales estimate_cue_scales(std::span<const std::vector<GroupingNode>> node_sets);

/// Parameter-independent part of the reduced graph. Node order: super-nodes
/// [0, S) followed by grouping nodes [S, S + G).
struct GraphStructure {
    std::size_t num_outputs = 0;
    std::size_t num_super = 0;
    std::size_t num_grouping = 0;
    std::vector<double> super_sizes;
    /// membership[I * K + k] = node index of the output-k grouping containing super-node I.
    std::vector<std::uint32_t> membership;
    std::vector<std::uint32_t> grouping_output;

    struct BetaEdge {
        std::uint32_t a = 0, b = 0;  ///< node indices, a < b
        std::uint32_t output = 0;
        std::array<double, kNumCues> distance{};  ///< scaled d^{k_c}
    };
    std::vector<BetaEdge> beta_edges;

    std::size_t num_nodes() const { return num_super + num_grouping; }
};

GraphStructure build_graph_structure(const MinOverlapSuperpixels& sp, const SegmentationPool& pool,
                                     const std::vector<GroupingNode>& nodes, const CueScales& scales);

struct WeightedEdge {
    std::uint32_t u = 0, v = 0;  ///< u < v
    double w = 0.0;
};

/// Symmetric graph with zero diagonal plus per-node volumes. This is what the
/// spectral routines consume: eigenproblems on (diag(volume) - A, diag(volume)).
struct AffinityGraph {
    std::size_t n = 0;
    std::vector<WeightedEdge> edges;
    std::vector<double> volume;

    /// y = A x.
    void multiply(std::span<const double> x, std::span<double> y) const;
    /// Volumes recomputed as the row sums of the edges.
    void recompute_volumes();
};

/// Reduced graph G^Q over super-nodes and grouping nodes with the self-edges of
/// the exact reduction. Node volumes |I| * deg(I) equal the summed degree of
/// the voxels merged into I, which is what the spectral problem normalises by.
class ReducedGraph {
public:
    ReducedGraph(std::shared_ptr<const GraphStructure> structure, CombinationParams params);

    const GraphStructure& structure() const { return *structure_; }
    std::shared_ptr<const GraphStructure> structure_ptr() const { return structure_; }
    const CombinationParams& params() const { return params_; }
    std::size_t num_nodes() const { return structure_->num_nodes(); }
    std::size_t num_super() const { return structure_->num_super; }

    /// Off-diagonal edges, each listed once with u < v.
    const std::vector<WeightedEdge>& edges() const { return affinity_.edges; }
    /// Diagonal w^Q_II.
    const std::vector<double>& self_edges() const { return self_; }
    /// deg^Q(I) = sum_J w^Q_IJ including the self-edge.
    const std::vector<double>& degrees() const { return degree_; }
    /// |I| * deg^Q(I).
    const std::vector<double>& volumes() const { return affinity_.volume; }
    double node_size(std::size_t i) const { return i < structure_->num_super ? structure_->super_sizes[i] : 1.0; }

    const AffinityGraph& affinity() const { return affinity_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    /// Index of the output-k grouping node that super-node I belongs to.
    std::uint32_t grouping_of(std::size_t super_node, std::size_t k) const {
        return structure_->membership[super_node * structure_->num_outputs + k];
    }

    /// Non-zero entries of dA/dtheta for theta = flat parameter index
    /// (alpha_k for k < K, beta_c after), in edge coordinates (u < v).
    std::vector<WeightedEdge> weight_derivative(std::size_t theta) const;

    /// Copy with every edge weight (and hence every volume and self-edge) scaled by c.
    ReducedGraph scaled(double c) const;

private:
    ReducedGraph() = default;
    void finish();

    std::shared_ptr<const GraphStructure> structure_;
    CombinationParams params_;
    AffinityGraph affinity_;
    std::vector<std::size_t> alpha_edge_begin_;  ///< edges of super-node I start at alpha_edge_begin_[I]
    std::size_t beta_edge_begin_ = 0;
    std::vector<double> self_;
    std::vector<double> degree_;
    std::vector<std::string> warnings_;
};

/// Convenience: super-nodes, grouping nodes, structure and weights in one call.
ReducedGraph build_reduced_graph(const MinOverlapSuperpixels& sp, const SegmentationPool& pool,
                                 const CueVolumes& cues, const CombinationParams& params,
                                 const CueScales& scales = {});

} // namespace vseg
