#pragma once

#include "vseg/graph.hpp"
#include "vseg/spectral.hpp"

#include <Eigen/Dense>

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace vseg {

/// Fills gt.links: every voxel of an unannotated frame is carried along the
/// forward/backward flow to the nearest annotated frame (rounded to the pixel
/// grid). Voxels leaving the grid stay unlinked.
void link_by_flow(GroundTruth& gt, const CueVolumes& cues);

/// Ground-truth cluster indicator over reduced-graph nodes. Unlabelled nodes
/// carry -1 and are left out of every e_r and of the restricted D, W.
struct GtIndicator {
    std::vector<int> node_labels;
    std::size_t clusters = 0;

    std::size_t labelled() const;
};

/// Majority GT label per super-node over its annotated voxels, falling back to
/// linked annotations. When `structure` is given the indicator is extended to
/// grouping nodes (size-weighted majority of their labelled super-nodes).
GtIndicator gt_indicators(const MinOverlapSuperpixels& sp, const GroundTruth& gt,
                          const GraphStructure* structure = nullptr);

/// NCut = sum_r e_r^T (D - W) e_r / e_r^T D e_r on a graph with dense labels 0..R-1 (-1 skipped).
double ncut(const AffinityGraph& graph, std::span<const int> labels, std::size_t clusters);
double grad_ncut(const AffinityGraph& graph, std::span<const int> labels, std::size_t clusters,
                 std::span<const WeightedEdge> dA);

/// Trace_R = R - sum of the R largest eigenvalues of D^{-1} W.
double trace_r(const AffinityGraph& graph, std::size_t clusters, const EigenOptions& options = {});

struct TraceGradient {
    double value = 0.0;                  ///< Trace_R
    std::vector<double> gradient;        ///< one entry per supplied derivative
    bool degenerate = false;             ///< lambda_R and lambda_{R+1} closer than the gap threshold
};

/// Trace_R and dTrace_R/dtheta = -sum_r u_r^T (dW - lambda_r dD) u_r for each
/// derivative in `dAs` (u_r D-orthonormal). When lambda_R is degenerate the
/// gradient is averaged over the straddling eigenspace.
TraceGradient trace_r_with_gradient(const AffinityGraph& graph, std::size_t clusters,
                                    std::span<const std::vector<WeightedEdge>> dAs, const EigenOptions& options = {},
                                    double gap_threshold = 1e-8);

/// Induced subgraph on labelled nodes with volumes recomputed from it.
struct LabelledSubgraph {
    AffinityGraph graph;
    std::vector<int> labels;                  ///< dense 0..R-1
    std::vector<std::int64_t> full_to_sub;    ///< -1 for dropped nodes
    std::size_t clusters = 0;

    std::vector<WeightedEdge> restrict(std::span<const WeightedEdge> dA) const;
};

LabelledSubgraph restrict_to_labelled(const AffinityGraph& graph, const GtIndicator& indicator);

double ncut(const ReducedGraph& graph, const GtIndicator& indicator);
double trace_r(const ReducedGraph& graph, std::size_t clusters, const EigenOptions& options = {});
double grad_ncut(const ReducedGraph& graph, const GtIndicator& indicator, std::size_t theta);
double grad_trace_r(const ReducedGraph& graph, std::size_t clusters, std::size_t theta,
                    const EigenOptions& options = {});

/// chi = [alpha (K), beta (C), NCut, Trace_R, 1] and its Jacobian d chi / d theta.
struct SpectralRepresentation {
    Eigen::VectorXd chi;
    Eigen::MatrixXd jacobian;  ///< rows: theta (K + C); cols: chi entries
    bool degenerate = false;

    std::size_t ncut_index() const { return std::size_t(chi.size()) - 3; }
    std::size_t trace_index() const { return std::size_t(chi.size()) - 2; }
};

/// Both spectral terms on the labelled subgraph, so NCut >= Trace_R holds.
SpectralRepresentation spectral_representation(const ReducedGraph& graph, const GtIndicator& indicator,
                                               const EigenOptions& options = {});

struct ProxySample {
    Eigen::VectorXd chi;
    double performance = 0.0;
};

/// Quadratic performance proxy chi^T Y chi.
struct ProxyModel {
    Eigen::MatrixXd Y;
    std::vector<ProxySample> fit_window;
    double ridge = 1e-4;
    double rmse = 0.0;

    double value(const Eigen::VectorXd& chi) const;
    /// (d chi^T / d theta)(Y + Y^T) chi.
    Eigen::VectorXd gradient(const SpectralRepresentation& rep) const;
};

/// Least squares chi^T Y chi ~ P with a ridge on every coefficient except the
/// bias^2 entry; Y is symmetric.
ProxyModel fit_proxy(std::span<const ProxySample> samples, double ridge = 1e-4);

struct AscentOptions {
    double step = 0.05;
    int max_steps = 50;
    double min_step = 1e-5;
    double lower = kParamFloor;
    double upper = kParamCeil;
    /// Parameters (flat indices) held at their initial value.
    std::vector<std::size_t> frozen;
};

struct AscentResult {
    CombinationParams params;
    double proxy_value = 0.0;
    int steps = 0;
    std::vector<double> trace;  ///< accepted proxy values
};

using RepresentationFn = std::function<SpectralRepresentation(const CombinationParams&)>;

/// Projected normalised-gradient ascent on chi^T Y chi. A step that lowers the
/// proxy is rejected and halves the step length. Returns the best iterate.
AscentResult maximize_proxy(const ProxyModel& model, const CombinationParams& init, const RepresentationFn& represent,
                            const AscentOptions& options = {});

/// Log-normal multiplicative perturbations theta * exp(sigma z), clamped to the box.
std::vector<CombinationParams> sample_neighborhood(const CombinationParams& center, std::size_t count, double sigma,
                                                   std::mt19937_64& rng, std::span<const std::size_t> frozen = {});

} // namespace vseg
