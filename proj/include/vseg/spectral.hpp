#pragma once

#include "vseg/graph.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace vseg {

struct EigenOptions {
    /// Graphs up to this many nodes use a dense symmetric eigensolver.
    std::size_t dense_threshold = 160;
    /// Residual bound ||S y - lambda y|| for accepting a Ritz pair.
    double tolerance = 1e-10;
    /// Krylov basis size before an explicit restart.
    std::size_t max_basis = 200;
    int max_restarts = 40;
    std::uint64_t seed = 0x6b7a11ceULL;
};

/// Largest `count` eigenpairs of S = V^{-1/2} A V^{-1/2}, descending.
struct SymmetricEigenpairs {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;  ///< orthonormal columns
    Eigen::VectorXd residuals;
};

SymmetricEigenpairs symmetric_top_eigenpairs(const AffinityGraph& graph, std::size_t count,
                                             const EigenOptions& options = {});

struct SpectralEmbedding {
    std::vector<double> eigenvalues;  ///< top R eigenvalues of D^{-1}W, descending
    Eigen::MatrixXd vectors;          ///< |nodes| x R, D-orthonormal eigenvectors of D^{-1}W
    Eigen::MatrixXd rows;             ///< vectors with unit-norm rows
    std::vector<double> volumes;
    std::size_t num_super = 0;        ///< rows [0, num_super) are the clustered super-nodes

    std::size_t clusters() const { return eigenvalues.size(); }
};

SpectralEmbedding top_eigenpairs(const AffinityGraph& graph, std::size_t num_super, std::size_t clusters,
                                 const EigenOptions& options = {});
SpectralEmbedding top_eigenpairs(const ReducedGraph& graph, std::size_t clusters, const EigenOptions& options = {});

struct KMeansOptions {
    int restarts = 10;  ///< capped at 100
    int max_iterations = 100;
};

struct Partition {
    std::vector<std::uint32_t> node_labels;  ///< cluster id per reduced-graph node
    std::size_t clusters = 0;
    LabelVolume voxel_labels;                ///< filled when lifted through the super-nodes
};

/// Volume-weighted k-means (k-means++ seeding) on the super-node rows of the
/// embedding; grouping nodes join the nearest centre. Cluster ids are assigned
/// in order of first super-node occurrence.
Partition cluster_embedding(const SpectralEmbedding& embedding, std::uint64_t seed, const KMeansOptions& options = {});

LabelVolume lift_labels(std::span<const std::uint32_t> node_labels, const MinOverlapSuperpixels& sp);

/// Largest relative eigengap among the top `max_clusters` eigenvalues (R >= 2).
std::size_t choose_cluster_count(const ReducedGraph& graph, std::size_t max_clusters = 20,
                                 const EigenOptions& options = {});

struct SegmentOptions {
    EigenOptions eigen;
    KMeansOptions kmeans;
    CueScales scales;
};

struct SegmentResult {
    Partition partition;
    std::vector<double> eigenvalues;
    std::size_t num_nodes = 0;
    std::size_t num_super = 0;
};

/// Spectral partition of an already-built reduced graph, lifted to voxels.
SegmentResult segment_graph(const ReducedGraph& graph, const MinOverlapSuperpixels& sp, std::size_t clusters,
                            std::uint64_t seed, const SegmentOptions& options = {});

/// Full pipeline: superpixels -> reduced graph -> eigenpairs -> k-means -> voxels.
SegmentResult segment(const SegmentationPool& pool, const CueVolumes& cues, const CombinationParams& params,
                      std::size_t clusters, std::uint64_t seed, const SegmentOptions& options = {});

} // namespace vseg
