#include "vseg/random.hpp"
#include "vseg/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

namespace vseg {

namespace {

struct KMeansRun {
    std::vector<std::uint32_t> assignment;
    Eigen::MatrixXd centers;
    double objective = std::numeric_limits<double>::infinity();
};

std::uint32_t nearest(const Eigen::MatrixXd& centers, const Eigen::RowVectorXd& x, double* dist = nullptr) {
    std::uint32_t arg = 0;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
        const double d = (centers.row(c) - x).squaredNorm();
        if (d < best) {
            best = d;
            arg = std::uint32_t(c);
        }
    }
    if (dist) *dist = best;
    return arg;
}

std::size_t sample_index(std::mt19937_64& rng, const std::vector<double>& mass) {
    double total = 0.0;
    for (double m : mass) total += m;
    if (!(total > 0.0)) return mass.size();
    std::uniform_real_distribution<double> unif(0.0, total);
    const double u = unif(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < mass.size(); ++i) {
        acc += mass[i];
        if (u < acc && mass[i] > 0.0) return i;
    }
    for (std::size_t i = mass.size(); i-- > 0;)
        if (mass[i] > 0.0) return i;
    return mass.size();
}

KMeansRun kmeans_once(const Eigen::MatrixXd& X, const std::vector<double>& w, std::size_t k, std::uint64_t seed,
                      int max_iterations) {
    const std::size_t m = std::size_t(X.rows());
    std::mt19937_64 rng(seed);
    KMeansRun run;
    run.centers.resize(Eigen::Index(k), X.cols());

    // k-means++ seeding with volume weights.
    std::vector<double> d2(m, std::numeric_limits<double>::infinity());
    std::size_t first = sample_index(rng, w);
    if (first == m) first = 0;
    run.centers.row(0) = X.row(Eigen::Index(first));
    for (std::size_t c = 1; c < k; ++c) {
        std::vector<double> mass(m);
        for (std::size_t i = 0; i < m; ++i) {
            d2[i] = std::min(d2[i], (X.row(Eigen::Index(i)) - run.centers.row(Eigen::Index(c - 1))).squaredNorm());
            mass[i] = w[i] * d2[i];
        }
        std::size_t pick = sample_index(rng, mass);
        if (pick == m) pick = 0;
        run.centers.row(Eigen::Index(c)) = X.row(Eigen::Index(pick));
    }

    run.assignment.assign(m, std::uint32_t(-1));
    for (int it = 0; it < max_iterations; ++it) {
        bool changed = false;
        std::vector<double> dist(m);
        for (std::size_t i = 0; i < m; ++i) {
            const auto a = nearest(run.centers, X.row(Eigen::Index(i)), &dist[i]);
            if (a != run.assignment[i]) {
                run.assignment[i] = a;
                changed = true;
            }
        }
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(Eigen::Index(k), X.cols());
        std::vector<double> mass(k, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            sums.row(run.assignment[i]) += w[i] * X.row(Eigen::Index(i));
            mass[run.assignment[i]] += w[i];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (mass[c] > 0.0) {
                run.centers.row(Eigen::Index(c)) = sums.row(Eigen::Index(c)) / mass[c];
                continue;
            }
            // Empty cluster: move its centre to the worst-served point.
            std::size_t worst = 0;
            double worst_cost = -1.0;
            for (std::size_t i = 0; i < m; ++i)
                if (w[i] * dist[i] > worst_cost) {
                    worst_cost = w[i] * dist[i];
                    worst = i;
                }
            run.centers.row(Eigen::Index(c)) = X.row(Eigen::Index(worst));
            dist[worst] = 0.0;
            run.assignment[worst] = std::uint32_t(c);
            changed = true;
        }
        if (!changed) break;
    }
    run.objective = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        run.objective += w[i] * (X.row(Eigen::Index(i)) - run.centers.row(run.assignment[i])).squaredNorm();
    return run;
}

std::size_t distinct_rows(const Eigen::MatrixXd& X) {
    std::set<std::vector<long long>> seen;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        std::vector<long long> key(std::size_t(X.cols()));
        for (Eigen::Index j = 0; j < X.cols(); ++j) key[std::size_t(j)] = std::llround(X(i, j) * 1e9);
        seen.insert(std::move(key));
    }
    return seen.size();
}

} // namespace

Partition cluster_embedding(const SpectralEmbedding& embedding, std::uint64_t seed, const KMeansOptions& options) {
    const std::size_t k = embedding.clusters();
    const std::size_t m = embedding.num_super;
    if (k < 2) throw Error(ErrorCode::invalid_argument, "need at least two clusters");
    const Eigen::MatrixXd X = embedding.rows.topRows(Eigen::Index(m));
    if (distinct_rows(X) < k)
        throw Error(ErrorCode::degenerate, "degenerate embedding: fewer distinct rows than clusters");
    std::vector<double> w(embedding.volumes.begin(), embedding.volumes.begin() + std::ptrdiff_t(m));

    const int restarts = std::clamp(options.restarts, 1, 100);
    KMeansRun best;
    for (int r = 0; r < restarts; ++r) {
        auto run = kmeans_once(X, w, k, derive_seed(seed, {std::uint64_t(r)}), options.max_iterations);
        if (run.objective < best.objective) best = std::move(run);
    }

    Partition p;
    p.clusters = k;
    std::vector<std::uint32_t> canonical(k, std::uint32_t(-1));
    std::uint32_t next = 0;
    for (auto a : best.assignment)
        if (canonical[a] == std::uint32_t(-1)) canonical[a] = next++;
    for (auto& c : canonical)
        if (c == std::uint32_t(-1)) c = next++;
    p.node_labels.resize(std::size_t(embedding.rows.rows()));
    for (std::size_t i = 0; i < m; ++i) p.node_labels[i] = canonical[best.assignment[i]];
    for (std::size_t i = m; i < p.node_labels.size(); ++i)
        p.node_labels[i] = canonical[nearest(best.centers, embedding.rows.row(Eigen::Index(i)))];
    return p;
}

LabelVolume lift_labels(std::span<const std::uint32_t> node_labels, const MinOverlapSuperpixels& sp) {
    std::vector<Label> out(sp.assignment.size());
    for (std::size_t v = 0; v < out.size(); ++v) out[v] = node_labels[sp.assignment[v]];
    return LabelVolume(sp.grid, std::move(out));
}

SegmentResult segment_graph(const ReducedGraph& graph, const MinOverlapSuperpixels& sp, std::size_t clusters,
                            std::uint64_t seed, const SegmentOptions& options) {
    if (sp.count() != graph.num_super()) throw Error(ErrorCode::invalid_argument, "superpixels do not match graph");
    SegmentResult res;
    res.num_nodes = graph.num_nodes();
    res.num_super = graph.num_super();
    const auto emb = top_eigenpairs(graph, clusters, options.eigen);
    res.eigenvalues = emb.eigenvalues;
    res.partition = cluster_embedding(emb, seed, options.kmeans);
    res.partition.voxel_labels = lift_labels(res.partition.node_labels, sp);
    return res;
}

SegmentResult segment(const SegmentationPool& pool, const CueVolumes& cues, const CombinationParams& params,
                      std::size_t clusters, std::uint64_t seed, const SegmentOptions& options) {
    const auto sp = compute_min_overlap_superpixels(pool);
    const auto graph = build_reduced_graph(sp, pool, cues, params, options.scales);
    return segment_graph(graph, sp, clusters, seed, options);
}

} // namespace vseg
