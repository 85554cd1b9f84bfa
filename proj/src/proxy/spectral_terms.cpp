#include "vseg/proxy.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace vseg {

namespace {

struct ClusterSums {
    std::vector<double> volume, assoc;
};

ClusterSums cluster_sums(std::span<const int> labels, std::size_t clusters,
                         std::span<const WeightedEdge> edges) {
    ClusterSums s{std::vector<double>(clusters, 0.0), std::vector<double>(clusters, 0.0)};
    for (const auto& e : edges) {
        const int a = labels[e.u], b = labels[e.v];
        if (a >= 0) s.volume[std::size_t(a)] += e.w;
        if (b >= 0) s.volume[std::size_t(b)] += e.w;
        if (a >= 0 && a == b) s.assoc[std::size_t(a)] += 2.0 * e.w;
    }
    return s;
}

void check_labels(const AffinityGraph& graph, std::span<const int> labels, std::size_t clusters) {
    if (labels.size() != graph.n) throw Error(ErrorCode::dim_mismatch, "indicator does not cover the graph nodes");
    for (int l : labels)
        if (l >= int(clusters)) throw Error(ErrorCode::invalid_argument, "indicator label out of range");
}

} // namespace

double ncut(const AffinityGraph& graph, std::span<const int> labels, std::size_t clusters) {
    check_labels(graph, labels, clusters);
    // Volumes are taken from graph.volume so callers may carry self-loop mass.
    std::vector<double> vol(clusters, 0.0);
    for (std::size_t i = 0; i < graph.n; ++i)
        if (labels[i] >= 0) vol[std::size_t(labels[i])] += graph.volume[i];
    const auto s = cluster_sums(labels, clusters, graph.edges);
    double total = 0.0;
    for (std::size_t r = 0; r < clusters; ++r) {
        if (!(vol[r] > 0.0)) throw Error(ErrorCode::numerical, "ncut: cluster " + std::to_string(r) + " has zero volume");
        total += (vol[r] - s.assoc[r]) / vol[r];
    }
    return total;
}

double grad_ncut(const AffinityGraph& graph, std::span<const int> labels, std::size_t clusters,
                 std::span<const WeightedEdge> dA) {
    check_labels(graph, labels, clusters);
    std::vector<double> vol(clusters, 0.0);
    for (std::size_t i = 0; i < graph.n; ++i)
        if (labels[i] >= 0) vol[std::size_t(labels[i])] += graph.volume[i];
    const auto s = cluster_sums(labels, clusters, graph.edges);
    const auto d = cluster_sums(labels, clusters, dA);
    double g = 0.0;
    for (std::size_t r = 0; r < clusters; ++r) {
        if (!(vol[r] > 0.0)) throw Error(ErrorCode::numerical, "ncut: cluster " + std::to_string(r) + " has zero volume");
        g += (-d.assoc[r] * vol[r] + s.assoc[r] * d.volume[r]) / (vol[r] * vol[r]);
    }
    return g;
}

namespace {

// Eigenpairs of D^{-1}W covering the top R plus every eigenvalue tied with lambda_R.
struct TopSpectrum {
    Eigen::VectorXd values;
    Eigen::MatrixXd u;  // D-orthonormal
    std::size_t tie_begin = 0, tie_end = 0;
};

TopSpectrum top_spectrum(const AffinityGraph& graph, std::size_t R, const EigenOptions& options, double gap) {
    if (R < 1 || R > graph.n) throw Error(ErrorCode::invalid_argument, "trace_r: need 1 <= R <= node count");
    std::size_t count = std::min(graph.n, R + 1);
    for (;;) {
        auto eig = symmetric_top_eigenpairs(graph, count, options);
        const double lr = eig.values[Eigen::Index(R - 1)];
        std::size_t end = R;
        while (end < count && std::abs(eig.values[Eigen::Index(end)] - lr) <= gap) ++end;
        if (end == count && count < graph.n) {
            count = std::min(graph.n, count + R + 2);
            continue;
        }
        std::size_t begin = R - 1;
        while (begin > 0 && std::abs(eig.values[Eigen::Index(begin - 1)] - lr) <= gap) --begin;
        TopSpectrum t;
        t.values = eig.values.head(Eigen::Index(end));
        t.u = eig.vectors.leftCols(Eigen::Index(end));
        for (std::size_t i = 0; i < graph.n; ++i) t.u.row(Eigen::Index(i)) /= std::sqrt(graph.volume[i]);
        t.tie_begin = begin;
        t.tie_end = end;
        return t;
    }
}

double eigenvalue_derivative(const Eigen::MatrixXd& u, Eigen::Index col, double lambda,
                             std::span<const WeightedEdge> dA) {
    double d = 0.0;
    for (const auto& e : dA) {
        const double a = u(e.u, col), b = u(e.v, col);
        d += e.w * (2.0 * a * b - lambda * (a * a + b * b));
    }
    return d;
}

} // namespace

double trace_r(const AffinityGraph& graph, std::size_t clusters, const EigenOptions& options) {
    if (clusters < 1 || clusters > graph.n) throw Error(ErrorCode::invalid_argument, "trace_r: need 1 <= R <= node count");
    const auto eig = symmetric_top_eigenpairs(graph, clusters, options);
    return double(clusters) - eig.values.head(Eigen::Index(clusters)).sum();
}

TraceGradient trace_r_with_gradient(const AffinityGraph& graph, std::size_t clusters,
                                    std::span<const std::vector<WeightedEdge>> dAs, const EigenOptions& options,
                                    double gap_threshold) {
    const auto spec = top_spectrum(graph, clusters, options, gap_threshold);
    TraceGradient out;
    out.value = double(clusters) - spec.values.head(Eigen::Index(clusters)).sum();
    out.degenerate = spec.tie_end > clusters;
    // Inside a tied eigenspace only the mean derivative is well defined.
    const double tie_weight = double(clusters - spec.tie_begin) / double(spec.tie_end - spec.tie_begin);
    for (const auto& dA : dAs) {
        double g = 0.0;
        for (std::size_t r = 0; r < spec.tie_begin; ++r)
            g += eigenvalue_derivative(spec.u, Eigen::Index(r), spec.values[Eigen::Index(r)], dA);
        double tied = 0.0;
        for (std::size_t r = spec.tie_begin; r < spec.tie_end; ++r)
            tied += eigenvalue_derivative(spec.u, Eigen::Index(r), spec.values[Eigen::Index(r)], dA);
        g += tie_weight * tied;
        out.gradient.push_back(-g);
    }
    return out;
}

std::vector<WeightedEdge> LabelledSubgraph::restrict(std::span<const WeightedEdge> dA) const {
    std::vector<WeightedEdge> out;
    for (const auto& e : dA) {
        const auto a = full_to_sub[e.u], b = full_to_sub[e.v];
        if (a < 0 || b < 0) continue;
        out.push_back({std::uint32_t(std::min(a, b)), std::uint32_t(std::max(a, b)), e.w});
    }
    return out;
}

LabelledSubgraph restrict_to_labelled(const AffinityGraph& graph, const GtIndicator& indicator) {
    if (indicator.node_labels.size() > graph.n) throw Error(ErrorCode::dim_mismatch, "indicator larger than graph");
    auto label_of = [&](std::size_t i) { return i < indicator.node_labels.size() ? indicator.node_labels[i] : -1; };

    // Labelled nodes without a labelled neighbour would have zero volume; drop them.
    std::vector<double> vol(graph.n, 0.0);
    for (const auto& e : graph.edges)
        if (label_of(e.u) >= 0 && label_of(e.v) >= 0) {
            vol[e.u] += e.w;
            vol[e.v] += e.w;
        }
    LabelledSubgraph sub;
    sub.full_to_sub.assign(graph.n, -1);
    std::map<int, int> dense;
    for (std::size_t i = 0; i < graph.n; ++i) {
        if (label_of(i) < 0 || !(vol[i] > 0.0)) continue;
        sub.full_to_sub[i] = std::int64_t(sub.labels.size());
        auto [it, inserted] = dense.try_emplace(label_of(i), int(dense.size()));
        sub.labels.push_back(it->second);
    }
    sub.clusters = dense.size();
    sub.graph.n = sub.labels.size();
    sub.graph.edges = sub.restrict(graph.edges);
    sub.graph.recompute_volumes();
    if (sub.clusters == 0) throw Error(ErrorCode::degenerate, "no labelled node with non-zero volume");
    return sub;
}

double ncut(const ReducedGraph& graph, const GtIndicator& indicator) {
    const auto sub = restrict_to_labelled(graph.affinity(), indicator);
    return ncut(sub.graph, sub.labels, sub.clusters);
}

double trace_r(const ReducedGraph& graph, std::size_t clusters, const EigenOptions& options) {
    return trace_r(graph.affinity(), clusters, options);
}

double grad_ncut(const ReducedGraph& graph, const GtIndicator& indicator, std::size_t theta) {
    const auto sub = restrict_to_labelled(graph.affinity(), indicator);
    return grad_ncut(sub.graph, sub.labels, sub.clusters, sub.restrict(graph.weight_derivative(theta)));
}

double grad_trace_r(const ReducedGraph& graph, std::size_t clusters, std::size_t theta, const EigenOptions& options) {
    const std::vector<std::vector<WeightedEdge>> dAs{graph.weight_derivative(theta)};
    return trace_r_with_gradient(graph.affinity(), clusters, dAs, options).gradient.front();
}

SpectralRepresentation spectral_representation(const ReducedGraph& graph, const GtIndicator& indicator,
                                               const EigenOptions& options) {
    const auto& params = graph.params();
    const std::size_t K = params.alpha.size(), C = params.beta.size(), P = K + C;
    const auto sub = restrict_to_labelled(graph.affinity(), indicator);

    std::vector<std::vector<WeightedEdge>> dAs(P);
    for (std::size_t t = 0; t < P; ++t) dAs[t] = sub.restrict(graph.weight_derivative(t));

    SpectralRepresentation rep;
    rep.chi.resize(Eigen::Index(P + 3));
    rep.jacobian = Eigen::MatrixXd::Zero(Eigen::Index(P), Eigen::Index(P + 3));
    const auto flat = params.flat();
    for (std::size_t t = 0; t < P; ++t) {
        rep.chi[Eigen::Index(t)] = flat[t];
        rep.jacobian(Eigen::Index(t), Eigen::Index(t)) = 1.0;
    }
    const auto ni = Eigen::Index(rep.ncut_index()), ti = Eigen::Index(rep.trace_index());
    rep.chi[ni] = ncut(sub.graph, sub.labels, sub.clusters);
    for (std::size_t t = 0; t < P; ++t)
        rep.jacobian(Eigen::Index(t), ni) = grad_ncut(sub.graph, sub.labels, sub.clusters, dAs[t]);

    const auto tg = trace_r_with_gradient(sub.graph, std::min(sub.clusters, sub.graph.n), dAs, options);
    rep.chi[ti] = tg.value;
    rep.degenerate = tg.degenerate;
    for (std::size_t t = 0; t < P; ++t) rep.jacobian(Eigen::Index(t), ti) = tg.gradient[t];
    rep.chi[Eigen::Index(P + 2)] = 1.0;
    return rep;
}

} // namespace vseg
