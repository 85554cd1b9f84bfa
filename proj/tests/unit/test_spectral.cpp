#include "fixtures.hpp"
#include "oracles.hpp"

#include "vseg/metrics.hpp"
#include "vseg/spectral.hpp"

#include <doctest.h>

#include <map>
#include <random>

using namespace vseg;

namespace {

AffinityGraph graph_of(std::size_t n, std::vector<WeightedEdge> edges) {
    AffinityGraph g;
    g.n = n;
    g.edges = std::move(edges);
    g.recompute_volumes();
    return g;
}

/// Unit-weight cliques on consecutive node ranges.
AffinityGraph cliques(const std::vector<std::uint32_t>& sizes) {
    std::vector<WeightedEdge> edges;
    std::uint32_t base = 0;
    for (auto s : sizes) {
        for (std::uint32_t i = 0; i < s; ++i)
            for (std::uint32_t j = i + 1; j < s; ++j) edges.push_back({base + i, base + j, 1.0});
        base += s;
    }
    return graph_of(base, edges);
}

template <class A, class B>
bool same_partition(const A& a, const B& b) {
    if (a.size() != b.size()) return false;
    std::map<std::uint64_t, std::uint64_t> ab, ba;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto x = std::uint64_t(a[i]), y = std::uint64_t(b[i]);
        if (ab.emplace(x, y).first->second != y || ba.emplace(y, x).first->second != x) return false;
    }
    return true;
}

} // namespace

TEST_SUITE("spectral") {

TEST_CASE("disconnected components give unit eigenvalues") {
    const auto g = cliques({3, 4, 2});
    const auto emb = top_eigenpairs(g, g.n, 3);
    for (double l : emb.eigenvalues) CHECK(std::abs(l - 1.0) <= 1e-10);
}

TEST_CASE("path and complete graph spectra") {
    const auto path = graph_of(3, {{0, 1, 1.0}, {1, 2, 1.0}});
    const auto p = top_eigenpairs(path, 3, 2);
    CHECK(p.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(p.eigenvalues[1]) <= 1e-12);
    const auto k4 = cliques({4});
    const auto k = top_eigenpairs(k4, 4, 2);
    CHECK(k.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(k.eigenvalues[1] == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("eigenvectors are D-orthonormal random-walk eigenvectors") {
    std::mt19937_64 rng(4);
    const auto g = oracle::random_graph(30, 0.2, rng);
    const auto emb = top_eigenpairs(g, g.n, 4);
    const Eigen::VectorXd vol = Eigen::Map<const Eigen::VectorXd>(g.volume.data(), Eigen::Index(g.n));
    const Eigen::MatrixXd gram = emb.vectors.transpose() * vol.asDiagonal() * emb.vectors;
    CHECK((gram - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-9);
    for (int r = 0; r < 4; ++r) {
        std::vector<double> x(g.n), y(g.n);
        for (std::size_t i = 0; i < g.n; ++i) x[i] = emb.vectors(Eigen::Index(i), r);
        g.multiply(x, y);
        for (std::size_t i = 0; i < g.n; ++i) CHECK(y[i] == doctest::Approx(emb.eigenvalues[std::size_t(r)] * vol[Eigen::Index(i)] * x[i]).epsilon(1e-7));
        CHECK(emb.eigenvalues[std::size_t(r)] <= 1.0 + 1e-9);
    }
    for (Eigen::Index i = 0; i < emb.rows.rows(); ++i) CHECK(emb.rows.row(i).norm() == doctest::Approx(1.0));
}

TEST_CASE("iterative and dense solvers agree") {
    std::mt19937_64 rng(9);
    const auto g = oracle::random_graph(220, 0.03, rng);
    EigenOptions dense, krylov;
    krylov.dense_threshold = 0;
    const auto a = top_eigenpairs(g, g.n, 6, dense);
    const auto b = top_eigenpairs(g, g.n, 6, krylov);
    for (std::size_t r = 0; r < 6; ++r) CHECK(std::abs(a.eigenvalues[r] - b.eigenvalues[r]) < 1e-9);
    CHECK_THROWS_AS(top_eigenpairs(g, g.n, 1), Error);
    CHECK_THROWS_AS(top_eigenpairs(g, g.n, g.n + 1), Error);
}

TEST_CASE("k-means recovers components and keeps duplicate rows together") {
    const auto g = cliques({5, 6});
    const auto part = cluster_embedding(top_eigenpairs(g, g.n, 2), 3);
    std::vector<int> truth(11, 0);
    for (int i = 5; i < 11; ++i) truth[std::size_t(i)] = 1;
    CHECK(same_partition(part.node_labels, truth));

    SpectralEmbedding emb;
    emb.eigenvalues = {1.0, 0.5, 0.2};
    emb.rows.resize(12, 3);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 6; ++i) {
        Eigen::RowVector3d r(n(rng), n(rng), n(rng));
        emb.rows.row(2 * i) = emb.rows.row(2 * i + 1) = r.normalized();
    }
    emb.vectors = emb.rows;
    emb.volumes.assign(12, 1.0);
    emb.num_super = 12;
    const auto p = cluster_embedding(emb, 8);
    for (int i = 0; i < 6; ++i) CHECK(p.node_labels[std::size_t(2 * i)] == p.node_labels[std::size_t(2 * i + 1)]);
    CHECK(p.node_labels[0] == 0);

    SpectralEmbedding flat = emb;
    flat.rows.rowwise() = emb.rows.row(0);
    CHECK_THROWS_AS(cluster_embedding(flat, 1), Error);
}

TEST_CASE("two-blob graph: spectral bipartition equals the brute-force minimum cut") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(20, 20);
    for (int i = 0; i < 20; ++i)
        for (int j = i + 1; j < 20; ++j) {
            const bool same = (i < 10) == (j < 10);
            const double w = same ? (u(rng) < 0.6 ? 0.5 + u(rng) : 0.0) : (u(rng) < 0.1 ? 0.05 * u(rng) : 0.0);
            W(i, j) = W(j, i) = w;
        }
    for (int i = 0; i + 1 < 20; ++i)
        if (i != 9 && W(i, i + 1) == 0.0) W(i, i + 1) = W(i + 1, i) = 0.5;
    const auto g = oracle::affinity_from_dense(W);
    const auto best = oracle::brute_force_ncut(W, 2);
    const auto part = cluster_embedding(top_eigenpairs(g, g.n, 2), 5);
    CHECK(same_partition(part.node_labels, best.labels));
}

TEST_CASE("unanimous pool returns the ground truth partition") {
    const auto video = fixture::small_video(7);
    const auto& truth = video.scene.labels;
    const SegmentationPool pool({{truth, OutputKind::video, "a"}, {truth, OutputKind::video, "b"},
                                 {truth, OutputKind::video, "c"}});
    const auto res = segment(pool, video.scene.cues, CombinationParams::uniform(3), truth.label_bound(), 1);
    CHECK(same_partition(res.partition.voxel_labels.labels(), truth.labels()));
}

TEST_CASE("a dominant alpha follows its output") {
    const auto video = fixture::small_video(4);
    const auto& pool = video.pool;
    const auto reference = GroundTruth::dense(normalize_labels(pool[0].labels));
    CombinationParams params = CombinationParams::uniform(3);
    params.alpha = {1.0, kParamFloor, kParamFloor};
    const auto res = segment(pool, video.scene.cues, params, reference.num_labels(), 2);
    const double own = bpr(res.partition.voxel_labels, reference).f;
    for (std::size_t k = 1; k < pool.size(); ++k) CHECK(own >= bpr(pool[k].labels, reference).f);
}

TEST_CASE("spectral partition is within 5% of the brute-force NCut optimum") {
    const VoxelGrid g{8, 8, 3};
    // A square moving right over a background split into upper and lower halves.
    const auto object = [](int x, int y, int t) { return x >= 1 + t && x < 5 + t && y >= 2 && y < 6; };
    const auto a = fixture::volume(g, [&](int x, int y, int t) { return Label(object(x, y, t)); });
    const auto b = fixture::volume(g, [&](int x, int y, int t) { return Label(object(x, y, t) ? 0 : 1 + (y < 4)); });
    const auto c = fixture::volume(g, [](int, int y, int) { return Label(y < 4 ? 0 : 1); });
    const SegmentationPool pool({{a, OutputKind::video, "a"}, {b, OutputKind::video, "b"}, {c, OutputKind::video, "c"}});
    const auto cues = fixture::cues(g, [&](int x, int y, int t, int s) {
        return s < 3 ? float((object(x, y, t) ? 0.8 : 0.2) + 0.01 * s) : 0.0f;
    });
    const auto sp = compute_min_overlap_superpixels(pool);
    REQUIRE(sp.count() <= 16);
    const ReducedGraph graph = build_reduced_graph(sp, pool, cues, {{0.6, 0.4, 0.3}, {1.0, 1.0, 1.0}});
    Eigen::MatrixXd W = oracle::reduced_matrix(graph);
    W.diagonal().setZero();
    for (int R : {2, 3}) {
        const auto res = segment_graph(graph, sp, std::size_t(R), 3);
        std::vector<int> labels(res.partition.node_labels.begin(), res.partition.node_labels.end());
        const double got = oracle::dense_ncut(W, labels, R);
        const auto best = oracle::brute_force_ncut(W, R);
        CHECK(got <= 1.05 * best.value + 1e-12);
    }
}

TEST_CASE("partition is invariant to weight scaling and output order") {
    const auto video = fixture::small_video(6);
    const auto sp = compute_min_overlap_superpixels(video.pool);
    const CombinationParams params{{0.5, 0.3, 0.8}, {0.6, 0.9, 1.4}};
    const ReducedGraph graph = build_reduced_graph(sp, video.pool, video.scene.cues, params);
    const auto base = segment_graph(graph, sp, 3, 11);
    for (double c : {0.5, 2.0}) CHECK(segment_graph(graph.scaled(c), sp, 3, 11).partition.node_labels == base.partition.node_labels);

    std::vector<PooledOutput> reversed(video.pool.outputs().rbegin(), video.pool.outputs().rend());
    const SegmentationPool pool2(std::move(reversed));
    const CombinationParams params2{{0.8, 0.3, 0.5}, params.beta};
    const auto other = segment(pool2, video.scene.cues, params2, 3, 11);
    CHECK(same_partition(other.partition.voxel_labels.labels(), base.partition.voxel_labels.labels()));
}

TEST_CASE("lifted labels are constant on superpixels and clusters are non-empty") {
    const auto video = fixture::small_video(8);
    const auto sp = compute_min_overlap_superpixels(video.pool);
    const auto res = segment(video.pool, video.scene.cues, CombinationParams::uniform(3), 4, 0);
    std::vector<int> seen(4, 0);
    for (std::size_t v = 0; v < sp.assignment.size(); ++v) {
        CHECK(res.partition.voxel_labels[v] == res.partition.node_labels[sp.assignment[v]]);
        seen[res.partition.voxel_labels[v]] = 1;
    }
    CHECK(seen == std::vector<int>{1, 1, 1, 1});
    CHECK(res.eigenvalues.size() == 4);
    CHECK(res.num_super == sp.count());
}

TEST_CASE("eigengap picks the component count") {
    const VoxelGrid g{9, 2, 1};
    const auto labels = fixture::volume(g, [](int x, int, int) { return Label(x / 3); });
    const SegmentationPool pool({{labels, OutputKind::video, "a"}});
    const auto cues = fixture::cues(g, [](int x, int, int, int s) { return s < 3 ? 0.5f * float(x / 3) : 0.0f; });
    const auto sp = compute_min_overlap_superpixels(pool);
    // Large beta on distinct colours leaves three nearly disconnected segments.
    const ReducedGraph graph = build_reduced_graph(sp, pool, cues, {{1.0}, {50.0, 1.0, 1.0}});
    CHECK(choose_cluster_count(graph, 5) == 3);
}

TEST_CASE("segmentation is deterministic for a fixed seed") {
    const auto video = fixture::small_video(10);
    const auto a = segment(video.pool, video.scene.cues, CombinationParams::uniform(3), 3, 42);
    const auto b = segment(video.pool, video.scene.cues, CombinationParams::uniform(3), 3, 42);
    CHECK(std::equal(a.partition.voxel_labels.labels().begin(), a.partition.voxel_labels.labels().end(),
                     b.partition.voxel_labels.labels().begin()));
}

}
