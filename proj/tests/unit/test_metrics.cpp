#include "fixtures.hpp"

#include "vseg/metrics.hpp"

#include <doctest.h>

#include <random>

using namespace vseg;

namespace {

std::size_t marked(const std::vector<bool>& m) { return std::size_t(std::count(m.begin(), m.end(), true)); }

} // namespace

TEST_SUITE("metrics") {

TEST_CASE("boundary maps") {
    CHECK(marked(boundary_map(std::vector<Label>(16, 3), 4, 4)) == 0);
    std::vector<Label> halves(16), checker(16);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            halves[std::size_t(y * 4 + x)] = Label(x / 2);
            checker[std::size_t(y * 4 + x)] = Label((x / 2 + y / 2) % 2);
        }
    const auto h = boundary_map(halves, 4, 4);
    CHECK(marked(h) == 8);
    for (int y = 0; y < 4; ++y) CHECK((h[std::size_t(y * 4 + 1)] && h[std::size_t(y * 4 + 2)]));
    // Only the four outer corners touch no other cell.
    CHECK(marked(boundary_map(checker, 4, 4)) == 12);
}

TEST_CASE("boundary precision-recall") {
    const VoxelGrid g{8, 8, 2};
    const auto gt_vol = fixture::volume(g, [](int x, int, int) { return Label(x < 4); });
    const auto gt = GroundTruth::dense(gt_vol);
    const auto same = bpr(gt_vol, gt);
    CHECK(same.precision == 1.0);
    CHECK(same.recall == 1.0);
    CHECK(same.f == 1.0);

    const auto flat = bpr(fixture::volume(g, [](int, int, int) { return Label(0); }), gt);
    CHECK(flat.precision == 1.0);
    CHECK(flat.recall == 0.0);
    CHECK(flat.f == 0.0);

    // Split moved one column right: the two-sided boundaries share one column.
    const auto shifted = fixture::volume(g, [](int x, int, int) { return Label(x < 5); });
    const double diag = std::sqrt(128.0);
    CHECK(bpr(shifted, gt, {1.0 / diag, true}).f == doctest::Approx(1.0));
    CHECK(bpr(shifted, gt, {1e-9, true}).f == doctest::Approx(0.5));
    CHECK(bpr(shifted, gt, {1.0 / diag, false}).f <= bpr(shifted, gt, {1.0 / diag, true}).f);

    std::vector<FrameBoundaryCounts> per_frame;
    bpr(shifted, gt, {}, &per_frame);
    REQUIRE(per_frame.size() == 2);
    CHECK(per_frame[1].frame == 1);
    CHECK(per_frame[0].ground_truth == 16);
}

TEST_CASE("boundary matching is one-to-one") {
    // Three predicted pixels around one ground-truth pixel.
    std::vector<bool> pred(9, false), gt(9, false);
    pred[3] = pred[4] = pred[5] = true;
    gt[4] = true;
    CHECK(match_boundaries(pred, gt, 3, 3, 1.5, false) == 1);
    CHECK(match_boundaries(pred, gt, 3, 3, 1.5, true) == 1);
    std::vector<bool> gt2(9, false);
    gt2[0] = gt2[4] = true;
    std::vector<bool> pred2(9, false);
    pred2[1] = pred2[4] = true;
    // Greedy takes the zero-distance pair first; both are matched either way.
    CHECK(match_boundaries(pred2, gt2, 3, 3, 1.0, false) == 2);
    CHECK(match_boundaries(pred2, gt2, 3, 3, 1.0, true) == 2);
}

TEST_CASE("volume precision-recall") {
    const VoxelGrid g{4, 2, 3};
    const auto gt_vol = fixture::volume(g, [](int x, int, int) { return Label(x / 2); });
    const auto gt = GroundTruth::dense(gt_vol).sparse(std::vector<int>{0, 2});
    const auto same = vpr(gt_vol, gt);
    CHECK(same.f == 1.0);

    // One segment covering two equal objects: half of it overlaps its best object.
    const auto one = vpr(fixture::volume(g, [](int, int, int) { return Label(0); }), gt);
    CHECK(one.precision == doctest::Approx(0.5));
    CHECK(one.recall == doctest::Approx(1.0));
    CHECK(one.f == doctest::Approx(2.0 / 3.0));

    const auto single = vpr(fixture::volume(g, [g](int x, int y, int t) { return Label(g.index(x, y, t)); }), gt);
    CHECK(single.precision == doctest::Approx(1.0));
    CHECK(single.recall == doctest::Approx(2.0 / 16.0));

    // A temporal split of one object lowers recall.
    const auto split = vpr(fixture::volume(g, [](int x, int, int t) { return Label(x / 2 + (x < 2 && t > 1 ? 2 : 0)); }), gt);
    CHECK(split.precision == doctest::Approx(1.0));
    CHECK(split.recall < 1.0);
}

TEST_CASE("fusion arithmetic on published operating points") {
    const auto hm = [](double a, double b) { return 2 * a * b / (a + b); };
    const auto moseg = fuse(0.247, 0.285);
    CHECK(moseg.am == doctest::Approx(0.266).epsilon(1e-12));
    CHECK(moseg.hm == doctest::Approx(hm(0.247, 0.285)).epsilon(1e-12));
    CHECK(moseg.hm == doctest::Approx(0.2646428571).epsilon(1e-9));
    const auto gbh = fuse(0.187, 0.208);
    CHECK(gbh.am == doctest::Approx(0.1975).epsilon(1e-12));
    CHECK(gbh.hm == doctest::Approx(0.1969417722).epsilon(1e-9));
    const auto sas = fuse(0.184, 0.087);
    CHECK(sas.am == doctest::Approx(0.1355).epsilon(1e-12));
    CHECK(sas.hm == doctest::Approx(0.1181402214).epsilon(1e-9));
    CHECK(fuse(0.0, 0.0).hm == 0.0);
    CHECK(f_measure(0.0, 0.0) == 0.0);
    CHECK(f_measure(1.0, 0.5) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("harmonic mean never exceeds the arithmetic mean") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const double a = u(rng), b = u(rng);
        const auto f = fuse(a, b);
        CHECK(f.hm <= f.am + 1e-15);
    }
    CHECK(fuse(0.3, 0.3).hm == doctest::Approx(fuse(0.3, 0.3).am));
}

TEST_CASE("perfect prediction and label permutations") {
    const auto video = fixture::small_video(12);
    const auto& labels = video.scene.labels;
    const auto gt = video.truth;
    const auto r = evaluate(labels, gt);
    CHECK(r.bpr.f == 1.0);
    CHECK(r.vpr.f == 1.0);
    CHECK(r.am_bvpr == 1.0);
    CHECK(r.hm_bvpr == 1.0);

    const auto pred = video.pool[1].labels;
    const auto base = evaluate(pred, gt);
    std::vector<Label> permuted(pred.labels().begin(), pred.labels().end());
    for (auto& l : permuted) l = l * 7 + 3;
    const auto p = evaluate(LabelVolume(pred.grid(), permuted), gt);
    CHECK(p.bpr.f == base.bpr.f);
    CHECK(p.vpr.f == base.vpr.f);
    GroundTruth gt2 = gt;
    for (auto& frame : gt2.labels)
        for (auto& l : frame) l = 100 - l;
    const auto q = evaluate(pred, gt2);
    CHECK(q.bpr.f == base.bpr.f);
    CHECK(q.vpr.f == base.vpr.f);
    CHECK(base.am_bvpr == doctest::Approx((base.bpr.f + base.vpr.f) / 2));
    CHECK(base.score(MetricKind::hm) == base.hm_bvpr);
    CHECK(base.score(MetricKind::bpr) == base.bpr.f);
}

TEST_CASE("boundary noise does not raise boundary F") {
    const VoxelGrid g{24, 24, 1};
    const auto gt_vol = fixture::volume(g, [](int x, int y, int) { return Label((x > 8 && x < 18 && y > 6 && y < 16) ? 1 : 0); });
    const auto gt = GroundTruth::dense(gt_vol);
    const auto pred = fixture::volume(g, [](int x, int y, int) { return Label((x > 9 && x < 18 && y > 6 && y < 17) ? 1 : 0); });
    const double clean = bpr(pred, gt).f;
    int lower = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        std::mt19937_64 rng(seed);
        std::vector<Label> noisy(pred.labels().begin(), pred.labels().end());
        std::uniform_int_distribution<std::size_t> pick(0, noisy.size() - 1);
        for (int i = 0; i < 20; ++i) noisy[pick(rng)] = 2;
        if (bpr(LabelVolume(g, noisy), gt).f < clean) ++lower;
    }
    CHECK(lower >= 32);  // one-sided sign test at p < 0.05
}

TEST_CASE("metric input validation") {
    const VoxelGrid g{4, 4, 2};
    const auto v = fixture::volume(g, [](int x, int, int) { return Label(x / 2); });
    GroundTruth empty = GroundTruth::dense(v).sparse(std::vector<int>{});
    CHECK_THROWS_AS(evaluate(v, empty), Error);
    const auto other = fixture::volume({4, 4, 3}, [](int, int, int) { return Label(0); });
    CHECK_THROWS_AS(evaluate(other, GroundTruth::dense(v)), Error);
    CHECK(metric_kind_from_string("am") == MetricKind::am);
    CHECK_THROWS_AS(metric_kind_from_string("f1"), Error);
}

TEST_CASE("averaging reports") {
    MetricReport a, b;
    a.bpr = {1.0, 0.5, 2.0 / 3.0};
    b.bpr = {0.0, 0.5, 0.0};
    a.hm_bvpr = 0.4;
    b.hm_bvpr = 0.2;
    const std::vector<MetricReport> rs{a, b};
    const auto m = average(rs);
    CHECK(m.bpr.precision == doctest::Approx(0.5));
    CHECK(m.hm_bvpr == doctest::Approx(0.3));
}

}
