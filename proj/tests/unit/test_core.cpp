#include "fixtures.hpp"

#include <doctest.h>

#include <limits>

using namespace vseg;

TEST_SUITE("core") {

TEST_CASE("normalize_labels recodes in order of first appearance") {
    const VoxelGrid g{3, 1, 1};
    CHECK(normalize_labels(std::vector<Label>{5, 5, 9}) == std::vector<Label>{0, 0, 1});
    CHECK(normalize_labels(std::vector<Label>{0, 1, 2}) == std::vector<Label>{0, 1, 2});
    CHECK(normalize_labels(std::vector<Label>{7}) == std::vector<Label>{0});
    const LabelVolume v(g, {9, 4, 9});
    const auto once = normalize_labels(v);
    const auto twice = normalize_labels(once);
    CHECK(std::vector<Label>(once.labels().begin(), once.labels().end()) == std::vector<Label>{0, 1, 0});
    CHECK(std::equal(once.labels().begin(), once.labels().end(), twice.labels().begin()));
}

TEST_CASE("normalize_labels preserves the partition") {
    const VoxelGrid g{5, 4, 3};
    const auto v = fixture::volume(g, [](int x, int y, int t) { return Label((x * 7 + y * 3 + t) % 5 * 100 + 11); });
    const auto n = normalize_labels(v);
    for (std::size_t i = 0; i < g.voxels(); ++i)
        for (std::size_t j = 0; j < g.voxels(); ++j) CHECK_EQ(v[i] == v[j], n[i] == n[j]);
}

TEST_CASE("voxel grid validation and indexing") {
    CHECK_THROWS_AS(VoxelGrid({0, 2, 2}).validate(), Error);
    const VoxelGrid g{4, 3, 2};
    CHECK(g.voxels() == 24);
    CHECK(g.index(3, 2, 1) == 23);
    CHECK(g.frame_of(12) == 1);
    CHECK_THROWS_AS(LabelVolume(g, std::vector<Label>(5)), Error);
}

TEST_CASE("pool rejects image-level outputs that span frames") {
    const VoxelGrid g{2, 2, 2};
    const auto same = fixture::volume(g, [](int, int, int) { return Label(0); });
    CHECK_THROWS_AS(SegmentationPool({{same, OutputKind::image, "bad"}}), Error);
    CHECK_NOTHROW(SegmentationPool({{same, OutputKind::video, "ok"}}));
    CHECK_NOTHROW(SegmentationPool({{fixture::frame_local(same), OutputKind::image, "ok"}}));
    const auto other = fixture::volume({3, 2, 2}, [](int, int, int) { return Label(0); });
    CHECK_THROWS_AS(SegmentationPool({{same, OutputKind::video, "a"}, {other, OutputKind::video, "b"}}), Error);
    CHECK_THROWS_AS(SegmentationPool(std::vector<PooledOutput>{}), Error);
}

TEST_CASE("combination parameters respect the floor") {
    auto p = CombinationParams::uniform(4);
    CHECK(p.alpha == std::vector<double>(4, 0.25));
    CHECK(p.beta.size() == 3);
    CHECK_NOTHROW(p.validate());
    p.alpha[1] = 0.0;
    CHECK_THROWS_AS(p.validate(), Error);
    const auto c = p.clamped();
    CHECK(c.alpha[1] == kParamFloor);
    const std::vector<double> flat{1, 2, 3, 4, 5};
    const auto q = CombinationParams::from_flat(flat, 2);
    CHECK(q.alpha == std::vector<double>{1, 2});
    CHECK(q.beta == std::vector<double>{3, 4, 5});
    CHECK(q.flat() == flat);
    CHECK(q[3] == 4.0);
}

TEST_CASE("ground truth validation and subsetting") {
    const VoxelGrid g{2, 2, 4};
    const auto dense = GroundTruth::dense(fixture::volume(g, [](int x, int, int t) { return Label(x + t); }));
    CHECK_NOTHROW(dense.validate());
    const std::vector<int> frames{1, 3};
    const auto sparse = dense.sparse(frames);
    CHECK(sparse.annotated_frames == frames);
    CHECK(sparse.is_annotated(3));
    CHECK_FALSE(sparse.is_annotated(2));
    CHECK(sparse.annotated_slot(3) == 1);
    CHECK(sparse.num_labels() == 4);
    auto bad = sparse;
    bad.annotated_frames = {3, 1};
    CHECK_THROWS_AS(bad.validate(), Error);
    bad.annotated_frames = {1, 4};
    CHECK_THROWS_AS(bad.validate(), Error);
    const auto sub = dense.frames(1, 2);
    CHECK(sub.grid.frames == 2);
    CHECK(sub.annotated_frames == std::vector<int>{0, 1});
}

TEST_CASE("cue volumes reject non-finite values") {
    auto c = fixture::constant_cues({2, 2, 1});
    CHECK_NOTHROW(c.validate());
    c.channel(Cue::flow, 1)[2] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(c.validate(), Error);
}

}
