#pragma once

#include "vseg/core.hpp"
#include "vseg/synth.hpp"

#include <functional>
#include <vector>

namespace fixture {

inline vseg::LabelVolume volume(vseg::VoxelGrid g, const std::function<vseg::Label(int, int, int)>& f) {
    std::vector<vseg::Label> l(g.voxels());
    for (int t = 0; t < g.frames; ++t)
        for (int y = 0; y < g.height; ++y)
            for (int x = 0; x < g.width; ++x) l[g.index(x, y, t)] = f(x, y, t);
    return vseg::LabelVolume(g, std::move(l));
}

/// Per-frame ids made globally unique so the volume is valid as an image-level output.
inline vseg::LabelVolume frame_local(const vseg::LabelVolume& v) {
    const auto& g = v.grid();
    std::vector<vseg::Label> l(v.labels().begin(), v.labels().end());
    const vseg::Label stride = vseg::Label(v.label_bound());
    for (std::size_t i = 0; i < l.size(); ++i) l[i] += stride * vseg::Label(g.frame_of(i));
    return vseg::LabelVolume(g, std::move(l));
}

/// Cue channels filled from a per-voxel function of (x, y, t, slot) with slots 0..5.
inline vseg::CueVolumes cues(vseg::VoxelGrid g, const std::function<float(int, int, int, int)>& f) {
    vseg::CueVolumes c(g);
    const std::array<std::pair<vseg::Cue, int>, 6> slots = {std::pair{vseg::Cue::color, 0}, {vseg::Cue::color, 1},
                                                            {vseg::Cue::color, 2}, {vseg::Cue::flow, 0},
                                                            {vseg::Cue::flow, 1}, {vseg::Cue::depth, 0}};
    for (int s = 0; s < 6; ++s) {
        auto ch = c.channel(slots[std::size_t(s)].first, slots[std::size_t(s)].second);
        for (int t = 0; t < g.frames; ++t)
            for (int y = 0; y < g.height; ++y)
                for (int x = 0; x < g.width; ++x) ch[g.index(x, y, t)] = f(x, y, t, s);
    }
    return c;
}

inline vseg::CueVolumes constant_cues(vseg::VoxelGrid g, float v = 0.5f) {
    return cues(g, [v](int, int, int, int) { return v; });
}

/// Small synthetic video: the bundled two-object preset at the given grid and seed.
inline vseg::SyntheticVideo small_video(std::uint64_t seed, vseg::VoxelGrid grid = {16, 16, 4}) {
    const auto spec = vseg::preset_scene("two-moving-rects", seed, grid);
    const auto outputs = vseg::preset_pool("two-moving-rects", seed);
    std::vector<int> frames;
    for (int t = 0; t < grid.frames; ++t) frames.push_back(t);
    return vseg::make_video("fixture" + std::to_string(seed), 0, spec, outputs, frames);
}

} // namespace fixture
