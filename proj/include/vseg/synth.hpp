#pragma once

#include "vseg/core.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace vseg {

enum class Shape { rectangle, ellipse };
const char* to_string(Shape shape);
Shape shape_from_string(const std::string& text);

struct ObjectSpec {
    Shape shape = Shape::rectangle;
    double x = 0.0, y = 0.0;                  ///< centre at frame 0
    double half_width = 2.0, half_height = 2.0;
    double vx = 0.0, vy = 0.0;                ///< px per frame
    std::array<double, 3> color{0.5, 0.5, 0.5};
    /// Right half colour; equal to `color` for a single-tone object.
    std::array<double, 3> color2{0.5, 0.5, 0.5};
    double depth = 0.5;                       ///< disparity, larger is nearer
    double depth_slope = 0.0;                 ///< disparity change per pixel along x
    double noise = 0.0;                       ///< colour texture sigma
};

struct BackgroundSpec {
    std::array<double, 3> color{0.2, 0.2, 0.2};
    double depth = 0.1;
    double depth_slope = 0.0;
    double noise = 0.0;
};

/// Colour channels are Lab rescaled to [0, 1]; depth is disparity in [0, 1].
struct SceneSpec {
    VoxelGrid grid;
    std::vector<ObjectSpec> objects;
    BackgroundSpec background;
    std::uint64_t seed = 0;

    /// Throws unless every object stays inside the grid on every frame.
    void validate() const;
};

struct Scene {
    CueVolumes cues;
    LabelVolume labels;  ///< 0 background, i + 1 for object i

    GroundTruth dense_truth() const { return GroundTruth::dense(labels); }
};

/// Objects are painted far to near, so the nearer one owns overlapping pixels.
Scene generate_scene(const SceneSpec& spec);

enum class CorruptionMode { oversplit, merge, boundary_jitter, drop_object, temporal_break };
const char* to_string(CorruptionMode mode);
CorruptionMode corruption_mode_from_string(const std::string& text);

struct CorruptionSpec {
    CorruptionMode mode = CorruptionMode::oversplit;
    int amount = 2;                                 ///< pieces for oversplit, pixels for jitter
    std::vector<std::pair<Label, Label>> pairs;     ///< merge: second id joins the first
    int target = -1;                                ///< object id for drop/break; -1 = every object
    int frame = 0;                                  ///< first relabelled frame of a temporal break
    std::uint64_t seed = 0;
};

struct OutputSpec {
    std::string name;
    OutputKind kind = OutputKind::video;
    std::vector<CorruptionSpec> corruptions;  ///< applied in order
};

/// Applies one corruption to a label volume whose ids follow the scene convention.
LabelVolume apply_corruption(const LabelVolume& labels, const CorruptionSpec& spec);

/// One pooled output per spec. Image-level outputs get per-frame ids.
SegmentationPool simulate_pool(const LabelVolume& truth, std::span<const OutputSpec> specs);

/// Built-in scene by name ("two-moving-rects").
SceneSpec preset_scene(const std::string& name, std::uint64_t seed, VoxelGrid grid = {32, 32, 6});
std::vector<std::string> preset_names();
/// Pool recipe bundled with a preset; the seed drives its boundary jitter.
std::vector<OutputSpec> preset_pool(const std::string& name, std::uint64_t seed);

/// A synthetic video with its pool and sparse annotation.
struct SyntheticVideo {
    std::string id;
    int population = 0;
    SceneSpec spec;
    Scene scene;
    SegmentationPool pool;
    GroundTruth truth;  ///< annotated frames only
};

struct CorpusOptions {
    std::size_t videos = 24;
    VoxelGrid grid{20, 28, 5};
    std::vector<int> annotated_frames{0, 2, 4};
    std::uint64_t seed = 1;
};

/// Two populations in alternation. Population 0: moving objects whose colour
/// separates them from the background while their disparity is ramped.
/// Population 1: static two-tone objects separated only by flat disparity.
/// The pooled outputs that are reliable differ between the populations.
std::vector<SyntheticVideo> two_population_corpus(const CorpusOptions& options);

/// Pool recipe used by the corpus for a given population.
std::vector<OutputSpec> population_pool(int population, std::uint64_t seed);

SyntheticVideo make_video(const std::string& id, int population, const SceneSpec& spec,
                          std::span<const OutputSpec> outputs, std::span<const int> annotated_frames);

} // namespace vseg
