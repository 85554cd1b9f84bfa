#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vseg {

/// Error categories; the CLI maps each one to a distinct exit code.
enum class ErrorCode {
    invalid_argument = 2,
    missing_file = 3,
    dim_mismatch = 4,
    malformed_header = 5,
    version_mismatch = 6,
    numerical = 7,
    degenerate = 8,
    pipeline = 9,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

using Label = std::uint32_t;

/// Lower and upper bound of every combination parameter.
inline constexpr double kParamFloor = 1e-4;
inline constexpr double kParamCeil = 1e3;

/// Number of feature cues: Lab colour, optical flow, depth.
inline constexpr int kNumCues = 3;
enum class Cue : int { color = 0, flow = 1, depth = 2 };
inline constexpr std::array<int, kNumCues> kCueChannels = {3, 2, 1};
inline constexpr std::array<const char*, kNumCues> kCueNames = {"color", "flow", "depth"};

struct VoxelGrid {
    int width = 0;
    int height = 0;
    int frames = 0;

    std::size_t frame_size() const { return std::size_t(width) * std::size_t(height); }
    std::size_t voxels() const { return frame_size() * std::size_t(frames); }
    std::size_t index(int x, int y, int t) const {
        return (std::size_t(t) * std::size_t(height) + std::size_t(y)) * std::size_t(width) + std::size_t(x);
    }
    int frame_of(std::size_t voxel) const { return int(voxel / frame_size()); }
    bool valid() const { return width >= 1 && height >= 1 && frames >= 1; }
    bool operator==(const VoxelGrid&) const = default;

    /// Throws unless all dimensions are at least one.
    void validate() const;
};

std::string to_string(const VoxelGrid& grid);

class LabelVolume {
public:
    LabelVolume() = default;
    LabelVolume(VoxelGrid grid, std::vector<Label> labels);

    const VoxelGrid& grid() const { return grid_; }
    std::span<const Label> labels() const { return labels_; }
    Label operator[](std::size_t voxel) const { return labels_[voxel]; }
    Label at(int x, int y, int t) const { return labels_[grid_.index(x, y, t)]; }
    std::span<const Label> frame(int t) const {
        return std::span<const Label>(labels_).subspan(std::size_t(t) * grid_.frame_size(), grid_.frame_size());
    }
    /// Largest label plus one (0 for an empty volume).
    std::size_t label_bound() const;

private:
    VoxelGrid grid_;
    std::vector<Label> labels_;
};

/// Recodes labels to 0..L-1 in order of first appearance (scan order).
LabelVolume normalize_labels(const LabelVolume& volume);
std::vector<Label> normalize_labels(std::span<const Label> labels);

/// Per-voxel colour (Lab, 3ch), flow (px/frame, 2ch) and depth (1ch) channels,
/// stored planar: channel(c, ch)[voxel].
class CueVolumes {
public:
    CueVolumes() = default;
    explicit CueVolumes(VoxelGrid grid);

    const VoxelGrid& grid() const { return grid_; }
    std::span<const float> channel(Cue cue, int ch) const { return channels_[slot(cue, ch)]; }
    std::span<float> channel(Cue cue, int ch) { return channels_[slot(cue, ch)]; }
    float value(Cue cue, int ch, std::size_t voxel) const { return channels_[slot(cue, ch)][voxel]; }

    /// Throws on non-finite entries or channel size mismatch.
    void validate() const;

    /// Returns the sub-volume covering frames [first, last].
    CueVolumes frames(int first, int last) const;

private:
    static std::size_t slot(Cue cue, int ch);

    VoxelGrid grid_;
    std::array<std::vector<float>, 6> channels_;
};

enum class OutputKind { image, video };
const char* to_string(OutputKind kind);
OutputKind output_kind_from_string(const std::string& text);

struct PooledOutput {
    LabelVolume labels;
    OutputKind kind = OutputKind::video;
    std::string name;
};

class SegmentationPool {
public:
    SegmentationPool() = default;
    /// Validates: K >= 1, one shared grid, image-level outputs never span frames.
    explicit SegmentationPool(std::vector<PooledOutput> outputs);

    std::size_t size() const { return outputs_.size(); }
    const PooledOutput& operator[](std::size_t k) const { return outputs_[k]; }
    const std::vector<PooledOutput>& outputs() const { return outputs_; }
    const VoxelGrid& grid() const { return outputs_.front().labels.grid(); }

    SegmentationPool frames(int first, int last) const;

private:
    std::vector<PooledOutput> outputs_;
};

/// True iff no label of `volume` occurs in two different frames.
bool is_frame_local(const LabelVolume& volume);

/// (alpha^1..alpha^K, beta^1..beta^C) ensemble combination weights.
struct CombinationParams {
    std::vector<double> alpha;
    std::vector<double> beta;

    std::size_t size() const { return alpha.size() + beta.size(); }
    /// Flat view theta = [alpha, beta].
    std::vector<double> flat() const;
    static CombinationParams from_flat(std::span<const double> theta, std::size_t num_alpha);
    double operator[](std::size_t i) const { return i < alpha.size() ? alpha[i] : beta[i - alpha.size()]; }

    void validate() const;
    CombinationParams clamped(double lo = kParamFloor, double hi = kParamCeil) const;
    static CombinationParams uniform(std::size_t num_alpha, std::size_t num_beta = kNumCues);
    bool operator==(const CombinationParams&) const = default;
};

std::string to_string(const CombinationParams& params);

struct GroundTruth {
    VoxelGrid grid;
    std::vector<int> annotated_frames;
    /// One width*height label map per annotated frame.
    std::vector<std::vector<Label>> labels;
    /// Optional per-voxel link to an annotated voxel (index into the grid), -1 when none.
    std::vector<std::int64_t> links;

    void validate() const;
    bool is_annotated(int frame) const;
    /// Position of `frame` in annotated_frames, or -1.
    int annotated_slot(int frame) const;
    std::size_t annotated_voxels() const { return annotated_frames.size() * grid.frame_size(); }

    static GroundTruth dense(const LabelVolume& volume);
    /// Keeps only the given frames of a dense annotation.
    GroundTruth sparse(std::span<const int> frames) const;
    /// Restricts to frames [first, last], re-basing frame indices and links.
    GroundTruth frames(int first, int last) const;
    /// Number of distinct labels over all annotated frames.
    std::size_t num_labels() const;
};

} // namespace vseg
