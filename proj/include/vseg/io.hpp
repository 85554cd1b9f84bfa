#pragma once

#include "vseg/core.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace vseg {

/// One frame of a 16-bit binary graymap (P5, maxval 65535, big-endian samples).
struct Graymap {
    int width = 0;
    int height = 0;
    std::vector<Label> values;
};

/// Accepts any maxval in [1, 65535]; one byte per sample below 256, two above.
Graymap read_pgm(const std::filesystem::path& path);
/// Throws invalid_argument when a value does not fit in 16 bits.
void write_pgm(const std::filesystem::path& path, int width, int height, std::span<const Label> values);

/// One channel of a portable floatmap ("Pf"). Rows are returned top to bottom.
struct Floatmap {
    int width = 0;
    int height = 0;
    std::vector<float> values;
};

/// Honours the sign of the scale field for byte order.
Floatmap read_pfm(const std::filesystem::path& path);
/// Writes scale -1.0 (little-endian), rows bottom to top as the format requires.
void write_pfm(const std::filesystem::path& path, int width, int height, std::span<const float> values);

inline constexpr int kManifestVersion = 1;

/// Paths are relative to the manifest's directory.
struct OutputEntry {
    std::string name;
    OutputKind kind = OutputKind::video;
    std::vector<std::string> frames;
};

struct WorkspaceManifest {
    int version = kManifestVersion;
    std::string video;
    VoxelGrid grid;
    std::vector<OutputEntry> outputs;
    /// cue_files[c][ch][t] for cue c, channel ch, frame t.
    std::vector<std::vector<std::vector<std::string>>> cue_files;
    std::vector<int> annotated_frames;
    std::vector<std::string> truth_files;  ///< one per annotated frame

    static WorkspaceManifest load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

struct Workspace {
    std::filesystem::path root;  ///< directory holding the manifest
    WorkspaceManifest manifest;
    SegmentationPool pool;
    CueVolumes cues;
    GroundTruth truth;
};

/// Labels of video-level outputs are normalised per volume; image-level
/// outputs are normalised frame by frame and offset so no id spans frames.
Workspace load_workspace(const std::filesystem::path& manifest_path);

/// Writes every frame file plus manifest.json under `dir`; returns the manifest path.
std::filesystem::path save_workspace(const std::filesystem::path& dir, const std::string& video,
                                     const SegmentationPool& pool, const CueVolumes& cues, const GroundTruth& truth);

/// Per-frame label maps named frame_NNN.pgm under `dir`.
void write_label_frames(const std::filesystem::path& dir, const LabelVolume& labels);
/// Reads frame_NNN.pgm for every frame of `grid`; missing frames are listed in the error.
LabelVolume read_label_frames(const std::filesystem::path& dir, const VoxelGrid& grid);

/// A corpus file is a JSON object {"manifests": [paths relative to the corpus file]}.
std::vector<std::filesystem::path> load_corpus_list(const std::filesystem::path& path);
void save_corpus_list(const std::filesystem::path& path, std::span<const std::filesystem::path> manifests);

} // namespace vseg
