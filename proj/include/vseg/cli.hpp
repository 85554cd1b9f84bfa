#pragma once

#include "vseg/io.hpp"
#include "vseg/learn.hpp"
#include "vseg/synth.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vseg {

inline constexpr int kModelVersion = 1;
inline constexpr int kReportSchemaVersion = 1;

/// Everything needed to predict parameters for an unseen video.
struct ModelFile {
    int version = kModelVersion;
    MetricKind metric = MetricKind::hm;
    Ablation ablation;
    std::vector<std::string> output_names;
    CorpusContext context;
    RegressorModel regressor;
    ProxyModel proxy;
    /// Training settings, stored for provenance only.
    EmConfig config;
    std::size_t folds = 0;
    std::size_t items = 0;
    int best_iteration = 0;
    double best_score = 0.0;

    std::string to_text() const;
    static ModelFile from_text(const std::string& text, const std::string& origin = "model");
    void save(const std::filesystem::path& path) const;
    /// Throws version_mismatch on any other format version.
    static ModelFile load(const std::filesystem::path& path);
};

/// Predicted parameters for a whole video.
CombinationParams predict_for(const ModelFile& model, const CueVolumes& cues);

/// Parses "a1,...,aK,b1,b2,b3".
CombinationParams parse_params(const std::string& text, std::size_t num_alpha);

/// Scene, pool recipe and annotation read from a JSON document.
struct SynthConfig {
    std::string video = "video0";
    SceneSpec scene;
    std::vector<OutputSpec> outputs;
    std::vector<int> annotated_frames;
};

SynthConfig synth_config_from_text(const std::string& text);
SynthConfig preset_config(const std::string& name, std::uint64_t seed);
/// Every other frame plus the last one.
std::vector<int> default_annotated_frames(int frames);

/// Root for default outputs: VSEG_SCRATCH or the system temp dir.
std::filesystem::path scratch_dir();

struct SynthArgs {
    std::optional<std::string> preset;
    std::optional<std::filesystem::path> config;
    std::uint64_t seed = 1;
    std::size_t corpus = 0;  ///< > 0 writes a two-population corpus of that many videos
    std::filesystem::path out;
};

struct SegmentArgs {
    std::filesystem::path manifest;
    std::optional<std::filesystem::path> model;
    std::optional<std::string> params;
    bool oracle = false;
    MetricKind metric = MetricKind::hm;  ///< oracle objective
    std::size_t clusters = 0;            ///< 0: eigengap (or the annotation count for the oracle)
    std::uint64_t seed = 0;
    std::filesystem::path out;
};

struct EvalArgs {
    std::filesystem::path pred;
    std::optional<std::filesystem::path> manifest;
    std::optional<std::filesystem::path> corpus;  ///< predictions then live in pred/<video>/
    double tolerance = 0.0075;
    bool exact_matching = false;
    std::optional<std::filesystem::path> out;
};

struct TrainArgs {
    std::filesystem::path corpus;
    MetricKind metric = MetricKind::hm;
    std::size_t folds = 0;  ///< >= 2 also runs cross-validation
    std::uint64_t seed = 0;
    std::filesystem::path out;
    std::optional<std::filesystem::path> log;  ///< default: <out without extension>.log.json
    Ablation ablation;
    std::optional<double> ridge;
    std::optional<int> max_iterations;
};

/// Each command writes its files and returns 0; failures throw Error.
int cmd_synth(const SynthArgs& args);
int cmd_segment(const SegmentArgs& args);
/// Returns the report text (also written to args.out when set).
std::string cmd_eval(const EvalArgs& args);
int cmd_train(const TrainArgs& args);

} // namespace vseg
