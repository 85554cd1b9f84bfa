#pragma once

#include "vseg/graph.hpp"
#include "vseg/metrics.hpp"
#include "vseg/proxy.hpp"
#include "vseg/spectral.hpp"

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace vseg {

inline constexpr std::size_t kHistogramBins = 8;
/// Per cue: 8 histogram bins, mean, median, variance, entropy.
inline constexpr std::size_t kCueFeatureSize = kHistogramBins + 4;
inline constexpr std::size_t kFeatureSize = kNumCues * kCueFeatureSize + 1;

struct FeatureOptions {
    /// Upper end of the flow-magnitude histogram (the corpus 99th percentile).
    double flow_max = 1.0;
    /// When false the depth block is all zeros.
    bool use_depth = true;
};

/// Colour values of all three channels are pooled; flow uses the per-voxel
/// magnitude. The last entry is a constant 1.
Eigen::VectorXd extract_features(const CueVolumes& cues, const FeatureOptions& options = {});

/// 99th percentile of per-voxel flow magnitude over a set of videos (1 if all flow is zero).
double flow_percentile(std::span<const CueVolumes* const> videos, double q = 0.99);

/// Per-entry standardisation learned on the training features, divided by sqrt(d - 1) so the
/// scaled vector has unit expected norm. The bias entry is left alone.
struct FeatureScaler {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;

    Eigen::VectorXd apply(const Eigen::VectorXd& f) const;
    static FeatureScaler fit(std::span<const Eigen::VectorXd> features);
};

/// theta_m = z^T B_m z with z the scaled features, one symmetric B_m per parameter.
struct RegressorModel {
    std::size_t num_alpha = 0;
    std::size_t num_beta = 0;
    FeatureScaler scaler;
    std::vector<Eigen::MatrixXd> B;
    double ridge = 1e-3;
    double rmse = 0.0;
    /// (flat index, value) pairs overriding the prediction, for ablations.
    std::vector<std::pair<std::size_t, double>> fixed;

    std::size_t feature_size() const { return std::size_t(scaler.mean.size()); }
};

CombinationParams predict_params(const RegressorModel& model, const Eigen::VectorXd& features);

/// Ridge least squares per parameter on the quadratic expansion of the scaled
/// features. Identical feature vectors give the mean-target model.
RegressorModel fit_regressor(std::span<const Eigen::VectorXd> features, std::span<const CombinationParams> targets,
                             double ridge = 1e-3);

/// A stretch of video between two consecutive annotated frames.
struct TrainingItem {
    std::string video;
    int first_frame = 0;
    int last_frame = 0;
    SegmentationPool pool;
    CueVolumes cues;
    GroundTruth truth;
};

/// One item per consecutive pair of annotated frames (neighbouring items share a frame).
std::vector<TrainingItem> split_subsequences(const std::string& video, const SegmentationPool& pool,
                                             const CueVolumes& cues, const GroundTruth& truth);

/// Per-item parts that do not depend on the parameters.
struct PreparedItem {
    TrainingItem item;
    MinOverlapSuperpixels superpixels;
    std::shared_ptr<const GraphStructure> structure;
    GtIndicator indicator;
    std::size_t clusters = 0;  ///< number of ground-truth labels
    Eigen::VectorXd features;
    std::uint64_t seed = 0;    ///< k-means seed for this item
};

struct EvaluationOptions {
    SegmentOptions segment;
    BoundaryOptions boundary;
};

/// Corpus-level constants shared by every item: cue scales and feature ranges.
struct CorpusContext {
    CueScales scales;
    FeatureOptions features;
};

CorpusContext corpus_context(std::span<const TrainingItem> items);

PreparedItem prepare_item(TrainingItem item, const CorpusContext& context, std::uint64_t seed);

MetricReport evaluate_params(const PreparedItem& item, const CombinationParams& params,
                             const EvaluationOptions& options = {});
SpectralRepresentation represent_params(const PreparedItem& item, const CombinationParams& params,
                                        const EigenOptions& options = {});

struct Ablation {
    bool no_depth = false;
    bool fixed_alpha = false;
    bool fixed_beta = false;

    bool any() const { return no_depth || fixed_alpha || fixed_beta; }
    std::string name() const;
};

struct EmConfig {
    MetricKind metric = MetricKind::hm;
    int max_iterations = 10;
    double tolerance = 1e-3;
    std::size_t neighborhood = 32;
    double sigma = 0.25;
    std::size_t proxy_window = 64;
    double proxy_ridge = 1e-4;
    double regressor_ridge = 0.1;
    AscentOptions ascent;
    EvaluationOptions evaluation;
    std::uint64_t seed = 0;
    /// Values forced on the frozen parameters; uniform 1/K, 1/C otherwise.
    std::optional<CombinationParams> pinned;
    std::vector<std::size_t> frozen;
};

struct IterationLog {
    int iteration = 0;
    MetricReport latent;     ///< mean over items at the latent parameters
    MetricReport predicted;  ///< mean over items at the regressor's predictions
    double training_score = 0.0;
    std::size_t accepted = 0;
    std::size_t failures = 0;
};

struct EmResult {
    RegressorModel model;
    ProxyModel proxy;
    std::vector<CombinationParams> latent;
    std::vector<IterationLog> log;
    int best_iteration = 0;
    double best_score = 0.0;
    std::vector<std::string> warnings;
};

EmResult em_train(std::span<const PreparedItem> items, const EmConfig& config);

struct SearchConfig {
    std::vector<double> grid{1e-3, 1e-2, 0.05, 0.2, 0.5, 1.0, 2.0, 5.0, 20.0, 100.0};
    int passes = 2;
    std::vector<CombinationParams> starts;  ///< extra candidate starting points
    std::vector<std::size_t> frozen;
};

struct SearchResult {
    CombinationParams params;
    double score = 0.0;
    std::size_t evaluations = 0;
};

/// Coordinate-wise grid search for one item; only strict improvements move,
/// so ties keep the earliest candidate.
SearchResult oracle_params(const PreparedItem& item, MetricKind metric, const SearchConfig& config = {},
                           const EvaluationOptions& options = {});

/// The same search maximising the mean score over a set of items.
SearchResult fixed_params_search(std::span<const PreparedItem> items, MetricKind metric,
                                 const SearchConfig& config = {}, const EvaluationOptions& options = {});

struct VideoScore {
    std::string video;
    std::size_t fold = 0;
    MetricReport report;
};

struct FoldLog {
    std::size_t fold = 0;
    std::vector<std::string> train_videos;
    std::vector<std::string> test_videos;
    EmResult em;
    std::optional<SearchResult> fixed;
};

struct CvConfig {
    std::size_t folds = 3;
    EmConfig em;
    Ablation ablation;
    SearchConfig search;
    /// Precomputed per-fold fixed-parameter searches, reused by the ablations.
    std::vector<SearchResult> fixed_by_fold;
};

struct CvResult {
    MetricReport aggregate;            ///< mean over videos of per-video means
    std::vector<VideoScore> videos;
    std::vector<FoldLog> folds;
};

/// Fold f holds out every video whose position in order of first appearance is f mod folds.
std::vector<std::size_t> assign_folds(std::span<const PreparedItem> items, std::size_t folds);

/// Per-video mean over its items, then mean over videos.
MetricReport aggregate_by_video(std::span<const PreparedItem> items, std::span<const MetricReport> reports,
                                std::vector<VideoScore>* per_video = nullptr);

CvResult cross_validate(std::span<const PreparedItem> items, const CvConfig& config);

/// EM training on all items with the ablation applied (the fixed part comes from a grid search).
EmResult train_with_ablation(std::span<const PreparedItem> items, const EmConfig& config, const Ablation& ablation,
                             const SearchConfig& search, std::optional<SearchResult>* fixed = nullptr);

/// Items with depth features zeroed (the no-depth ablation).
std::vector<PreparedItem> without_depth_features(std::span<const PreparedItem> items);

} // namespace vseg
