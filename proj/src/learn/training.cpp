#include "vseg/learn.hpp"
#include "vseg/parallel.hpp"
#include "vseg/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace vseg {

std::vector<TrainingItem> split_subsequences(const std::string& video, const SegmentationPool& pool,
                                             const CueVolumes& cues, const GroundTruth& truth) {
    if (!(pool.grid() == cues.grid()) || !(pool.grid() == truth.grid))
        throw Error(ErrorCode::dim_mismatch, video + ": pool, cues and ground truth disagree on the grid");
    std::vector<int> frames(truth.annotated_frames);
    std::sort(frames.begin(), frames.end());
    if (frames.size() < 2) throw Error(ErrorCode::invalid_argument, video + ": need two annotated frames per subsequence");
    std::vector<TrainingItem> out;
    for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
        TrainingItem item;
        item.video = video;
        item.first_frame = frames[i];
        item.last_frame = frames[i + 1];
        item.pool = pool.frames(frames[i], frames[i + 1]);
        item.cues = cues.frames(frames[i], frames[i + 1]);
        item.truth = truth.frames(frames[i], frames[i + 1]);
        out.push_back(std::move(item));
    }
    return out;
}

CorpusContext corpus_context(std::span<const TrainingItem> items) {
    if (items.empty()) throw Error(ErrorCode::invalid_argument, "corpus_context: no items");
    std::vector<std::vector<GroupingNode>> nodes(items.size());
    parallel_for(items.size(), [&](std::size_t i) { nodes[i] = grouping_nodes(items[i].pool, items[i].cues); });
    std::vector<const CueVolumes*> cues;
    for (const auto& it : items) cues.push_back(&it.cues);
    CorpusContext ctx;
    ctx.scales = estimate_cue_scales(nodes);
    ctx.features.flow_max = flow_percentile(cues);
    return ctx;
}

PreparedItem prepare_item(TrainingItem item, const CorpusContext& context, std::uint64_t seed) {
    PreparedItem p;
    if (item.truth.annotated_frames.size() < std::size_t(item.truth.grid.frames)) link_by_flow(item.truth, item.cues);
    p.superpixels = compute_min_overlap_superpixels(item.pool);
    const auto nodes = grouping_nodes(item.pool, item.cues);
    p.structure = std::make_shared<const GraphStructure>(
        build_graph_structure(p.superpixels, item.pool, nodes, context.scales));
    p.indicator = gt_indicators(p.superpixels, item.truth, p.structure.get());
    // A single-label annotation still gets a two-way split.
    p.clusters = std::max<std::size_t>(2, item.truth.num_labels());
    p.features = extract_features(item.cues, context.features);
    p.seed = seed;
    p.item = std::move(item);
    return p;
}

MetricReport evaluate_params(const PreparedItem& item, const CombinationParams& params,
                             const EvaluationOptions& options) {
    const ReducedGraph graph(item.structure, params);
    const auto res = segment_graph(graph, item.superpixels, item.clusters, item.seed, options.segment);
    return evaluate(res.partition.voxel_labels, item.item.truth, options.boundary);
}

SpectralRepresentation represent_params(const PreparedItem& item, const CombinationParams& params,
                                        const EigenOptions& options) {
    const ReducedGraph graph(item.structure, params);
    return spectral_representation(graph, item.indicator, options);
}

std::string Ablation::name() const {
    std::string s;
    auto add = [&](const char* part) { s += s.empty() ? part : std::string("+") + part; };
    if (no_depth) add("no-depth");
    if (fixed_alpha) add("fixed-alpha");
    if (fixed_beta) add("fixed-beta");
    return s.empty() ? "full" : s;
}

namespace {

std::size_t num_outputs(std::span<const PreparedItem> items) {
    if (items.empty()) throw Error(ErrorCode::invalid_argument, "no training items");
    const std::size_t K = items.front().structure->num_outputs;
    for (const auto& it : items)
        if (it.structure->num_outputs != K) throw Error(ErrorCode::invalid_argument, "items have different pool sizes");
    return K;
}

CombinationParams apply_pinned(CombinationParams p, const EmConfig& config) {
    if (!config.pinned) return p;
    auto flat = p.flat();
    const auto pin = config.pinned->flat();
    for (auto i : config.frozen)
        if (i < flat.size() && i < pin.size()) flat[i] = pin[i];
    return CombinationParams::from_flat(flat, p.alpha.size());
}

struct ItemUpdate {
    CombinationParams predicted;
    MetricReport predicted_report;
    bool predicted_ok = false;
    CombinationParams best;
    MetricReport best_report;
    bool best_ok = false;
    std::vector<ProxySample> window;
    std::string warning;
};

} // namespace

EmResult em_train(std::span<const PreparedItem> items, const EmConfig& config) {
    const std::size_t K = num_outputs(items), n = items.size();
    if (n < 2) throw Error(ErrorCode::invalid_argument, "em_train: need at least two items");
    const MetricKind metric = config.metric;
    std::vector<Eigen::VectorXd> features;
    for (const auto& it : items) features.push_back(it.features);

    EmResult result;
    result.latent.assign(n, apply_pinned(CombinationParams::uniform(K, kNumCues), config));

    std::vector<MetricReport> latent_report(n);
    std::vector<bool> latent_ok(n, false);
    parallel_for(n, [&](std::size_t i) {
        try {
            latent_report[i] = evaluate_params(items[i], result.latent[i], config.evaluation);
            latent_ok[i] = true;
        } catch (const Error&) {
        }
    });
    auto score_of = [&](std::size_t i) { return latent_ok[i] ? latent_report[i].score(metric) : 0.0; };
    auto mean_latent = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += score_of(i);
        return s / double(n);
    };

    std::vector<std::vector<ProxySample>> windows(n);
    double previous = mean_latent();
    result.best_score = -std::numeric_limits<double>::infinity();

    auto fit_model = [&] {
        auto model = fit_regressor(features, result.latent, config.regressor_ridge);
        if (config.pinned)
            for (auto i : config.frozen) model.fixed.emplace_back(i, config.pinned->flat()[i]);
        return model;
    };

    for (int iter = 1; iter <= config.max_iterations + 1; ++iter) {
        const bool last = iter == config.max_iterations + 1;
        const RegressorModel model = fit_model();
        std::vector<ItemUpdate> updates(n);
        parallel_for(n, [&](std::size_t i) {
            auto& u = updates[i];
            const auto& item = items[i];
            u.predicted = apply_pinned(predict_params(model, item.features), config);
            try {
                u.predicted_report = evaluate_params(item, u.predicted, config.evaluation);
                u.predicted_ok = true;
            } catch (const Error& e) {
                u.warning = item.item.video + ": prediction failed: " + e.what();
            }
            if (last || !u.predicted_ok) return;

            std::mt19937_64 rng(derive_seed(config.seed, {std::uint64_t(iter), std::uint64_t(i)}));
            auto candidates = sample_neighborhood(u.predicted, config.neighborhood, config.sigma, rng, config.frozen);
            candidates.insert(candidates.begin(), u.predicted);
            u.best = u.predicted;
            u.best_report = u.predicted_report;
            u.best_ok = true;
            for (std::size_t c = 0; c < candidates.size(); ++c) {
                try {
                    auto rep = represent_params(item, candidates[c], config.evaluation.segment.eigen);
                    const auto report = c == 0 ? u.predicted_report : evaluate_params(item, candidates[c], config.evaluation);
                    u.window.push_back({rep.chi, report.score(metric)});
                    if (report.score(metric) > u.best_report.score(metric)) {
                        u.best = candidates[c];
                        u.best_report = report;
                    }
                } catch (const Error&) {
                }
            }
            auto& window = windows[i];
            window.insert(window.end(), u.window.begin(), u.window.end());
            if (window.size() > config.proxy_window)
                window.erase(window.begin(), window.end() - std::ptrdiff_t(config.proxy_window));
            try {
                const auto proxy = fit_proxy(window, config.proxy_ridge);
                AscentOptions ascent = config.ascent;
                ascent.frozen = config.frozen;
                const auto represent = [&](const CombinationParams& p) {
                    return represent_params(item, p, config.evaluation.segment.eigen);
                };
                const auto asc = maximize_proxy(proxy, u.predicted, represent, ascent);
                const auto report = evaluate_params(item, asc.params, config.evaluation);
                if (report.score(metric) > u.best_report.score(metric)) {
                    u.best = asc.params;
                    u.best_report = report;
                }
            } catch (const Error& e) {
                u.warning = item.item.video + ": proxy step skipped: " + e.what();
            }
        });

        IterationLog log;
        log.iteration = iter;
        std::vector<MetricReport> predicted;
        double training = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!updates[i].warning.empty()) result.warnings.push_back(updates[i].warning);
            if (!updates[i].predicted_ok) {
                ++log.failures;
                continue;
            }
            predicted.push_back(updates[i].predicted_report);
            training += updates[i].predicted_report.score(metric);
        }
        if (2 * log.failures > n)
            throw Error(ErrorCode::pipeline, "em_train: more than half of the items failed in iteration " +
                                                 std::to_string(iter));
        log.training_score = training / double(n);
        log.predicted = average(predicted);
        if (log.training_score > result.best_score) {
            result.best_score = log.training_score;
            result.best_iteration = iter;
            result.model = model;
        }
        if (last) {
            log.latent = average(latent_report);
            result.log.push_back(log);
            break;
        }

        // Monotone acceptance: a latent value only moves when the true score does not drop.
        for (std::size_t i = 0; i < n; ++i) {
            const auto& u = updates[i];
            if (!u.best_ok) continue;
            if (!latent_ok[i] || u.best_report.score(metric) >= score_of(i)) {
                if (!(u.best == result.latent[i])) ++log.accepted;
                result.latent[i] = u.best;
                latent_report[i] = u.best_report;
                latent_ok[i] = true;
            }
        }
        log.latent = average(latent_report);
        result.log.push_back(log);
        const double now = mean_latent();
        const bool converged = now - previous < config.tolerance;
        previous = now;
        if (converged) {
            // One more pass fits and scores the regressor on the final latent values.
            const RegressorModel final_model = fit_model();
            std::vector<MetricReport> reports(n);
            std::vector<bool> ok(n, false);
            parallel_for(n, [&](std::size_t i) {
                try {
                    reports[i] = evaluate_params(items[i], apply_pinned(predict_params(final_model, items[i].features), config),
                                                 config.evaluation);
                    ok[i] = true;
                } catch (const Error&) {
                }
            });
            IterationLog tail;
            tail.iteration = iter + 1;
            std::vector<MetricReport> good;
            for (std::size_t i = 0; i < n; ++i) {
                if (!ok[i]) {
                    ++tail.failures;
                    continue;
                }
                good.push_back(reports[i]);
                tail.training_score += reports[i].score(metric) / double(n);
            }
            tail.predicted = average(good);
            tail.latent = log.latent;
            result.log.push_back(tail);
            if (tail.training_score > result.best_score) {
                result.best_score = tail.training_score;
                result.best_iteration = tail.iteration;
                result.model = final_model;
            }
            break;
        }
    }

    // Global proxy over the most recent samples of every item.
    std::vector<ProxySample> pooled;
    for (const auto& w : windows) {
        const std::size_t take = std::min<std::size_t>(w.size(), 8);
        pooled.insert(pooled.end(), w.end() - std::ptrdiff_t(take), w.end());
    }
    try {
        if (!pooled.empty()) result.proxy = fit_proxy(pooled, config.proxy_ridge);
    } catch (const Error& e) {
        result.warnings.push_back(std::string("global proxy not fitted: ") + e.what());
    }
    return result;
}

namespace {

template <class Objective>
SearchResult coordinate_search(std::size_t K, const SearchConfig& config, Objective&& objective) {
    std::vector<CombinationParams> starts{CombinationParams::uniform(K, kNumCues)};
    starts.insert(starts.end(), config.starts.begin(), config.starts.end());
    SearchResult best;
    best.score = -std::numeric_limits<double>::infinity();
    for (const auto& s : starts) {
        const auto start = s.clamped();
        const double v = objective(start);
        ++best.evaluations;
        if (v > best.score) {
            best.score = v;
            best.params = start;
        }
    }
    std::vector<bool> frozen(K + kNumCues, false);
    for (auto i : config.frozen)
        if (i < frozen.size()) frozen[i] = true;
    for (int pass = 0; pass < config.passes; ++pass) {
        bool moved = false;
        for (std::size_t c = 0; c < K + kNumCues; ++c) {
            if (frozen[c]) continue;
            for (double g : config.grid) {
                auto flat = best.params.flat();
                if (flat[c] == g) continue;
                flat[c] = std::clamp(g, kParamFloor, kParamCeil);
                const auto cand = CombinationParams::from_flat(flat, K);
                const double v = objective(cand);
                ++best.evaluations;
                if (v > best.score) {
                    best.score = v;
                    best.params = cand;
                    moved = true;
                }
            }
        }
        if (!moved) break;
    }
    return best;
}

} // namespace

SearchResult oracle_params(const PreparedItem& item, MetricKind metric, const SearchConfig& config,
                           const EvaluationOptions& options) {
    return coordinate_search(item.structure->num_outputs, config, [&](const CombinationParams& p) {
        try {
            return evaluate_params(item, p, options).score(metric);
        } catch (const Error&) {
            return -1.0;
        }
    });
}

SearchResult fixed_params_search(std::span<const PreparedItem> items, MetricKind metric, const SearchConfig& config,
                                 const EvaluationOptions& options) {
    const std::size_t K = num_outputs(items);
    return coordinate_search(K, config, [&](const CombinationParams& p) {
        std::vector<double> scores(items.size(), 0.0);
        parallel_for(items.size(), [&](std::size_t i) {
            try {
                scores[i] = evaluate_params(items[i], p, options).score(metric);
            } catch (const Error&) {
            }
        });
        double s = 0.0;
        for (double v : scores) s += v;
        return s / double(items.size());
    });
}

std::vector<std::size_t> assign_folds(std::span<const PreparedItem> items, std::size_t folds) {
    if (folds < 2) throw Error(ErrorCode::invalid_argument, "need at least two folds");
    std::map<std::string, std::size_t> position;
    for (const auto& it : items) position.try_emplace(it.item.video, position.size());
    if (position.size() < folds)
        throw Error(ErrorCode::invalid_argument, "cross-validation needs at least as many videos as folds");
    std::vector<std::size_t> fold;
    for (const auto& it : items) fold.push_back(position.at(it.item.video) % folds);
    return fold;
}

MetricReport aggregate_by_video(std::span<const PreparedItem> items, std::span<const MetricReport> reports,
                                std::vector<VideoScore>* per_video) {
    if (items.size() != reports.size()) throw Error(ErrorCode::invalid_argument, "aggregate_by_video: count mismatch");
    std::vector<std::string> order;
    std::map<std::string, std::vector<MetricReport>> groups;
    for (std::size_t i = 0; i < items.size(); ++i) {
        auto [it, fresh] = groups.try_emplace(items[i].item.video);
        if (fresh) order.push_back(items[i].item.video);
        it->second.push_back(reports[i]);
    }
    std::vector<MetricReport> means;
    for (const auto& v : order) {
        means.push_back(average(groups.at(v)));
        if (per_video) per_video->push_back({v, 0, means.back()});
    }
    return average(means);
}

std::vector<PreparedItem> without_depth_features(std::span<const PreparedItem> items) {
    std::vector<PreparedItem> out(items.begin(), items.end());
    for (auto& it : out)
        it.features.segment(Eigen::Index(2 * kCueFeatureSize), Eigen::Index(kCueFeatureSize)).setZero();
    return out;
}

EmResult train_with_ablation(std::span<const PreparedItem> items, const EmConfig& config, const Ablation& ablation,
                             const SearchConfig& search, std::optional<SearchResult>* fixed) {
    const std::size_t K = num_outputs(items);
    std::vector<PreparedItem> stripped;
    std::span<const PreparedItem> used = items;
    if (ablation.no_depth) {
        stripped = without_depth_features(items);
        used = stripped;
    }
    EmConfig cfg = config;
    CombinationParams pinned = CombinationParams::uniform(K, kNumCues);
    std::vector<std::size_t> frozen;
    if (ablation.no_depth) {
        pinned.beta[std::size_t(Cue::depth)] = kParamFloor;
        frozen.push_back(K + std::size_t(Cue::depth));
    }
    if (ablation.fixed_alpha || ablation.fixed_beta) {
        SearchResult found;
        if (fixed && *fixed) {
            found = **fixed;
        } else {
            SearchConfig s = search;
            s.frozen = frozen;
            s.starts.push_back(pinned);
            found = fixed_params_search(used, config.metric, s, config.evaluation);
            if (fixed) *fixed = found;
        }
        if (ablation.fixed_alpha) {
            pinned.alpha = found.params.alpha;
            for (std::size_t k = 0; k < K; ++k) frozen.push_back(k);
        }
        if (ablation.fixed_beta) {
            for (std::size_t c = 0; c < std::size_t(kNumCues); ++c) {
                if (ablation.no_depth && c == std::size_t(Cue::depth)) continue;
                pinned.beta[c] = found.params.beta[c];
                frozen.push_back(K + c);
            }
        }
    }
    if (!frozen.empty()) {
        cfg.pinned = pinned;
        cfg.frozen = frozen;
    }
    return em_train(used, cfg);
}

CvResult cross_validate(std::span<const PreparedItem> items, const CvConfig& config) {
    const auto fold_of = assign_folds(items, config.folds);
    CvResult result;
    std::vector<MetricReport> held_out(items.size());
    for (std::size_t f = 0; f < config.folds; ++f) {
        std::vector<PreparedItem> train, test;
        std::vector<std::size_t> test_index;
        FoldLog log;
        log.fold = f;
        for (std::size_t i = 0; i < items.size(); ++i) {
            auto& names = fold_of[i] == f ? log.test_videos : log.train_videos;
            if (names.empty() || names.back() != items[i].item.video) names.push_back(items[i].item.video);
            if (fold_of[i] == f) {
                test.push_back(items[i]);
                test_index.push_back(i);
            } else {
                train.push_back(items[i]);
            }
        }
        EmConfig em = config.em;
        em.seed = derive_seed(config.em.seed, {f});
        if (f < config.fixed_by_fold.size()) log.fixed = config.fixed_by_fold[f];
        log.em = train_with_ablation(train, em, config.ablation, config.search, &log.fixed);

        if (config.ablation.no_depth) test = without_depth_features(test);
        std::vector<MetricReport> reports(test.size());
        std::vector<bool> ok(test.size(), false);
        parallel_for(test.size(), [&](std::size_t j) {
            try {
                reports[j] = evaluate_params(test[j], predict_params(log.em.model, test[j].features), em.evaluation);
                ok[j] = true;
            } catch (const Error&) {
            }
        });
        for (std::size_t j = 0; j < test.size(); ++j) {
            if (!ok[j]) log.em.warnings.push_back(test[j].item.video + ": held-out evaluation failed, scored 0");
            held_out[test_index[j]] = reports[j];
        }
        result.folds.push_back(std::move(log));
    }
    result.aggregate = aggregate_by_video(items, held_out, &result.videos);
    for (auto& v : result.videos)
        for (std::size_t i = 0; i < items.size(); ++i)
            if (items[i].item.video == v.video) {
                v.fold = fold_of[i];
                break;
            }
    return result;
}

} // namespace vseg
