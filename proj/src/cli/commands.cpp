#include "vseg/cli.hpp"
#include "vseg/parallel.hpp"
#include "vseg/random.hpp"

#include <json.hpp>

#include <chrono>
#include <fstream>
#include <sstream>

namespace vseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::missing_file, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::missing_file, "cannot write " + path.string());
    out.write(text.data(), std::streamsize(text.size()));
}

json pr_json(const PrecisionRecall& pr) {
    return {{"precision", pr.precision}, {"recall", pr.recall}, {"f", pr.f}};
}

json report_json(const MetricReport& r, bool per_frame) {
    json j = {{"bpr", pr_json(r.bpr)}, {"vpr", pr_json(r.vpr)}, {"am_bvpr", r.am_bvpr}, {"hm_bvpr", r.hm_bvpr}};
    if (per_frame) {
        j["per_frame"] = json::array();
        for (const auto& f : r.per_frame)
            j["per_frame"].push_back({{"frame", f.frame},
                                      {"matched", f.matched},
                                      {"predicted", f.predicted},
                                      {"ground_truth", f.ground_truth}});
    }
    return j;
}

json params_json(const CombinationParams& p) { return {{"alpha", p.alpha}, {"beta", p.beta}}; }

json ablation_json(const Ablation& a) {
    return {{"name", a.name()}, {"no_depth", a.no_depth}, {"fixed_alpha", a.fixed_alpha}, {"fixed_beta", a.fixed_beta}};
}

std::vector<std::string> output_names(const SegmentationPool& pool) {
    std::vector<std::string> names;
    for (const auto& o : pool.outputs()) names.push_back(o.name);
    return names;
}

fs::path sidecar(const fs::path& path, const std::string& suffix) {
    fs::path p = path;
    return p.replace_extension(suffix);
}

} // namespace

int cmd_synth(const SynthArgs& args) {
    if (args.out.empty()) throw Error(ErrorCode::invalid_argument, "synth: --out is required");
    if (args.corpus > 0) {
        if (args.preset || args.config)
            throw Error(ErrorCode::invalid_argument, "synth: --corpus cannot be combined with --preset or --config");
        CorpusOptions options;
        options.videos = args.corpus;
        options.seed = args.seed;
        std::vector<fs::path> manifests;
        for (const auto& v : two_population_corpus(options))
            manifests.push_back(save_workspace(args.out / v.id, v.id, v.pool, v.scene.cues, v.truth));
        save_corpus_list(args.out / "corpus.json", manifests);
        return 0;
    }
    if (args.preset && args.config) throw Error(ErrorCode::invalid_argument, "synth: give either --preset or --config");
    SynthConfig config = args.config ? synth_config_from_text(read_text(*args.config))
                                     : preset_config(args.preset.value_or("two-moving-rects"), args.seed);
    const auto v = make_video(config.video, 0, config.scene, config.outputs, config.annotated_frames);
    save_workspace(args.out, v.id, v.pool, v.scene.cues, v.truth);
    return 0;
}

int cmd_segment(const SegmentArgs& args) {
    const int sources = int(args.model.has_value()) + int(args.params.has_value()) + int(args.oracle);
    if (sources != 1) throw Error(ErrorCode::invalid_argument, "segment: give exactly one of --model, --params, --oracle");
    if (args.out.empty()) throw Error(ErrorCode::invalid_argument, "segment: --out is required");
    const auto t0 = Clock::now();
    const Workspace ws = load_workspace(args.manifest);
    const auto& pool = ws.pool;
    const double load_s = seconds_since(t0);

    const auto t1 = Clock::now();
    std::optional<ModelFile> model;
    CueScales scales;
    if (args.model) {
        model = ModelFile::load(*args.model);
        if (model->regressor.num_alpha != pool.size())
            throw Error(ErrorCode::dim_mismatch, "segment: model was trained on " +
                                                     std::to_string(model->regressor.num_alpha) + " outputs, pool has " +
                                                     std::to_string(pool.size()));
        scales = model->context.scales;
    } else {
        const std::vector<std::vector<GroupingNode>> nodes{grouping_nodes(pool, ws.cues)};
        scales = estimate_cue_scales(nodes);
    }

    CombinationParams params;
    std::string source;
    std::size_t clusters = args.clusters;
    json oracle;
    if (model) {
        params = predict_for(*model, ws.cues);
        source = "model";
    } else if (args.params) {
        params = parse_params(*args.params, pool.size());
        source = "params";
    } else {
        TrainingItem item{ws.manifest.video, 0, pool.grid().frames - 1, pool, ws.cues, ws.truth};
        CorpusContext ctx;
        ctx.scales = scales;
        PreparedItem prepared = prepare_item(std::move(item), ctx, args.seed);
        if (clusters > 0) prepared.clusters = clusters;
        clusters = prepared.clusters;
        const auto found = oracle_params(prepared, args.metric);
        params = found.params;
        source = "oracle";
        oracle = {{"metric", to_string(args.metric)}, {"score", found.score}, {"evaluations", found.evaluations}};
    }
    const double params_s = seconds_since(t1);

    const auto t2 = Clock::now();
    const auto sp = compute_min_overlap_superpixels(pool);
    const ReducedGraph graph = build_reduced_graph(sp, pool, ws.cues, params, scales);
    if (clusters == 0) clusters = choose_cluster_count(graph);
    SegmentOptions options;
    options.scales = scales;
    const auto result = segment_graph(graph, sp, clusters, args.seed, options);
    const double segment_s = seconds_since(t2);

    write_label_frames(args.out, result.partition.voxel_labels);
    json report;
    report["schema_version"] = kReportSchemaVersion;
    report["command"] = "segment";
    report["video"] = ws.manifest.video;
    report["source"] = source;
    report["outputs"] = output_names(pool);
    report["params"] = params_json(params);
    report["cue_scales"] = scales.sigma;
    report["clusters"] = clusters;
    report["seed"] = args.seed;
    report["eigenvalues"] = result.eigenvalues;
    report["nodes"] = {{"total", result.num_nodes},
                       {"super", result.num_super},
                       {"grouping", result.num_nodes - result.num_super},
                       {"voxels", pool.grid().voxels()}};
    if (!oracle.is_null()) report["oracle"] = oracle;
    if (!ws.truth.annotated_frames.empty())
        report["metrics"] = report_json(evaluate(result.partition.voxel_labels, ws.truth), false);
    report["warnings"] = graph.warnings();
    write_text(args.out / "report.json", report.dump(2) + "\n");
    write_text(args.out / "timings.json", json{{"load_s", load_s},
                                               {"params_s", params_s},
                                               {"segment_s", segment_s},
                                               {"total_s", seconds_since(t0)},
                                               {"threads", thread_count()}}
                                                  .dump(2) + "\n");
    return 0;
}

std::string cmd_eval(const EvalArgs& args) {
    if (args.manifest.has_value() == args.corpus.has_value())
        throw Error(ErrorCode::invalid_argument, "eval: give exactly one of --manifest, --corpus");
    if (!(args.tolerance > 0.0)) throw Error(ErrorCode::invalid_argument, "eval: --tol must be positive");
    const BoundaryOptions options{args.tolerance, args.exact_matching};
    json out;
    out["schema_version"] = kReportSchemaVersion;
    out["command"] = "eval";
    out["tolerance"] = args.tolerance;
    const auto score = [&](const fs::path& manifest, const fs::path& pred_dir, std::string& video) {
        const Workspace ws = load_workspace(manifest);
        video = ws.manifest.video;
        if (ws.truth.annotated_frames.empty())
            throw Error(ErrorCode::invalid_argument, manifest.string() + ": no annotated frames to evaluate against");
        return evaluate(read_label_frames(pred_dir, ws.manifest.grid), ws.truth, options);
    };
    if (args.manifest) {
        std::string video;
        const auto r = score(*args.manifest, args.pred, video);
        out["video"] = video;
        out["report"] = report_json(r, true);
    } else {
        std::vector<MetricReport> reports;
        out["videos"] = json::array();
        for (const auto& m : load_corpus_list(*args.corpus)) {
            const std::string id = WorkspaceManifest::load(m).video;
            std::string video;
            reports.push_back(score(m, args.pred / id, video));
            out["videos"].push_back({{"video", video}, {"report", report_json(reports.back(), false)}});
        }
        out["aggregate"] = report_json(average(reports), false);
    }
    const std::string text = out.dump(2) + "\n";
    if (args.out) write_text(*args.out, text);
    return text;
}

int cmd_train(const TrainArgs& args) {
    if (args.out.empty()) throw Error(ErrorCode::invalid_argument, "train: --out is required");
    if (args.folds == 1) throw Error(ErrorCode::invalid_argument, "train: --folds must be 0 or at least 2");
    const auto t0 = Clock::now();
    std::vector<TrainingItem> items;
    std::vector<std::string> names;
    for (const auto& m : load_corpus_list(args.corpus)) {
        Workspace ws = load_workspace(m);
        const auto these = output_names(ws.pool);
        if (names.empty()) names = these;
        if (these != names) throw Error(ErrorCode::invalid_argument, m.string() + ": pooled outputs differ from the corpus");
        for (auto& it : split_subsequences(ws.manifest.video, ws.pool, ws.cues, ws.truth)) items.push_back(std::move(it));
    }
    const CorpusContext context = corpus_context(items);
    std::vector<PreparedItem> prepared(items.size());
    parallel_for(items.size(), [&](std::size_t i) {
        prepared[i] = prepare_item(items[i], context, derive_seed(args.seed, {i}));
    });
    items.clear();
    const double load_s = seconds_since(t0);

    EmConfig em;
    em.metric = args.metric;
    em.seed = args.seed;
    if (args.ridge) em.regressor_ridge = *args.ridge;
    if (args.max_iterations) em.max_iterations = *args.max_iterations;
    const SearchConfig search;

    json log;
    log["schema_version"] = kReportSchemaVersion;
    log["command"] = "train";
    log["metric"] = to_string(args.metric);
    log["ablation"] = ablation_json(args.ablation);
    log["seed"] = args.seed;

    const auto t1 = Clock::now();
    std::optional<SearchResult> fixed;
    if (args.folds >= 2) {
        CvConfig cv;
        cv.folds = args.folds;
        cv.em = em;
        cv.ablation = args.ablation;
        cv.search = search;
        const auto result = cross_validate(prepared, cv);
        json j;
        j["folds"] = args.folds;
        j["aggregate"] = report_json(result.aggregate, false);
        j["videos"] = json::array();
        for (const auto& v : result.videos)
            j["videos"].push_back({{"video", v.video}, {"fold", v.fold}, {"report", report_json(v.report, false)}});
        j["fold_logs"] = json::array();
        for (const auto& f : result.folds)
            j["fold_logs"].push_back({{"fold", f.fold},
                                      {"train", f.train_videos},
                                      {"test", f.test_videos},
                                      {"best_iteration", f.em.best_iteration},
                                      {"best_score", f.em.best_score},
                                      {"warnings", f.em.warnings}});
        log["cross_validation"] = j;
    }
    const double cv_s = seconds_since(t1);

    const auto t2 = Clock::now();
    const EmResult result = train_with_ablation(prepared, em, args.ablation, search, &fixed);
    const double train_s = seconds_since(t2);

    ModelFile model;
    model.metric = args.metric;
    model.ablation = args.ablation;
    model.output_names = names;
    model.context = context;
    model.context.features.use_depth = !args.ablation.no_depth;
    model.regressor = result.model;
    model.proxy = result.proxy;
    model.proxy.fit_window.clear();
    model.config = em;
    model.folds = args.folds;
    model.items = prepared.size();
    model.best_iteration = result.best_iteration;
    model.best_score = result.best_score;
    // Normalise through the text form so the file written is exactly what a reload reproduces.
    model = ModelFile::from_text(model.to_text());
    model.save(args.out);

    const auto row = [](const IterationLog& it) {
        return json{{"iteration", it.iteration},
                    {"latent", report_json(it.latent, false)},
                    {"predicted", report_json(it.predicted, false)},
                    {"training_score", it.training_score},
                    {"accepted", it.accepted},
                    {"failures", it.failures}};
    };
    // The trainer's last row only refits and scores the regressor on the final latents.
    log["iterations"] = json::array();
    for (std::size_t i = 0; i + 1 < result.log.size(); ++i) log["iterations"].push_back(row(result.log[i]));
    if (!result.log.empty()) log["final_refit"] = row(result.log.back());
    log["best_iteration"] = result.best_iteration;
    log["best_score"] = result.best_score;
    if (fixed) log["fixed_search"] = {{"params", params_json(fixed->params)}, {"score", fixed->score}};
    log["items"] = json::array();
    const auto scored = args.ablation.no_depth ? without_depth_features(prepared) : prepared;
    for (std::size_t i = 0; i < prepared.size(); ++i)
        log["items"].push_back({{"video", prepared[i].item.video},
                                {"first_frame", prepared[i].item.first_frame},
                                {"last_frame", prepared[i].item.last_frame},
                                {"latent", params_json(result.latent[i])},
                                {"predicted", params_json(predict_params(result.model, scored[i].features))}});
    log["warnings"] = result.warnings;
    const fs::path log_path = args.log.value_or(sidecar(args.out, ".log.json"));
    write_text(log_path, log.dump(2) + "\n");
    write_text(sidecar(args.out, ".timings.json"), json{{"load_s", load_s},
                                                         {"cross_validation_s", cv_s},
                                                         {"train_s", train_s},
                                                         {"total_s", seconds_since(t0)},
                                                         {"threads", thread_count()}}
                                                            .dump(2) + "\n");
    return 0;
}

} // namespace vseg
