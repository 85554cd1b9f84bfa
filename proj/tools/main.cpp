#include "vseg/cli.hpp"
#include "vseg/parallel.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>

namespace {

const char* code_name(vseg::ErrorCode code) {
    switch (code) {
    case vseg::ErrorCode::invalid_argument: return "invalid_argument";
    case vseg::ErrorCode::missing_file: return "missing_file";
    case vseg::ErrorCode::dim_mismatch: return "dim_mismatch";
    case vseg::ErrorCode::malformed_header: return "malformed_header";
    case vseg::ErrorCode::version_mismatch: return "version_mismatch";
    case vseg::ErrorCode::numerical: return "numerical";
    case vseg::ErrorCode::degenerate: return "degenerate";
    case vseg::ErrorCode::pipeline: return "pipeline";
    }
    return "error";
}

/// One JSON object per line on stderr.
int fail(const std::string& command, const char* kind, int code, const std::string& message) {
    nlohmann::json j = {{"command", command}, {"error", kind}, {"exit_code", code}, {"message", message}};
    std::cerr << j.dump() << "\n";
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectral combination of pooled video segmentations"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Worker threads (default: VSEG_THREADS or 1)")->check(CLI::NonNegativeNumber);

    const std::map<std::string, vseg::MetricKind> metrics{
        {"bpr", vseg::MetricKind::bpr}, {"vpr", vseg::MetricKind::vpr}, {"am", vseg::MetricKind::am},
        {"hm", vseg::MetricKind::hm}};

    vseg::SynthArgs synth;
    std::string synth_preset, synth_config, synth_out;
    auto* s = app.add_subcommand("synth", "Write a synthetic workspace or corpus");
    s->add_option("--preset", synth_preset, "Built-in scene (two-moving-rects)");
    s->add_option("--config", synth_config, "Scene config document (JSON)");
    s->add_option("--seed", synth.seed, "Scene and corruption seed");
    s->add_option("--corpus", synth.corpus, "Write a two-population corpus of N videos");
    s->add_option("--out", synth_out, "Output directory")->required();

    vseg::SegmentArgs seg;
    std::string seg_manifest, seg_model, seg_params, seg_out;
    auto* g = app.add_subcommand("segment", "Combine the pooled outputs of one workspace");
    g->add_option("--manifest", seg_manifest, "Workspace manifest")->required();
    auto* g_model = g->add_option("--model", seg_model, "Trained model file");
    auto* g_params = g->add_option("--params", seg_params, "alpha per output then beta per cue, comma separated");
    auto* g_oracle = g->add_flag("--oracle", seg.oracle, "Search parameters against the workspace annotation");
    g_model->excludes(g_params)->excludes(g_oracle);
    g_params->excludes(g_oracle);
    g->add_option("--metric", seg.metric, "Oracle objective")->transform(CLI::CheckedTransformer(metrics));
    g->add_option("--clusters", seg.clusters, "Cluster count (0: eigengap)");
    g->add_option("--seed", seg.seed, "k-means seed");
    g->add_option("--out", seg_out, "Output directory (default: scratch dir)");

    vseg::EvalArgs ev;
    std::string ev_pred, ev_manifest, ev_corpus, ev_out;
    auto* e = app.add_subcommand("eval", "Score predicted label maps against the annotation");
    e->add_option("--pred", ev_pred, "Predicted frames (per-video subdirectories in corpus mode)")->required();
    auto* e_manifest = e->add_option("--manifest", ev_manifest, "Workspace manifest");
    auto* e_corpus = e->add_option("--corpus", ev_corpus, "Corpus list; reports are averaged over videos");
    e_manifest->excludes(e_corpus);
    e->add_option("--tol", ev.tolerance, "Boundary match radius as a fraction of the diagonal");
    e->add_flag("--exact-matching", ev.exact_matching, "Maximum-cardinality boundary matching");
    e->add_option("--out", ev_out, "Also write the report here");

    vseg::TrainArgs tr;
    std::string tr_corpus, tr_out, tr_log;
    double tr_ridge = 0.0;
    int tr_iterations = 0;
    auto* t = app.add_subcommand("train", "Learn the parameter regressor");
    t->add_option("--corpus", tr_corpus, "Corpus list")->required();
    t->add_option("--metric", tr.metric, "Training objective")->transform(CLI::CheckedTransformer(metrics));
    t->add_option("--folds", tr.folds, "Also cross-validate with this many folds (0: off)");
    t->add_option("--seed", tr.seed, "Training seed");
    t->add_option("--out", tr_out, "Model file (default: scratch dir)");
    t->add_option("--log", tr_log, "Training log (default: next to the model)");
    t->add_flag("--no-depth", tr.ablation.no_depth, "Drop the depth cue");
    t->add_flag("--fixed-alpha", tr.ablation.fixed_alpha, "Hold alpha at the best fixed setting");
    t->add_flag("--fixed-beta", tr.ablation.fixed_beta, "Hold beta at the best fixed setting");
    auto* t_ridge = t->add_option("--ridge", tr_ridge, "Regressor ridge weight")->check(CLI::NonNegativeNumber);
    auto* t_iter = t->add_option("--max-iterations", tr_iterations, "EM iterations")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        if (err.get_exit_code() == 0) return app.exit(err);
        return fail("parse", "invalid_argument", int(vseg::ErrorCode::invalid_argument), err.what());
    }

    std::string command = app.get_subcommands().front()->get_name();
    try {
        if (threads > 0) vseg::set_thread_count(threads);
        if (command == "synth") {
            if (!synth_preset.empty()) synth.preset = synth_preset;
            if (!synth_config.empty()) synth.config = synth_config;
            synth.out = synth_out;
            return vseg::cmd_synth(synth);
        }
        if (command == "segment") {
            seg.manifest = seg_manifest;
            if (*g_model) seg.model = seg_model;
            if (*g_params) seg.params = seg_params;
            seg.out = seg_out.empty() ? vseg::scratch_dir() / "segment" : std::filesystem::path(seg_out);
            return vseg::cmd_segment(seg);
        }
        if (command == "eval") {
            ev.pred = ev_pred;
            if (*e_manifest) ev.manifest = ev_manifest;
            if (*e_corpus) ev.corpus = ev_corpus;
            if (!ev_out.empty()) ev.out = ev_out;
            std::cout << vseg::cmd_eval(ev);
            return 0;
        }
        tr.corpus = tr_corpus;
        tr.out = tr_out.empty() ? vseg::scratch_dir() / "model.json" : std::filesystem::path(tr_out);
        if (!tr_log.empty()) tr.log = tr_log;
        if (*t_ridge) tr.ridge = tr_ridge;
        if (*t_iter) tr.max_iterations = tr_iterations;
        return vseg::cmd_train(tr);
    } catch (const vseg::Error& err) {
        return fail(command, code_name(err.code()), int(err.code()), err.what());
    } catch (const std::exception& err) {
        return fail(command, "internal", 1, err.what());
    }
}
