#include "fixtures.hpp"

#include "vseg/cli.hpp"
#include "vseg/metrics.hpp"

#include <doctest.h>

#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

using namespace vseg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("vseg_test_cli_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spill(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), std::streamsize(bytes.size()));
}

struct Run {
    int status = -1;
    std::string out;
    std::string err;
};

/// Runs the vseg binary with the given arguments, capturing both streams.
Run run_cli(const std::string& args, const fs::path& scratch) {
    const auto out = scratch / "stdout.txt", err = scratch / "stderr.txt";
    const std::string cmd = std::string(VSEG_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int raw = std::system(cmd.c_str());
    Run r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

/// Every file under `dir` keyed by relative path, skipping wall-clock timing files.
std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename().string().find("timings") == std::string::npos)
            files[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return files;
}

ModelFile random_model(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    ModelFile m;
    m.metric = MetricKind::bpr;
    m.ablation.fixed_beta = true;
    m.output_names = {"a", "b"};
    m.context.scales.sigma = {0.1 * n(rng), 1.0 / 3.0, 2.0};
    m.context.features.flow_max = 1.7;
    m.regressor.num_alpha = 2;
    m.regressor.num_beta = 3;
    m.regressor.scaler.mean = Eigen::VectorXd::Random(4);
    m.regressor.scaler.scale = Eigen::VectorXd::Constant(4, 0.1);
    for (int p = 0; p < 5; ++p) {
        Eigen::MatrixXd b(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) b(i, j) = n(rng) * 1e-3 + 1.0 / 7.0;
        m.regressor.B.push_back(b);
    }
    m.regressor.fixed = {{2, 0.25}};
    m.proxy.Y = Eigen::MatrixXd::Identity(3, 3) * (1.0 / 3.0);
    m.items = 6;
    m.best_score = 0.123456789012345678;
    return m;
}

const char* kUnanimousScene = R"({
  "video": "unanimous",
  "grid": {"width": 16, "height": 12, "frames": 3},
  "seed": 2,
  "background": {"color": [0.2, 0.3, 0.4], "depth": 0.1},
  "objects": [
    {"shape": "rectangle", "x": 4, "y": 5, "half_width": 2, "half_height": 3, "vx": 1, "color": [0.9, 0.2, 0.3], "depth": 0.6},
    {"shape": "ellipse", "x": 12, "y": 6, "half_width": 2, "half_height": 3, "color": [0.3, 0.8, 0.2], "depth": 0.8}
  ],
  "outputs": [
    {"name": "first", "kind": "video"},
    {"name": "second", "kind": "image"},
    {"name": "third", "kind": "video"}
  ],
  "annotated_frames": [0, 1, 2]
})";

} // namespace

TEST_SUITE("cli") {

TEST_CASE("model files round-trip byte for byte") {
    const auto m = random_model(3);
    const std::string text = m.to_text();
    const auto back = ModelFile::from_text(text);
    CHECK(back.to_text() == text);
    CHECK(back.regressor.B[3] == m.regressor.B[3]);
    CHECK(back.best_score == m.best_score);
    TempDir dir("model");
    m.save(dir.path / "m.json");
    CHECK(slurp(dir.path / "m.json") == text);
    CHECK(ModelFile::load(dir.path / "m.json").to_text() == text);
}

TEST_CASE("model version mismatch is a hard error") {
    auto j = json::parse(random_model(1).to_text());
    j["version"] = kModelVersion + 1;
    try {
        ModelFile::from_text(j.dump());
        FAIL("accepted a foreign version");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::version_mismatch);
    }
    j["version"] = kModelVersion;
    j["regressor"]["B"].erase(0);
    CHECK_THROWS_AS(ModelFile::from_text(j.dump()), Error);
}

TEST_CASE("parameter strings") {
    const auto p = parse_params("1,2.5,0.1,1e-2,3", 2);
    CHECK(p.alpha == std::vector<double>{1.0, 2.5});
    CHECK(p.beta == std::vector<double>{0.1, 0.01, 3.0});
    CHECK_THROWS_AS(parse_params("1,2,3", 2), Error);
    CHECK_THROWS_AS(parse_params("1,x,3,4,5", 2), Error);
    CHECK_THROWS_AS(parse_params("1,,3,4,5", 2), Error);
    CHECK_THROWS_AS(parse_params("1,-2,3,4,5", 2), Error);
}

TEST_CASE("scene configs") {
    const auto c = synth_config_from_text(kUnanimousScene);
    CHECK(c.video == "unanimous");
    CHECK(c.scene.objects.size() == 2);
    CHECK(c.scene.objects[1].shape == Shape::ellipse);
    CHECK(c.outputs[1].kind == OutputKind::image);
    CHECK(c.annotated_frames == std::vector<int>{0, 1, 2});
    CHECK_THROWS_AS(synth_config_from_text("{\"grid\": 3}"), Error);
    CHECK(default_annotated_frames(6) == std::vector<int>{0, 2, 4, 5});
    CHECK(default_annotated_frames(5) == std::vector<int>{0, 2, 4});
}

TEST_CASE("synth writes a loadable preset workspace; the seed changes only the jitter") {
    TempDir dir("synth");
    REQUIRE(run_cli("synth --preset two-moving-rects --seed 1 --out " + (dir.path / "a").string(), dir.path).status == 0);
    REQUIRE(run_cli("synth --preset two-moving-rects --seed 2 --out " + (dir.path / "b").string(), dir.path).status == 0);
    const auto a = load_workspace(dir.path / "a" / "manifest.json");
    const auto b = load_workspace(dir.path / "b" / "manifest.json");
    CHECK(a.pool.size() == 3);
    CHECK(a.manifest.grid == b.manifest.grid);
    CHECK(a.truth.annotated_frames == b.truth.annotated_frames);
    for (std::size_t k = 0; k < a.pool.size(); ++k) CHECK(a.pool[k].name == b.pool[k].name);
    // Only the "color" output is jittered.
    CHECK(std::equal(a.pool[0].labels.labels().begin(), a.pool[0].labels.labels().end(), b.pool[0].labels.labels().begin()));
    CHECK_FALSE(std::equal(a.pool[1].labels.labels().begin(), a.pool[1].labels.labels().end(),
                           b.pool[1].labels.labels().begin()));
}

TEST_CASE("synth corpus mode writes one manifest per video") {
    TempDir dir("corpus");
    REQUIRE(run_cli("synth --corpus 6 --seed 4 --out " + dir.path.string(), dir.path).status == 0);
    const auto list = load_corpus_list(dir.path / "corpus.json");
    CHECK(list.size() == 6);
    for (const auto& m : list) CHECK(fs::exists(m));
}

TEST_CASE("segment on a unanimous pool reproduces the annotation; eval scores it 1") {
    TempDir dir("unanimous");
    spill(dir.path / "scene.json", kUnanimousScene);
    REQUIRE(run_cli("synth --config " + (dir.path / "scene.json").string() + " --out " + (dir.path / "ws").string(),
                 dir.path).status == 0);
    const auto manifest = (dir.path / "ws" / "manifest.json").string();
    const auto seg = run_cli("segment --manifest " + manifest + " --params 1,1,1,1,1,1 --clusters 3 --out " +
                              (dir.path / "seg").string(), dir.path);
    REQUIRE_MESSAGE(seg.status == 0, seg.err);
    const auto ws = load_workspace(manifest);
    const auto pred = read_label_frames(dir.path / "seg", ws.manifest.grid);
    std::map<Label, Label> fwd, back;
    bool same = true;
    for (std::size_t t = 0; t < ws.truth.annotated_frames.size(); ++t)
        for (std::size_t p = 0; p < ws.manifest.grid.frame_size(); ++p) {
            const Label a = pred.labels()[std::size_t(ws.truth.annotated_frames[t]) * ws.manifest.grid.frame_size() + p];
            const Label b = ws.truth.labels[t][p];
            same = same && fwd.emplace(a, b).first->second == b && back.emplace(b, a).first->second == a;
        }
    CHECK(same);

    const auto report = json::parse(slurp(dir.path / "seg" / "report.json"));
    CHECK(report["schema_version"] == kReportSchemaVersion);
    CHECK(report["source"] == "params");
    CHECK(report["clusters"] == 3);
    CHECK(report["eigenvalues"].size() >= 3);
    CHECK(report["metrics"]["hm_bvpr"].get<double>() == 1.0);

    const auto ev = run_cli("eval --pred " + (dir.path / "seg").string() + " --manifest " + manifest, dir.path);
    REQUIRE(ev.status == 0);
    const auto j = json::parse(ev.out);
    for (const char* key : {"am_bvpr", "hm_bvpr"}) CHECK(j["report"][key].get<double>() == 1.0);
    for (const char* key : {"bpr", "vpr"}) CHECK(j["report"][key]["f"].get<double>() == 1.0);
}

TEST_CASE("eval fuses boundary and volume scores") {
    const auto moseg = fuse(0.247, 0.285);
    CHECK(std::abs(moseg.am - 0.266) <= 0.0005);
    CHECK(moseg.hm == doctest::Approx(2 * 0.247 * 0.285 / (0.247 + 0.285)).epsilon(1e-15));

    TempDir dir("fuse");
    REQUIRE(run_cli("synth --preset two-moving-rects --out " + (dir.path / "ws").string(), dir.path).status == 0);
    const auto manifest = (dir.path / "ws" / "manifest.json").string();
    REQUIRE(run_cli("segment --manifest " + manifest + " --params 0.2,3,1,1,1,1 --clusters 4 --out " +
                     (dir.path / "seg").string(), dir.path).status == 0);
    const auto ev = run_cli("eval --pred " + (dir.path / "seg").string() + " --manifest " + manifest + " --out " +
                             (dir.path / "eval.json").string(), dir.path);
    REQUIRE(ev.status == 0);
    CHECK(slurp(dir.path / "eval.json") == ev.out);
    const auto r = json::parse(ev.out)["report"];
    const auto f = fuse(r["bpr"]["f"].get<double>(), r["vpr"]["f"].get<double>());
    CHECK(r["am_bvpr"].get<double>() == doctest::Approx(f.am).epsilon(1e-15));
    CHECK(r["hm_bvpr"].get<double>() == doctest::Approx(f.hm).epsilon(1e-15));
    CHECK(r["per_frame"].size() == load_workspace(manifest).truth.annotated_frames.size());
}

TEST_CASE("errors exit nonzero with one JSON line on stderr") {
    TempDir dir("errors");
    REQUIRE(run_cli("synth --preset two-moving-rects --out " + (dir.path / "ws").string(), dir.path).status == 0);
    const auto manifest = (dir.path / "ws" / "manifest.json").string();

    const auto none = run_cli("segment --manifest " + manifest + " --out " + (dir.path / "s").string(), dir.path);
    CHECK(none.status == int(ErrorCode::invalid_argument));
    const auto diag = json::parse(none.err);
    CHECK(diag["command"] == "segment");
    CHECK(diag["error"] == "invalid_argument");
    CHECK(diag["exit_code"] == none.status);

    const auto both = run_cli("segment --manifest " + manifest + " --params 1,1,1,1,1,1 --oracle --out x", dir.path);
    CHECK(both.status == int(ErrorCode::invalid_argument));

    const auto missing = run_cli("eval --pred " + (dir.path / "nothing").string() + " --manifest " + manifest, dir.path);
    CHECK(missing.status == int(ErrorCode::missing_file));
    CHECK(json::parse(missing.err)["message"].get<std::string>().find("0") != std::string::npos);

    REQUIRE(run_cli("segment --manifest " + manifest + " --params 1,1,1,1,1,1 --out " + (dir.path / "p").string(),
                 dir.path).status == 0);
    fs::remove(dir.path / "p" / "frame_002.pgm");
    const auto gap = run_cli("eval --pred " + (dir.path / "p").string() + " --manifest " + manifest, dir.path);
    CHECK(gap.status == int(ErrorCode::missing_file));
    CHECK(json::parse(gap.err)["message"].get<std::string>().find("2") != std::string::npos);

    auto m = json::parse(slurp(manifest));
    m["version"] = 9;
    spill(dir.path / "ws" / "v9.json", m.dump());
    CHECK(run_cli("segment --manifest " + (dir.path / "ws" / "v9.json").string() + " --params 1,1,1,1,1,1 --out x",
               dir.path).status == int(ErrorCode::version_mismatch));
    CHECK(run_cli("segment --manifest " + (dir.path / "nope.json").string() + " --params 1,1,1,1,1,1 --out x",
               dir.path).status == int(ErrorCode::missing_file));
    CHECK(run_cli("train --corpus x.json --metric nope", dir.path).status == int(ErrorCode::invalid_argument));
}

TEST_CASE("segment is deterministic across runs and thread counts") {
    TempDir dir("determinism");
    REQUIRE(run_cli("synth --preset two-moving-rects --seed 3 --out " + (dir.path / "ws").string(), dir.path).status == 0);
    const auto manifest = (dir.path / "ws" / "manifest.json").string();
    const auto run = [&](const std::string& name, int threads) {
        const auto r = run_cli("--threads " + std::to_string(threads) + " segment --manifest " + manifest +
                                " --params 0.5,1,2,1,0.5,0.2 --seed 9 --out " + (dir.path / name).string(),
                            dir.path);
        REQUIRE(r.status == 0);
        return tree(dir.path / name);
    };
    const auto a = run("a", 1), b = run("b", 1), c = run("c", 3);
    CHECK(a.size() > 2);
    CHECK(a == b);
    CHECK(a == c);
}

TEST_CASE("train writes a model and a log; metrics give distinct models; reruns are identical") {
    TempDir dir("train");
    REQUIRE(run_cli("synth --preset two-moving-rects --seed 5 --out " + (dir.path / "ws").string(), dir.path).status == 0);
    // Annotated frames 0, 2, 4, 5 give three subsequences; keep the first two.
    auto m = json::parse(slurp(dir.path / "ws" / "manifest.json"));
    auto& gt = m["ground_truth"];
    gt["annotated_frames"] = json::array({0, 2, 4});
    gt["frames"] = json::array({gt["frames"][0], gt["frames"][1], gt["frames"][2]});
    spill(dir.path / "ws" / "manifest.json", m.dump(2));
    spill(dir.path / "corpus.json", R"({"manifests": ["ws/manifest.json"]})");
    const auto corpus = (dir.path / "corpus.json").string();
    const auto train = [&](const std::string& name, const std::string& metric, int threads) {
        const auto r = run_cli("--threads " + std::to_string(threads) + " train --corpus " + corpus + " --metric " +
                                metric + " --max-iterations 1 --seed 4 --out " + (dir.path / name / "model.json").string(),
                            dir.path);
        REQUIRE_MESSAGE(r.status == 0, r.err);
        return tree(dir.path / name);
    };
    const auto hm = train("hm", "hm", 1);
    REQUIRE(hm.count("model.json"));
    REQUIRE(hm.count("model.log.json"));
    const auto log = json::parse(hm.at("model.log.json"));
    CHECK(log["iterations"].size() == 1);
    CHECK(log.contains("final_refit"));
    CHECK(log["items"].size() == 2);
    const auto model = ModelFile::from_text(hm.at("model.json"));
    CHECK(model.items == 2);
    CHECK(model.metric == MetricKind::hm);
    CHECK(model.to_text() == hm.at("model.json"));

    const auto bpr = train("bpr", "bpr", 1);
    CHECK(bpr.at("model.json") != hm.at("model.json"));
    CHECK(train("again", "hm", 2) == hm);

    // The model path records the regressed parameters in the report.
    const auto seg = run_cli("segment --manifest " + (dir.path / "ws" / "manifest.json").string() + " --model " +
                              (dir.path / "hm" / "model.json").string() + " --out " + (dir.path / "seg").string(),
                          dir.path);
    REQUIRE_MESSAGE(seg.status == 0, seg.err);
    const auto report = json::parse(slurp(dir.path / "seg" / "report.json"));
    CHECK(report["source"] == "model");
    const auto ws = load_workspace(dir.path / "ws" / "manifest.json");
    const auto expected = predict_for(model, ws.cues);
    CHECK(report["params"]["alpha"].get<std::vector<double>>() == expected.alpha);
    CHECK(report["params"]["beta"].get<std::vector<double>>() == expected.beta);
}

}
