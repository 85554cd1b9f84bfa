#include "vseg/cli.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace vseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
    std::vector<double> data;
    data.reserve(std::size_t(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>(), cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (rows < 0 || cols < 0 || data.size() != std::size_t(rows * cols))
        throw Error(ErrorCode::malformed_header, "matrix data does not match its shape");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[std::size_t(r * cols + c)];
    return m;
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from(const json& j) {
    const auto data = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(data.data(), Eigen::Index(data.size()));
}

json config_json(const EmConfig& c) {
    return {{"max_iterations", c.max_iterations},
            {"tolerance", c.tolerance},
            {"neighborhood", c.neighborhood},
            {"sigma", c.sigma},
            {"proxy_window", c.proxy_window},
            {"proxy_ridge", c.proxy_ridge},
            {"regressor_ridge", c.regressor_ridge},
            {"seed", c.seed},
            {"ascent", {{"step", c.ascent.step}, {"max_steps", c.ascent.max_steps}, {"min_step", c.ascent.min_step}}},
            {"kmeans_restarts", c.evaluation.segment.kmeans.restarts},
            {"boundary_tolerance", c.evaluation.boundary.tolerance},
            {"exact_matching", c.evaluation.boundary.exact_matching}};
}

EmConfig config_from(const json& j) {
    EmConfig c;
    c.max_iterations = j.at("max_iterations").get<int>();
    c.tolerance = j.at("tolerance").get<double>();
    c.neighborhood = j.at("neighborhood").get<std::size_t>();
    c.sigma = j.at("sigma").get<double>();
    c.proxy_window = j.at("proxy_window").get<std::size_t>();
    c.proxy_ridge = j.at("proxy_ridge").get<double>();
    c.regressor_ridge = j.at("regressor_ridge").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    const auto& a = j.at("ascent");
    c.ascent.step = a.at("step").get<double>();
    c.ascent.max_steps = a.at("max_steps").get<int>();
    c.ascent.min_step = a.at("min_step").get<double>();
    c.evaluation.segment.kmeans.restarts = j.at("kmeans_restarts").get<int>();
    c.evaluation.boundary.tolerance = j.at("boundary_tolerance").get<double>();
    c.evaluation.boundary.exact_matching = j.at("exact_matching").get<bool>();
    return c;
}

} // namespace

std::string ModelFile::to_text() const {
    json j;
    j["format"] = "vseg-model";
    j["version"] = version;
    j["metric"] = to_string(metric);
    j["ablation"] = {{"no_depth", ablation.no_depth},
                     {"fixed_alpha", ablation.fixed_alpha},
                     {"fixed_beta", ablation.fixed_beta}};
    j["outputs"] = output_names;
    j["cue_scales"] = context.scales.sigma;
    j["flow_max"] = context.features.flow_max;
    j["use_depth"] = context.features.use_depth;

    json reg;
    reg["num_alpha"] = regressor.num_alpha;
    reg["num_beta"] = regressor.num_beta;
    reg["ridge"] = regressor.ridge;
    reg["rmse"] = regressor.rmse;
    reg["scaler"] = {{"mean", vector_json(regressor.scaler.mean)}, {"scale", vector_json(regressor.scaler.scale)}};
    reg["B"] = json::array();
    for (const auto& b : regressor.B) reg["B"].push_back(matrix_json(b));
    reg["fixed"] = json::array();
    for (auto [i, v] : regressor.fixed) reg["fixed"].push_back({{"index", i}, {"value", v}});
    j["regressor"] = reg;

    j["proxy"] = {{"Y", matrix_json(proxy.Y)}, {"ridge", proxy.ridge}, {"rmse", proxy.rmse}};
    j["config"] = config_json(config);
    j["training"] = {{"folds", folds}, {"items", items}, {"best_iteration", best_iteration}, {"best_score", best_score}};
    return j.dump(2) + "\n";
}

ModelFile ModelFile::from_text(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::malformed_header, origin + ": " + e.what());
    }
    ModelFile m;
    try {
        if (j.at("format").get<std::string>() != "vseg-model")
            throw Error(ErrorCode::malformed_header, origin + ": not a model file");
        m.version = j.at("version").get<int>();
        if (m.version != kModelVersion)
            throw Error(ErrorCode::version_mismatch, origin + ": model version " + std::to_string(m.version) +
                                                         " (expected " + std::to_string(kModelVersion) + ")");
        m.metric = metric_kind_from_string(j.at("metric").get<std::string>());
        const auto& ab = j.at("ablation");
        m.ablation = {ab.at("no_depth").get<bool>(), ab.at("fixed_alpha").get<bool>(), ab.at("fixed_beta").get<bool>()};
        m.output_names = j.at("outputs").get<std::vector<std::string>>();
        m.context.scales.sigma = j.at("cue_scales").get<std::array<double, kNumCues>>();
        m.context.features.flow_max = j.at("flow_max").get<double>();
        m.context.features.use_depth = j.at("use_depth").get<bool>();

        const auto& reg = j.at("regressor");
        m.regressor.num_alpha = reg.at("num_alpha").get<std::size_t>();
        m.regressor.num_beta = reg.at("num_beta").get<std::size_t>();
        m.regressor.ridge = reg.at("ridge").get<double>();
        m.regressor.rmse = reg.at("rmse").get<double>();
        m.regressor.scaler.mean = vector_from(reg.at("scaler").at("mean"));
        m.regressor.scaler.scale = vector_from(reg.at("scaler").at("scale"));
        for (const auto& b : reg.at("B")) m.regressor.B.push_back(matrix_from(b));
        for (const auto& f : reg.at("fixed"))
            m.regressor.fixed.emplace_back(f.at("index").get<std::size_t>(), f.at("value").get<double>());

        const auto& px = j.at("proxy");
        m.proxy.Y = matrix_from(px.at("Y"));
        m.proxy.ridge = px.at("ridge").get<double>();
        m.proxy.rmse = px.at("rmse").get<double>();
        m.config = config_from(j.at("config"));
        m.config.metric = m.metric;
        const auto& tr = j.at("training");
        m.folds = tr.at("folds").get<std::size_t>();
        m.items = tr.at("items").get<std::size_t>();
        m.best_iteration = tr.at("best_iteration").get<int>();
        m.best_score = tr.at("best_score").get<double>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::malformed_header, origin + ": " + e.what());
    }
    const std::size_t P = m.regressor.num_alpha + m.regressor.num_beta;
    const auto d = m.regressor.scaler.mean.size();
    if (m.regressor.B.size() != P || m.regressor.scaler.scale.size() != d)
        throw Error(ErrorCode::malformed_header, origin + ": regressor shape is inconsistent");
    for (const auto& b : m.regressor.B)
        if (b.rows() != d || b.cols() != d) throw Error(ErrorCode::malformed_header, origin + ": regressor matrix has the wrong size");
    if (m.output_names.size() != m.regressor.num_alpha)
        throw Error(ErrorCode::malformed_header, origin + ": output names do not match the regressor");
    return m;
}

void ModelFile::save(const fs::path& path) const {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::missing_file, "cannot write " + path.string());
    const std::string text = to_text();
    out.write(text.data(), std::streamsize(text.size()));
}

ModelFile ModelFile::load(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::missing_file, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str(), path.string());
}

CombinationParams predict_for(const ModelFile& model, const CueVolumes& cues) {
    const auto f = extract_features(cues, model.context.features);
    if (std::size_t(f.size()) != model.regressor.feature_size())
        throw Error(ErrorCode::dim_mismatch, "model expects " + std::to_string(model.regressor.feature_size()) +
                                                 " features, got " + std::to_string(f.size()));
    return predict_params(model.regressor, f);
}

CombinationParams parse_params(const std::string& text, std::size_t num_alpha) {
    std::vector<double> theta;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        char* end = nullptr;
        const double v = std::strtod(part.c_str(), &end);
        if (part.empty() || *end != '\0') throw Error(ErrorCode::invalid_argument, "bad parameter value '" + part + "'");
        theta.push_back(v);
    }
    if (theta.size() != num_alpha + std::size_t(kNumCues))
        throw Error(ErrorCode::invalid_argument, "expected " + std::to_string(num_alpha + std::size_t(kNumCues)) +
                                                     " parameters (alpha per output, then beta per cue), got " +
                                                     std::to_string(theta.size()));
    auto p = CombinationParams::from_flat(theta, num_alpha);
    p.validate();
    return p;
}

} // namespace vseg
