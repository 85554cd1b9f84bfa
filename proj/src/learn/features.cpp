#include "vseg/learn.hpp"
#include "vseg/regression.hpp"

#include <algorithm>
#include <cmath>

namespace vseg {

namespace {

void cue_block(std::vector<double>& values, double hi, Eigen::Ref<Eigen::VectorXd> out) {
    const double n = double(values.size());
    std::array<double, kHistogramBins> hist{};
    double mean = 0.0;
    for (double v : values) {
        const double u = std::clamp(v / hi, 0.0, 1.0);
        hist[std::min(kHistogramBins - 1, std::size_t(u * double(kHistogramBins)))] += 1.0;
        mean += v;
    }
    mean /= n;
    double var = 0.0, entropy = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= n;
    for (std::size_t b = 0; b < kHistogramBins; ++b) {
        const double p = hist[b] / n;
        out[Eigen::Index(b)] = p;
        if (p > 0.0) entropy -= p * std::log(p);
    }
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + std::ptrdiff_t(mid), values.end());
    double median = values[mid];
    if (values.size() % 2 == 0) {
        const double lower = *std::max_element(values.begin(), values.begin() + std::ptrdiff_t(mid));
        median = 0.5 * (median + lower);
    }
    out[Eigen::Index(kHistogramBins)] = mean;
    out[Eigen::Index(kHistogramBins + 1)] = median;
    out[Eigen::Index(kHistogramBins + 2)] = var;
    out[Eigen::Index(kHistogramBins + 3)] = entropy;
}

} // namespace

Eigen::VectorXd extract_features(const CueVolumes& cues, const FeatureOptions& options) {
    const std::size_t n = cues.grid().voxels();
    if (n == 0) throw Error(ErrorCode::invalid_argument, "extract_features: empty volume");
    if (!(options.flow_max > 0.0)) throw Error(ErrorCode::invalid_argument, "extract_features: flow range must be positive");
    Eigen::VectorXd f = Eigen::VectorXd::Zero(Eigen::Index(kFeatureSize));
    const auto block = [&](int cue) { return f.segment(Eigen::Index(std::size_t(cue) * kCueFeatureSize), Eigen::Index(kCueFeatureSize)); };

    std::vector<double> values;
    values.reserve(3 * n);
    for (int ch = 0; ch < 3; ++ch)
        for (float v : cues.channel(Cue::color, ch)) values.push_back(v);
    cue_block(values, 1.0, block(0));

    values.assign(n, 0.0);
    const auto u = cues.channel(Cue::flow, 0), w = cues.channel(Cue::flow, 1);
    for (std::size_t i = 0; i < n; ++i) values[i] = std::hypot(double(u[i]), double(w[i]));
    cue_block(values, options.flow_max, block(1));

    if (options.use_depth) {
        const auto d = cues.channel(Cue::depth, 0);
        values.assign(d.begin(), d.end());
        cue_block(values, 1.0, block(2));
    }
    f[Eigen::Index(kFeatureSize - 1)] = 1.0;
    if (!f.allFinite()) throw Error(ErrorCode::numerical, "extract_features: non-finite statistic");
    return f;
}

double flow_percentile(std::span<const CueVolumes* const> videos, double q) {
    std::vector<double> mags;
    for (const auto* c : videos) {
        const auto u = c->channel(Cue::flow, 0), w = c->channel(Cue::flow, 1);
        for (std::size_t i = 0; i < u.size(); ++i) mags.push_back(std::hypot(double(u[i]), double(w[i])));
    }
    if (mags.empty()) return 1.0;
    const auto k = std::size_t(std::floor(std::clamp(q, 0.0, 1.0) * double(mags.size() - 1)));
    std::nth_element(mags.begin(), mags.begin() + std::ptrdiff_t(k), mags.end());
    return mags[k] > 0.0 ? mags[k] : 1.0;
}

Eigen::VectorXd FeatureScaler::apply(const Eigen::VectorXd& f) const {
    if (f.size() != mean.size()) throw Error(ErrorCode::dim_mismatch, "feature vector has the wrong length");
    return (f - mean).cwiseQuotient(scale);
}

FeatureScaler FeatureScaler::fit(std::span<const Eigen::VectorXd> features) {
    if (features.empty()) throw Error(ErrorCode::invalid_argument, "FeatureScaler: no features");
    const Eigen::Index d = features.front().size();
    FeatureScaler s;
    s.mean = Eigen::VectorXd::Zero(d);
    s.scale = Eigen::VectorXd::Ones(d);
    for (const auto& f : features) {
        if (f.size() != d) throw Error(ErrorCode::dim_mismatch, "FeatureScaler: inconsistent feature lengths");
        s.mean += f / double(features.size());
    }
    Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
    for (const auto& f : features) var += (f - s.mean).cwiseAbs2() / double(features.size());
    for (Eigen::Index i = 0; i < d; ++i)
        if (var[i] > 1e-24) s.scale[i] = std::sqrt(var[i]);
    // Unit expected norm keeps quadratic terms on the scale of the linear ones.
    s.scale *= std::sqrt(double(d - 1));
    s.mean[d - 1] = 0.0;
    s.scale[d - 1] = 1.0;
    return s;
}

CombinationParams predict_params(const RegressorModel& model, const Eigen::VectorXd& features) {
    const Eigen::VectorXd z = model.scaler.apply(features);
    std::vector<double> theta(model.B.size());
    for (std::size_t m = 0; m < model.B.size(); ++m) {
        const double v = z.dot(model.B[m] * z);
        theta[m] = std::isfinite(v) ? std::clamp(v, kParamFloor, kParamCeil) : kParamFloor;
    }
    for (auto [i, v] : model.fixed)
        if (i < theta.size()) theta[i] = v;
    return CombinationParams::from_flat(theta, model.num_alpha);
}

RegressorModel fit_regressor(std::span<const Eigen::VectorXd> features, std::span<const CombinationParams> targets,
                             double ridge) {
    if (features.size() != targets.size()) throw Error(ErrorCode::invalid_argument, "fit_regressor: count mismatch");
    if (features.size() < 2) throw Error(ErrorCode::invalid_argument, "fit_regressor: need at least two pairs");
    RegressorModel model;
    model.num_alpha = targets.front().alpha.size();
    model.num_beta = targets.front().beta.size();
    model.ridge = ridge;
    model.scaler = FeatureScaler::fit(features);

    const Eigen::Index d = features.front().size();
    const Eigen::Index q = d * (d + 1) / 2 - 1;  // bias^2 becomes the intercept
    Eigen::MatrixXd X(Eigen::Index(features.size()), q);
    for (std::size_t i = 0; i < features.size(); ++i)
        X.row(Eigen::Index(i)) = quadratic_expansion(model.scaler.apply(features[i])).head(q).transpose();

    const std::size_t P = model.num_alpha + model.num_beta;
    double sse = 0.0;
    for (std::size_t m = 0; m < P; ++m) {
        Eigen::VectorXd y(Eigen::Index(targets.size()));
        for (std::size_t i = 0; i < targets.size(); ++i) {
            if (targets[i].size() != P) throw Error(ErrorCode::dim_mismatch, "fit_regressor: inconsistent parameter sizes");
            y[Eigen::Index(i)] = targets[i][m];
        }
        const auto sol = ridge_fit(X, y, ridge);
        Eigen::VectorXd w(q + 1);
        w.head(q) = sol.weights;
        w[q] = sol.intercept;
        model.B.push_back(symmetric_from_expansion(w, d));
        sse += sol.rmse * sol.rmse * double(targets.size());
    }
    model.rmse = std::sqrt(sse / double(targets.size() * P));
    return model;
}

} // namespace vseg
