#include "vseg/proxy.hpp"
#include "vseg/regression.hpp"

#include <algorithm>
#include <cmath>

namespace vseg {

double ProxyModel::value(const Eigen::VectorXd& chi) const {
    if (chi.size() != Y.rows()) throw Error(ErrorCode::dim_mismatch, "proxy: chi has the wrong length");
    return chi.dot(Y * chi);
}

Eigen::VectorXd ProxyModel::gradient(const SpectralRepresentation& rep) const {
    if (rep.chi.size() != Y.rows()) throw Error(ErrorCode::dim_mismatch, "proxy: chi has the wrong length");
    return rep.jacobian * ((Y + Y.transpose()) * rep.chi);
}

ProxyModel fit_proxy(std::span<const ProxySample> samples, double ridge) {
    if (samples.empty()) throw Error(ErrorCode::invalid_argument, "fit_proxy: no samples");
    const Eigen::Index d = samples.front().chi.size();
    if (d < 1) throw Error(ErrorCode::invalid_argument, "fit_proxy: empty chi");
    bool identical = samples.size() > 1;
    for (const auto& s : samples) {
        if (s.chi.size() != d) throw Error(ErrorCode::dim_mismatch, "fit_proxy: inconsistent chi lengths");
        if (!s.chi.allFinite() || !std::isfinite(s.performance))
            throw Error(ErrorCode::numerical, "fit_proxy: non-finite sample");
        if (s.chi != samples.front().chi || s.performance != samples.front().performance) identical = false;
    }
    if (identical) throw Error(ErrorCode::degenerate, "fit_proxy: all samples are identical");

    // The last chi entry is the constant bias; its square is the fitted intercept.
    const Eigen::Index q = d * (d + 1) / 2 - 1;
    Eigen::MatrixXd X(Eigen::Index(samples.size()), q);
    Eigen::VectorXd y(Eigen::Index(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        X.row(Eigen::Index(i)) = quadratic_expansion(samples[i].chi).head(q).transpose();
        y[Eigen::Index(i)] = samples[i].performance;
    }
    const auto sol = ridge_fit(X, y, ridge);
    Eigen::VectorXd w(q + 1);
    w.head(q) = sol.weights;
    w[q] = sol.intercept;

    ProxyModel model;
    model.Y = symmetric_from_expansion(w, d);
    model.ridge = ridge;
    model.fit_window.assign(samples.begin(), samples.end());
    double sse = 0.0;
    for (const auto& s : samples) {
        const double r = model.value(s.chi) - s.performance;
        sse += r * r;
    }
    model.rmse = std::sqrt(sse / double(samples.size()));
    if (!model.Y.allFinite()) throw Error(ErrorCode::numerical, "fit_proxy: non-finite coefficients");
    return model;
}

AscentResult maximize_proxy(const ProxyModel& model, const CombinationParams& init, const RepresentationFn& represent,
                            const AscentOptions& options) {
    init.validate();
    const std::size_t K = init.alpha.size();
    auto evaluate = [&](const CombinationParams& p, SpectralRepresentation& rep) {
        rep = represent(p);
        const double v = model.value(rep.chi);
        if (!std::isfinite(v)) throw Error(ErrorCode::numerical, "maximize_proxy: non-finite proxy at " + to_string(p));
        return v;
    };
    auto from_flat = [&](const std::vector<double>& f) { return CombinationParams::from_flat(f, K); };

    std::vector<double> theta = init.flat();
    std::vector<bool> frozen(theta.size(), false);
    for (auto i : options.frozen)
        if (i < frozen.size()) frozen[i] = true;

    SpectralRepresentation rep;
    AscentResult res;
    res.params = init;
    res.proxy_value = evaluate(init, rep);
    res.trace.push_back(res.proxy_value);

    // Steps are taken in log-parameter space so every scale moves proportionally.
    double step = options.step;
    while (res.steps < options.max_steps && step >= options.min_step) {
        const Eigen::VectorXd g = model.gradient(rep);
        Eigen::VectorXd dir(Eigen::Index(theta.size()));
        for (std::size_t i = 0; i < theta.size(); ++i) dir[Eigen::Index(i)] = frozen[i] ? 0.0 : g[Eigen::Index(i)] * theta[i];
        const double norm = dir.norm();
        if (!(norm > 0.0)) break;
        dir /= norm;

        std::vector<double> next(theta);
        double moved = 0.0;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            next[i] = std::clamp(theta[i] * std::exp(step * dir[Eigen::Index(i)]), options.lower, options.upper);
            moved += std::pow(std::log(next[i] / theta[i]), 2);
        }
        if (std::sqrt(moved) < options.min_step) break;

        SpectralRepresentation cand;
        const double v = evaluate(from_flat(next), cand);
        if (v < res.proxy_value) {
            step *= 0.5;
            continue;
        }
        theta = std::move(next);
        rep = std::move(cand);
        res.params = from_flat(theta);
        res.proxy_value = v;
        res.trace.push_back(v);
        ++res.steps;
    }
    return res;
}

std::vector<CombinationParams> sample_neighborhood(const CombinationParams& center, std::size_t count, double sigma,
                                                   std::mt19937_64& rng, std::span<const std::size_t> frozen) {
    const auto flat = center.flat();
    std::vector<bool> fixed(flat.size(), false);
    for (auto i : frozen)
        if (i < fixed.size()) fixed[i] = true;
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<CombinationParams> out;
    out.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        std::vector<double> p(flat);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double z = normal(rng);
            if (!fixed[i]) p[i] = std::clamp(p[i] * std::exp(sigma * z), kParamFloor, kParamCeil);
        }
        out.push_back(CombinationParams::from_flat(p, center.alpha.size()));
    }
    return out;
}

} // namespace vseg
