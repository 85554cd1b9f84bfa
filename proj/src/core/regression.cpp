#include "vseg/regression.hpp"

#include "vseg/core.hpp"

#include <cmath>

namespace vseg {

RidgeSolution ridge_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double ridge) {
    if (X.rows() != y.size() || X.rows() == 0) throw Error(ErrorCode::invalid_argument, "ridge_fit: shape mismatch");
    if (!X.allFinite() || !y.allFinite()) throw Error(ErrorCode::numerical, "ridge_fit: non-finite input");
    const Eigen::RowVectorXd mean_x = X.colwise().mean();
    const double mean_y = y.mean();
    const Eigen::MatrixXd Xc = X.rowwise() - mean_x;
    const Eigen::VectorXd yc = y.array() - mean_y;

    RidgeSolution sol;
    if (ridge <= 0.0) {
        sol.weights = Xc.completeOrthogonalDecomposition().solve(yc);
    } else if (Xc.rows() >= Xc.cols()) {
        Eigen::MatrixXd G = Xc.transpose() * Xc;
        G.diagonal().array() += ridge;
        sol.weights = G.ldlt().solve(Xc.transpose() * yc);
    } else {
        Eigen::MatrixXd K = Xc * Xc.transpose();
        K.diagonal().array() += ridge;
        sol.weights = Xc.transpose() * K.ldlt().solve(yc);
    }
    sol.intercept = mean_y - mean_x.dot(sol.weights);
    const Eigen::VectorXd resid = (X * sol.weights).array() + sol.intercept - y.array();
    sol.rmse = std::sqrt(resid.squaredNorm() / double(y.size()));
    return sol;
}

Eigen::VectorXd quadratic_expansion(const Eigen::VectorXd& z) {
    const Eigen::Index n = z.size();
    Eigen::VectorXd out(n * (n + 1) / 2);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) out[k++] = z[i] * z[j];
    return out;
}

Eigen::MatrixXd symmetric_from_expansion(const Eigen::VectorXd& w, Eigen::Index dim) {
    if (w.size() != dim * (dim + 1) / 2) throw Error(ErrorCode::invalid_argument, "expansion size mismatch");
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < dim; ++i)
        for (Eigen::Index j = i; j < dim; ++j, ++k) {
            if (i == j) {
                M(i, i) = w[k];
            } else {
                M(i, j) = 0.5 * w[k];
                M(j, i) = 0.5 * w[k];
            }
        }
    return M;
}

} // namespace vseg
