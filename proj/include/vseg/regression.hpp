#pragma once

#include <Eigen/Dense>

namespace vseg {

struct RidgeSolution {
    Eigen::VectorXd weights;
    double intercept = 0.0;
    double rmse = 0.0;
};

/// Ridge least squares with an unpenalised intercept:
///   min ||y - X w - b||^2 + ridge ||w||^2.
/// ridge == 0 yields the minimum-norm least-squares solution. Uses the dual
/// form when there are fewer rows than columns.
RidgeSolution ridge_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double ridge);

/// Upper-triangular quadratic expansion [z_i z_j]_{i<=j}, row-major over i.
Eigen::VectorXd quadratic_expansion(const Eigen::VectorXd& z);

/// Folds expansion weights back into the symmetric matrix M with zᵀMz = w·expansion(z).
Eigen::MatrixXd symmetric_from_expansion(const Eigen::VectorXd& w, Eigen::Index dim);

} // namespace vseg
