#include "vseg/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace vseg {

namespace {

class NormalizedOperator {
public:
    explicit NormalizedOperator(const AffinityGraph& g) : g_(g), inv_sqrt_(g.n) {
        for (std::size_t i = 0; i < g.n; ++i) {
            if (!(g.volume[i] > 0.0))
                throw Error(ErrorCode::numerical, "node " + std::to_string(i) + " has non-positive volume");
            inv_sqrt_[Eigen::Index(i)] = 1.0 / std::sqrt(g.volume[i]);
        }
    }

    /// Y = S X column by column.
    void apply(const Eigen::MatrixXd& X, Eigen::MatrixXd& Y) const {
        Y.resize(X.rows(), X.cols());
        Y.setZero();
        for (Eigen::Index c = 0; c < X.cols(); ++c) {
            for (const auto& e : g_.edges) {
                const double w = e.w * inv_sqrt_[e.u] * inv_sqrt_[e.v];
                Y(e.u, c) += w * X(e.v, c);
                Y(e.v, c) += w * X(e.u, c);
            }
        }
    }

    Eigen::MatrixXd dense() const {
        Eigen::MatrixXd S = Eigen::MatrixXd::Zero(Eigen::Index(g_.n), Eigen::Index(g_.n));
        for (const auto& e : g_.edges) {
            const double w = e.w * inv_sqrt_[e.u] * inv_sqrt_[e.v];
            S(e.u, e.v) += w;
            S(e.v, e.u) += w;
        }
        return S;
    }

private:
    const AffinityGraph& g_;
    Eigen::VectorXd inv_sqrt_;
};

// Orthonormalises the columns of B against Q (two passes) and among
// themselves; returns the surviving columns.
Eigen::MatrixXd orthonormalize_against(const Eigen::MatrixXd& Q, Eigen::MatrixXd B) {
    Eigen::MatrixXd out(B.rows(), 0);
    for (Eigen::Index c = 0; c < B.cols(); ++c) {
        Eigen::VectorXd v = B.col(c);
        const double norm0 = v.norm();
        if (norm0 == 0.0) continue;
        for (int pass = 0; pass < 2; ++pass) {
            if (Q.cols() > 0) v -= Q * (Q.transpose() * v);
            if (out.cols() > 0) v -= out * (out.transpose() * v);
        }
        const double norm = v.norm();
        if (norm <= 1e-10 * norm0) continue;
        out.conservativeResize(Eigen::NoChange, out.cols() + 1);
        out.col(out.cols() - 1) = v / norm;
    }
    return out;
}

void fix_signs(Eigen::MatrixXd& V) {
    for (Eigen::Index c = 0; c < V.cols(); ++c) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index r = 0; r < V.rows(); ++r)
            if (std::abs(V(r, c)) > best * (1.0 + 1e-9)) {
                best = std::abs(V(r, c));
                arg = r;
            }
        if (V(arg, c) < 0.0) V.col(c) *= -1.0;
    }
}

SymmetricEigenpairs dense_top(const NormalizedOperator& op, std::size_t count) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.dense());
    if (es.info() != Eigen::Success) throw Error(ErrorCode::numerical, "dense eigensolver failed");
    const Eigen::Index n = es.eigenvalues().size();
    SymmetricEigenpairs out;
    out.values.resize(Eigen::Index(count));
    out.vectors.resize(n, Eigen::Index(count));
    for (Eigen::Index i = 0; i < Eigen::Index(count); ++i) {
        out.values[i] = es.eigenvalues()[n - 1 - i];
        out.vectors.col(i) = es.eigenvectors().col(n - 1 - i);
    }
    out.residuals = Eigen::VectorXd::Zero(Eigen::Index(count));
    return out;
}

} // namespace

SymmetricEigenpairs symmetric_top_eigenpairs(const AffinityGraph& graph, std::size_t count,
                                             const EigenOptions& options) {
    const std::size_t n = graph.n;
    if (count == 0 || count > n)
        throw Error(ErrorCode::invalid_argument, "requested " + std::to_string(count) + " eigenpairs of a " +
                                                     std::to_string(n) + "-node graph");
    NormalizedOperator op(graph);
    SymmetricEigenpairs result;
    if (n <= options.dense_threshold) {
        result = dense_top(op, count);
        fix_signs(result.vectors);
        return result;
    }

    // Restarted block Krylov with full reorthogonalisation and Rayleigh-Ritz.
    const Eigen::Index N = Eigen::Index(n);
    const Eigen::Index want = Eigen::Index(count);
    const Eigen::Index block = std::min<Eigen::Index>(N, want + 2);
    const Eigen::Index max_basis = std::min<Eigen::Index>(N, std::max<Eigen::Index>(Eigen::Index(options.max_basis), 4 * block));

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal;
    auto random_block = [&](Eigen::Index cols) {
        Eigen::MatrixXd R(N, cols);
        for (Eigen::Index c = 0; c < cols; ++c)
            for (Eigen::Index r = 0; r < N; ++r) R(r, c) = normal(rng);
        return R;
    };

    Eigen::MatrixXd start = random_block(block);
    Eigen::VectorXd residuals;
    for (int restart = 0; restart <= options.max_restarts; ++restart) {
        Eigen::MatrixXd Q = orthonormalize_against(Eigen::MatrixXd(N, 0), start);
        Eigen::MatrixXd SQ;
        op.apply(Q, SQ);
        Eigen::MatrixXd H = Q.transpose() * SQ;
        while (true) {
            Eigen::MatrixXd Hs = 0.5 * (H + H.transpose());
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Hs);
            const Eigen::Index m = Hs.rows();
            const Eigen::Index take = std::min(want, m);
            Eigen::MatrixXd coeff(m, take);
            Eigen::VectorXd theta(take);
            for (Eigen::Index i = 0; i < take; ++i) {
                theta[i] = es.eigenvalues()[m - 1 - i];
                coeff.col(i) = es.eigenvectors().col(m - 1 - i);
            }
            Eigen::MatrixXd Y = Q * coeff;
            Eigen::MatrixXd R = SQ * coeff - Y * theta.asDiagonal();
            residuals = R.colwise().norm().transpose();
            const bool exhausted = Q.cols() == N;
            if (take == want && (residuals.maxCoeff() <= options.tolerance || exhausted)) {
                result.values = theta;
                result.vectors = Y;
                result.residuals = residuals;
                fix_signs(result.vectors);
                return result;
            }
            if (Q.cols() >= max_basis) {
                const Eigen::Index keep = std::min<Eigen::Index>(m, block);
                start.resize(N, keep);
                for (Eigen::Index i = 0; i < keep; ++i) start.col(i) = Q * es.eigenvectors().col(m - 1 - i);
                break;
            }
            const Eigen::Index room = std::min<Eigen::Index>(block, max_basis - Q.cols());
            Eigen::MatrixXd next = orthonormalize_against(Q, SQ.rightCols(std::min<Eigen::Index>(room, SQ.cols())));
            if (next.cols() == 0) next = orthonormalize_against(Q, random_block(room));
            if (next.cols() == 0) {
                start = random_block(block);
                break;
            }
            Eigen::MatrixXd Snext;
            op.apply(next, Snext);
            const Eigen::Index old = Q.cols(), add = next.cols();
            Q.conservativeResize(Eigen::NoChange, old + add);
            Q.rightCols(add) = next;
            SQ.conservativeResize(Eigen::NoChange, old + add);
            SQ.rightCols(add) = Snext;
            Eigen::MatrixXd Hn(old + add, old + add);
            Hn.topLeftCorner(old, old) = H;
            Hn.rightCols(add) = Q.transpose() * Snext;
            Hn.bottomLeftCorner(add, old) = Hn.topRightCorner(old, add).transpose();
            H = std::move(Hn);
        }
    }
    std::ostringstream os;
    os << "eigensolver did not converge; residual norms:";
    for (Eigen::Index i = 0; i < residuals.size(); ++i) os << ' ' << residuals[i];
    throw Error(ErrorCode::numerical, os.str());
}

SpectralEmbedding top_eigenpairs(const AffinityGraph& graph, std::size_t num_super, std::size_t clusters,
                                 const EigenOptions& options) {
    if (clusters < 2 || clusters > graph.n)
        throw Error(ErrorCode::invalid_argument, "cluster count " + std::to_string(clusters) + " outside [2, " +
                                                     std::to_string(graph.n) + "]");
    const auto eig = symmetric_top_eigenpairs(graph, clusters, options);
    SpectralEmbedding emb;
    emb.num_super = num_super;
    emb.volumes = graph.volume;
    emb.eigenvalues.assign(eig.values.data(), eig.values.data() + eig.values.size());
    emb.vectors = eig.vectors;
    for (Eigen::Index i = 0; i < emb.vectors.rows(); ++i) emb.vectors.row(i) /= std::sqrt(graph.volume[std::size_t(i)]);
    emb.rows = emb.vectors;
    for (Eigen::Index i = 0; i < emb.rows.rows(); ++i) {
        const double norm = emb.rows.row(i).norm();
        if (norm > 0.0) emb.rows.row(i) /= norm;
    }
    return emb;
}

SpectralEmbedding top_eigenpairs(const ReducedGraph& graph, std::size_t clusters, const EigenOptions& options) {
    return top_eigenpairs(graph.affinity(), graph.num_super(), clusters, options);
}

std::size_t choose_cluster_count(const ReducedGraph& graph, std::size_t max_clusters, const EigenOptions& options) {
    const std::size_t m = std::min(max_clusters, graph.num_nodes());
    if (m < 3) return 2;
    const auto eig = symmetric_top_eigenpairs(graph.affinity(), m, options);
    std::size_t best = 2;
    double best_gap = -1.0;
    for (std::size_t r = 2; r < m; ++r) {
        const double lr = eig.values[Eigen::Index(r - 1)], next = eig.values[Eigen::Index(r)];
        const double gap = (lr - next) / std::max(std::abs(lr), 1e-12);
        if (gap > best_gap) {
            best_gap = gap;
            best = r;
        }
    }
    return best;
}

} // namespace vseg
