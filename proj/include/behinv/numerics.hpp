#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <optional>
#include <stdexcept>

namespace behinv {

// Relative rank tolerance: singular values at or below tol * sigma_max count
// as zero.  Defaults to max(rows, cols) * machine epsilon; the BEHINV_RANK_TOL
// environment variable overrides that globally, and an explicit argument at a
// call site overrides both.
inline double rank_tolerance(Eigen::Index rows, Eigen::Index cols) {
    if (const char* env = std::getenv("BEHINV_RANK_TOL")) {
        char* end = nullptr;
        const double v = std::strtod(env, &end);
        if (end != env && v > 0.0) {
            return v;
        }
    }
    return static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon();
}

// One SVD, shared by every operation that needs a rank decision, so the whole
// library uses a single notion of "numerically zero singular value".
class SvdSolver {
public:
    explicit SvdSolver(const Eigen::MatrixXd& A, std::optional<double> tol = std::nullopt)
        : rows_(A.rows()), cols_(A.cols()) {
        if (A.size() == 0) {
            throw std::invalid_argument("SvdSolver: matrix must be non-empty");
        }
        svd_.compute(A, Eigen::ComputeThinU | Eigen::ComputeFullV);
        const Eigen::VectorXd& s = svd_.singularValues();
        const double rel = tol ? *tol : rank_tolerance(rows_, cols_);
        threshold_ = rel * s(0);
        rank_ = 0;
        while (rank_ < s.size() && s(rank_) > threshold_) {
            ++rank_;
        }
    }

    Eigen::Index rank() const { return rank_; }
    const Eigen::VectorXd& singular_values() const { return svd_.singularValues(); }

    // Minimum-norm solution of min ||A x - b||_2.
    Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
        if (b.size() != rows_) {
            throw std::invalid_argument("SvdSolver::solve: right-hand side has wrong size");
        }
        if (rank_ == 0) {
            return Eigen::VectorXd::Zero(cols_);
        }
        const Eigen::VectorXd c = svd_.matrixU().leftCols(rank_).transpose() * b;
        return svd_.matrixV().leftCols(rank_) *
               c.cwiseQuotient(svd_.singularValues().head(rank_));
    }

    // Orthonormal basis of the nullspace of A; cols() - rank() columns.
    Eigen::MatrixXd nullspace() const { return svd_.matrixV().rightCols(cols_ - rank_); }

    // Orthonormal basis of the row space of A; rank() columns.
    Eigen::MatrixXd row_space() const { return svd_.matrixV().leftCols(rank_); }

    Eigen::MatrixXd pseudoinverse() const {
        if (rank_ == 0) {
            return Eigen::MatrixXd::Zero(cols_, rows_);
        }
        return svd_.matrixV().leftCols(rank_) *
               svd_.singularValues().head(rank_).cwiseInverse().asDiagonal() *
               svd_.matrixU().leftCols(rank_).transpose();
    }

private:
    Eigen::Index rows_;
    Eigen::Index cols_;
    Eigen::Index rank_ = 0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd_;
    double threshold_ = 0.0;
};

inline Eigen::Index svd_rank(const Eigen::MatrixXd& A, std::optional<double> tol = std::nullopt) {
    if (A.size() == 0) {
        return 0;
    }
    return SvdSolver(A, tol).rank();
}

}  // namespace behinv
