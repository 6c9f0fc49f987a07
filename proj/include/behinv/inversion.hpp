#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "behinv/errors.hpp"
#include "behinv/hankel.hpp"
#include "behinv/numerics.hpp"
#include "behinv/types.hpp"

namespace behinv {

// A supplied window pair is accepted as a trajectory of the recorded behavior
// when the least-squares residual stays below this factor times (1 + |rhs|).
constexpr double consistency_rtol = 1e-6;

// Minimum-norm solver for the bank's fixed stacked system [U_p; Y_p; Y_fL],
// factored once so repeated solves against rolling windows stay cheap.
class BankSolver {
public:
    explicit BankSolver(const DataBank& bank)
        : m_(bank.m), p_(bank.p), T_p_(bank.T_p), T_f_(bank.T_f), L_(bank.L),
          stack_(stacked(bank)), svd_(stack_) {}

    static Eigen::MatrixXd stacked(const DataBank& bank) {
        Eigen::MatrixXd S(bank.U_p.rows() + bank.Y_p.rows() + bank.Y_fL.rows(), bank.columns());
        S << bank.U_p, bank.Y_p, bank.Y_fL;
        return S;
    }

    // Fits g so the bank's windows reproduce the supplied ones:
    //   [U_p; Y_p; Y_fL] g = [u_past; y_past; y_future]
    // returning the minimum-norm least-squares g and the fit residual.
    std::pair<Eigen::VectorXd, double> fit(const Eigen::VectorXd& u_past,
                                           const Eigen::VectorXd& y_past,
                                           const Eigen::VectorXd& y_future) const {
        if (u_past.size() != m_ * T_p_ || y_past.size() != p_ * T_p_ ||
            y_future.size() != p_ * (T_f_ + L_)) {
            throw std::invalid_argument("BankSolver: window sizes do not match the bank");
        }
        Eigen::VectorXd rhs(stack_.rows());
        rhs << u_past, y_past, y_future;
        Eigen::VectorXd g = svd_.solve(rhs);
        const double residual = (stack_ * g - rhs).norm();
        return {std::move(g), residual};
    }

    static bool consistent(double residual, const Eigen::VectorXd& u_past,
                           const Eigen::VectorXd& y_past, const Eigen::VectorXd& y_future) {
        const double scale =
            1.0 + std::sqrt(u_past.squaredNorm() + y_past.squaredNorm() + y_future.squaredNorm());
        return residual <= consistency_rtol * scale;
    }

private:
    int m_, p_, T_p_, T_f_, L_;
    Eigen::MatrixXd stack_;
    SvdSolver svd_;
};

// One estimation problem: which input produced y_future, given the preceding
// T_p steps of inputs and outputs.
struct InversionProblem {
    const DataBank* bank;
    Eigen::VectorXd u_past;    // stacked u over the T_p past steps
    Eigen::VectorXd y_past;    // stacked y over the T_p past steps
    Eigen::VectorXd y_future;  // stacked y over the T_f + L steps from the window start

    InversionProblem(const DataBank& bank_in, Eigen::VectorXd u_past_in,
                     Eigen::VectorXd y_past_in, Eigen::VectorXd y_future_in)
        : bank(&bank_in), u_past(std::move(u_past_in)), y_past(std::move(y_past_in)),
          y_future(std::move(y_future_in)) {
        if (u_past.size() != bank->m * bank->T_p || y_past.size() != bank->p * bank->T_p ||
            y_future.size() != bank->p * (bank->T_f + bank->L)) {
            throw std::invalid_argument("InversionProblem: window sizes do not match the bank");
        }
    }
};

struct SolveResult {
    Eigen::VectorXd g;
    double residual;
};

inline SolveResult solve_g(const InversionProblem& problem) {
    BankSolver solver(*problem.bank);
    auto [g, residual] = solver.fit(problem.u_past, problem.y_past, problem.y_future);
    if (!BankSolver::consistent(residual, problem.u_past, problem.y_past, problem.y_future)) {
        throw InconsistentTrajectoryError(
            "solve_g: windows are not a trajectory of the recorded data (residual " +
                std::to_string(residual) + ")",
            residual);
    }
    return {std::move(g), residual};
}

// The estimated input over the T_f future steps, stacked.
inline Eigen::VectorXd recover_input(const InversionProblem& problem) {
    return problem.bank->U_f * solve_g(problem).g;
}

// Checks that every g left undetermined by [U_p; Y_p; Y_fL] is also invisible
// to U_f, which is what makes the recovered input independent of the solver's
// choice of g.  The reverse inclusion (adding the U_f rows only shrinks the
// nullspace) is asserted alongside.
inline bool nullspace_equality_check(const DataBank& bank) {
    const Eigen::MatrixXd S3 = BankSolver::stacked(bank);
    Eigen::MatrixXd S4(S3.rows() + bank.U_f.rows(), bank.columns());
    S4 << bank.U_p, bank.Y_p, bank.U_f, bank.Y_fL;

    SvdSolver svd3(S3);
    SvdSolver svd4(S4);
    if (svd3.rank() != svd4.rank()) {
        return false;
    }
    const Eigen::MatrixXd Z = svd3.nullspace();
    if (Z.cols() == 0) {
        return true;
    }
    const double tol_uf = 1e-8 * std::max(1.0, bank.U_f.norm());
    const double tol_s3 = 1e-8 * std::max(1.0, S3.norm());
    const Eigen::MatrixXd W = svd4.nullspace();
    const bool forward = (bank.U_f * Z).norm() <= tol_uf;
    const bool reverse = W.cols() == 0 || (S3 * W).norm() <= tol_s3;
    return forward && reverse;
}

struct BatchEstimate {
    Signal u_hat;         // starts T_p samples after the stream start
    double residual_max;  // worst fit residual across batches
    int batches;
};

// Batch estimation: walk the output stream in strides of T_f, solving for
// each window against the T_p preceding steps, where the input side of the
// history is the algorithm's own earlier estimates.  init_u / init_y stand in
// for the trajectory over the stream's first T_p samples and default to rest
// (all zero); estimation starts at stream sample T_p.
inline BatchEstimate run_batch_estimator(const DataBank& bank, const Signal& y_stream,
                                    std::optional<Signal> init_u = std::nullopt,
                                    std::optional<Signal> init_y = std::nullopt) {
    const int T_p = bank.T_p;
    const int T_f = bank.T_f;
    const int L = bank.L;
    if (y_stream.dim() != bank.p) {
        throw std::invalid_argument("run_batch_estimator: output stream has wrong dimension");
    }
    const int S = y_stream.length();
    if (S < T_p + T_f + L) {
        throw std::invalid_argument("run_batch_estimator: stream shorter than T_p + T_f + L");
    }
    if (init_u && (init_u->dim() != bank.m || init_u->length() != T_p)) {
        throw std::invalid_argument("run_batch_estimator: init_u must hold T_p input samples");
    }
    if (init_y && (init_y->dim() != bank.p || init_y->length() != T_p)) {
        throw std::invalid_argument("run_batch_estimator: init_y must hold T_p output samples");
    }

    const int batches = (S - T_p - L) / T_f;
    // Rolling input record: assumed history over [0, T_p), then emitted batches.
    Eigen::MatrixXd u_rec = Eigen::MatrixXd::Zero(bank.m, T_p + batches * T_f);
    if (init_u) {
        u_rec.leftCols(T_p) = init_u->data();
    }
    // Output record: the assumed history over [0, T_p), measurements beyond.
    Eigen::MatrixXd y_rec = y_stream.data();
    y_rec.leftCols(T_p) = init_y ? init_y->data() : Eigen::MatrixXd::Zero(bank.p, T_p);

    BankSolver solver(bank);
    double residual_max = 0.0;
    for (int j = 0; j < batches; ++j) {
        const int k = T_p + j * T_f;
        const Eigen::VectorXd u_past = u_rec.middleCols(k - T_p, T_p).reshaped();
        const Eigen::VectorXd y_past = y_rec.middleCols(k - T_p, T_p).reshaped();
        const Eigen::VectorXd y_future = y_stream.data().middleCols(k, T_f + L).reshaped();
        auto [g, residual] = solver.fit(u_past, y_past, y_future);
        if (!BankSolver::consistent(residual, u_past, y_past, y_future)) {
            throw InconsistentTrajectoryError(
                "run_batch_estimator: inconsistent window at stream index " +
                    std::to_string(y_stream.start_index() + k) + " (residual " +
                    std::to_string(residual) + ")",
                residual, y_stream.start_index() + k);
        }
        residual_max = std::max(residual_max, residual);
        u_rec.middleCols(k, T_f) = (bank.U_f * g).reshaped(bank.m, T_f);
    }
    return {Signal(y_stream.start_index() + T_p, u_rec.middleCols(T_p, batches * T_f)),
            residual_max, batches};
}

// Realtime estimation state: a T_f = 1 bank plus ring buffers of the last T_p
// input estimates and the last T_p + L measurements.  Each step consumes y(k)
// and returns the estimate of u(k - L); times before the first step are taken
// from the init windows (rest, i.e. zero, by default).
class InverterState {
public:
    explicit InverterState(DataBank bank, std::optional<Signal> init_u = std::nullopt,
                           std::optional<Signal> init_y = std::nullopt)
        : bank_(std::move(bank)), solver_(bank_) {
        if (bank_.T_f != 1) {
            throw std::invalid_argument("InverterState: bank must be built with T_f = 1");
        }
        u_hist_ = Eigen::MatrixXd::Zero(bank_.m, bank_.T_p);
        y_hist_ = Eigen::MatrixXd::Zero(bank_.p, bank_.T_p + bank_.L);
        if (init_u) {
            if (init_u->dim() != bank_.m || init_u->length() != bank_.T_p) {
                throw std::invalid_argument("InverterState: init_u must hold T_p input samples");
            }
            u_hist_ = init_u->data();
        }
        if (init_y) {
            if (init_y->dim() != bank_.p || init_y->length() != bank_.T_p + bank_.L) {
                throw std::invalid_argument(
                    "InverterState: init_y must hold T_p + L output samples");
            }
            y_hist_ = init_y->data();
        }
    }

    const DataBank& bank() const { return bank_; }
    // Index of the next measurement to consume (number of steps taken so far).
    int time() const { return k_; }
    double residual_max() const { return residual_max_; }
    double last_residual() const { return last_residual_; }

    // Consume y(k), return the estimate of u(k - L).
    Eigen::VectorXd step(const Eigen::VectorXd& y_k) {
        if (y_k.size() != bank_.p) {
            throw std::invalid_argument("InverterState::step: measurement has wrong dimension");
        }
        const int T_p = bank_.T_p;
        const int L = bank_.L;
        const Eigen::VectorXd u_past = u_hist_.reshaped();
        const Eigen::VectorXd y_past = y_hist_.leftCols(T_p).reshaped();
        Eigen::VectorXd y_future(bank_.p * (L + 1));
        y_future << y_hist_.rightCols(L).reshaped(), y_k;
        auto [g, residual] = solver_.fit(u_past, y_past, y_future);
        if (!BankSolver::consistent(residual, u_past, y_past, y_future)) {
            throw InconsistentTrajectoryError(
                "InverterState::step: inconsistent window at step " + std::to_string(k_) +
                    " (residual " + std::to_string(residual) + ")",
                residual, k_);
        }
        Eigen::VectorXd u_hat = bank_.U_f * g;
        // Shift the ring buffers only after the solve succeeded.
        if (T_p > 1) {
            u_hist_.leftCols(T_p - 1) = u_hist_.rightCols(T_p - 1).eval();
        }
        u_hist_.col(T_p - 1) = u_hat;
        if (T_p + L > 1) {
            y_hist_.leftCols(T_p + L - 1) = y_hist_.rightCols(T_p + L - 1).eval();
        }
        y_hist_.col(T_p + L - 1) = y_k;
        last_residual_ = residual;
        residual_max_ = std::max(residual_max_, residual);
        ++k_;
        return u_hat;
    }

private:
    DataBank bank_;
    BankSolver solver_;
    Eigen::MatrixXd u_hist_;  // columns ordered oldest to newest
    Eigen::MatrixXd y_hist_;
    int k_ = 0;
    double residual_max_ = 0.0;
    double last_residual_ = 0.0;
};

inline Eigen::VectorXd step_realtime_estimator(InverterState& state, const Eigen::VectorXd& y_k) {
    return state.step(y_k);
}

// The L trailing input samples that extend a recovered length-t window to the
// length t + L the output window already spans: the depth-L Hankel over
// u[t .. T+L-1] applied to the same g.  Empty when L = 0.
inline Eigen::VectorXd complete_input_tail(const DataBank& bank, const Eigen::VectorXd& g,
                                           int t) {
    if (t < 0 || t > bank.T) {
        throw std::invalid_argument("complete_input_tail: t must be in [0, T]");
    }
    if (g.size() != bank.T - t + 1) {
        throw std::invalid_argument("complete_input_tail: g must have T - t + 1 entries");
    }
    if (bank.L == 0) {
        return Eigen::VectorXd(0);
    }
    const Eigen::MatrixXd H =
        detail::hankel_block(bank.u_d.data().middleCols(t, bank.T + bank.L - t), bank.L);
    return H * g;
}

}  // namespace behinv
