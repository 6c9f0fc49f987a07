#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "behinv/errors.hpp"
#include "behinv/hankel.hpp"
#include "behinv/inversion.hpp"
#include "behinv/numerics.hpp"

namespace behinv {

// Reference-tracking problem over one window: choose the next T_f input
// steps so the predicted output window lands on y_star,
//   min_g |Y_fL g - y_star|^2   s.t.  [U_p; Y_p] g = [u_past; y_past],
//                                     lower <= (U_f g per step) <= upper,
// with the same per-channel bounds applied at every one of the T_f steps.
struct TrackingProblem {
    const DataBank* bank;
    Eigen::VectorXd u_past;  // stacked inputs over the T_p history steps
    Eigen::VectorXd y_past;  // stacked outputs over the T_p history steps
    Eigen::VectorXd y_star;  // stacked target outputs, p (T_f + L) entries
    Eigen::VectorXd lower;   // per-channel bounds, m entries; +-infinity = unbounded side
    Eigen::VectorXd upper;

    TrackingProblem(const DataBank& bank_in, Eigen::VectorXd u_past_in,
                    Eigen::VectorXd y_past_in, Eigen::VectorXd y_star_in,
                    Eigen::VectorXd lower_in, Eigen::VectorXd upper_in)
        : bank(&bank_in), u_past(std::move(u_past_in)), y_past(std::move(y_past_in)),
          y_star(std::move(y_star_in)), lower(std::move(lower_in)), upper(std::move(upper_in)) {
        if (u_past.size() != bank->m * bank->T_p || y_past.size() != bank->p * bank->T_p) {
            throw std::invalid_argument("TrackingProblem: history windows do not match the bank");
        }
        if (y_star.size() != bank->p * (bank->T_f + bank->L)) {
            throw std::invalid_argument("TrackingProblem: y_star must have p (T_f + L) entries");
        }
        if (lower.size() != bank->m || upper.size() != bank->m) {
            throw std::invalid_argument("TrackingProblem: bounds must have one entry per channel");
        }
        for (int i = 0; i < lower.size(); ++i) {
            if (std::isnan(lower(i)) || std::isnan(upper(i)) || lower(i) > upper(i)) {
                throw std::invalid_argument("TrackingProblem: bounds must satisfy lower <= upper");
            }
        }
    }
};

struct TrackingConfig {
    double rho = 1.0;          // splitting penalty on v = U_f g
    int max_iterations = 50000;
    double tolerance = 1e-10;  // primal/dual infinity-norm stopping threshold
};

struct TrackingResult {
    Eigen::VectorXd u;         // chosen inputs, stacked over the T_f steps
    Eigen::VectorXd g;
    double objective;          // squared 2-norm of Y_fL g - y_star
    double equality_residual;  // history fit, 2-norm
    double box_violation;      // worst bound overshoot of the returned u
    int iterations;            // splitting iterations used (0 if none were needed)
};

namespace detail {

inline Eigen::VectorXd clamp_box(const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                                 const Eigen::VectorXd& hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}

inline double box_violation(const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                            const Eigen::VectorXd& hi) {
    double v = 0.0;
    for (int i = 0; i < x.size(); ++i) {
        v = std::max({v, lo(i) - x(i), x(i) - hi(i)});
    }
    return v;
}

}  // namespace detail

inline TrackingResult track(const TrackingProblem& problem, const TrackingConfig& config = {}) {
    const DataBank& bank = *problem.bank;
    const int m = bank.m;
    const int T_f = bank.T_f;

    // History must pin g exactly: g = g_part + Z0 w for any w.
    Eigen::MatrixXd E(bank.U_p.rows() + bank.Y_p.rows(), bank.columns());
    E << bank.U_p, bank.Y_p;
    Eigen::VectorXd h(E.rows());
    h << problem.u_past, problem.y_past;
    SvdSolver Es(E);
    const Eigen::VectorXd g_part = Es.solve(h);
    const double eq_residual = (E * g_part - h).norm();
    if (eq_residual > consistency_rtol * (1.0 + h.norm())) {
        throw InconsistentTrajectoryError(
            "track: history is not a trajectory of the recorded data (residual " +
                std::to_string(eq_residual) + ")",
            eq_residual);
    }
    const Eigen::MatrixXd Z0 = Es.nullspace();

    // Per-step bounds tiled over the horizon.
    Eigen::VectorXd lo(m * T_f), hi(m * T_f);
    for (int j = 0; j < T_f; ++j) {
        lo.segment(j * m, m) = problem.lower;
        hi.segment(j * m, m) = problem.upper;
    }

    const auto finish = [&](const Eigen::VectorXd& g, int iterations) {
        TrackingResult result;
        result.g = g;
        result.u = bank.U_f * g;
        result.objective = (bank.Y_fL * g - problem.y_star).squaredNorm();
        result.equality_residual = (E * g - h).norm();
        result.box_violation = detail::box_violation(result.u, lo, hi);
        result.iterations = iterations;
        return result;
    };

    if (Z0.cols() == 0) {
        return finish(g_part, 0);
    }

    // Drop the directions of w that neither the objective nor the constraint
    // can see; what remains has full column rank and keeps w minimum-norm.
    const Eigen::MatrixXd Q0 = bank.Y_fL * Z0;
    const Eigen::MatrixXd F0 = bank.U_f * Z0;
    Eigen::MatrixXd M(Q0.rows() + F0.rows(), Z0.cols());
    M << Q0, F0;
    SvdSolver Ms(M);
    if (Ms.rank() == 0) {
        return finish(g_part, 0);
    }
    const Eigen::MatrixXd V1 = Ms.row_space();
    const Eigen::MatrixXd Z = Z0 * V1;
    const Eigen::MatrixXd Q = Q0 * V1;
    const Eigen::MatrixXd F = F0 * V1;
    const Eigen::Index r = V1.cols();

    const Eigen::VectorXd c = problem.y_star - bank.Y_fL * g_part;
    const Eigen::VectorXd f0 = bank.U_f * g_part;

    // Splitting on v = U_f g: alternate the smooth least-squares step in w
    // with the box projection in v, coupled by the scaled multiplier lam.
    const double rho = config.rho;
    const Eigen::MatrixXd H = Q.transpose() * Q + rho * F.transpose() * F;
    const Eigen::LLT<Eigen::MatrixXd> llt(H);
    const Eigen::VectorXd Qtc = Q.transpose() * c;

    Eigen::VectorXd w = Eigen::VectorXd::Zero(r);
    Eigen::VectorXd v = detail::clamp_box(f0, lo, hi);
    Eigen::VectorXd lam = Eigen::VectorXd::Zero(m * T_f);
    int iterations = 0;
    bool converged = false;
    double primal = 0.0;
    double dual = 0.0;
    while (iterations < config.max_iterations) {
        ++iterations;
        w = llt.solve(Qtc + rho * F.transpose() * (v - f0 - lam));
        const Eigen::VectorXd t = F * w + f0;
        const Eigen::VectorXd v_prev = v;
        v = detail::clamp_box(t + lam, lo, hi);
        lam += t - v;
        primal = (t - v).cwiseAbs().maxCoeff();
        dual = rho * (F.transpose() * (v - v_prev)).cwiseAbs().maxCoeff();
        if (primal <= config.tolerance && dual <= config.tolerance) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw ConvergenceError("track: splitting did not converge within " +
                                   std::to_string(config.max_iterations) + " iterations",
                               primal, dual);
    }

    // Polish: re-solve with the apparent active bounds as equalities, which
    // removes the splitting's O(tolerance) bias.  Kept only if it is at least
    // as feasible and as good as the iterate it replaces.
    TrackingResult result = finish(g_part + Z * w, iterations);
    std::vector<int> active;
    std::vector<double> active_value;
    for (int i = 0; i < v.size(); ++i) {
        if (std::isfinite(lo(i)) && v(i) <= lo(i) + 1e-7 * (1.0 + std::abs(lo(i)))) {
            active.push_back(i);
            active_value.push_back(lo(i));
        } else if (std::isfinite(hi(i)) && v(i) >= hi(i) - 1e-7 * (1.0 + std::abs(hi(i)))) {
            active.push_back(i);
            active_value.push_back(hi(i));
        }
    }
    Eigen::VectorXd w_polish;
    bool have_polish = false;
    if (active.empty()) {
        w_polish = SvdSolver(Q).solve(c);
        have_polish = true;
    } else {
        Eigen::MatrixXd F_act(static_cast<Eigen::Index>(active.size()), r);
        Eigen::VectorXd b_act(static_cast<Eigen::Index>(active.size()));
        for (std::size_t i = 0; i < active.size(); ++i) {
            F_act.row(static_cast<Eigen::Index>(i)) = F.row(active[i]);
            b_act(static_cast<Eigen::Index>(i)) = active_value[i] - f0(active[i]);
        }
        SvdSolver Fs(F_act);
        const Eigen::VectorXd w_pin = Fs.solve(b_act);
        if ((F_act * w_pin - b_act).cwiseAbs().maxCoeff() <= 1e-9) {
            const Eigen::MatrixXd Z_act = Fs.nullspace();
            if (Z_act.cols() == 0) {
                w_polish = w_pin;
            } else {
                w_polish =
                    w_pin + Z_act * SvdSolver(Q * Z_act).solve(c - Q * w_pin);
            }
            have_polish = true;
        }
    }
    if (have_polish) {
        TrackingResult polished = finish(g_part + Z * w_polish, iterations);
        if (polished.box_violation <= std::max(result.box_violation, 1e-10) &&
            polished.objective <= result.objective + 1e-12 * (1.0 + result.objective)) {
            return polished;
        }
    }
    return result;
}

}  // namespace behinv
