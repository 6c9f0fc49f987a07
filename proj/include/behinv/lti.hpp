#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>

#include "behinv/numerics.hpp"
#include "behinv/types.hpp"

namespace behinv {

struct SimulationResult {
    Signal x;  // states, one sample longer than u: the final column is the post-run state
    Signal y;  // outputs, same length and start index as u
};

inline SimulationResult simulate(const StateSpaceSystem& sys, const Eigen::VectorXd& x0,
                                 const Signal& u) {
    if (x0.size() != sys.state_dim()) {
        throw std::invalid_argument("simulate: x0 has wrong dimension");
    }
    if (u.dim() != sys.input_dim()) {
        throw std::invalid_argument("simulate: input signal has wrong dimension");
    }
    const int len = u.length();
    Eigen::MatrixXd xs(sys.state_dim(), len + 1);
    Eigen::MatrixXd ys(sys.output_dim(), len);
    xs.col(0) = x0;
    for (int i = 0; i < len; ++i) {
        ys.col(i) = sys.C * xs.col(i) + sys.D * u.data().col(i);
        xs.col(i + 1) = sys.A * xs.col(i) + sys.B * u.data().col(i);
    }
    return {Signal(u.start_index(), std::move(xs)), Signal(u.start_index(), std::move(ys))};
}

// Block lower-triangular convolution matrix of size p(t+1) x m(t+1): D on the
// block diagonal, C A^(j-1) B on the j-th block sub-diagonal.
inline Eigen::MatrixXd toeplitz_matrix(const StateSpaceSystem& sys, int t) {
    if (t < 0) {
        throw std::invalid_argument("toeplitz_matrix: t must be >= 0");
    }
    const int m = sys.input_dim();
    const int p = sys.output_dim();
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(p * (t + 1), m * (t + 1));
    // Markov parameters h_0 = D, h_j = C A^(j-1) B, filled along block diagonals.
    Eigen::MatrixXd h = sys.D;
    Eigen::MatrixXd CA = sys.C;
    for (int j = 0; j <= t; ++j) {
        if (j > 0) {
            h = CA * sys.B;
            CA = CA * sys.A;
        }
        for (int i = j; i <= t; ++i) {
            T.block(i * p, (i - j) * m, p, m) = h;
        }
    }
    return T;
}

// Stack of C, CA, ..., CA^L; size p(L+1) x n.
inline Eigen::MatrixXd observability_matrix(const StateSpaceSystem& sys, int L) {
    if (L < 0) {
        throw std::invalid_argument("observability_matrix: L must be >= 0");
    }
    const int n = sys.state_dim();
    const int p = sys.output_dim();
    Eigen::MatrixXd O(p * (L + 1), n);
    Eigen::MatrixXd CA = sys.C;
    for (int i = 0; i <= L; ++i) {
        O.middleRows(i * p, p) = CA;
        if (i < L) {
            CA = CA * sys.A;
        }
    }
    return O;
}

// Smallest l >= 1 such that the stack of C, CA, ..., CA^(l-1) has rank n.  The
// rank of that stack cannot grow past l = n, so absence by then means the
// system is unobservable.
inline int observability_index(const StateSpaceSystem& sys) {
    const int n = sys.state_dim();
    for (int l = 1; l <= n; ++l) {
        if (svd_rank(observability_matrix(sys, l - 1)) == n) {
            return l;
        }
    }
    throw std::invalid_argument("observability_index: system is not observable");
}

// Least L for which an L-delay left inverse exists, i.e. the first L with
// rank(T_L) - rank(T_{L-1}) = m (with rank(T_{-1}) taken as 0).  Searches
// L = 0..L_max (default: state dimension) and returns nullopt when no L in
// that range qualifies.
inline std::optional<int> inherent_delay(const StateSpaceSystem& sys,
                                         std::optional<int> L_max = std::nullopt) {
    if (sys.input_dim() > sys.output_dim()) {
        throw std::invalid_argument(
            "inherent_delay: more inputs than outputs, no left inverse exists");
    }
    const int bound = L_max ? *L_max : sys.state_dim();
    if (bound < 0) {
        throw std::invalid_argument("inherent_delay: L_max must be >= 0");
    }
    Eigen::Index prev_rank = 0;
    for (int L = 0; L <= bound; ++L) {
        const Eigen::Index r = svd_rank(toeplitz_matrix(sys, L));
        if (r - prev_rank == sys.input_dim()) {
            return L;
        }
        prev_rank = r;
    }
    return std::nullopt;
}

// State-space realization of the L-delay left inverse.  Driven by the stacked
// output window y_{[k, k+L]}, it reproduces u(k):
//   x(k+1) = A x(k) + B y_{[k, k+L]},   u(k) = C x(k) + D y_{[k, k+L]}.
// K is the minimum-Frobenius-norm left inverse picked from K T_L = [I_m 0].
struct InverseRealization {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::MatrixXd C;
    Eigen::MatrixXd D;
    Eigen::MatrixXd K;
    int L;
};

inline InverseRealization build_model_inverse(const StateSpaceSystem& sys, int L) {
    if (L < 0) {
        throw std::invalid_argument("build_model_inverse: L must be >= 0");
    }
    if (sys.input_dim() > sys.output_dim()) {
        throw std::invalid_argument(
            "build_model_inverse: more inputs than outputs, no left inverse exists");
    }
    const int m = sys.input_dim();
    const Eigen::MatrixXd T_L = toeplitz_matrix(sys, L);
    const Eigen::Index prev_rank = (L == 0) ? 0 : svd_rank(toeplitz_matrix(sys, L - 1));
    SvdSolver svd(T_L);
    if (svd.rank() - prev_rank != m) {
        throw std::invalid_argument("build_model_inverse: no " + std::to_string(L) +
                                    "-delay inverse, rank condition fails");
    }
    // K [I_m 0]-selects the first input block: K = [I_m 0] pinv(T_L), i.e. the
    // first m rows of the pseudoinverse.
    Eigen::MatrixXd K = svd.pseudoinverse().topRows(m);
    Eigen::MatrixXd KT = K * T_L;
    KT.leftCols(m) -= Eigen::MatrixXd::Identity(m, m);
    if (KT.cwiseAbs().maxCoeff() > 1e-10) {
        throw std::runtime_error("build_model_inverse: left-inverse defect above 1e-10");
    }
    const Eigen::MatrixXd O_L = observability_matrix(sys, L);
    const Eigen::MatrixXd KO = K * O_L;
    return InverseRealization{sys.A - sys.B * KO, sys.B * K, -KO, K, K, L};
}

// Runs the inverse realization over a measured output signal.  Needs the full
// window y_{[k, k+L]} per step, so the estimate is L samples shorter than y.
inline Signal simulate_inverse(const InverseRealization& inv, const Eigen::VectorXd& x0,
                               const Signal& y) {
    if (x0.size() != inv.A.rows()) {
        throw std::invalid_argument("simulate_inverse: x0 has wrong dimension");
    }
    if (y.dim() * (inv.L + 1) != inv.D.cols()) {
        throw std::invalid_argument("simulate_inverse: output signal has wrong dimension");
    }
    const int len = y.length() - inv.L;
    if (len < 1) {
        throw std::invalid_argument("simulate_inverse: need at least L + 1 output samples");
    }
    Eigen::VectorXd x = x0;
    Eigen::MatrixXd us(inv.D.rows(), len);
    for (int i = 0; i < len; ++i) {
        const int k = y.start_index() + i;
        const Eigen::VectorXd yw = y.stacked(k, k + inv.L);
        us.col(i) = inv.C * x + inv.D * yw;
        x = inv.A * x + inv.B * yw;
    }
    return Signal(y.start_index(), std::move(us));
}

}  // namespace behinv
