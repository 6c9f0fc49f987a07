#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

#include "behinv/numerics.hpp"
#include "behinv/types.hpp"

namespace behinv {

namespace detail {

// Uniform [-1, 1) from raw engine words, so the sequence does not depend on
// the standard library's distribution implementation.
inline double uniform_pm1(std::mt19937_64& rng) {
    return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
}

// Block Hankel matrix of depth t over the columns of seg (q x len):
// block row r, column c holds seg column r + c.  Shape qt x (len - t + 1).
inline Eigen::MatrixXd hankel_block(const Eigen::MatrixXd& seg, int t) {
    const Eigen::Index q = seg.rows();
    const Eigen::Index cols = seg.cols() - t + 1;
    Eigen::MatrixXd H(q * t, cols);
    for (int r = 0; r < t; ++r) {
        H.middleRows(r * q, q) = seg.middleCols(r, cols);
    }
    return H;
}

}  // namespace detail

struct HankelMatrix {
    Eigen::MatrixXd matrix;
    int block_rows;   // depth t
    int dim;          // dimension q of the underlying signal
    int start_index;  // time of the segment's first sample
};

inline HankelMatrix hankel(const Signal& f, int t) {
    if (t < 1) {
        throw std::invalid_argument("hankel: depth t must be >= 1");
    }
    if (f.length() < t) {
        throw std::invalid_argument("hankel: signal shorter than depth t");
    }
    return HankelMatrix{detail::hankel_block(f.data(), t), t, f.dim(), f.start_index()};
}

// Persistent excitation of order t: the depth-t Hankel matrix of the signal
// has full row rank.  Signals shorter than the order are trivially not PE.
inline bool pe_check(const Signal& u, int order) {
    if (order < 1) {
        throw std::invalid_argument("pe_check: order must be >= 1");
    }
    if (u.length() < order) {
        return false;
    }
    const Eigen::MatrixXd H = detail::hankel_block(u.data(), order);
    if (H.cols() < H.rows()) {
        return false;
    }
    return svd_rank(H) == H.rows();
}

// Length-T input with i.i.d. uniform [-1, 1) samples, redrawn until the PE
// check at the requested order passes (a.s. immediate for this distribution).
// Doubles are derived from raw mt19937_64 words so the sequence is identical
// across standard library implementations.
inline Signal generate_pe_input(int dim, int T, int order, std::uint64_t seed) {
    if (dim < 1 || order < 1) {
        throw std::invalid_argument("generate_pe_input: dim and order must be >= 1");
    }
    // Full row rank of the depth-`order` Hankel needs at least as many columns
    // as rows: T - order + 1 >= dim * order.
    if (T < (dim + 1) * order - 1) {
        throw std::invalid_argument("generate_pe_input: T must be >= (dim + 1) * order - 1 = " +
                                    std::to_string((dim + 1) * order - 1));
    }
    std::mt19937_64 rng(seed);
    const int max_attempts = 16;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        Eigen::MatrixXd samples(dim, T);
        for (int c = 0; c < T; ++c) {
            for (int r = 0; r < dim; ++r) {
                samples(r, c) = detail::uniform_pm1(rng);
            }
        }
        Signal candidate(0, std::move(samples));
        if (pe_check(candidate, order)) {
            return candidate;
        }
    }
    throw std::runtime_error("generate_pe_input: no persistently exciting draw in " +
                             std::to_string(max_attempts) + " attempts");
}

// Hankel blocks cut from one input/output experiment of length T + L:
//   U_p over u[0 .. T-T_f-1] at depth T_p     (m T_p x N)
//   U_f over u[T_p .. T-1] at depth T_f       (m T_f x N)
//   Y_p over y[0 .. T-T_f-1] at depth T_p     (p T_p x N)
//   Y_fL over y[T_p .. T+L-1] at depth T_f+L  (p (T_f+L) x N)
// with N = T - T_p - T_f + 1 columns each; column c covers the window that
// starts at data time c.  The raw signals are retained so banks can be
// rebuilt under different parameters.
struct DataBank {
    Eigen::MatrixXd U_p;
    Eigen::MatrixXd U_f;
    Eigen::MatrixXd Y_p;
    Eigen::MatrixXd Y_fL;
    Signal u_d;
    Signal y_d;
    int T_p = 0;
    int T_f = 0;
    int L = 0;
    int T = 0;
    int m = 0;
    int p = 0;
    // Excitation certificate, filled in when the plant's state dimension was
    // known at build time: pe_check(u[0..T-1], n + T_p + T_f + L).
    std::optional<int> pe_order;
    std::optional<bool> pe_satisfied;

    int columns() const { return T - T_p - T_f + 1; }
};

inline DataBank build_data_bank(const Signal& u_d, const Signal& y_d, int T_p, int T_f, int L,
                                std::optional<int> state_dim = std::nullopt) {
    if (T_p < 1 || T_f < 1 || L < 0) {
        throw std::invalid_argument("build_data_bank: need T_p >= 1, T_f >= 1, L >= 0");
    }
    if (u_d.length() != y_d.length()) {
        throw std::invalid_argument("build_data_bank: input and output data lengths differ");
    }
    const int T = u_d.length() - L;
    if (T < T_p + T_f) {
        throw std::invalid_argument(
            "build_data_bank: data too short, need T = len - L > T_p + T_f - 1");
    }

    DataBank bank;
    // Windows are indexed from the data's own first sample.
    const Eigen::MatrixXd& u = u_d.data();
    const Eigen::MatrixXd& y = y_d.data();
    bank.U_p = detail::hankel_block(u.middleCols(0, T - T_f), T_p);
    bank.U_f = detail::hankel_block(u.middleCols(T_p, T - T_p), T_f);
    bank.Y_p = detail::hankel_block(y.middleCols(0, T - T_f), T_p);
    bank.Y_fL = detail::hankel_block(y.middleCols(T_p, T + L - T_p), T_f + L);
    bank.u_d = u_d;
    bank.y_d = y_d;
    bank.T_p = T_p;
    bank.T_f = T_f;
    bank.L = L;
    bank.T = T;
    bank.m = u_d.dim();
    bank.p = y_d.dim();
    if (state_dim) {
        bank.pe_order = *state_dim + T_p + T_f + L;
        bank.pe_satisfied =
            pe_check(Signal(0, u.leftCols(T)), *bank.pe_order);
    }
    return bank;
}

}  // namespace behinv
