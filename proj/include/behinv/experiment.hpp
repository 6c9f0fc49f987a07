#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <utility>

#include "behinv/hankel.hpp"
#include "behinv/lti.hpp"
#include "behinv/types.hpp"

namespace behinv {

// One identification experiment against the plant, started at rest: a
// persistently exciting input of length T (order n + T_p + T_f + L, the
// excitation both estimation algorithms need) plus L padding samples so the
// recorded output window spans T + L steps, simulated and cut into a bank.
inline DataBank collect_data_bank(const StateSpaceSystem& sys, int T, int T_p, int T_f, int L,
                                  std::uint64_t seed) {
    const int order = sys.state_dim() + T_p + T_f + L;
    const Signal head = generate_pe_input(sys.input_dim(), T, order, seed);
    Eigen::MatrixXd u(sys.input_dim(), T + L);
    u.leftCols(T) = head.data();
    // Padding comes from a stream decoupled from the excitation's retry loop,
    // keeping the full input a pure function of the seed.
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    for (int c = T; c < T + L; ++c) {
        for (int r = 0; r < sys.input_dim(); ++r) {
            u(r, c) = detail::uniform_pm1(rng);
        }
    }
    Signal u_d(0, std::move(u));
    Signal y_d = simulate(sys, Eigen::VectorXd::Zero(sys.state_dim()), u_d).y;
    return build_data_bank(u_d, y_d, T_p, T_f, L, sys.state_dim());
}

}  // namespace behinv
