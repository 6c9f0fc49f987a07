#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <stdexcept>
#include <utility>

#include "behinv/hankel.hpp"
#include "behinv/inversion.hpp"
#include "behinv/lti.hpp"
#include "behinv/types.hpp"

namespace behinv {

// Recorded closed-loop run of the disturbance observer.  Per step k the loop
// measures y(k), runs the realtime inverter to get u_hat(k) = u(k - L), peels
// off the delayed command to expose the disturbance,
//   d_hat(k) = u_hat(k) - delta(k - L),
// and compensates the next command, delta(k) = u0(k) - d_hat(k), before the
// plant input u(k) = delta(k) + d(k) is applied.
struct DobRun {
    StateSpaceSystem plant;
    DataBank bank;
    Eigen::VectorXd x0;
    Signal u0;     // commanded input
    Signal d;      // injected disturbance
    Signal y;      // measured output
    Signal u_hat;  // inverter output, u(k - L)
    Signal d_hat;  // disturbance estimate, d(k - L) once k >= L
    Signal delta;  // compensated command actually blended with d
    int L = 0;
    int T_p = 0;
    double residual_max = 0.0;

    // Steps the estimate needs before d_hat reflects an in-run disturbance
    // sample: the inverter's history window plus the loop delay.
    int startup() const { return T_p + L; }
};

inline DobRun run_dob(const StateSpaceSystem& plant, const DataBank& bank, const Signal& u0,
                      const Signal& d, const Eigen::VectorXd& x0) {
    if (plant.input_dim() != bank.m || plant.output_dim() != bank.p) {
        throw std::invalid_argument("run_dob: plant dimensions do not match the bank");
    }
    if (u0.dim() != bank.m || d.dim() != bank.m) {
        throw std::invalid_argument("run_dob: command and disturbance must be input-dimensional");
    }
    if (u0.length() != d.length() || u0.start_index() != d.start_index()) {
        throw std::invalid_argument("run_dob: command and disturbance windows must coincide");
    }
    if (bank.L < 1) {
        throw std::invalid_argument("run_dob: loop requires a delay of at least 1");
    }
    // With direct feedthrough the measurement at step k would already contain
    // u(k), which the loop is still computing at that point.
    if (!plant.D.isZero(0.0)) {
        throw std::invalid_argument("run_dob: plant must have zero feedthrough (D = 0)");
    }
    if (x0.size() != plant.state_dim()) {
        throw std::invalid_argument("run_dob: x0 has wrong dimension");
    }

    const int len = u0.length();
    const int L = bank.L;
    const int start = u0.start_index();
    InverterState inverter(bank);

    Eigen::MatrixXd ys(bank.p, len), u_hats(bank.m, len), d_hats(bank.m, len),
        deltas(bank.m, len);
    Eigen::VectorXd x = x0;
    for (int k = 0; k < len; ++k) {
        ys.col(k) = plant.C * x;
        u_hats.col(k) = inverter.step(ys.col(k));
        // The command L steps back; before the run it was zero (plant at rest).
        Eigen::VectorXd delta_past = Eigen::VectorXd::Zero(bank.m);
        if (k >= L) {
            delta_past = deltas.col(k - L);
        }
        d_hats.col(k) = u_hats.col(k) - delta_past;
        deltas.col(k) = u0.data().col(k) - d_hats.col(k);
        const Eigen::VectorXd u_k = deltas.col(k) + d.data().col(k);
        x = plant.A * x + plant.B * u_k;
    }

    DobRun run{plant,
               bank,
               x0,
               u0,
               d,
               Signal(start, std::move(ys)),
               Signal(start, std::move(u_hats)),
               Signal(start, std::move(d_hats)),
               Signal(start, std::move(deltas)),
               L,
               bank.T_p,
               inverter.residual_max()};
    return run;
}

// Replays the loop's net effect in open loop: the closed loop should behave
// like the plant driven by u0(k) + d(k) - d(k - L).  Returns the largest
// elementwise deviation from the recorded output at or after startup().
inline double verify_transfer_relation(const DobRun& run) {
    const int len = run.u0.length();
    if (len <= run.startup()) {
        throw std::invalid_argument("verify_transfer_relation: run shorter than startup");
    }
    const int L = run.L;
    Eigen::MatrixXd v = run.u0.data() + run.d.data();
    v.rightCols(len - L) -= run.d.data().leftCols(len - L);
    const SimulationResult open_loop =
        simulate(run.plant, run.x0, Signal(run.u0.start_index(), std::move(v)));
    double defect = 0.0;
    for (int k = run.startup(); k < len; ++k) {
        defect = std::max(defect,
                          (run.y.data().col(k) - open_loop.y.data().col(k)).cwiseAbs().maxCoeff());
    }
    return defect;
}

}  // namespace behinv
