// Command-line front end: analyze | collect | estimate | dob | track.
// Plants travel as JSON matrix files, signals as CSV (integer time index
// first), data banks as directories of raw experiment data plus parameters.
// Exit codes: 0 success, 2 precondition violation, 3 numerical inconsistency.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include <behinv/behinv.hpp>

namespace {

using nlohmann::json;

void emit(const json& summary, const std::string& out_path = "") {
    std::cout << summary.dump(2) << '\n';
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) {
            throw std::invalid_argument("cannot open for writing: " + out_path);
        }
        out << summary.dump(2) << '\n';
    }
}

json cmd_analyze(const std::string& plant_path, std::optional<int> T_p, std::optional<int> T_f,
                 std::optional<int> delay) {
    const behinv::StateSpaceSystem sys = behinv::read_plant_json(plant_path);
    json report;
    report["state_dim"] = sys.state_dim();
    report["input_dim"] = sys.input_dim();
    report["output_dim"] = sys.output_dim();
    const bool fat_enough = sys.input_dim() <= sys.output_dim();
    report["input_leq_output"] = fat_enough;
    try {
        report["observability_index"] = behinv::observability_index(sys);
    } catch (const std::invalid_argument&) {
        report["observability_index"] = nullptr;
    }
    std::optional<int> L0;
    if (fat_enough) {
        L0 = behinv::inherent_delay(sys);
    }
    report["inherent_delay"] = L0 ? json(*L0) : json(nullptr);
    if (T_p && T_f) {
        const std::optional<int> L = delay ? delay : L0;
        report["required_pe_order"] =
            L ? json(sys.state_dim() + *T_p + *T_f + *L) : json(nullptr);
    }
    return report;
}

json cmd_collect(const std::string& plant_path, int T, int T_p, int T_f, int L,
                 std::uint64_t seed, const std::string& out_dir) {
    const behinv::StateSpaceSystem sys = behinv::read_plant_json(plant_path);
    const behinv::DataBank bank = behinv::collect_data_bank(sys, T, T_p, T_f, L, seed);
    behinv::save_data_bank(out_dir, bank);
    json summary;
    summary["out"] = out_dir;
    summary["T"] = bank.T;
    summary["T_p"] = bank.T_p;
    summary["T_f"] = bank.T_f;
    summary["L"] = bank.L;
    summary["columns"] = bank.columns();
    summary["pe_order"] = *bank.pe_order;
    summary["pe_satisfied"] = *bank.pe_satisfied;
    summary["seed"] = seed;
    return summary;
}

std::optional<behinv::Signal> maybe_signal(const std::string& path) {
    if (path.empty()) {
        return std::nullopt;
    }
    return behinv::read_signal_csv(path);
}

// Plot-ready comparison table: time index, true components, estimates.
void write_compare_csv(const std::string& path, const behinv::Signal& truth,
                       const behinv::Signal& estimate, int truth_shift) {
    std::ofstream out(path);
    if (!out) {
        throw std::invalid_argument("cannot open for writing: " + path);
    }
    out << "k";
    for (int r = 0; r < truth.dim(); ++r) {
        out << ",true_" << r;
    }
    for (int r = 0; r < estimate.dim(); ++r) {
        out << ",est_" << r;
    }
    out << '\n';
    char buf[40];
    for (int k = estimate.start_index(); k <= estimate.end_index(); ++k) {
        const int kt = k - truth_shift;
        if (kt < truth.start_index() || kt > truth.end_index()) {
            continue;
        }
        out << k;
        for (int r = 0; r < truth.dim(); ++r) {
            std::snprintf(buf, sizeof buf, "%.17g", truth.at(kt)(r));
            out << ',' << buf;
        }
        for (int r = 0; r < estimate.dim(); ++r) {
            std::snprintf(buf, sizeof buf, "%.17g", estimate.at(k)(r));
            out << ',' << buf;
        }
        out << '\n';
    }
}

double max_error_vs_truth(const behinv::Signal& truth, const behinv::Signal& estimate,
                          int truth_shift) {
    double err = 0.0;
    bool any = false;
    for (int k = estimate.start_index(); k <= estimate.end_index(); ++k) {
        const int kt = k - truth_shift;
        if (kt < truth.start_index() || kt > truth.end_index()) {
            continue;
        }
        any = true;
        err = std::max(err, (estimate.at(k) - truth.at(kt)).cwiseAbs().maxCoeff());
    }
    if (!any) {
        throw std::invalid_argument("--truth does not overlap the estimated window");
    }
    return err;
}

json cmd_estimate(const std::string& bank_dir, const std::string& y_path,
                  const std::string& mode, const std::string& init_u_path,
                  const std::string& init_y_path, const std::string& truth_path,
                  const std::string& out_dir) {
    const behinv::DataBank bank = behinv::load_data_bank(bank_dir);
    const behinv::Signal y = behinv::read_signal_csv(y_path);
    std::filesystem::create_directories(out_dir);

    behinv::Signal u_hat = behinv::Signal::zeros(bank.m, 0);
    double residual_max = 0.0;
    if (mode == "batch") {
        const behinv::BatchEstimate run =
            behinv::run_batch_estimator(bank, y, maybe_signal(init_u_path), maybe_signal(init_y_path));
        u_hat = run.u_hat;
        residual_max = run.residual_max;
    } else if (mode == "realtime") {
        behinv::InverterState state(bank, maybe_signal(init_u_path), maybe_signal(init_y_path));
        Eigen::MatrixXd est(bank.m, y.length());
        for (int i = 0; i < y.length(); ++i) {
            est.col(i) = state.step(y.data().col(i));
        }
        u_hat = behinv::Signal(y.start_index(), std::move(est));
        residual_max = state.residual_max();
    } else {
        throw std::invalid_argument("--mode must be batch or realtime");
    }

    behinv::write_signal_csv(out_dir + "/u_hat.csv", u_hat);
    json summary;
    summary["mode"] = mode;
    summary["residual_max"] = residual_max;
    summary["delay_L"] = bank.L;
    summary["T_p"] = bank.T_p;
    summary["T_f"] = bank.T_f;
    summary["steps"] = u_hat.length();
    if (!truth_path.empty()) {
        const behinv::Signal truth = behinv::read_signal_csv(truth_path);
        // In realtime mode the estimate emitted at k is the input of k - L.
        const int shift = (mode == "realtime") ? bank.L : 0;
        summary["max_error"] = max_error_vs_truth(truth, u_hat, shift);
        write_compare_csv(out_dir + "/compare.csv", truth, u_hat, shift);
    }
    emit(summary, out_dir + "/summary.json");
    return summary;
}

json cmd_dob(const std::string& plant_path, const std::string& bank_dir,
             const std::string& u0_path, const std::string& d_path, const std::string& out_dir) {
    const behinv::StateSpaceSystem sys = behinv::read_plant_json(plant_path);
    const behinv::DataBank bank = behinv::load_data_bank(bank_dir);
    const behinv::Signal u0 = behinv::read_signal_csv(u0_path);
    const behinv::Signal d = behinv::read_signal_csv(d_path);
    const behinv::DobRun run =
        behinv::run_dob(sys, bank, u0, d, Eigen::VectorXd::Zero(sys.state_dim()));
    std::filesystem::create_directories(out_dir);
    behinv::write_signal_csv(out_dir + "/y.csv", run.y);
    behinv::write_signal_csv(out_dir + "/u_hat.csv", run.u_hat);
    behinv::write_signal_csv(out_dir + "/d_hat.csv", run.d_hat);
    behinv::write_signal_csv(out_dir + "/delta.csv", run.delta);
    json manifest;
    manifest["defect"] = behinv::verify_transfer_relation(run);
    manifest["residual_max"] = run.residual_max;
    manifest["L"] = run.L;
    manifest["T_p"] = run.T_p;
    manifest["steps"] = run.y.length();
    manifest["startup"] = run.startup();
    emit(manifest, out_dir + "/manifest.json");
    return manifest;
}

Eigen::VectorXd bounds_from_json(const json& j, const std::string& key, int m, double unbounded) {
    if (!j.contains(key) || !j[key].is_array() || j[key].size() != static_cast<std::size_t>(m)) {
        throw std::invalid_argument("bounds file: '" + key + "' must be an array of " +
                                    std::to_string(m) + " entries");
    }
    Eigen::VectorXd v(m);
    for (int i = 0; i < m; ++i) {
        const json& e = j[key][static_cast<std::size_t>(i)];
        if (e.is_null()) {
            v(i) = unbounded;
        } else if (e.is_number()) {
            v(i) = e.get<double>();
        } else {
            throw std::invalid_argument("bounds file: entries must be numbers or null");
        }
    }
    return v;
}

json cmd_track(const std::string& bank_dir, const std::string& init_u_path,
               const std::string& init_y_path, const std::string& y_star_path,
               const std::string& bounds_path, const std::string& out_dir) {
    const behinv::DataBank bank = behinv::load_data_bank(bank_dir);
    const behinv::Signal u_hist = behinv::read_signal_csv(init_u_path);
    const behinv::Signal y_hist = behinv::read_signal_csv(init_y_path);
    const behinv::Signal y_star = behinv::read_signal_csv(y_star_path);
    if (u_hist.length() != bank.T_p || y_hist.length() != bank.T_p) {
        throw std::invalid_argument("track: history files must hold T_p samples each");
    }
    if (y_star.length() != bank.T_f + bank.L) {
        throw std::invalid_argument("track: --ystar must hold T_f + L samples");
    }

    Eigen::VectorXd lower = Eigen::VectorXd::Constant(
        bank.m, -std::numeric_limits<double>::infinity());
    Eigen::VectorXd upper =
        Eigen::VectorXd::Constant(bank.m, std::numeric_limits<double>::infinity());
    if (!bounds_path.empty()) {
        std::ifstream in(bounds_path);
        if (!in) {
            throw std::invalid_argument("cannot open: " + bounds_path);
        }
        json jb;
        try {
            in >> jb;
        } catch (const json::exception& e) {
            throw std::invalid_argument(bounds_path + ": " + std::string(e.what()));
        }
        lower = bounds_from_json(jb, "lower", bank.m,
                                 -std::numeric_limits<double>::infinity());
        upper = bounds_from_json(jb, "upper", bank.m,
                                 std::numeric_limits<double>::infinity());
    }

    const behinv::TrackingProblem problem(
        bank, u_hist.stacked(u_hist.start_index(), u_hist.end_index()),
        y_hist.stacked(y_hist.start_index(), y_hist.end_index()),
        y_star.stacked(y_star.start_index(), y_star.end_index()), lower, upper);
    const behinv::TrackingResult result = behinv::track(problem);

    std::filesystem::create_directories(out_dir);
    behinv::write_signal_csv(
        out_dir + "/u.csv",
        behinv::Signal(y_star.start_index(),
                       Eigen::MatrixXd(result.u.reshaped(bank.m, bank.T_f))));
    json out;
    out["objective"] = result.objective;
    out["equality_residual"] = result.equality_residual;
    out["box_violation"] = result.box_violation;
    out["iterations"] = result.iterations;
    emit(out, out_dir + "/result.json");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"data-driven inversion and disturbance estimation for discrete-time LTI systems"};
    app.require_subcommand(1);

    std::string plant_path, bank_dir, y_path, mode = "batch", out_path;
    std::string init_u_path, init_y_path, truth_path, u0_path, d_path, y_star_path, bounds_path;
    int T = 0, T_p = 0, T_f = 1, L = 0;
    std::uint64_t seed = 0;
    std::optional<int> opt_tp, opt_tf, opt_delay;

    CLI::App* analyze = app.add_subcommand(
        "analyze", "invertibility, observability and excitation requirements of a plant");
    analyze->add_option("--plant", plant_path, "plant JSON file")->required();
    analyze->add_option("--tp", opt_tp, "history window length T_p");
    analyze->add_option("--tf", opt_tf, "estimation window length T_f");
    analyze->add_option("--delay", opt_delay, "delay L (defaults to the inherent delay)");
    analyze->add_option("--out", out_path, "also write the report to this file");

    CLI::App* collect = app.add_subcommand(
        "collect", "run a seeded excitation experiment against a plant and persist the bank");
    collect->add_option("--plant", plant_path, "plant JSON file")->required();
    collect->add_option("--length", T, "experiment length T")->required();
    collect->add_option("--tp", T_p, "history window length T_p")->required();
    collect->add_option("--tf", T_f, "estimation window length T_f")->required();
    collect->add_option("--delay", L, "delay L")->required();
    collect->add_option("--seed", seed, "excitation seed")->required();
    collect->add_option("--out", out_path, "bank output directory")->required();

    CLI::App* estimate = app.add_subcommand(
        "estimate", "recover the input behind a measured output stream");
    estimate->add_option("--bank", bank_dir, "data bank directory")->required();
    estimate->add_option("--y", y_path, "measured output CSV")->required();
    estimate->add_option("--mode", mode, "batch or realtime")
        ->check(CLI::IsMember({"batch", "realtime"}));
    estimate->add_option("--init-u", init_u_path, "assumed input history CSV (T_p samples)");
    estimate->add_option("--init-y", init_y_path,
                         "assumed output history CSV (T_p samples; T_p + L in realtime mode)");
    estimate->add_option("--truth", truth_path, "true input CSV for error reporting");
    estimate->add_option("--out", out_path, "output directory")->required();

    CLI::App* dob = app.add_subcommand(
        "dob", "closed-loop disturbance observer run from rest");
    dob->add_option("--plant", plant_path, "plant JSON file")->required();
    dob->add_option("--bank", bank_dir, "data bank directory (T_f = 1)")->required();
    dob->add_option("--u0", u0_path, "commanded input CSV")->required();
    dob->add_option("--d", d_path, "injected disturbance CSV")->required();
    dob->add_option("--out", out_path, "output directory")->required();

    CLI::App* track = app.add_subcommand(
        "track", "bounded-input reference tracking over one window");
    track->add_option("--bank", bank_dir, "data bank directory")->required();
    track->add_option("--init-u", init_u_path, "input history CSV (T_p samples)")->required();
    track->add_option("--init-y", init_y_path, "output history CSV (T_p samples)")->required();
    track->add_option("--ystar", y_star_path, "target output CSV (T_f + L samples)")->required();
    track->add_option("--bounds", bounds_path,
                      "JSON {\"lower\": [...], \"upper\": [...]}, null entries unbounded");
    track->add_option("--out", out_path, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (analyze->parsed()) {
            emit(cmd_analyze(plant_path, opt_tp, opt_tf, opt_delay), out_path);
        } else if (collect->parsed()) {
            emit(cmd_collect(plant_path, T, T_p, T_f, L, seed, out_path));
        } else if (estimate->parsed()) {
            cmd_estimate(bank_dir, y_path, mode, init_u_path, init_y_path, truth_path, out_path);
        } else if (dob->parsed()) {
            cmd_dob(plant_path, bank_dir, u0_path, d_path, out_path);
        } else if (track->parsed()) {
            cmd_track(bank_dir, init_u_path, init_y_path, y_star_path, bounds_path, out_path);
        }
    } catch (const std::logic_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
