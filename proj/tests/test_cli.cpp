#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <json.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <behinv/behinv.hpp>

#include "fixtures.hpp"

using behinv::Signal;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

struct CliRun {
    int code;
    std::string output;  // stdout and stderr, merged
};

CliRun cli(const std::string& dir, const std::string& args) {
    static int invocation = 0;
    const std::string log = dir + "/cli_" + std::to_string(invocation++) + ".log";
    const std::string cmd = std::string(BEHINV_CLI_PATH) + " " + args + " > " + log + " 2>&1";
    const int status = std::system(cmd.c_str());
    CliRun run;
    run.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    run.output = ss.str();
    return run;
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    json j;
    in >> j;
    return j;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// One shared workspace: a 2-state plant, a stride-3 bank and a stride-1 bank
// collected through the CLI itself, plus a reference trajectory on disk.
struct CliWorkspace {
    std::string dir;
    std::string plant;
    std::string bank;     // T_p=2, T_f=3, L=1
    std::string bank_rt;  // T_p=2, T_f=1, L=1
    std::string u_true;   // 100-step input, first two samples at rest
    std::string y;        // matching output stream

    CliWorkspace() : dir(fixtures::fresh_temp_dir("cli")) {
        plant = dir + "/plant.json";
        behinv::write_plant_json(plant, fixtures::plant2());
        bank = dir + "/bank";
        bank_rt = dir + "/bank_rt";
        REQUIRE(cli(dir, "collect --plant " + plant +
                         " --length 30 --tp 2 --tf 3 --delay 1 --seed 42 --out " + bank)
                    .code == 0);
        REQUIRE(cli(dir, "collect --plant " + plant +
                         " --length 40 --tp 2 --tf 1 --delay 1 --seed 5 --out " + bank_rt)
                    .code == 0);

        const int S = 100;
        MatrixXd u_data(2, S);
        for (int k = 0; k < S; ++k) {
            u_data(0, k) = (k < 2) ? 0.0 : std::sin(0.12 * k) + 0.4 * std::cos(0.05 * k);
            u_data(1, k) = (k < 2) ? 0.0 : 0.8 * std::sin(0.07 * k + 0.5);
        }
        const Signal u(0, u_data);
        const Signal y_sig =
            behinv::simulate(fixtures::plant2(), VectorXd::Zero(2), u).y;
        u_true = dir + "/u_true.csv";
        y = dir + "/y.csv";
        behinv::write_signal_csv(u_true, u);
        behinv::write_signal_csv(y, y_sig);
    }
};

CliWorkspace& workspace() {
    static CliWorkspace ws;
    return ws;
}

}  // namespace

TEST_CASE("cli rejects missing or unknown subcommands") {
    auto& ws = workspace();
    CHECK(cli(ws.dir, "").code == 2);
    CHECK(cli(ws.dir, "frobnicate").code == 2);
    CHECK(cli(ws.dir, "--help").code == 0);
    CHECK(cli(ws.dir, "estimate --bank " + ws.bank).code == 2);  // --y and --out missing
    CHECK(cli(ws.dir, "analyze --plant " + ws.dir + "/absent.json").code == 2);
}

TEST_CASE("analyze reports delay, observability and excitation requirements") {
    auto& ws = workspace();
    const CliRun run = cli(ws.dir, "analyze --plant " + ws.plant + " --tp 2 --tf 3");
    REQUIRE(run.code == 0);
    const json report = json::parse(run.output);
    CHECK(report["state_dim"] == 2);
    CHECK(report["input_dim"] == 2);
    CHECK(report["output_dim"] == 2);
    CHECK(report["input_leq_output"] == true);
    CHECK(report["observability_index"] == 1);
    CHECK(report["inherent_delay"] == 1);
    CHECK(report["required_pe_order"] == 8);

    const CliRun forced = cli(ws.dir, "analyze --plant " + ws.plant + " --tp 2 --tf 1 --delay 2");
    REQUIRE(forced.code == 0);
    CHECK(json::parse(forced.output)["required_pe_order"] == 7);

    // --out writes the same report to a file.
    const std::string report_path = ws.dir + "/report.json";
    REQUIRE(cli(ws.dir, "analyze --plant " + ws.plant + " --out " + report_path).code == 0);
    CHECK(read_json(report_path)["inherent_delay"] == 1);
}

TEST_CASE("analyze flags systems with more inputs than outputs instead of failing") {
    auto& ws = workspace();
    MatrixXd A(1, 1), B(1, 2), C(1, 1), D(1, 2);
    A << 0.5;
    B << 1.0, 0.0;
    C << 1.0;
    D.setZero();
    const std::string path = ws.dir + "/wide.json";
    behinv::write_plant_json(path, behinv::StateSpaceSystem(A, B, C, D));
    const CliRun run = cli(ws.dir, "analyze --plant " + path);
    REQUIRE(run.code == 0);
    const json report = json::parse(run.output);
    CHECK(report["input_leq_output"] == false);
    CHECK(report["inherent_delay"].is_null());
}

TEST_CASE("collect writes a loadable bank and an honest summary") {
    auto& ws = workspace();
    const json summary = read_json(ws.bank + "/params.json");
    CHECK(summary["T_p"] == 2);
    CHECK(summary["T_f"] == 3);
    CHECK(summary["L"] == 1);
    CHECK(summary["T"] == 30);
    CHECK(summary["pe_order"] == 8);
    CHECK(summary["pe_satisfied"] == true);

    const auto bank = behinv::load_data_bank(ws.bank);
    CHECK(bank.columns() == 26);

    // Excitation lengths below the row-rank bound are refused.
    CHECK(cli(ws.dir, "collect --plant " + ws.plant +
                          " --length 10 --tp 2 --tf 3 --delay 1 --seed 1 --out " + ws.dir +
                          "/bank_short")
              .code == 2);
}

TEST_CASE("estimate recovers the input stream in batch mode") {
    auto& ws = workspace();
    const std::string out = ws.dir + "/est_batch";
    const CliRun run = cli(ws.dir, "estimate --bank " + ws.bank + " --y " + ws.y +
                                       " --mode batch --truth " + ws.u_true + " --out " + out);
    REQUIRE(run.code == 0);

    const json summary = read_json(out + "/summary.json");
    CHECK(summary["mode"] == "batch");
    CHECK(summary["delay_L"] == 1);
    CHECK(summary["T_p"] == 2);
    CHECK(summary["steps"] == 96);
    CHECK(summary["max_error"].get<double>() < 1e-6);
    CHECK(summary["residual_max"].get<double>() < 1e-8);

    const Signal u_hat = behinv::read_signal_csv(out + "/u_hat.csv");
    CHECK(u_hat.start_index() == 2);
    CHECK(u_hat.length() == 96);

    const std::string compare = read_file(out + "/compare.csv");
    CHECK(compare.rfind("k,true_0,true_1,est_0,est_1\n", 0) == 0);
}

TEST_CASE("estimate recovers the delayed input in realtime mode") {
    auto& ws = workspace();
    const auto sys = fixtures::plant2();
    std::mt19937_64 rng(808);
    const Signal u = fixtures::random_signal(rng, 2, 60);
    const Signal y = behinv::simulate(sys, VectorXd::Zero(2), u).y;
    behinv::write_signal_csv(ws.dir + "/u_rt.csv", u);
    behinv::write_signal_csv(ws.dir + "/y_rt.csv", y);

    const std::string out = ws.dir + "/est_rt";
    const CliRun run = cli(ws.dir, "estimate --bank " + ws.bank_rt + " --y " + ws.dir +
                                       "/y_rt.csv --mode realtime --truth " + ws.dir +
                                       "/u_rt.csv --out " + out);
    REQUIRE(run.code == 0);
    const json summary = read_json(out + "/summary.json");
    CHECK(summary["mode"] == "realtime");
    CHECK(summary["steps"] == 60);
    CHECK(summary["max_error"].get<double>() < 1e-6);
}

TEST_CASE("estimate maps bad inputs to typed exit codes") {
    auto& ws = workspace();
    CHECK(cli(ws.dir, "estimate --bank " + ws.bank + " --y " + ws.y +
                          " --mode sideways --out " + ws.dir + "/x")
              .code == 2);

    // A spiked measurement on a plant with more outputs than inputs leaves
    // the reachable output set: numerical inconsistency, exit 3.
    const auto sys6 = fixtures::plant6();
    const auto bank6 = behinv::collect_data_bank(sys6, 60, 2, 1, 1, 7);
    behinv::save_data_bank(ws.dir + "/bank6", bank6);
    std::mt19937_64 rng(909);
    Signal u6 = fixtures::random_signal(rng, 2, 30);
    for (int k = 0; k < 2; ++k) {
        u6.set(k, VectorXd::Zero(2));
    }
    Signal y6 = behinv::simulate(sys6, Eigen::VectorXd::Zero(6), u6).y;
    VectorXd spiked = y6.at(10);
    spiked(0) += 1.0;
    y6.set(10, spiked);
    behinv::write_signal_csv(ws.dir + "/y_spiked.csv", y6);
    const CliRun run = cli(ws.dir, "estimate --bank " + ws.dir + "/bank6 --y " + ws.dir +
                                       "/y_spiked.csv --mode batch --out " + ws.dir + "/x");
    CHECK(run.code == 3);
    CHECK(run.output.find("error:") != std::string::npos);
}

TEST_CASE("explicit rest init files reproduce the default run byte for byte") {
    auto& ws = workspace();
    behinv::write_signal_csv(ws.dir + "/zu.csv", Signal::zeros(2, 2, -2));
    behinv::write_signal_csv(ws.dir + "/zy.csv", Signal::zeros(2, 2, -2));
    const std::string plain = ws.dir + "/est_plain";
    const std::string with_init = ws.dir + "/est_init";
    REQUIRE(cli(ws.dir, "estimate --bank " + ws.bank + " --y " + ws.y + " --mode batch --out " +
                            plain)
                .code == 0);
    REQUIRE(cli(ws.dir, "estimate --bank " + ws.bank + " --y " + ws.y +
                            " --mode batch --init-u " + ws.dir + "/zu.csv --init-y " + ws.dir +
                            "/zy.csv --out " + with_init)
                .code == 0);
    CHECK(read_file(with_init + "/u_hat.csv") == read_file(plain + "/u_hat.csv"));
}

TEST_CASE("dob runs the loop and verifies the transfer relation") {
    auto& ws = workspace();
    const int len = 60;
    MatrixXd u0(2, len), d(2, len);
    for (int k = 0; k < len; ++k) {
        u0(0, k) = std::sin(0.1 * k);
        u0(1, k) = 0.5 * std::cos(0.07 * k);
        d(0, k) = 0.5;
        d(1, k) = -0.3;
    }
    behinv::write_signal_csv(ws.dir + "/u0.csv", Signal(0, u0));
    behinv::write_signal_csv(ws.dir + "/d.csv", Signal(0, d));

    const std::string out = ws.dir + "/dob";
    const CliRun run = cli(ws.dir, "dob --plant " + ws.plant + " --bank " + ws.bank_rt +
                                       " --u0 " + ws.dir + "/u0.csv --d " + ws.dir +
                                       "/d.csv --out " + out);
    REQUIRE(run.code == 0);
    const json manifest = read_json(out + "/manifest.json");
    CHECK(manifest["defect"].get<double>() < 1e-6);
    CHECK(manifest["L"] == 1);
    CHECK(manifest["T_p"] == 2);
    CHECK(manifest["startup"] == 3);
    CHECK(manifest["steps"] == len);

    for (const char* name : {"y.csv", "u_hat.csv", "d_hat.csv", "delta.csv"}) {
        const Signal s = behinv::read_signal_csv(out + "/" + std::string(name));
        CHECK(s.length() == len);
    }
    // The estimate settles on the constant disturbance.
    const Signal d_hat = behinv::read_signal_csv(out + "/d_hat.csv");
    CHECK((d_hat.at(len - 1) - d.col(0)).cwiseAbs().maxCoeff() < 1e-6);

    // The loop needs a stride-1 bank.
    CHECK(cli(ws.dir, "dob --plant " + ws.plant + " --bank " + ws.bank + " --u0 " + ws.dir +
                          "/u0.csv --d " + ws.dir + "/d.csv --out " + ws.dir + "/dob_bad")
              .code == 2);
}

TEST_CASE("track solves the bounded window problem end to end") {
    auto& ws = workspace();
    const auto sys = fixtures::plant2();
    std::mt19937_64 rng(909);
    const Signal u = fixtures::random_signal(rng, 2, 14);
    const auto sim = behinv::simulate(sys, VectorXd::Zero(2), u);

    const int t0 = 6;
    behinv::write_signal_csv(ws.dir + "/hist_u.csv", u.window(t0 - 2, t0 - 1));
    behinv::write_signal_csv(ws.dir + "/hist_y.csv", sim.y.window(t0 - 2, t0 - 1));
    behinv::write_signal_csv(ws.dir + "/ystar.csv", sim.y.window(t0, t0 + 3));
    std::ofstream(ws.dir + "/bounds.json")
        << R"({"lower": [-1.5, null], "upper": [1.5, null]})";

    const std::string out = ws.dir + "/track";
    const CliRun run = cli(ws.dir, "track --bank " + ws.bank + " --init-u " + ws.dir +
                                       "/hist_u.csv --init-y " + ws.dir +
                                       "/hist_y.csv --ystar " + ws.dir +
                                       "/ystar.csv --bounds " + ws.dir + "/bounds.json --out " +
                                       out);
    REQUIRE(run.code == 0);
    const json result = read_json(out + "/result.json");
    CHECK(result["objective"].get<double>() < 1e-10);
    CHECK(result["equality_residual"].get<double>() < 1e-8);
    CHECK(result["box_violation"].get<double>() <= 1e-8);

    const Signal u_star = behinv::read_signal_csv(out + "/u.csv");
    CHECK(u_star.start_index() == t0);
    CHECK(u_star.length() == 3);
    double err = 0.0;
    for (int k = t0; k < t0 + 3; ++k) {
        err = std::max(err, (u_star.at(k) - u.at(k)).cwiseAbs().maxCoeff());
    }
    CHECK(err < 1e-7);
}

TEST_CASE("track validates its window and bounds files") {
    auto& ws = workspace();
    behinv::write_signal_csv(ws.dir + "/zeros_tp.csv", Signal::zeros(2, 2));
    behinv::write_signal_csv(ws.dir + "/zeros_tfl.csv", Signal::zeros(2, 4, 2));
    std::ofstream(ws.dir + "/bad_bounds.json") << R"({"lower": [2, 0], "upper": [-2, 0]})";
    CHECK(cli(ws.dir, "track --bank " + ws.bank + " --init-u " + ws.dir +
                          "/zeros_tp.csv --init-y " + ws.dir + "/zeros_tp.csv --ystar " +
                          ws.dir + "/zeros_tfl.csv --bounds " + ws.dir +
                          "/bad_bounds.json --out " + ws.dir + "/track_bad")
              .code == 2);
    // Wrong target length: the window must span T_f + L samples.
    CHECK(cli(ws.dir, "track --bank " + ws.bank + " --init-u " + ws.dir +
                          "/zeros_tp.csv --init-y " + ws.dir + "/zeros_tp.csv --ystar " +
                          ws.dir + "/zeros_tp.csv --out " + ws.dir + "/track_bad2")
              .code == 2);
}
