#pragma once

#include <Eigen/Dense>

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "behinv/hankel.hpp"
#include "behinv/types.hpp"

namespace behinv {

// Signals travel as CSV with one row per sample: the integer time index
// first, then the vector components, full double precision, no header.

inline void write_signal_csv(const std::string& path, const Signal& s) {
    std::ofstream out(path);
    if (!out) {
        throw std::invalid_argument("cannot open for writing: " + path);
    }
    char buf[40];
    for (int i = 0; i < s.length(); ++i) {
        out << (s.start_index() + i);
        for (int r = 0; r < s.dim(); ++r) {
            std::snprintf(buf, sizeof buf, "%.17g", s.data()(r, i));
            out << ',' << buf;
        }
        out << '\n';
    }
    if (!out.good()) {
        throw std::runtime_error("write failed: " + path);
    }
}

inline Signal read_signal_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open: " + path);
    }
    std::vector<Eigen::VectorXd> samples;
    long long start = 0;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) {
            fields.push_back(field);
        }
        const std::string where = path + ":" + std::to_string(line_no);
        if (fields.size() < 2) {
            throw std::invalid_argument(where + ": need a time index and at least one component");
        }
        long long k = 0;
        std::size_t used = 0;
        try {
            k = std::stoll(fields[0], &used);
        } catch (const std::exception&) {
            throw std::invalid_argument(where + ": bad time index '" + fields[0] + "'");
        }
        if (used != fields[0].size()) {
            throw std::invalid_argument(where + ": bad time index '" + fields[0] + "'");
        }
        Eigen::VectorXd v(fields.size() - 1);
        for (std::size_t i = 1; i < fields.size(); ++i) {
            try {
                v(static_cast<Eigen::Index>(i - 1)) = std::stod(fields[i], &used);
            } catch (const std::exception&) {
                throw std::invalid_argument(where + ": bad value '" + fields[i] + "'");
            }
            if (used != fields[i].size()) {
                throw std::invalid_argument(where + ": bad value '" + fields[i] + "'");
            }
        }
        if (samples.empty()) {
            start = k;
        } else {
            if (v.size() != samples.front().size()) {
                throw std::invalid_argument(where + ": row arity changed mid-file");
            }
            if (k != start + static_cast<long long>(samples.size())) {
                throw std::invalid_argument(where + ": time indices must be consecutive");
            }
        }
        samples.push_back(std::move(v));
    }
    if (samples.empty()) {
        throw std::invalid_argument(path + ": no samples");
    }
    Eigen::MatrixXd data(samples.front().size(), static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        data.col(static_cast<Eigen::Index>(i)) = samples[i];
    }
    return Signal(static_cast<int>(start), std::move(data));
}

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) {
            row.push_back(M(r, c));
        }
        rows.push_back(row);
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& name) {
    if (!j.is_array() || j.empty()) {
        throw std::invalid_argument(name + " must be a non-empty array of rows");
    }
    const std::size_t rows = j.size();
    if (!j[0].is_array() || j[0].empty()) {
        throw std::invalid_argument(name + " rows must be non-empty arrays");
    }
    const std::size_t cols = j[0].size();
    Eigen::MatrixXd M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols) {
            throw std::invalid_argument(name + " must be rectangular");
        }
        for (std::size_t c = 0; c < cols; ++c) {
            if (!j[r][c].is_number()) {
                throw std::invalid_argument(name + " entries must be numbers");
            }
            M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
        }
    }
    return M;
}

inline void write_plant_json(const std::string& path, const StateSpaceSystem& sys) {
    nlohmann::json j;
    j["A"] = matrix_to_json(sys.A);
    j["B"] = matrix_to_json(sys.B);
    j["C"] = matrix_to_json(sys.C);
    j["D"] = matrix_to_json(sys.D);
    std::ofstream out(path);
    if (!out) {
        throw std::invalid_argument("cannot open for writing: " + path);
    }
    out << j.dump(2) << '\n';
}

inline StateSpaceSystem read_plant_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open: " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
    for (const char* key : {"A", "B", "C", "D"}) {
        if (!j.contains(key)) {
            throw std::invalid_argument(path + ": missing matrix '" + std::string(key) + "'");
        }
    }
    return StateSpaceSystem(matrix_from_json(j["A"], path + ": A"),
                            matrix_from_json(j["B"], path + ": B"),
                            matrix_from_json(j["C"], path + ": C"),
                            matrix_from_json(j["D"], path + ": D"));
}

// A bank on disk is the raw experiment plus its parameters; the Hankel blocks
// are rebuilt on load.
inline void save_data_bank(const std::string& dir, const DataBank& bank) {
    std::filesystem::create_directories(dir);
    write_signal_csv(dir + "/u_d.csv", bank.u_d);
    write_signal_csv(dir + "/y_d.csv", bank.y_d);
    nlohmann::json params;
    params["T_p"] = bank.T_p;
    params["T_f"] = bank.T_f;
    params["L"] = bank.L;
    params["T"] = bank.T;
    params["m"] = bank.m;
    params["p"] = bank.p;
    if (bank.pe_order) {
        params["pe_order"] = *bank.pe_order;
        params["pe_satisfied"] = bank.pe_satisfied.value_or(false);
    }
    std::ofstream out(dir + "/params.json");
    if (!out) {
        throw std::invalid_argument("cannot open for writing: " + dir + "/params.json");
    }
    out << params.dump(2) << '\n';
}

inline DataBank load_data_bank(const std::string& dir) {
    std::ifstream in(dir + "/params.json");
    if (!in) {
        throw std::invalid_argument("cannot open: " + dir + "/params.json");
    }
    nlohmann::json params;
    try {
        in >> params;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(dir + "/params.json: " + e.what());
    }
    for (const char* key : {"T_p", "T_f", "L", "T"}) {
        if (!params.contains(key) || !params[key].is_number_integer()) {
            throw std::invalid_argument(dir + "/params.json: missing integer '" +
                                        std::string(key) + "'");
        }
    }
    const Signal u_d = read_signal_csv(dir + "/u_d.csv");
    const Signal y_d = read_signal_csv(dir + "/y_d.csv");
    const int T = params["T"].get<int>();
    const int L = params["L"].get<int>();
    if (u_d.length() != T + L) {
        throw std::invalid_argument(dir + ": u_d.csv length does not equal T + L");
    }
    DataBank bank = build_data_bank(u_d, y_d, params["T_p"].get<int>(),
                                    params["T_f"].get<int>(), L);
    if (params.contains("pe_order")) {
        bank.pe_order = params["pe_order"].get<int>();
        bank.pe_satisfied = params.value("pe_satisfied", false);
    }
    return bank;
}

}  // namespace behinv
