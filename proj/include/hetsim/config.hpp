// SPDX-License-Identifier: Apache-2.0
//
// hetsim - link-level simulation library for heterogeneous multiuser uplink receivers
// Copyright (C) 2026 the hetsim authors
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file
// except in compliance with the License. You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software distributed under the
// License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND,
// either express or implied. See the License for the specific language governing permissions
// and limitations under the License.
// ------------------------------------------------------------------------------------------

#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

namespace hetsim {

enum class SolverKind { amp, admm, sbl, somp };

inline std::string to_string(SolverKind s) {
    switch (s) {
    case SolverKind::amp:
        return "amp";
    case SolverKind::admm:
        return "admm";
    case SolverKind::sbl:
        return "sbl";
    default:
        return "somp";
    }
}

inline SolverKind solver_from_string(const std::string &s) {
    if (s == "amp")
        return SolverKind::amp;
    if (s == "admm")
        return SolverKind::admm;
    if (s == "sbl")
        return SolverKind::sbl;
    if (s == "somp")
        return SolverKind::somp;
    throw std::invalid_argument("unknown solver '" + s + "' (expected amp|admm|sbl|somp)");
}

// Cell, waveform and run parameters for one experiment point.
//
// Dimensions follow the uplink model: N machine-type devices (MTDs), each holding Q
// candidate sequences of length T; E broadband devices sending L pilot symbols followed
// by T-L payload symbols; M receive antennas.
struct NetworkConfig {
    // Population and frame geometry.
    std::uint64_t n_mtds = 1000;     // N
    std::uint64_t n_embb = 4;        // E
    std::uint64_t antennas = 32;     // M
    std::uint64_t coherence_len = 256; // T, symbols per coherence block
    std::uint64_t pilot_len = 32;    // L, pilot symbols (power of two)
    std::uint64_t q_messages = 2;    // Q, sequences per MTD

    // Traffic and codebook design.
    double epsilon = 0.01;           // MTD activation probability per block
    double chi = 1e-6;               // target header-collision probability
    std::uint64_t kappa = 2;         // modulation order of message bodies
    std::uint64_t pool_cap = 4096;   // candidate-pool cap for message selection
    bool shared_pool = false;        // all MTDs draw messages from one shared pool
    bool gaussian_codebook = false;  // i.i.d. Gaussian benchmark sequences/pilots

    // Radio parameters.
    double p_max_w = 0.1;            // MTD maximum transmit power [W]
    double rho_max_w = 0.1;          // broadband maximum transmit power [W]
    double noise_w = 2e-13;          // receiver noise power sigma^2 [W]
    double cell_radius_m = 250.0;    // cell radius [m]
    double min_distance_m = 35.0;    // placement annulus inner radius [m]
    double snr_mtd_db = 5.0;         // target average received SNR for MTDs
    double snr_embb_db = 25.0;       // target average received SNR for broadband devices

    // Rate / outage model.
    double bits = 128.0;             // payload bits b per broadband message
    double symbol_s = 16e-6;         // symbol duration T_s [s]
    bool rate_literal = false;       // true: r = b/((T-L)*T_s); false (default): r = b/(T-L)

    // Run control.
    std::uint64_t seed = 1;
    std::uint64_t trials = 100;
    SolverKind solver = SolverKind::amp;
    double tol = 1e-4;               // solver convergence tolerance (Delta)
    std::uint64_t t_max = 200;       // solver iteration cap
    double mu = 0.0;                 // group-lasso weight; 0 = automatic
    double rho = 1.0;                // ADMM penalty parameter
    std::uint64_t k_max = 0;         // greedy support cap; 0 = ceil(2*epsilon*N)
    std::uint64_t se_samples = 0;    // >0: Monte-Carlo state evolution in AMP
    bool freeze_placement = false;   // reuse one placement across trials
    bool codebook_per_trial = false; // redraw the codebook every trial
    double pfa_target = 1e-2;        // operating false-alarm rate for threshold calibration
    std::uint64_t roc_grid = 64;     // number of ROC threshold grid points
    std::string metrics = "all";     // all | mtd | embb
};

namespace detail {

inline std::string trim(const std::string &s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos)
        return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string &key, const std::string &val) {
    std::size_t pos = 0;
    double x = 0.0;
    try {
        x = std::stod(val, &pos);
    } catch (const std::exception &) {
        throw std::invalid_argument("config key '" + key + "': cannot parse number '" + val + "'");
    }
    if (pos != val.size())
        throw std::invalid_argument("config key '" + key + "': trailing characters in '" + val + "'");
    return x;
}

inline std::uint64_t parse_uint(const std::string &key, const std::string &val) {
    const double x = parse_double(key, val);
    if (x < 0.0 || x != static_cast<double>(static_cast<std::uint64_t>(x)))
        throw std::invalid_argument("config key '" + key + "': expected a non-negative integer, got '" + val + "'");
    return static_cast<std::uint64_t>(x);
}

inline bool parse_bool(const std::string &key, const std::string &val) {
    if (val == "0" || val == "false" || val == "no")
        return false;
    if (val == "1" || val == "true" || val == "yes")
        return true;
    throw std::invalid_argument("config key '" + key + "': expected a boolean, got '" + val + "'");
}

} // namespace detail

inline bool is_power_of_two(std::uint64_t x) { return x != 0 && (x & (x - 1)) == 0; }

// Checks all structural invariants; throws std::invalid_argument describing the first
// violated one. Called by the parser and again by the harness before a run.
inline void validate(const NetworkConfig &c) {
    if (c.n_mtds < 1)
        throw std::invalid_argument("n_mtds must be >= 1");
    if (c.antennas < 1)
        throw std::invalid_argument("antennas must be >= 1");
    if (c.q_messages < 1)
        throw std::invalid_argument("q_messages must be >= 1");
    if (!is_power_of_two(c.pilot_len))
        throw std::invalid_argument("pilot_len must be a power of two");
    if (c.n_embb >= c.pilot_len)
        throw std::invalid_argument("n_embb must be smaller than pilot_len");
    if (c.pilot_len >= c.coherence_len)
        throw std::invalid_argument("pilot_len must be smaller than coherence_len");
    if (c.epsilon < 0.0 || c.epsilon > 1.0)
        throw std::invalid_argument("epsilon must lie in [0, 1]");
    if (c.chi <= 0.0 || c.chi > 1.0)
        throw std::invalid_argument("chi must lie in (0, 1]");
    if (c.kappa < 2)
        throw std::invalid_argument("kappa must be >= 2");
    if (c.pool_cap < c.q_messages)
        throw std::invalid_argument("pool_cap must be >= q_messages");
    if (c.p_max_w <= 0.0 || c.rho_max_w <= 0.0 || c.noise_w <= 0.0)
        throw std::invalid_argument("p_max_w, rho_max_w and noise_w must be positive");
    if (c.min_distance_m <= 0.0 || c.cell_radius_m <= c.min_distance_m)
        throw std::invalid_argument("cell_radius_m must exceed min_distance_m (> 0)");
    if (c.bits <= 0.0 || c.symbol_s <= 0.0)
        throw std::invalid_argument("bits and symbol_s must be positive");
    if (c.trials < 1)
        throw std::invalid_argument("trials must be >= 1");
    if (c.tol <= 0.0)
        throw std::invalid_argument("tol must be positive");
    if (c.t_max < 1)
        throw std::invalid_argument("t_max must be >= 1");
    if (c.rho <= 0.0)
        throw std::invalid_argument("rho must be positive");
    if (c.mu < 0.0)
        throw std::invalid_argument("mu must be non-negative (0 selects the default)");
    if (c.pfa_target <= 0.0 || c.pfa_target >= 1.0)
        throw std::invalid_argument("pfa_target must lie in (0, 1)");
    if (c.roc_grid < 2)
        throw std::invalid_argument("roc_grid must be >= 2");
    if (c.metrics != "all" && c.metrics != "mtd" && c.metrics != "embb")
        throw std::invalid_argument("metrics must be one of all|mtd|embb");
}

// Parses "key = value" lines ('#' starts a comment). Unknown or duplicate keys are
// rejected so typos cannot silently fall back to defaults.
inline NetworkConfig parse_config_text(const std::string &text) {
    NetworkConfig c;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    std::uint64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        if (key.empty() || val.empty())
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key or value");
        if (!seen.insert(key).second)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");

        if (key == "n_mtds")
            c.n_mtds = detail::parse_uint(key, val);
        else if (key == "n_embb")
            c.n_embb = detail::parse_uint(key, val);
        else if (key == "antennas")
            c.antennas = detail::parse_uint(key, val);
        else if (key == "coherence_len")
            c.coherence_len = detail::parse_uint(key, val);
        else if (key == "pilot_len")
            c.pilot_len = detail::parse_uint(key, val);
        else if (key == "q_messages")
            c.q_messages = detail::parse_uint(key, val);
        else if (key == "epsilon")
            c.epsilon = detail::parse_double(key, val);
        else if (key == "chi")
            c.chi = detail::parse_double(key, val);
        else if (key == "kappa")
            c.kappa = detail::parse_uint(key, val);
        else if (key == "pool_cap")
            c.pool_cap = detail::parse_uint(key, val);
        else if (key == "shared_pool")
            c.shared_pool = detail::parse_bool(key, val);
        else if (key == "gaussian_codebook")
            c.gaussian_codebook = detail::parse_bool(key, val);
        else if (key == "p_max_w")
            c.p_max_w = detail::parse_double(key, val);
        else if (key == "rho_max_w")
            c.rho_max_w = detail::parse_double(key, val);
        else if (key == "noise_w")
            c.noise_w = detail::parse_double(key, val);
        else if (key == "cell_radius_m")
            c.cell_radius_m = detail::parse_double(key, val);
        else if (key == "min_distance_m")
            c.min_distance_m = detail::parse_double(key, val);
        else if (key == "snr_mtd_db")
            c.snr_mtd_db = detail::parse_double(key, val);
        else if (key == "snr_embb_db")
            c.snr_embb_db = detail::parse_double(key, val);
        else if (key == "bits")
            c.bits = detail::parse_double(key, val);
        else if (key == "symbol_s")
            c.symbol_s = detail::parse_double(key, val);
        else if (key == "rate_literal")
            c.rate_literal = detail::parse_bool(key, val);
        else if (key == "seed")
            c.seed = detail::parse_uint(key, val);
        else if (key == "trials")
            c.trials = detail::parse_uint(key, val);
        else if (key == "solver")
            c.solver = solver_from_string(val);
        else if (key == "tol")
            c.tol = detail::parse_double(key, val);
        else if (key == "t_max")
            c.t_max = detail::parse_uint(key, val);
        else if (key == "mu")
            c.mu = detail::parse_double(key, val);
        else if (key == "rho")
            c.rho = detail::parse_double(key, val);
        else if (key == "k_max")
            c.k_max = detail::parse_uint(key, val);
        else if (key == "se_samples")
            c.se_samples = detail::parse_uint(key, val);
        else if (key == "freeze_placement")
            c.freeze_placement = detail::parse_bool(key, val);
        else if (key == "codebook_per_trial")
            c.codebook_per_trial = detail::parse_bool(key, val);
        else if (key == "pfa_target")
            c.pfa_target = detail::parse_double(key, val);
        else if (key == "roc_grid")
            c.roc_grid = detail::parse_uint(key, val);
        else if (key == "metrics")
            c.metrics = val;
        else
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    validate(c);
    return c;
}

inline NetworkConfig parse_config_file(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

} // namespace hetsim
