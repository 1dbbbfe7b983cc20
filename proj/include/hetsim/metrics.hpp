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
//
// Sequence-level detection metrics (missed-detection / false-alarm probabilities, ROC),
// channel-estimate NMSE, outage aggregation, confidence intervals and the CSV emitter.

#pragma once

#include <algorithm>
#include <armadillo>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "solvers.hpp"

namespace hetsim {

// Sequence-level miss / false-alarm rates for one trial. A detection of the right device
// with the wrong message index counts as one miss plus one false alarm. Returns NaN for a
// rate whose denominator is empty (no active sequences, or no inactive ones).
inline std::pair<double, double> pmd_pfa(const arma::uvec &alpha_true, const arma::uvec &alpha_hat,
                                         arma::uword k_count) {
    if (alpha_true.n_elem != alpha_hat.n_elem)
        throw std::invalid_argument("pmd_pfa: indicator lengths differ");
    const arma::uword nq = alpha_true.n_elem;
    if (k_count > nq)
        throw std::invalid_argument("pmd_pfa: k_count exceeds sequence count");
    arma::uword miss = 0, fa = 0;
    for (arma::uword i = 0; i < nq; ++i) {
        if (alpha_true(i) != 0 && alpha_hat(i) == 0)
            ++miss;
        if (alpha_true(i) == 0 && alpha_hat(i) != 0)
            ++fa;
    }
    const double pmd = (k_count > 0) ? static_cast<double>(miss) / static_cast<double>(k_count)
                                     : std::numeric_limits<double>::quiet_NaN();
    const double pfa = (nq > k_count) ? static_cast<double>(fa) / static_cast<double>(nq - k_count)
                                      : std::numeric_limits<double>::quiet_NaN();
    return {pmd, pfa};
}

// Per-trial detection evidence: the full row-score vector plus the ground-truth
// indicators, enough to re-run the detector at any threshold.
struct TrialScores {
    arma::vec xbar;        // [NQ] row scores
    arma::uvec alpha_true; // [NQ] transmitted-sequence indicators
    arma::uword Q = 1;
};

inline std::pair<double, double> trial_rates_at(const TrialScores &ts, double zeta) {
    const arma::uvec alpha_hat = detect_sequences(ts.xbar, zeta, ts.Q);
    return pmd_pfa(ts.alpha_true, alpha_hat, arma::accu(ts.alpha_true));
}

struct RocPoint {
    double zeta = 0.0;
    double pmd = 0.0;
    double pfa = 0.0;
};

namespace detail {

inline double nan_mean(const std::vector<double> &v) {
    double s = 0.0;
    std::size_t n = 0;
    for (double x : v)
        if (std::isfinite(x)) {
            s += x;
            ++n;
        }
    return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

} // namespace detail

// Detection operating curve: sweeps the threshold over a quantile grid of the pooled row
// scores (plus the 0 and above-maximum endpoints), averages per-trial miss/false-alarm
// rates at each threshold and returns the points sorted by increasing false-alarm rate
// with the running-minimum monotone cleanup applied to the miss rate.
inline std::vector<RocPoint> roc_curve(const std::vector<TrialScores> &trials, arma::uword grid_size) {
    if (trials.empty())
        throw std::invalid_argument("roc_curve: no trials");
    if (grid_size < 2)
        throw std::invalid_argument("roc_curve requires grid_size >= 2");
    std::vector<double> pooled;
    for (const auto &t : trials)
        pooled.insert(pooled.end(), t.xbar.begin(), t.xbar.end());
    if (pooled.empty())
        throw std::invalid_argument("roc_curve: empty score pool");
    std::sort(pooled.begin(), pooled.end());

    std::vector<double> zetas;
    zetas.push_back(0.0);
    for (arma::uword g = 0; g < grid_size; ++g) {
        const std::size_t idx = static_cast<std::size_t>(
            (static_cast<double>(g) / static_cast<double>(grid_size - 1)) * static_cast<double>(pooled.size() - 1));
        zetas.push_back(pooled[idx]);
    }
    zetas.push_back(std::nextafter(pooled.back(), std::numeric_limits<double>::infinity()) +
                    std::abs(pooled.back()) * 1e-12 + 1e-300);
    std::sort(zetas.begin(), zetas.end());
    zetas.erase(std::unique(zetas.begin(), zetas.end()), zetas.end());

    std::vector<RocPoint> roc;
    roc.reserve(zetas.size());
    for (double z : zetas) {
        std::vector<double> pmds, pfas;
        pmds.reserve(trials.size());
        pfas.reserve(trials.size());
        for (const auto &t : trials) {
            const auto [pmd, pfa] = trial_rates_at(t, z);
            pmds.push_back(pmd);
            pfas.push_back(pfa);
        }
        roc.push_back({z, detail::nan_mean(pmds), detail::nan_mean(pfas)});
    }
    std::sort(roc.begin(), roc.end(), [](const RocPoint &a, const RocPoint &b) {
        return a.pfa < b.pfa || (a.pfa == b.pfa && a.pmd < b.pmd);
    });
    double run_min = std::numeric_limits<double>::infinity();
    for (auto &p : roc) {
        run_min = std::min(run_min, p.pmd);
        p.pmd = run_min;
    }
    return roc;
}

// Miss rate read off a (cleaned) operating curve at a target false-alarm rate, linearly
// interpolated between the bracketing points and clamped at the curve ends.
inline double pmd_at_pfa(const std::vector<RocPoint> &roc, double pfa_target) {
    if (roc.empty())
        throw std::invalid_argument("pmd_at_pfa: empty curve");
    if (pfa_target <= roc.front().pfa)
        return roc.front().pmd;
    if (pfa_target >= roc.back().pfa)
        return roc.back().pmd;
    for (std::size_t i = 1; i < roc.size(); ++i) {
        if (roc[i].pfa >= pfa_target) {
            const double span = roc[i].pfa - roc[i - 1].pfa;
            if (span <= 0.0)
                return roc[i].pmd;
            const double w = (pfa_target - roc[i - 1].pfa) / span;
            return roc[i - 1].pmd + w * (roc[i].pmd - roc[i - 1].pmd);
        }
    }
    return roc.back().pmd;
}

// Detection threshold calibrated from pooled inactive-row scores: just above the
// (1 - pfa_target) quantile, so at most a fraction pfa_target of inactive rows scores at
// or above the threshold.
inline double calibrate_zeta(const std::vector<TrialScores> &trials, double pfa_target) {
    if (!(pfa_target > 0.0) || !(pfa_target < 1.0))
        throw std::invalid_argument("calibrate_zeta requires pfa_target in (0,1)");
    std::vector<double> pool;
    for (const auto &t : trials)
        for (arma::uword i = 0; i < t.xbar.n_elem; ++i)
            if (t.alpha_true(i) == 0)
                pool.push_back(t.xbar(i));
    if (pool.empty())
        throw std::invalid_argument("calibrate_zeta: no inactive rows pooled");
    std::sort(pool.begin(), pool.end());
    const double pos = (1.0 - pfa_target) * static_cast<double>(pool.size() - 1);
    const std::size_t idx = static_cast<std::size_t>(std::ceil(pos));
    // Detection is boundary-inclusive (score >= zeta fires), so step just above the pooled
    // quantile: rows scoring exactly the quantile value must not fire.
    return std::nextafter(pool[std::min(idx, pool.size() - 1)],
                          std::numeric_limits<double>::infinity());
}

// Accumulates mean ||truth - estimate||^2 / ||truth||^2 over rows, excluding (and
// counting) rows with zero-norm truth.
struct NmseAccum {
    double sum = 0.0;
    arma::uword count = 0;
    arma::uword excluded = 0;

    void add(double truth_norm2, double err_norm2) {
        if (truth_norm2 > 0.0) {
            sum += err_norm2 / truth_norm2;
            ++count;
        } else {
            ++excluded;
        }
    }
    double mean() const { return count ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN(); }
};

// Row-restricted NMSE between two equally shaped matrices.
inline NmseAccum nmse_rows(const arma::cx_mat &truth, const arma::cx_mat &est, const arma::uvec &rows) {
    if (truth.n_rows != est.n_rows || truth.n_cols != est.n_cols)
        throw std::invalid_argument("nmse_rows: shape mismatch");
    NmseAccum acc;
    for (arma::uword r : rows) {
        if (r >= truth.n_rows)
            throw std::invalid_argument("nmse_rows: row index out of range");
        const double tn = arma::accu(arma::square(arma::abs(truth.row(r))));
        const double en = arma::accu(arma::square(arma::abs(truth.row(r) - est.row(r))));
        acc.add(tn, en);
    }
    return acc;
}

// Fraction of (trial, device) outage events among all decode attempts.
inline double outage_probability(const std::vector<std::vector<bool>> &decoded_masks) {
    arma::uword total = 0, outages = 0;
    for (const auto &mask : decoded_masks)
        for (bool decoded : mask) {
            ++total;
            if (!decoded)
                ++outages;
        }
    return total ? static_cast<double>(outages) / static_cast<double>(total)
                 : std::numeric_limits<double>::quiet_NaN();
}

// Sample mean with a 95% normal-approximation half-width. Non-finite entries are skipped;
// fewer than two finite samples yield a NaN half-width.
struct Stat {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double ci95 = std::numeric_limits<double>::quiet_NaN();
    arma::uword n = 0;
};

inline Stat summarize(const std::vector<double> &values) {
    Stat st;
    double s = 0.0;
    for (double v : values)
        if (std::isfinite(v)) {
            s += v;
            ++st.n;
        }
    if (st.n == 0)
        return st;
    st.mean = s / static_cast<double>(st.n);
    if (st.n >= 2) {
        double ss = 0.0;
        for (double v : values)
            if (std::isfinite(v))
                ss += (v - st.mean) * (v - st.mean);
        const double var = ss / static_cast<double>(st.n - 1);
        st.ci95 = 1.96 * std::sqrt(var / static_cast<double>(st.n));
    }
    return st;
}

// One CSV output row; the schema is fixed: sweep_var,value,metric,mean,ci95,trials.
struct CsvRow {
    std::string sweep_var;
    double value = 0.0;
    std::string metric;
    double mean = 0.0;
    double ci95 = std::numeric_limits<double>::quiet_NaN();
    arma::uword trials = 0;
};

inline constexpr const char *kCsvVersionLine = "# hetsim csv v1";
inline constexpr const char *kCsvHeaderLine = "sweep_var,value,metric,mean,ci95,trials";

namespace detail {

inline std::string format_g(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

} // namespace detail

inline void write_csv(const std::string &path, const std::vector<CsvRow> &rows) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    out << kCsvVersionLine << "\n" << kCsvHeaderLine << "\n";
    for (const auto &r : rows) {
        out << r.sweep_var << "," << detail::format_g(r.value) << "," << r.metric << ","
            << detail::format_g(r.mean) << ",";
        if (std::isfinite(r.ci95))
            out << detail::format_g(r.ci95);
        out << "," << r.trials << "\n";
    }
    if (!out)
        throw std::runtime_error("failed while writing '" + path + "'");
}

inline std::vector<CsvRow> read_csv(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open CSV file '" + path + "'");
    std::string line;
    std::vector<CsvRow> rows;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        if (!header_seen) {
            if (line != kCsvHeaderLine)
                throw std::runtime_error("CSV schema error in '" + path + "': expected header '" +
                                         std::string(kCsvHeaderLine) + "', found '" + line + "'");
            header_seen = true;
            continue;
        }
        std::istringstream ls(line);
        std::string field;
        CsvRow row;
        if (!std::getline(ls, row.sweep_var, ','))
            throw std::runtime_error("CSV parse error in '" + path + "': " + line);
        if (!std::getline(ls, field, ','))
            throw std::runtime_error("CSV parse error in '" + path + "': " + line);
        row.value = std::stod(field);
        if (!std::getline(ls, row.metric, ','))
            throw std::runtime_error("CSV parse error in '" + path + "': " + line);
        if (!std::getline(ls, field, ','))
            throw std::runtime_error("CSV parse error in '" + path + "': " + line);
        row.mean = std::stod(field);
        if (!std::getline(ls, field, ','))
            throw std::runtime_error("CSV parse error in '" + path + "': " + line);
        row.ci95 = field.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(field);
        if (!std::getline(ls, field))
            throw std::runtime_error("CSV parse error in '" + path + "': " + line);
        row.trials = static_cast<arma::uword>(std::stoull(field));
        rows.push_back(std::move(row));
    }
    if (!header_seen)
        throw std::runtime_error("CSV schema error in '" + path + "': missing header");
    return rows;
}

} // namespace hetsim
