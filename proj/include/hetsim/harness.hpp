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
// Experiment orchestration: sweep handling, per-trial pipeline composition (placement ->
// channels -> activity -> block synthesis -> coherent chain -> sparse recovery ->
// detection), a deterministic trial-parallel runner and CSV/plot emission.
//
// Determinism contract: every random draw comes from a counter-derived stream keyed by
// (master seed, purpose label, sweep-point index, trial index), and aggregation folds
// trial outputs in index order, so results are identical for any worker count.

#pragma once

#include <armadillo>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "channel.hpp"
#include "codebook.hpp"
#include "config.hpp"
#include "embb.hpp"
#include "metrics.hpp"
#include "plot.hpp"
#include "rng.hpp"
#include "solvers.hpp"

namespace hetsim {

struct ExperimentPlan {
    NetworkConfig base;
    std::string axis = "none";       // config key to sweep, or "none"
    std::vector<double> values = {}; // sweep values; ignored for axis "none"
    std::string out_dir = ".";
    std::string codebook_path;       // optional pinned codebook file
    bool plot = false;
    unsigned jobs = 1;
};

// Stream labels for counter-derived seeds (arbitrary distinct constants).
namespace seed_label {
inline constexpr std::uint64_t placement = 0x504cu;
inline constexpr std::uint64_t channel = 0x4348u;
inline constexpr std::uint64_t signal = 0x5349u;
inline constexpr std::uint64_t codebook = 0x434fu;
inline constexpr std::uint64_t state_evo = 0x5345u;
} // namespace seed_label

// Applies one sweep value to a copy of the configuration. Axes mirror the experiment
// dimensions of the study: target SNRs, pilot length, antennas, messages per device,
// activity probability and broadband device count. Integer axes reject fractional values.
inline NetworkConfig apply_axis(const NetworkConfig &base, const std::string &axis, double value) {
    NetworkConfig cfg = base;
    auto as_count = [&](const char *name) {
        if (value < 0.0 || value != std::floor(value))
            throw std::invalid_argument(std::string("sweep axis ") + name + " requires a non-negative integer");
        return static_cast<arma::uword>(value);
    };
    if (axis == "none") {
        // identity
    } else if (axis == "snr_embb_db") {
        cfg.snr_embb_db = value;
    } else if (axis == "snr_mtd_db") {
        cfg.snr_mtd_db = value;
    } else if (axis == "pilot_len") {
        cfg.pilot_len = as_count("pilot_len");
    } else if (axis == "antennas") {
        cfg.antennas = as_count("antennas");
    } else if (axis == "q_messages") {
        cfg.q_messages = as_count("q_messages");
    } else if (axis == "epsilon") {
        cfg.epsilon = value;
    } else if (axis == "n_embb") {
        cfg.n_embb = as_count("n_embb");
    } else {
        throw std::invalid_argument("unknown sweep axis '" + axis +
                                    "' (expected snr_embb_db, snr_mtd_db, pilot_len, antennas, "
                                    "q_messages, epsilon, or n_embb)");
    }
    validate(cfg);
    return cfg;
}

// Solver hyperparameters derived from a configuration and one realization's power state.
inline SolverParams make_solver_params(const NetworkConfig &cfg, const DevicePlacement &pl,
                                       const ChannelRealization &ch, std::uint64_t se_seed) {
    SolverParams prm;
    prm.delta = cfg.tol;
    prm.t_max = cfg.t_max;
    prm.mu = cfg.mu;
    prm.rho_admm = cfg.rho;
    prm.sigma2 = cfg.noise_w;
    prm.se_samples = cfg.se_samples;
    prm.se_seed = se_seed;
    const double q = static_cast<double>(cfg.q_messages);
    prm.xi = std::clamp(cfg.epsilon / q, 1e-12, 1.0 - 1e-12);
    prm.gamma_priors.set_size(cfg.n_mtds * cfg.q_messages);
    for (arma::uword n = 0; n < cfg.n_mtds; ++n) {
        const double slab = ch.p_ul(n) * pl.gamma(n); // effective received power per antenna
        for (arma::uword qq = 0; qq < cfg.q_messages; ++qq)
            prm.gamma_priors(n * cfg.q_messages + qq) = slab;
    }
    return prm;
}

inline arma::uword default_k_max(const NetworkConfig &cfg) {
    if (cfg.k_max > 0)
        return cfg.k_max;
    const double expect = 2.0 * cfg.epsilon * static_cast<double>(cfg.n_mtds);
    arma::uword k = static_cast<arma::uword>(std::ceil(expect));
    k = std::max<arma::uword>(k, 1);
    const arma::uword cap = std::min<arma::uword>(cfg.coherence_len - 1, cfg.n_mtds * cfg.q_messages);
    return std::min(k, cap);
}

inline SparseEstimate run_solver(const NetworkConfig &cfg, const arma::cx_mat &Y, const arma::cx_mat &S,
                                 const SolverParams &prm) {
    switch (cfg.solver) {
    case SolverKind::amp:
        return amp_decode(Y, S, prm);
    case SolverKind::admm:
        return admm_l21(Y, S, prm);
    case SolverKind::sbl:
        return em_sbl(Y, S, prm);
    case SolverKind::somp:
        return somp(Y, S, prm, default_k_max(cfg));
    }
    throw std::logic_error("run_solver: unhandled solver kind");
}

// Everything one trial contributes to the aggregation.
struct TrialOutput {
    bool valid = false;
    TrialScores scores;  // row scores + truth (empty when the solver stage is skipped)
    bool solver_ran = false;
    double nmse_mtd = std::numeric_limits<double>::quiet_NaN();  // per-trial mean over active rows
    arma::uword nmse_mtd_excluded = 0;
    double nmse_embb = std::numeric_limits<double>::quiet_NaN(); // per-trial mean over broadband devices
    std::vector<bool> decoded;
    double iterations = 0.0;
    bool converged = true;
    arma::uword k_count = 0;
};

// Runs the full pipeline for one trial. All randomness is drawn from streams derived from
// (master, point, trial), so any subset of trials can be reproduced in isolation.
inline TrialOutput run_trial(const NetworkConfig &cfg, const Codebook &cb, const DevicePlacement *frozen,
                             std::uint64_t master, std::uint64_t point, std::uint64_t trial) {
    TrialOutput out;

    DevicePlacement pl_local;
    const DevicePlacement *pl = frozen;
    if (pl == nullptr) {
        Rng rng_pl(master, {seed_label::placement, point, trial});
        pl_local = make_placement(cfg, rng_pl);
        pl = &pl_local;
    }

    Rng rng_ch(master, {seed_label::channel, point, trial});
    ChannelRealization ch = draw_channels(cfg, *pl, rng_ch);
    draw_activity(cfg, ch, rng_ch);
    out.k_count = arma::accu(ch.alpha);

    Rng rng_sig(master, {seed_label::signal, point, trial});
    TrialSignals sig = synthesize_received(ch, cb, cfg.noise_w, rng_sig);

    const EmbbEstimate est = run_embb_chain(cfg, *pl, ch, cb, sig);
    out.decoded = sig.block.decoded_mask;
    if (cfg.n_embb > 0) {
        const arma::uvec all_e = arma::regspace<arma::uvec>(0, cfg.n_embb - 1);
        out.nmse_embb = nmse_rows(ch.H, est.Hhat, all_e).mean();
    }

    const bool want_solver = (cfg.metrics != "embb");
    if (want_solver) {
        const SolverParams prm =
            make_solver_params(cfg, *pl, ch, derive_seed(master, {seed_label::state_evo, point, trial}));
        const SparseEstimate se = run_solver(cfg, sig.block.Y, cb.S, prm);
        out.solver_ran = true;
        out.iterations = static_cast<double>(se.iterations);
        out.converged = se.converged;
        out.scores.xbar = se.xbar;
        out.scores.alpha_true = ch.alpha_seq;
        out.scores.Q = cfg.q_messages;

        const arma::uvec active_rows = arma::find(ch.alpha_seq == 1);
        const NmseAccum acc = nmse_rows(sig.X_true, se.Xhat, active_rows);
        out.nmse_mtd = acc.mean();
        out.nmse_mtd_excluded = acc.excluded;
    }
    out.valid = true;
    return out;
}

struct PointOutputs {
    std::vector<TrialOutput> trials; // index == trial index; invalid slots failed
    arma::uword failed = 0;
    std::string first_error;
};

// Runs all trials of one sweep point on `jobs` workers. Trial indices are handed out
// atomically but results land in index order, so aggregation is order-independent of the
// scheduling. Trials that throw are counted; more than 1% failures aborts the experiment.
inline PointOutputs run_point(const NetworkConfig &cfg, const Codebook &cb, std::uint64_t point_idx,
                              unsigned jobs) {
    const arma::uword n_trials = cfg.trials;
    PointOutputs out;
    out.trials.resize(n_trials);

    const DevicePlacement *frozen = nullptr;
    DevicePlacement frozen_store;
    if (cfg.freeze_placement) {
        Rng rng_pl(cfg.seed, {seed_label::placement, point_idx});
        frozen_store = make_placement(cfg, rng_pl);
        frozen = &frozen_store;
    }

    std::atomic<arma::uword> next{0};
    std::vector<std::string> errors(n_trials);
    auto worker = [&]() {
        for (;;) {
            const arma::uword t = next.fetch_add(1);
            if (t >= n_trials)
                return;
            try {
                Codebook cb_local;
                const Codebook *cb_use = &cb;
                if (cfg.codebook_per_trial) {
                    cb_local = make_codebook(cfg, derive_seed(cfg.seed, {seed_label::codebook, point_idx, t}));
                    cb_use = &cb_local;
                }
                out.trials[t] = run_trial(cfg, *cb_use, frozen, cfg.seed, point_idx, t);
            } catch (const std::exception &ex) {
                std::ostringstream msg;
                msg << "trial " << t << ": " << ex.what();
                errors[t] = msg.str();
            }
        }
    };
    const unsigned n_workers = std::max(1u, jobs);
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (unsigned w = 0; w < n_workers; ++w)
            pool.emplace_back(worker);
        for (auto &th : pool)
            th.join();
    }
    for (arma::uword t = 0; t < n_trials; ++t)
        if (!out.trials[t].valid) {
            ++out.failed;
            if (out.first_error.empty())
                out.first_error = errors[t];
        }
    if (100 * out.failed > n_trials)
        throw std::runtime_error("experiment point failed: more than 1% of trials errored (first: " +
                                 out.first_error + ")");
    return out;
}

inline std::vector<TrialScores> collect_scores(const PointOutputs &po) {
    std::vector<TrialScores> scores;
    scores.reserve(po.trials.size());
    for (const auto &t : po.trials)
        if (t.valid && t.solver_ran)
            scores.push_back(t.scores);
    return scores;
}

namespace detail {

inline std::string zero_pad(arma::uword v, int width) {
    std::ostringstream os;
    os.width(width);
    os.fill('0');
    os << v;
    return os.str();
}

} // namespace detail

// Aggregates one point's trial outputs into CSV rows: detection rates at the threshold
// calibrated for the configured false-alarm target, outage, NMSEs, solver diagnostics and
// the full operating-curve grid.
inline std::vector<CsvRow> point_rows(const NetworkConfig &cfg, const std::string &axis, double value,
                                      const PointOutputs &po) {
    std::vector<CsvRow> rows;
    const auto add = [&](const std::string &metric, const Stat &st) {
        rows.push_back({axis, value, metric, st.mean, st.ci95, st.n});
    };

    std::vector<double> v_pout, v_nmse_embb, v_k;
    for (const auto &t : po.trials) {
        if (!t.valid)
            continue;
        if (!t.decoded.empty()) {
            arma::uword outages = 0;
            for (bool d : t.decoded)
                if (!d)
                    ++outages;
            v_pout.push_back(static_cast<double>(outages) / static_cast<double>(t.decoded.size()));
        }
        if (std::isfinite(t.nmse_embb))
            v_nmse_embb.push_back(t.nmse_embb);
        v_k.push_back(static_cast<double>(t.k_count));
    }
    if (cfg.metrics != "mtd") {
        add("p_out", summarize(v_pout));
        add("nmse_embb", summarize(v_nmse_embb));
    }
    add("k_count", summarize(v_k));

    const std::vector<TrialScores> scores = collect_scores(po);
    if (cfg.metrics != "embb" && !scores.empty()) {
        const double zeta = calibrate_zeta(scores, cfg.pfa_target);
        std::vector<double> v_pmd, v_pfa, v_nmse_mtd, v_iter, v_conv;
        for (const auto &t : po.trials) {
            if (!t.valid || !t.solver_ran)
                continue;
            const auto [pmd, pfa] = trial_rates_at(t.scores, zeta);
            v_pmd.push_back(pmd);
            v_pfa.push_back(pfa);
            if (std::isfinite(t.nmse_mtd))
                v_nmse_mtd.push_back(t.nmse_mtd);
            v_iter.push_back(t.iterations);
            v_conv.push_back(t.converged ? 1.0 : 0.0);
        }
        add("pmd", summarize(v_pmd));
        add("pfa", summarize(v_pfa));
        rows.push_back({axis, value, "zeta", zeta, std::numeric_limits<double>::quiet_NaN(),
                        static_cast<arma::uword>(scores.size())});
        add("nmse_mtd", summarize(v_nmse_mtd));
        add("solver_iterations", summarize(v_iter));
        add("solver_converged", summarize(v_conv));

        const auto roc = roc_curve(scores, cfg.roc_grid);
        for (std::size_t i = 0; i < roc.size(); ++i) {
            const std::string suffix = detail::zero_pad(static_cast<arma::uword>(i), 3);
            const arma::uword n = static_cast<arma::uword>(scores.size());
            const double nan = std::numeric_limits<double>::quiet_NaN();
            rows.push_back({axis, value, "roc_pmd_" + suffix, roc[i].pmd, nan, n});
            rows.push_back({axis, value, "roc_pfa_" + suffix, roc[i].pfa, nan, n});
            rows.push_back({axis, value, "roc_zeta_" + suffix, roc[i].zeta, nan, n});
        }
    }
    return rows;
}

struct ExperimentResult {
    std::vector<CsvRow> rows;
    std::string csv_path;
    std::vector<std::string> plot_paths;
};

// Runs the full experiment: per sweep value, builds (or loads) the codebook, runs the
// trial loop and aggregates; writes results.csv and optional SVG figures into out_dir.
inline ExperimentResult run_experiment(const ExperimentPlan &plan) {
    validate(plan.base);
    std::vector<double> values = plan.values;
    if (plan.axis == "none") {
        values = {0.0};
    } else if (values.empty()) {
        throw std::invalid_argument("sweep over '" + plan.axis + "' has an empty value list");
    }

    Codebook pinned;
    const bool use_pinned = !plan.codebook_path.empty();
    if (use_pinned)
        pinned = load_codebook(plan.codebook_path);

    ExperimentResult result;
    for (std::size_t p = 0; p < values.size(); ++p) {
        const NetworkConfig cfg = apply_axis(plan.base, plan.axis, values[p]);
        Codebook built;
        const Codebook *cb = &pinned;
        if (use_pinned) {
            if (pinned.T != cfg.coherence_len || pinned.L != cfg.pilot_len || pinned.E != cfg.n_embb ||
                pinned.N != cfg.n_mtds || pinned.Q != cfg.q_messages)
                throw std::invalid_argument("pinned codebook dimensions do not match sweep point " +
                                            std::to_string(values[p]));
        } else {
            built = make_codebook(cfg, derive_seed(cfg.seed, {seed_label::codebook, p}));
            cb = &built;
        }
        const PointOutputs po = run_point(cfg, *cb, p, plan.jobs);
        const double value = (plan.axis == "none") ? 0.0 : values[p];
        const auto rows = point_rows(cfg, plan.axis, value, po);
        result.rows.insert(result.rows.end(), rows.begin(), rows.end());
    }

    std::filesystem::create_directories(plan.out_dir);
    result.csv_path = (std::filesystem::path(plan.out_dir) / "results.csv").string();
    write_csv(result.csv_path, result.rows);

    if (plan.plot) {
        auto has_prefix = [&](const std::string &prefix) {
            for (const auto &r : result.rows)
                if (r.metric.rfind(prefix, 0) == 0)
                    return true;
            return false;
        };
        const auto emit = [&](const std::string &kind) {
            const std::string path = (std::filesystem::path(plan.out_dir) / (kind + ".svg")).string();
            plot_csv_rows(result.rows, kind, path);
            result.plot_paths.push_back(path);
        };
        if (has_prefix("roc_pmd_"))
            emit("roc");
        if (has_prefix("nmse"))
            emit("nmse");
        if (has_prefix("pmd") || has_prefix("p_out"))
            emit("pmd");
    }
    return result;
}

} // namespace hetsim
