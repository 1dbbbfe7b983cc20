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
// Command-line front end:
//   hetsim simulate --config FILE [--sweep AXIS=v1,v2,...] [--solver NAME] [--out DIR]
//                   [--plot] [--jobs N] [--seed S] [--trials N] [--codebook FILE]
//   hetsim codebook --config FILE --out FILE [--seed S]
//   hetsim plot --csv FILE --kind {roc,nmse,pmd} [--out FILE]
//
// HETSIM_OUT, when set, provides the default output directory.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <hetsim/hetsim.hpp>

namespace {

// Parses "axis=v1,v2,..." into the plan's sweep fields.
void parse_sweep(const std::string &text, hetsim::ExperimentPlan &plan) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0)
        throw CLI::ValidationError("--sweep", "expected AXIS=v1,v2,... got '" + text + "'");
    plan.axis = text.substr(0, eq);
    plan.values.clear();
    std::string rest = text.substr(eq + 1);
    std::size_t pos = 0;
    while (pos <= rest.size()) {
        const auto comma = rest.find(',', pos);
        const std::string tok = rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (tok.empty())
            throw CLI::ValidationError("--sweep", "empty value in sweep list '" + text + "'");
        try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used != tok.size())
                throw std::invalid_argument(tok);
            plan.values.push_back(v);
        } catch (const std::exception &) {
            throw CLI::ValidationError("--sweep", "cannot parse sweep value '" + tok + "'");
        }
        if (comma == std::string::npos)
            break;
        pos = comma + 1;
    }
    if (plan.values.empty())
        throw CLI::ValidationError("--sweep", "sweep over '" + plan.axis + "' has an empty value list");
}

std::string default_out_dir() {
    if (const char *env = std::getenv("HETSIM_OUT"); env != nullptr && env[0] != '\0')
        return env;
    return "hetsim_out";
}

} // namespace

int main(int argc, char **argv) {
    // The workers parallelize across trials; keep the BLAS single-threaded unless the
    // caller explicitly configured it.
    if (std::getenv("OPENBLAS_NUM_THREADS") == nullptr)
        setenv("OPENBLAS_NUM_THREADS", "1", 0);

    CLI::App app{"hetsim - heterogeneous uplink link-level simulator"};
    app.require_subcommand(1);

    // --- simulate ---------------------------------------------------------------------
    auto *sim = app.add_subcommand("simulate", "run a Monte-Carlo experiment and write CSV");
    std::string sim_config;
    std::string sim_sweep;
    std::string sim_solver;
    std::string sim_out = default_out_dir();
    std::string sim_codebook;
    bool sim_plot = false;
    unsigned sim_jobs = 1;
    std::int64_t sim_seed = -1;
    std::int64_t sim_trials = -1;
    sim->add_option("--config", sim_config, "configuration file (key = value lines)")
        ->required()
        ->check(CLI::ExistingFile);
    sim->add_option("--sweep", sim_sweep, "sweep axis and values, e.g. snr_embb_db=-10,0,10");
    sim->add_option("--solver", sim_solver, "override solver: amp, admm, sbl or somp");
    sim->add_option("--out", sim_out, "output directory (default $HETSIM_OUT or ./hetsim_out)");
    sim->add_option("--codebook", sim_codebook, "reuse a saved codebook instead of generating one")
        ->check(CLI::ExistingFile);
    sim->add_flag("--plot", sim_plot, "also render SVG figures from the results");
    sim->add_option("--jobs", sim_jobs, "worker threads for the trial loop")->check(CLI::PositiveNumber);
    sim->add_option("--seed", sim_seed, "override the master seed");
    sim->add_option("--trials", sim_trials, "override the trial count");

    // --- codebook ---------------------------------------------------------------------
    auto *cbk = app.add_subcommand("codebook", "generate a codebook and save it to a file");
    std::string cbk_config;
    std::string cbk_out;
    std::int64_t cbk_seed = -1;
    cbk->add_option("--config", cbk_config, "configuration file")->required()->check(CLI::ExistingFile);
    cbk->add_option("--out", cbk_out, "output file")->required();
    cbk->add_option("--seed", cbk_seed, "override the master seed");

    // --- plot -------------------------------------------------------------------------
    auto *plt = app.add_subcommand("plot", "render a figure from a results CSV");
    std::string plt_csv;
    std::string plt_kind;
    std::string plt_out;
    plt->add_option("--csv", plt_csv, "results CSV file")->required()->check(CLI::ExistingFile);
    plt->add_option("--kind", plt_kind, "figure kind")
        ->required()
        ->check(CLI::IsMember({"roc", "nmse", "pmd"}));
    plt->add_option("--out", plt_out, "output SVG file (default <kind>.svg beside the CSV)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            hetsim::ExperimentPlan plan;
            plan.base = hetsim::parse_config_file(sim_config);
            if (!sim_sweep.empty())
                parse_sweep(sim_sweep, plan);
            if (!sim_solver.empty())
                plan.base.solver = hetsim::solver_from_string(sim_solver);
            if (sim_seed >= 0)
                plan.base.seed = static_cast<std::uint64_t>(sim_seed);
            if (sim_trials >= 0)
                plan.base.trials = static_cast<arma::uword>(sim_trials);
            plan.out_dir = sim_out;
            plan.codebook_path = sim_codebook;
            plan.plot = sim_plot;
            plan.jobs = sim_jobs;
            const hetsim::ExperimentResult result = hetsim::run_experiment(plan);
            std::cout << "wrote " << result.csv_path << " (" << result.rows.size() << " rows)\n";
            for (const auto &p : result.plot_paths)
                std::cout << "wrote " << p << "\n";
        } else if (cbk->parsed()) {
            hetsim::NetworkConfig cfg = hetsim::parse_config_file(cbk_config);
            if (cbk_seed >= 0)
                cfg.seed = static_cast<std::uint64_t>(cbk_seed);
            const hetsim::Codebook cb = hetsim::make_codebook(cfg, cfg.seed);
            hetsim::save_codebook(cb, cbk_out);
            std::cout << "wrote " << cbk_out << " (T=" << cb.T << " L=" << cb.L << " E=" << cb.E
                      << " N=" << cb.N << " Q=" << cb.Q << " z=" << cb.z << ")\n";
        } else if (plt->parsed()) {
            std::string out = plt_out;
            if (out.empty()) {
                const std::filesystem::path csv(plt_csv);
                out = (csv.parent_path() / (plt_kind + ".svg")).string();
            }
            hetsim::plot_csv(plt_csv, plt_kind, out);
            std::cout << "wrote " << out << "\n";
        }
    } catch (const std::exception &ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
