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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include <hetsim/metrics.hpp>
#include <hetsim/rng.hpp>

using namespace hetsim;

TEST_CASE("sequence-level miss and false-alarm rates") {
    SECTION("perfect detection") {
        const arma::uvec a{1, 0, 1, 0};
        const auto [pmd, pfa] = pmd_pfa(a, a, 2);
        CHECK(pmd == 0.0);
        CHECK(pfa == 0.0);
    }
    SECTION("silent detector misses everything") {
        const arma::uvec truth{1, 1, 1, 0, 0, 0};
        const arma::uvec est{0, 0, 0, 0, 0, 0};
        const auto [pmd, pfa] = pmd_pfa(truth, est, 3);
        CHECK(pmd == 1.0);
        CHECK(pfa == 0.0);
    }
    SECTION("the six-sequence worked example") {
        const arma::uvec truth{1, 0, 0, 0, 1, 0};
        const arma::uvec est{1, 0, 1, 0, 0, 0};
        const auto [pmd, pfa] = pmd_pfa(truth, est, 2);
        CHECK(pmd == Catch::Approx(0.5));
        CHECK(pfa == Catch::Approx(0.25));
    }
    SECTION("no active sequences: miss rate undefined") {
        const arma::uvec truth{0, 0, 0, 0};
        const arma::uvec est{0, 1, 0, 0};
        const auto [pmd, pfa] = pmd_pfa(truth, est, 0);
        CHECK(std::isnan(pmd));
        CHECK(pfa == Catch::Approx(0.25));
    }
    SECTION("everything active: false-alarm rate undefined") {
        const arma::uvec truth{1, 1};
        const arma::uvec est{1, 0};
        const auto [pmd, pfa] = pmd_pfa(truth, est, 2);
        CHECK(pmd == Catch::Approx(0.5));
        CHECK(std::isnan(pfa));
    }
    SECTION("wrong message of the right device counts as miss plus false alarm") {
        const arma::uvec truth{1, 0}; // device sent message 0
        const arma::uvec est{0, 1};   // detector picked message 1
        const auto [pmd, pfa] = pmd_pfa(truth, est, 1);
        CHECK(pmd == 1.0);
        CHECK(pfa == 1.0);
    }
}

namespace {

// Two synthetic trials with separable scores: all active rows score above all inactive.
std::vector<TrialScores> separable_trials() {
    std::vector<TrialScores> ts(2);
    ts[0].xbar = {0.9, 0.1, 0.05, 0.2};
    ts[0].alpha_true = {1, 0, 0, 0};
    ts[0].Q = 2;
    ts[1].xbar = {0.02, 0.6, 0.7, 0.01};
    ts[1].alpha_true = {0, 1, 1, 0};
    ts[1].Q = 2;
    return ts;
}

} // namespace

TEST_CASE("ROC endpoints, monotonicity and the separable case") {
    const auto trials = separable_trials();
    const auto roc = roc_curve(trials, 16);
    REQUIRE(roc.size() >= 3);

    // endpoint: threshold above every score -> no detections
    const auto &top = *std::min_element(roc.begin(), roc.end(),
                                        [](const RocPoint &a, const RocPoint &b) { return a.pfa < b.pfa; });
    CHECK(top.pfa == 0.0);
    // endpoint: zero threshold fires every device
    const auto &bottom = *std::max_element(roc.begin(), roc.end(),
                                           [](const RocPoint &a, const RocPoint &b) { return a.pfa < b.pfa; });
    CHECK(bottom.zeta == 0.0);
    CHECK(bottom.pfa > 0.0);

    // sorted by pfa with pmd non-increasing after cleanup
    for (std::size_t i = 1; i < roc.size(); ++i) {
        CHECK(roc[i].pfa >= roc[i - 1].pfa);
        CHECK(roc[i].pmd <= roc[i - 1].pmd + 1e-12);
    }

    // separable scores: some threshold achieves (0, 0)
    bool perfect = false;
    for (const auto &p : roc)
        perfect = perfect || (p.pmd == 0.0 && p.pfa == 0.0);
    CHECK(perfect);

    CHECK_THROWS_AS(roc_curve({}, 8), std::invalid_argument);
}

TEST_CASE("interpolated miss rate at a false-alarm target") {
    std::vector<RocPoint> roc = {{3.0, 1.0, 0.0}, {2.0, 0.5, 0.1}, {1.0, 0.2, 0.3}, {0.0, 0.1, 0.8}};
    CHECK(pmd_at_pfa(roc, 0.1) == Catch::Approx(0.5));
    CHECK(pmd_at_pfa(roc, 0.2) == Catch::Approx(0.35)); // halfway between 0.5 and 0.2
    CHECK(pmd_at_pfa(roc, 0.0) == Catch::Approx(1.0));
    CHECK(pmd_at_pfa(roc, 0.9) == Catch::Approx(0.1)); // beyond the grid: clamp
}

TEST_CASE("threshold calibration achieves the target false-alarm rate on separable data") {
    const auto trials = separable_trials();
    const double zeta = calibrate_zeta(trials, 0.01);
    // all inactive scores lie below the calibrated threshold here
    for (const auto &t : trials) {
        const auto [pmd, pfa] = trial_rates_at(t, zeta);
        CHECK(pfa == 0.0);
        CHECK(pmd == 0.0);
    }
}

TEST_CASE("NMSE accumulates per-row relative errors with exclusions") {
    arma::cx_mat truth(3, 2, arma::fill::zeros);
    truth(0, 0) = 2.0;
    truth(1, 1) = arma::cx_double(0.0, 1.0);
    // row 2 stays zero -> excluded
    SECTION("exact estimate gives zero") {
        const NmseAccum acc = nmse_rows(truth, truth, {0, 1});
        CHECK(acc.mean() == 0.0);
        CHECK(acc.excluded == 0);
    }
    SECTION("zero estimate gives one") {
        const NmseAccum acc = nmse_rows(truth, arma::cx_mat(3, 2, arma::fill::zeros), {0, 1});
        CHECK(acc.mean() == Catch::Approx(1.0));
    }
    SECTION("doubled estimate gives one") {
        const NmseAccum acc = nmse_rows(truth, arma::cx_mat(2.0 * truth), {0, 1});
        CHECK(acc.mean() == Catch::Approx(1.0));
    }
    SECTION("zero-norm truth rows are excluded and counted") {
        const NmseAccum acc = nmse_rows(truth, truth, {0, 1, 2});
        CHECK(acc.count == 2);
        CHECK(acc.excluded == 1);
    }
    SECTION("empty selection yields NaN") {
        const NmseAccum acc = nmse_rows(truth, truth, arma::uvec{});
        CHECK(std::isnan(acc.mean()));
    }
}

TEST_CASE("outage probability is the fraction of undecoded devices") {
    CHECK(outage_probability({{true, true}, {true, true}}) == 0.0);
    CHECK(outage_probability({{false, false}}) == 1.0);
    CHECK(outage_probability({{true, false}, {false, true}}) == Catch::Approx(0.5));
}

TEST_CASE("summary statistics carry normal-approximation intervals") {
    const Stat s = summarize({1.0, 2.0, 3.0, 4.0});
    CHECK(s.mean == Catch::Approx(2.5));
    CHECK(s.n == 4);
    // sample variance 5/3; ci = 1.96 * sqrt(var/4)
    CHECK(s.ci95 == Catch::Approx(1.96 * std::sqrt(5.0 / 3.0 / 4.0)).epsilon(1e-12));

    const Stat single = summarize({7.0});
    CHECK(single.mean == 7.0);
    CHECK(std::isnan(single.ci95));

    const Stat with_nan = summarize({1.0, std::numeric_limits<double>::quiet_NaN(), 3.0});
    CHECK(with_nan.mean == Catch::Approx(2.0));
    CHECK(with_nan.n == 2);

    const Stat empty = summarize({});
    CHECK(std::isnan(empty.mean));
    CHECK(empty.n == 0);
}

TEST_CASE("confidence half-widths shrink like the square root of the trial count") {
    Rng rng(91, {1});
    std::vector<double> small(100), large(400);
    for (auto &v : small)
        v = rng.normal();
    for (auto &v : large)
        v = rng.normal();
    const Stat a = summarize(small);
    const Stat b = summarize(large);
    CHECK(a.ci95 / b.ci95 == Catch::Approx(2.0).epsilon(0.3));
}

TEST_CASE("CSV rows survive a write/read round trip including NaN intervals") {
    std::vector<CsvRow> rows;
    rows.push_back({"snr_embb_db", -10.0, "pmd", 0.125, 0.01, 200});
    rows.push_back({"snr_embb_db", -10.0, "zeta", 3.5e-7, std::numeric_limits<double>::quiet_NaN(), 200});
    rows.push_back({"snr_embb_db", 30.0, "nmse_embb", 1.25e-3, 2e-4, 200});

    const std::string path = (std::filesystem::temp_directory_path() / "hetsim_csv_test.csv").string();
    write_csv(path, rows);
    const std::vector<CsvRow> back = read_csv(path);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].sweep_var == rows[i].sweep_var);
        CHECK(back[i].value == rows[i].value);
        CHECK(back[i].metric == rows[i].metric);
        CHECK(back[i].mean == rows[i].mean);
        CHECK(back[i].trials == rows[i].trials);
        if (std::isnan(rows[i].ci95))
            CHECK(std::isnan(back[i].ci95));
        else
            CHECK(back[i].ci95 == rows[i].ci95);
    }
    std::filesystem::remove(path);
}

TEST_CASE("CSV reading validates the schema") {
    const std::string path = (std::filesystem::temp_directory_path() / "hetsim_bad_csv.csv").string();
    {
        std::ofstream out(path);
        out << "# hetsim csv v1\nwrong,header,line\n";
    }
    CHECK_THROWS_AS(read_csv(path), std::runtime_error);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_csv("/nonexistent/path/results.csv"), std::runtime_error);
}
