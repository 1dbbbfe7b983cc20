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

#include <hetsim/channel.hpp>
#include <hetsim/codebook.hpp>
#include <hetsim/embb.hpp>

using namespace hetsim;

namespace {

struct Scenario {
    NetworkConfig cfg;
    DevicePlacement pl;
    Codebook cb;
    ChannelRealization ch;
};

// Small controlled scenario: fixed large-scale coefficients, channels drawn from `seed`,
// all MTDs initially silent (activity is set explicitly by each test).
Scenario make_scenario(arma::uword E, arma::uword N, arma::uword M, arma::uword T, arma::uword L,
                       std::uint64_t seed) {
    Scenario s;
    s.cfg.n_mtds = N;
    s.cfg.n_embb = E;
    s.cfg.antennas = M;
    s.cfg.coherence_len = T;
    s.cfg.pilot_len = L;
    s.cfg.q_messages = 2;
    s.cfg.chi = 0.5;
    s.cfg.pool_cap = 64;

    s.pl.gamma_min = required_min_coeff(s.cfg.snr_mtd_db, s.cfg.p_max_w, s.cfg.noise_w);
    s.pl.beta_min = required_min_coeff(s.cfg.snr_embb_db, s.cfg.rho_max_w, s.cfg.noise_w);
    s.pl.beta = arma::vec(E, arma::fill::value(2.0 * s.pl.beta_min));
    s.pl.gamma = arma::vec(N, arma::fill::value(3.0 * s.pl.gamma_min));
    s.pl.d_embb = arma::vec(E, arma::fill::value(0.1));
    s.pl.d_mtd = arma::vec(N, arma::fill::value(0.1));

    s.cb = make_codebook(s.cfg, seed);
    Rng rng(seed, {99});
    s.ch = draw_channels(s.cfg, s.pl, rng);
    s.ch.alpha.zeros(N);
    s.ch.q_choice.set_size(N);
    s.ch.q_choice.fill(-1);
    s.ch.alpha_seq.zeros(N * s.cfg.q_messages);
    return s;
}

void activate(ChannelRealization &ch, arma::uword n, arma::uword q, arma::uword Q) {
    ch.alpha(n) = 1;
    ch.q_choice(n) = static_cast<arma::sword>(q);
    ch.alpha_seq(n * Q + q) = 1;
}

} // namespace

TEST_CASE("payload symbols are QPSK with per-symbol power 1/T") {
    Rng rng(61, {1});
    const arma::uword T = 64, L = 16, E = 3;
    const arma::cx_mat Phi = draw_payload(T, L, E, rng);
    REQUIRE(Phi.n_rows == T - L);
    REQUIRE(Phi.n_cols == E);
    for (arma::uword k = 0; k < Phi.n_rows; ++k)
        for (arma::uword e = 0; e < E; ++e) {
            CHECK(std::norm(Phi(k, e)) == Catch::Approx(1.0 / T).epsilon(1e-12));
            CHECK(std::abs(std::abs(Phi(k, e).real()) - std::abs(Phi(k, e).imag())) < 1e-15);
        }
}

TEST_CASE("synthesized blocks decompose into their constituent terms") {
    Scenario s = make_scenario(2, 6, 4, 32, 8, 62);

    SECTION("no active MTDs, no noise: pure broadband superposition") {
        Rng rng(62, {1});
        const TrialSignals sig = synthesize_received(s.ch, s.cb, 0.0, rng);
        arma::cx_mat expect(s.cb.T, s.cfg.antennas, arma::fill::zeros);
        for (arma::uword e = 0; e < 2; ++e)
            expect += std::sqrt(s.ch.rho_ul(e)) * embb_sequence(s.cb, sig.block.embb_payload, e) * s.ch.H.row(e);
        CHECK(arma::norm(sig.block.Ybar - expect, "fro") < 1e-12 * arma::norm(expect, "fro"));
        CHECK(arma::norm(sig.block.Yp - expect.rows(0, s.cb.L - 1), "fro") == 0.0);
    }

    SECTION("single active MTD, no broadband, no noise: rank-one block") {
        Scenario t = make_scenario(0, 6, 4, 32, 8, 63);
        activate(t.ch, 2, 1, t.cfg.q_messages);
        Rng rng(63, {1});
        const TrialSignals sig = synthesize_received(t.ch, t.cb, 0.0, rng);
        CHECK(arma::rank(sig.block.Ybar) == 1);
        const arma::cx_mat expect = t.cb.S.col(2 * t.cb.Q + 1) * t.ch.G.row(2);
        CHECK(arma::norm(sig.block.Ybar - expect, "fro") < 1e-12 * arma::norm(expect, "fro"));
    }

    SECTION("zero channels and zero noise give a zero block") {
        Scenario t = make_scenario(0, 3, 2, 32, 8, 64);
        t.ch.G.zeros();
        activate(t.ch, 0, 0, t.cfg.q_messages);
        Rng rng(64, {1});
        const TrialSignals sig = synthesize_received(t.ch, t.cb, 0.0, rng);
        CHECK(arma::norm(sig.block.Ybar, "fro") == 0.0);
    }
}

TEST_CASE("pilot correlation extracts each broadband channel free of interference") {
    Scenario s = make_scenario(2, 8, 4, 32, 8, 65);

    SECTION("noiseless single-device identity") {
        Scenario t = make_scenario(1, 4, 4, 32, 8, 66);
        Rng rng(66, {1});
        const TrialSignals sig = synthesize_received(t.ch, t.cb, 0.0, rng);
        const arma::cx_vec y = correlate_pilot(sig.block.Yp, t.cb.Psi.col(0));
        const double pe = std::pow(arma::norm(t.cb.Psi.col(0)), 2);
        const arma::cx_vec expect = pe * std::sqrt(t.ch.rho_ul(0)) * t.ch.H.row(0).st();
        CHECK(arma::norm(y - expect) < 1e-12 * arma::norm(expect));
    }

    SECTION("MTD headers contribute nothing") {
        for (arma::uword n = 0; n < 8; ++n)
            activate(s.ch, n, n % 2, s.cfg.q_messages);
        Rng rng(65, {1});
        const TrialSignals sig = synthesize_received(s.ch, s.cb, 0.0, rng);
        ChannelRealization silent = s.ch;
        silent.alpha.zeros();
        silent.alpha_seq.zeros();
        silent.q_choice.fill(-1);
        Rng rng_b(65, {1});
        const TrialSignals sig_silent = synthesize_received(silent, s.cb, 0.0, rng_b);
        for (arma::uword e = 0; e < 2; ++e) {
            const arma::cx_vec ya = correlate_pilot(sig.block.Yp, s.cb.Psi.col(e));
            const arma::cx_vec yb = correlate_pilot(sig_silent.block.Yp, s.cb.Psi.col(e));
            CHECK(arma::norm(ya - yb) < 1e-12 * (1.0 + arma::norm(yb)));
        }
    }

    SECTION("other-device pilots contribute nothing") {
        Scenario t = make_scenario(2, 4, 4, 32, 8, 67);
        t.ch.H.row(1).zeros(); // device 1 silent in effect
        Rng rng(67, {1});
        const TrialSignals sig = synthesize_received(t.ch, t.cb, 0.0, rng);
        // y_0 must equal the single-device expectation although device 0 and 1 share the block
        const arma::cx_vec y0 = correlate_pilot(sig.block.Yp, t.cb.Psi.col(0));
        const double pe = std::pow(arma::norm(t.cb.Psi.col(0)), 2);
        const arma::cx_vec expect = pe * std::sqrt(t.ch.rho_ul(0)) * t.ch.H.row(0).st();
        CHECK(arma::norm(y0 - expect) < 1e-12 * arma::norm(expect));
    }
}

TEST_CASE("MMSE estimation hits its analytic limits") {
    const arma::uword M = 8;
    Rng rng(68, {1});
    arma::cx_vec h(M);
    for (auto &v : h)
        v = rng.cnormal();
    const double beta = 1.3, rho = 0.7, pe = 0.25;

    SECTION("vanishing noise returns the exact channel") {
        const double a = std::sqrt(rho) * pe;
        const auto [hhat, xi] = mmse_estimate(a * h, rho, beta, 0.0, pe);
        CHECK(arma::norm(hhat - h) < 1e-12 * arma::norm(h));
        CHECK(xi == 0.0);
    }
    SECTION("vanishing power returns the prior mean") {
        const auto [hhat, xi] = mmse_estimate(arma::cx_vec(M, arma::fill::ones), 0.0, beta, 0.5, pe);
        CHECK(arma::norm(hhat) == 0.0);
        CHECK(xi == Catch::Approx(beta));
    }
    SECTION("degenerate no-information case returns the prior") {
        const auto [hhat, xi] = mmse_estimate(arma::cx_vec(M, arma::fill::zeros), 0.0, beta, 0.0, pe);
        CHECK(arma::norm(hhat) == 0.0);
        CHECK(xi == Catch::Approx(beta));
    }
}

TEST_CASE("empirical estimation error matches the analytic variance within 3%") {
    const arma::uword M = 4;
    const double beta = 2.0, rho = 0.8, pe = 0.125, sigma2 = 0.5;
    const double a = std::sqrt(rho) * pe;
    const double sigma2_eff = pe * sigma2;
    Rng rng(69, {1});
    double acc = 0.0;
    const int n_draws = 10000;
    double xi_ref = 0.0;
    for (int i = 0; i < n_draws; ++i) {
        arma::cx_vec h(M), n(M);
        for (arma::uword m = 0; m < M; ++m) {
            h(m) = std::sqrt(beta) * rng.cnormal();
            n(m) = std::sqrt(sigma2_eff) * rng.cnormal();
        }
        const auto [hhat, xi] = mmse_estimate(a * h + n, rho, beta, sigma2, pe);
        acc += std::pow(arma::norm(hhat - h), 2) / M;
        xi_ref = xi;
    }
    CHECK(acc / n_draws == Catch::Approx(xi_ref).epsilon(0.03));
}

TEST_CASE("combiners reduce to matched filters and scale linearly") {
    const arma::uword M = 6;
    const double sigma2 = 0.3;

    SECTION("single device: scaled matched filter") {
        Rng rng(70, {1});
        arma::cx_mat Hhat(1, M);
        for (auto &v : Hhat)
            v = rng.cnormal();
        const arma::cx_mat W = mmse_combiner(Hhat, sigma2);
        CHECK(arma::norm(W.col(0) - Hhat.row(0).st() / sigma2) < 1e-12 * arma::norm(W.col(0)));
    }
    SECTION("orthogonal estimates decouple") {
        arma::cx_mat Hhat(2, M, arma::fill::zeros);
        Hhat(0, 0) = 2.0;
        Hhat(1, 1) = arma::cx_double(0.0, 3.0);
        const arma::cx_mat W = mmse_combiner(Hhat, sigma2);
        for (arma::uword e = 0; e < 2; ++e) {
            const arma::cx_vec h = Hhat.row(e).st();
            const double cosang = std::abs(arma::cdot(W.col(e), h)) / (arma::norm(W.col(e)) * arma::norm(h));
            CHECK(cosang == Catch::Approx(1.0).epsilon(1e-12));
        }
    }
    SECTION("scaling one estimate scales its combiner") {
        Rng rng(71, {1});
        arma::cx_mat Hhat(3, M);
        for (auto &v : Hhat)
            v = rng.cnormal();
        const arma::cx_mat W1 = mmse_combiner(Hhat, sigma2);
        arma::cx_mat H2 = Hhat;
        H2.row(0) *= 2.5;
        const arma::cx_mat W2 = mmse_combiner(H2, sigma2);
        CHECK(arma::norm(W2.col(0) - 2.5 * W1.col(0)) < 1e-10 * arma::norm(W2.col(0)));
    }
}

TEST_CASE("SINR matches the matched-filter reference in the clean single-device case") {
    Scenario s = make_scenario(1, 4, 8, 32, 8, 72);
    Rng rng(72, {1});
    TrialSignals sig = synthesize_received(s.ch, s.cb, s.cfg.noise_w, rng);

    EmbbEstimate est;
    est.Hhat = s.ch.H; // genie CSI
    est.xi = arma::vec(1, arma::fill::zeros);
    est.combiners = mmse_combiner(est.Hhat, s.cfg.noise_w);
    const arma::vec gamma = sinr_embb(s.ch, s.cb, est, sig);

    // Independent evaluation: rho * |omega^H h|^2 * payload energy over realized noise power.
    const arma::cx_vec omega = est.combiners.col(0);
    const arma::cx_vec h = s.ch.H.row(0).st();
    double phi_energy = 0.0;
    for (arma::uword k = 0; k < s.cb.T - s.cb.L; ++k)
        phi_energy += std::norm(sig.block.embb_payload(k, 0));
    double noise_pow = 0.0;
    for (arma::uword k = s.cb.L; k < s.cb.T; ++k) {
        arma::cx_double acc = 0.0;
        for (arma::uword m = 0; m < 8; ++m)
            acc += std::conj(omega(m)) * sig.W(k, m);
        noise_pow += std::norm(acc);
    }
    const double expect = s.ch.rho_ul(0) * std::norm(arma::cdot(omega, h)) * phi_energy / noise_pow;
    CHECK(gamma(0) == Catch::Approx(expect).epsilon(1e-10));
}

TEST_CASE("SINR grows linearly with the antenna count in the clean case") {
    double mean8 = 0.0, mean64 = 0.0;
    for (const arma::uword M : {8u, 64u}) {
        double acc = 0.0;
        const int reps = 100;
        for (int r = 0; r < reps; ++r) {
            Scenario s = make_scenario(1, 2, M, 32, 8, 73 + 1000 * M + r);
            Rng rng(73, {M, static_cast<std::uint64_t>(r)});
            TrialSignals sig = synthesize_received(s.ch, s.cb, s.cfg.noise_w, rng);
            EmbbEstimate est;
            est.Hhat = s.ch.H;
            est.xi = arma::vec(1, arma::fill::zeros);
            est.combiners = mmse_combiner(est.Hhat, s.cfg.noise_w);
            acc += sinr_embb(s.ch, s.cb, est, sig)(0);
        }
        (M == 8 ? mean8 : mean64) = acc / reps;
    }
    const double ratio = mean64 / mean8;
    CHECK(ratio > 4.0);
    CHECK(ratio < 16.0);
}

TEST_CASE("doubling the noise power halves the SINR exactly under genie CSI") {
    Scenario s = make_scenario(1, 2, 4, 32, 8, 74);
    Rng rng(74, {1});
    TrialSignals sig = synthesize_received(s.ch, s.cb, s.cfg.noise_w, rng);

    TrialSignals sig2 = sig;
    const arma::cx_mat extra = (std::sqrt(2.0) - 1.0) * sig.W;
    sig2.W += extra;
    sig2.block.Ybar += extra;
    sig2.block.Yp = sig2.block.Ybar.rows(0, s.cb.L - 1);

    EmbbEstimate est;
    est.Hhat = s.ch.H;
    est.xi = arma::vec(1, arma::fill::zeros);
    est.combiners = mmse_combiner(est.Hhat, s.cfg.noise_w);

    const double g1 = sinr_embb(s.ch, s.cb, est, sig)(0);
    const double g2 = sinr_embb(s.ch, s.cb, est, sig2)(0);
    CHECK(g1 / g2 == Catch::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("rate and outage threshold follow the payload-phase bpcu convention") {
    NetworkConfig cfg;
    cfg.bits = 128;
    cfg.coherence_len = 256;
    cfg.pilot_len = 32;
    CHECK(embb_rate(cfg) == Catch::Approx(128.0 / 224.0).epsilon(1e-12));
    CHECK(outage_threshold(embb_rate(cfg)) == Catch::Approx(0.4859942891).margin(5e-8));

    cfg.rate_literal = true;
    CHECK(embb_rate(cfg) == Catch::Approx(128.0 / 224.0 / 16e-6).epsilon(1e-12));
    cfg.rate_literal = false;

    const double r = embb_rate(cfg);
    CHECK(outage_decision(outage_threshold(r), r));                  // boundary counts as decoded
    CHECK_FALSE(outage_decision(outage_threshold(r) * (1 - 1e-9), r));
    CHECK(outage_threshold(1e-9) < 1e-8); // r -> 0 sends the threshold to 0
    CHECK_THROWS_AS(outage_threshold(0.0), std::invalid_argument);
}

TEST_CASE("interference cancellation removes decoded devices") {
    Scenario s = make_scenario(2, 4, 4, 32, 8, 75);

    SECTION("perfect CSI, no MTDs, no noise: exact cancellation") {
        Rng rng(75, {1});
        const TrialSignals sig = synthesize_received(s.ch, s.cb, 0.0, rng);
        const arma::cx_mat Y =
            sic(sig.block.Ybar, s.cb, sig.block.embb_payload, s.ch.rho_ul, s.ch.H, {true, true});
        CHECK(arma::norm(Y, "fro") < 1e-10 * arma::norm(sig.block.Ybar, "fro"));
    }
    SECTION("with noise the residual is exactly the noise") {
        Rng rng(75, {2});
        const TrialSignals sig = synthesize_received(s.ch, s.cb, s.cfg.noise_w, rng);
        const arma::cx_mat Y =
            sic(sig.block.Ybar, s.cb, sig.block.embb_payload, s.ch.rho_ul, s.ch.H, {true, true});
        CHECK(arma::norm(Y - sig.W, "fro") < 1e-10 * arma::norm(sig.block.Ybar, "fro"));
    }
    SECTION("empty mask is the identity") {
        Rng rng(75, {3});
        const TrialSignals sig = synthesize_received(s.ch, s.cb, s.cfg.noise_w, rng);
        const arma::cx_mat Y =
            sic(sig.block.Ybar, s.cb, sig.block.embb_payload, s.ch.rho_ul, s.ch.H, {false, false});
        CHECK(arma::norm(Y - sig.block.Ybar, "fro") == 0.0);
    }
    SECTION("cancellation is a pure function of the raw block") {
        Rng rng(75, {4});
        const TrialSignals sig = synthesize_received(s.ch, s.cb, s.cfg.noise_w, rng);
        const arma::cx_mat Y1 =
            sic(sig.block.Ybar, s.cb, sig.block.embb_payload, s.ch.rho_ul, s.ch.H, {true, false});
        const arma::cx_mat Y2 =
            sic(sig.block.Ybar, s.cb, sig.block.embb_payload, s.ch.rho_ul, s.ch.H, {true, false});
        CHECK(arma::norm(Y1 - Y2, "fro") == 0.0);
    }
}

TEST_CASE("imperfect cancellation leaves exactly the estimation-error leak") {
    Scenario s = make_scenario(1, 2, 4, 32, 8, 76);
    double residual_acc = 0.0, predicted_acc = 0.0;
    const int reps = 2000;
    for (int r = 0; r < reps; ++r) {
        Scenario t = make_scenario(1, 2, 4, 32, 8, 76 + r);
        Rng rng(76, {static_cast<std::uint64_t>(r)});
        TrialSignals sig = synthesize_received(t.ch, t.cb, t.cfg.noise_w, rng);

        const arma::cx_vec psi = t.cb.Psi.col(0);
        const double pe = std::pow(arma::norm(psi), 2);
        const arma::cx_vec y = correlate_pilot(sig.block.Yp, psi);
        const auto [hhat, xi] = mmse_estimate(y, t.ch.rho_ul(0), t.pl.beta(0), t.cfg.noise_w, pe);

        arma::cx_mat Hhat(1, 4);
        Hhat.row(0) = hhat.st();
        const arma::cx_mat Y = sic(sig.block.Ybar, t.cb, sig.block.embb_payload, t.ch.rho_ul, Hhat, {true});

        // Per-realization identity: the non-noise residual is sqrt(rho) s (h - hhat)^T.
        const arma::cx_vec herr = t.ch.H.row(0).st() - hhat;
        const arma::cx_vec seq = embb_sequence(t.cb, sig.block.embb_payload, 0);
        const double seq_energy = std::pow(arma::norm(seq), 2);
        const double exact = t.ch.rho_ul(0) * seq_energy * std::pow(arma::norm(herr), 2);
        const double measured = std::pow(arma::norm(Y - sig.W, "fro"), 2);
        REQUIRE(measured == Catch::Approx(exact).epsilon(1e-9));

        residual_acc += measured;
        predicted_acc += t.ch.rho_ul(0) * seq_energy * 4.0 * xi; // E||herr||^2 = M*Xi
    }
    CHECK(residual_acc / reps == Catch::Approx(predicted_acc / reps).epsilon(0.05));
}

TEST_CASE("the full coherent chain is consistent and handles the degenerate cases") {
    SECTION("no broadband devices: pass-through") {
        Scenario s = make_scenario(0, 4, 4, 32, 8, 77);
        activate(s.ch, 1, 0, s.cfg.q_messages);
        Rng rng(77, {1});
        TrialSignals sig = synthesize_received(s.ch, s.cb, s.cfg.noise_w, rng);
        const EmbbEstimate est = run_embb_chain(s.cfg, s.pl, s.ch, s.cb, sig);
        CHECK(est.Hhat.n_rows == 0);
        CHECK(sig.block.decoded_mask.empty());
        CHECK(arma::norm(sig.block.Y - sig.block.Ybar, "fro") == 0.0);
    }
    SECTION("chain is idempotent: re-running recomputes the same residual") {
        Scenario s = make_scenario(2, 6, 8, 64, 16, 78);
        activate(s.ch, 0, 1, s.cfg.q_messages);
        Rng rng(78, {1});
        TrialSignals sig = synthesize_received(s.ch, s.cb, s.cfg.noise_w, rng);
        const EmbbEstimate e1 = run_embb_chain(s.cfg, s.pl, s.ch, s.cb, sig);
        const arma::cx_mat Y1 = sig.block.Y;
        const EmbbEstimate e2 = run_embb_chain(s.cfg, s.pl, s.ch, s.cb, sig);
        CHECK(arma::norm(sig.block.Y - Y1, "fro") == 0.0);
        CHECK(arma::norm(e1.Hhat - e2.Hhat, "fro") == 0.0);
        CHECK(arma::norm(e1.sinr - e2.sinr) == 0.0);
    }
    SECTION("estimation error variance lies within its bounds") {
        Scenario s = make_scenario(3, 6, 4, 64, 16, 79);
        Rng rng(79, {1});
        TrialSignals sig = synthesize_received(s.ch, s.cb, s.cfg.noise_w, rng);
        const EmbbEstimate est = run_embb_chain(s.cfg, s.pl, s.ch, s.cb, sig);
        for (arma::uword e = 0; e < 3; ++e) {
            CHECK(est.xi(e) >= 0.0);
            CHECK(est.xi(e) <= s.pl.beta(e));
            CHECK(est.sinr(e) >= 0.0);
        }
    }
}
