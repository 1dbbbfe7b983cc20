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
// Coherent receive chain for the broadband devices: block synthesis, pilot correlation,
// per-antenna linear MMSE channel estimation, MMSE combining, genie SINR evaluation,
// outage decision and successive interference cancellation producing the residual block
// handed to the sparse-recovery stage.

#pragma once

#include <armadillo>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "channel.hpp"
#include "codebook.hpp"
#include "config.hpp"
#include "rng.hpp"

namespace hetsim {

// One received coherence block and the receiver-side state attached to it.
struct ReceivedBlock {
    arma::cx_mat Ybar;              // [T x M] block as received
    arma::cx_mat Yp;                // [L x M] pilot-phase slice (rows 0..L-1 of Ybar)
    arma::cx_mat Y;                 // [T x M] residual after cancelling decoded broadband devices
    double noise_power = 0.0;       // sigma^2 used when the block was synthesized
    arma::cx_mat embb_payload;      // [(T-L) x E] transmitted payload symbols phi_e
    std::vector<bool> decoded_mask; // per broadband device: passed the outage test
};

// Ground-truth side information kept by the simulator (never shown to the receiver) so
// metrics can be evaluated exactly on the realized signals.
struct TrialSignals {
    ReceivedBlock block;
    arma::cx_mat W;      // [T x M] noise realization
    arma::cx_mat X_true; // [N*Q x M] true row-sparse transmit matrix of the MTDs
};

// Receiver-side estimates for the broadband devices.
struct EmbbEstimate {
    arma::cx_mat Hhat;      // [E x M] channel estimates, one device per row
    arma::vec xi;           // [E] isotropic estimation-error variance per antenna
    arma::cx_mat combiners; // [M x E] receive combiners, one device per column
    arma::vec sinr;         // [E] post-combining signal-to-interference-plus-noise ratios
};

// I.i.d. QPSK payload symbols with per-symbol power 1/T, matching the average transmit
// power of the unit-norm length-T sequences.
inline arma::cx_mat draw_payload(arma::uword T, arma::uword L, arma::uword E, Rng &rng) {
    if (T <= L)
        throw std::invalid_argument("draw_payload requires T > L");
    const double a = 1.0 / std::sqrt(2.0 * static_cast<double>(T));
    arma::cx_mat Phi(T - L, E);
    for (arma::uword e = 0; e < E; ++e)
        for (arma::uword k = 0; k < T - L; ++k) {
            const std::uint64_t d = rng.below(4);
            Phi(k, e) = arma::cx_double((d & 2) ? -a : a, (d & 1) ? -a : a);
        }
    return Phi;
}

// Full transmit sequence of broadband device e: pilots over the first L slots, payload
// over the remaining T-L.
inline arma::cx_vec embb_sequence(const Codebook &cb, const arma::cx_mat &Phi, arma::uword e) {
    return arma::join_cols(arma::cx_vec(cb.Psi.col(e)), arma::cx_vec(Phi.col(e)));
}

// Synthesizes one received block: y[k] = sum_e sqrt(rho_e) s_e[k] h_e + sum_n alpha_n
// s_n[k] g_n + n[k], with i.i.d. CN(0, sigma^2) noise. Draw order: payload symbols first
// (device by device), then noise (column by column).
inline TrialSignals synthesize_received(const ChannelRealization &ch, const Codebook &cb, double sigma2,
                                        Rng &rng) {
    const arma::uword T = cb.T, L = cb.L, E = ch.H.n_rows, M = ch.H.n_cols;
    if (cb.E != E || ch.G.n_rows != cb.N || ch.G.n_cols != M)
        throw std::invalid_argument("synthesize_received: codebook/channel dimension mismatch");
    if (sigma2 < 0.0)
        throw std::invalid_argument("synthesize_received requires sigma2 >= 0");

    TrialSignals sig;
    sig.block.embb_payload = draw_payload(T, L, E, rng);
    sig.block.noise_power = sigma2;

    sig.X_true.zeros(cb.N * cb.Q, M);
    for (arma::uword n = 0; n < cb.N; ++n)
        if (ch.alpha(n) != 0)
            sig.X_true.row(n * cb.Q + static_cast<arma::uword>(ch.q_choice(n))) = ch.G.row(n);

    arma::cx_mat Ybar = cb.S * sig.X_true;
    for (arma::uword e = 0; e < E; ++e)
        Ybar += std::sqrt(ch.rho_ul(e)) * embb_sequence(cb, sig.block.embb_payload, e) * ch.H.row(e);

    sig.W.set_size(T, M);
    const double sd = std::sqrt(sigma2);
    for (arma::uword m = 0; m < M; ++m)
        for (arma::uword k = 0; k < T; ++k)
            sig.W(k, m) = sd * rng.cnormal();
    Ybar += sig.W;

    sig.block.Ybar = Ybar;
    sig.block.Yp = Ybar.rows(0, L - 1);
    sig.block.Y = Ybar;
    sig.block.decoded_mask.assign(E, false);
    return sig;
}

// Pilot correlation y_e = Yp^T psi_e^*. With the joint design all MTD headers and the
// other pilots are orthogonal to psi_e, so y_e = sqrt(rho_e) ||psi_e||^2 h_e + noise.
inline arma::cx_vec correlate_pilot(const arma::cx_mat &Yp, const arma::cx_vec &psi) {
    if (Yp.n_rows != psi.n_elem)
        throw std::invalid_argument("correlate_pilot: pilot length mismatch");
    return Yp.st() * arma::conj(psi);
}

// Per-antenna linear MMSE estimate of h_e from y_e = a h_e + noise, a = sqrt(rho_e)
// ||psi_e||^2, noise variance sigma2_eff = ||psi_e||^2 sigma^2 per antenna. Returns the
// estimate and the isotropic error variance Xi_e = beta_e sigma2_eff / (a^2 beta_e +
// sigma2_eff), which decays to 0 with vanishing noise and to beta_e with vanishing power.
inline std::pair<arma::cx_vec, double> mmse_estimate(const arma::cx_vec &y, double rho, double beta,
                                                     double sigma2, double pilot_energy) {
    if (rho < 0.0 || beta <= 0.0 || sigma2 < 0.0 || pilot_energy <= 0.0)
        throw std::invalid_argument("mmse_estimate: invalid parameters");
    const double a = std::sqrt(rho) * pilot_energy;
    const double sigma2_eff = pilot_energy * sigma2;
    const double denom = a * a * beta + sigma2_eff;
    if (!(denom > 0.0)) // rho = 0 and sigma2 = 0: no information either way, prior mean
        return {arma::cx_vec(y.n_elem, arma::fill::zeros), beta};
    const double coef = a * beta / denom;
    return {coef * y, beta * sigma2_eff / denom};
}

// MMSE receive combiners: omega_e = (sigma^2 I + sum_{j != e} hhat_j hhat_j^H)^{-1} hhat_e.
inline arma::cx_mat mmse_combiner(const arma::cx_mat &Hhat, double sigma2) {
    if (!(sigma2 > 0.0))
        throw std::invalid_argument("mmse_combiner requires sigma2 > 0");
    const arma::uword E = Hhat.n_rows, M = Hhat.n_cols;
    arma::cx_mat base(M, M, arma::fill::zeros);
    base.diag() += sigma2;
    for (arma::uword j = 0; j < E; ++j)
        base += Hhat.row(j).st() * arma::conj(Hhat.row(j));
    arma::cx_mat combiners(M, E);
    for (arma::uword e = 0; e < E; ++e) {
        const arma::cx_vec h = Hhat.row(e).st();
        combiners.col(e) = arma::solve(arma::cx_mat(base - h * h.t()), h, arma::solve_opts::likely_sympd);
    }
    return combiners;
}

// Genie SINR of each broadband device, evaluated on the realized payload-phase signals
// (slots L..T-1): desired power through the estimated channel over the sum of MTD
// interference, other-device interference through the true channels, the estimation-error
// leak and the realized noise, all after combining.
inline arma::vec sinr_embb(const ChannelRealization &ch, const Codebook &cb, const EmbbEstimate &est,
                           const TrialSignals &sig) {
    const arma::uword T = cb.T, L = cb.L, E = ch.H.n_rows;
    const arma::cx_mat &Phi = sig.block.embb_payload;
    const arma::cx_mat Wd = sig.W.rows(L, T - 1);

    // Payload-phase energies.
    arma::vec phi_energy(E);
    for (arma::uword e = 0; e < E; ++e) {
        const double s = arma::accu(arma::square(arma::abs(Phi.col(e))));
        phi_energy(e) = s;
    }

    arma::vec gamma(E);
    for (arma::uword e = 0; e < E; ++e) {
        const arma::cx_vec omega = est.combiners.col(e);
        const arma::cx_vec hhat = est.Hhat.row(e).st();
        const arma::cx_vec htrue = ch.H.row(e).st();
        const arma::cx_vec herr = htrue - hhat;

        const double num = ch.rho_ul(e) * std::norm(arma::cdot(omega, hhat)) * phi_energy(e);

        double den = 0.0;
        for (arma::uword n = 0; n < cb.N; ++n) {
            if (ch.alpha(n) == 0)
                continue;
            const arma::uword col = n * cb.Q + static_cast<arma::uword>(ch.q_choice(n));
            const arma::cx_vec g = ch.G.row(n).st();
            const double seq_energy = arma::accu(arma::square(arma::abs(cb.S.col(col).subvec(L, T - 1))));
            den += std::norm(arma::cdot(omega, g)) * seq_energy;
        }
        for (arma::uword j = 0; j < E; ++j) {
            if (j == e)
                continue;
            const arma::cx_vec hj = ch.H.row(j).st();
            den += ch.rho_ul(j) * std::norm(arma::cdot(omega, hj)) * phi_energy(j);
        }
        den += ch.rho_ul(e) * std::norm(arma::cdot(omega, herr)) * phi_energy(e);
        den += arma::accu(arma::square(arma::abs(Wd * arma::conj(omega))));

        gamma(e) = (den > 0.0) ? num / den : (num > 0.0 ? arma::datum::inf : 0.0);
    }
    return gamma;
}

// Transmission rate in bits per channel use over the payload phase. The literal variant
// divides additionally by the symbol period (bits per second across the payload phase);
// it is retained behind a flag for comparison but makes the outage threshold enormous.
inline double embb_rate(const NetworkConfig &cfg) {
    const double slots = static_cast<double>(cfg.coherence_len - cfg.pilot_len);
    const double r = static_cast<double>(cfg.bits) / slots;
    return cfg.rate_literal ? r / cfg.symbol_s : r;
}

inline double outage_threshold(double rate) {
    if (!(rate > 0.0))
        throw std::invalid_argument("outage_threshold requires rate > 0");
    return std::exp2(rate) - 1.0;
}

// Decoded iff the SINR supports the rate; the boundary counts as decoded.
inline bool outage_decision(double gamma, double rate) { return gamma >= outage_threshold(rate); }

// Successive interference cancellation: rebuilds each decoded device's full-block
// contribution from its estimated channel and known symbols and subtracts it from the raw
// block. Always recomputes from Ybar, so repeated application is idempotent.
inline arma::cx_mat sic(const arma::cx_mat &Ybar, const Codebook &cb, const arma::cx_mat &Phi,
                        const arma::vec &rho_ul, const arma::cx_mat &Hhat,
                        const std::vector<bool> &decoded_mask) {
    const arma::uword E = Hhat.n_rows;
    if (decoded_mask.size() != E || Phi.n_cols != E || rho_ul.n_elem != E)
        throw std::invalid_argument("sic: per-device argument sizes disagree");
    arma::cx_mat Y = Ybar;
    for (arma::uword e = 0; e < E; ++e)
        if (decoded_mask[e])
            Y -= std::sqrt(rho_ul(e)) * embb_sequence(cb, Phi, e) * Hhat.row(e);
    return Y;
}

// Complete coherent stage on one block: estimates every broadband channel from its pilot,
// forms combiners, evaluates the genie SINR, applies the outage decision at the
// configured rate and cancels the decoded devices. Mutates sig.block (Y, decoded_mask)
// and returns the estimates.
inline EmbbEstimate run_embb_chain(const NetworkConfig &cfg, const DevicePlacement &pl,
                                   const ChannelRealization &ch, const Codebook &cb, TrialSignals &sig) {
    const arma::uword E = ch.H.n_rows, M = ch.H.n_cols;
    EmbbEstimate est;
    est.Hhat.set_size(E, M);
    est.xi.set_size(E);
    est.combiners.set_size(M, E);
    est.sinr.set_size(E);
    if (E == 0) {
        sig.block.Y = sig.block.Ybar;
        sig.block.decoded_mask.clear();
        return est;
    }

    for (arma::uword e = 0; e < E; ++e) {
        const arma::cx_vec psi = cb.Psi.col(e);
        const double psi_norm = arma::norm(psi);
        const double pilot_energy = psi_norm * psi_norm;
        const arma::cx_vec y = correlate_pilot(sig.block.Yp, psi);
        auto [hhat, xi] = mmse_estimate(y, ch.rho_ul(e), pl.beta(e), sig.block.noise_power, pilot_energy);
        est.Hhat.row(e) = hhat.st();
        est.xi(e) = xi;
    }
    est.combiners = mmse_combiner(est.Hhat, sig.block.noise_power);
    est.sinr = sinr_embb(ch, cb, est, sig);

    const double rate = embb_rate(cfg);
    sig.block.decoded_mask.assign(E, false);
    for (arma::uword e = 0; e < E; ++e)
        sig.block.decoded_mask[e] = outage_decision(est.sinr(e), rate);
    sig.block.Y = sic(sig.block.Ybar, cb, sig.block.embb_payload, ch.rho_ul, est.Hhat, sig.block.decoded_mask);
    return est;
}

} // namespace hetsim
