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

#include <armadillo>
#include <cmath>
#include <stdexcept>

#include "config.hpp"
#include "rng.hpp"

namespace hetsim {

// Urban-macro style path loss in dB at distance d_km (kilometres). Domain: d_km > 0.
inline double path_loss_db(double d_km) {
    if (!(d_km > 0.0))
        throw std::domain_error("path_loss_db requires a positive distance");
    return 130.0 + 37.6 * std::log10(d_km);
}

// Linear large-scale fading coefficient at distance d_km.
inline double large_scale_coeff(double d_km) { return std::pow(10.0, -path_loss_db(d_km) / 10.0); }

// Distance (km) at which the large-scale coefficient equals `coeff`.
inline double distance_for_coeff(double coeff) {
    if (!(coeff > 0.0))
        throw std::invalid_argument("distance_for_coeff requires a positive coefficient");
    const double pl_db = -10.0 * std::log10(coeff);
    return std::pow(10.0, (pl_db - 130.0) / 37.6);
}

// Smallest large-scale coefficient a device may have so that the target average SNR is
// reachable within the power budget: coeff_min = sigma2 * 10^(snr_db/10) / power.
inline double required_min_coeff(double snr_db, double power_w, double noise_w) {
    if (!(power_w > 0.0) || !(noise_w > 0.0))
        throw std::invalid_argument("required_min_coeff requires positive power and noise");
    return noise_w * std::pow(10.0, snr_db / 10.0) / power_w;
}

// Average received SNR in dB for transmit power p and large-scale coefficient c.
inline double average_snr_db(double power_w, double coeff, double noise_w) {
    if (!(power_w > 0.0) || !(coeff > 0.0) || !(noise_w > 0.0))
        throw std::invalid_argument("average_snr_db requires positive arguments");
    return 10.0 * std::log10(power_w * coeff / noise_w);
}

// Fractional power control: the transmit power that equalises the received power of all
// devices at p_max * gamma_min. Devices with gamma_n < gamma_min would need more than
// p_max and are rejected as placed outside the serviceable cell.
inline double uplink_power_mtd(double gamma_n, double gamma_min, double p_max) {
    if (!(gamma_min > 0.0) || !(p_max > 0.0))
        throw std::invalid_argument("uplink_power_mtd requires positive gamma_min and p_max");
    if (gamma_n < gamma_min * (1.0 - 1e-12))
        throw std::invalid_argument("uplink_power_mtd: gamma_n below gamma_min (placement outside cell)");
    return p_max * gamma_min / std::max(gamma_n, gamma_min);
}

// Device positions and large-scale coefficients for one realization.
struct DevicePlacement {
    arma::vec d_embb;  // [E] distances in km
    arma::vec d_mtd;   // [N]
    arma::vec beta;    // [E] broadband large-scale coefficients
    arma::vec gamma;   // [N] MTD large-scale coefficients
    double beta_min = 0.0;  // edge coefficient implied by the broadband target SNR
    double gamma_min = 0.0; // edge coefficient implied by the MTD target SNR
};

namespace detail {

// Area-uniform radius in the annulus [r_in, r_out] (km).
inline double annulus_radius(double r_in, double r_out, Rng &rng) {
    const double u = rng.uniform();
    return std::sqrt(u * (r_out * r_out - r_in * r_in) + r_in * r_in);
}

// Outer placement radius: the cell boundary, shrunk if the target SNR demands a closer
// edge (otherwise power control could not reach the target within the power budget).
inline double outer_radius_km(double cell_radius_km, double coeff_min) {
    return std::min(cell_radius_km, distance_for_coeff(coeff_min));
}

} // namespace detail

// Draws device positions uniformly over the serviceable annulus and derives large-scale
// coefficients. gamma_min/beta_min are computed from the configured target SNRs so that
// power control equalises received powers exactly at those SNRs.
inline DevicePlacement make_placement(const NetworkConfig &cfg, Rng &rng) {
    DevicePlacement pl;
    pl.gamma_min = required_min_coeff(cfg.snr_mtd_db, cfg.p_max_w, cfg.noise_w);
    pl.beta_min = required_min_coeff(cfg.snr_embb_db, cfg.rho_max_w, cfg.noise_w);

    const double cell_km = cfg.cell_radius_m / 1000.0;
    const double inner_km = cfg.min_distance_m / 1000.0;

    const double outer_mtd = detail::outer_radius_km(cell_km, pl.gamma_min);
    const double outer_embb = detail::outer_radius_km(cell_km, pl.beta_min);
    const double inner_mtd = std::min(inner_km, outer_mtd);
    const double inner_embb = std::min(inner_km, outer_embb);

    pl.d_mtd.set_size(cfg.n_mtds);
    pl.gamma.set_size(cfg.n_mtds);
    for (arma::uword n = 0; n < cfg.n_mtds; ++n) {
        pl.d_mtd(n) = detail::annulus_radius(inner_mtd, outer_mtd, rng);
        pl.gamma(n) = std::max(large_scale_coeff(pl.d_mtd(n)), pl.gamma_min);
    }
    pl.d_embb.set_size(cfg.n_embb);
    pl.beta.set_size(cfg.n_embb);
    for (arma::uword e = 0; e < cfg.n_embb; ++e) {
        pl.d_embb(e) = detail::annulus_radius(inner_embb, outer_embb, rng);
        pl.beta(e) = std::max(large_scale_coeff(pl.d_embb(e)), pl.beta_min);
    }
    return pl;
}

// Small-scale channels, transmit powers and the activity pattern of one coherence block.
struct ChannelRealization {
    arma::cx_mat H;      // [E x M] broadband channels, row e ~ CN(0, beta_e I)
    arma::cx_mat Gtilde; // [N x M] MTD small-scale channels, row n ~ CN(0, gamma_n I)
    arma::cx_mat G;      // [N x M] effective MTD channels sqrt(p_n) * gtilde_n
    arma::vec p_ul;      // [N] MTD transmit powers after power control
    arma::vec rho_ul;    // [E] broadband transmit powers after power control
    arma::uvec alpha;    // [N] 1 if MTD n transmits in this block
    arma::ivec q_choice; // [N] selected message index in {0..Q-1}, -1 if silent
    arma::uvec alpha_seq; // [N*Q] sequence-level activity, row (n*Q + q)
};

// Draws Rayleigh-fading channels with the given per-device variances. Power control is
// applied to both service classes so every received power hits its target SNR exactly.
inline ChannelRealization draw_channels(const NetworkConfig &cfg, const DevicePlacement &pl, Rng &rng) {
    if (pl.gamma.n_elem != cfg.n_mtds || pl.beta.n_elem != cfg.n_embb)
        throw std::invalid_argument("draw_channels: placement does not match config dimensions");
    ChannelRealization ch;
    const arma::uword M = cfg.antennas;

    ch.H.set_size(cfg.n_embb, M);
    ch.rho_ul.set_size(cfg.n_embb);
    for (arma::uword e = 0; e < cfg.n_embb; ++e) {
        if (pl.beta(e) < 0.0)
            throw std::invalid_argument("draw_channels: negative channel variance");
        const double s = std::sqrt(pl.beta(e));
        for (arma::uword m = 0; m < M; ++m)
            ch.H(e, m) = s * rng.cnormal();
        ch.rho_ul(e) = cfg.rho_max_w * pl.beta_min / std::max(pl.beta(e), pl.beta_min);
    }

    ch.Gtilde.set_size(cfg.n_mtds, M);
    ch.G.set_size(cfg.n_mtds, M);
    ch.p_ul.set_size(cfg.n_mtds);
    for (arma::uword n = 0; n < cfg.n_mtds; ++n) {
        if (pl.gamma(n) < 0.0)
            throw std::invalid_argument("draw_channels: negative channel variance");
        const double s = std::sqrt(pl.gamma(n));
        for (arma::uword m = 0; m < M; ++m)
            ch.Gtilde(n, m) = s * rng.cnormal();
        ch.p_ul(n) = uplink_power_mtd(pl.gamma(n), pl.gamma_min, cfg.p_max_w);
        ch.G.row(n) = std::sqrt(ch.p_ul(n)) * ch.Gtilde.row(n);
    }
    return ch;
}

// Draws the activity pattern: each MTD transmits with probability epsilon and, if active,
// picks exactly one of its Q sequences uniformly (at most one active row per device block).
inline void draw_activity(const NetworkConfig &cfg, ChannelRealization &ch, Rng &rng) {
    if (cfg.epsilon < 0.0 || cfg.epsilon > 1.0)
        throw std::invalid_argument("draw_activity: epsilon must lie in [0, 1]");
    const arma::uword N = cfg.n_mtds, Q = cfg.q_messages;
    ch.alpha.zeros(N);
    ch.q_choice.set_size(N);
    ch.q_choice.fill(-1);
    ch.alpha_seq.zeros(N * Q);
    for (arma::uword n = 0; n < N; ++n) {
        if (rng.uniform() < cfg.epsilon) {
            ch.alpha(n) = 1;
            const arma::uword q = static_cast<arma::uword>(rng.below(Q));
            ch.q_choice(n) = static_cast<arma::sword>(q);
            ch.alpha_seq(n * Q + q) = 1;
        }
    }
}

} // namespace hetsim
