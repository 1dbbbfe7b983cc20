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
// Row-sparse multi-measurement-vector recovery of X from Y = S X + W by four solvers
// (approximate message passing, ADMM group lasso, EM sparse Bayesian learning, simultaneous
// OMP), plus row scoring and the rank-constrained activity thresholding.
//
// Every solver rescales the problem internally to unit RMS measurements (c = ||Y||_F /
// sqrt(T M)); tolerances below therefore act on the normalized problem and results are
// scaled back before returning. Stopping metrics and objective traces are reported on the
// scale stated at each solver.

#pragma once

#include <armadillo>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rng.hpp"

namespace hetsim {

struct SolverParams {
    double delta = 1e-4;      // convergence tolerance
    arma::uword t_max = 200;  // iteration cap
    double mu = 0.0;          // l2,1 weight; 0 selects sigma*sqrt(2 ln NQ)*||Y||_F/sqrt(TM)
    double rho_admm = 1.0;    // ADMM penalty
    double xi = 0.01;         // prior activity density per sequence (epsilon / Q)
    arma::vec gamma_priors;   // per-sequence slab variances (effective received power)
    double sigma2 = 0.0;      // noise power
    arma::uword se_samples = 0;       // 0: empirical residual covariance; >0: sampled state evolution
    std::uint64_t se_seed = 0x5eedULL; // dedicated seed for the sampled state-evolution mode
};

struct SparseEstimate {
    arma::cx_mat Xhat;        // [NQ x M] row-sparse estimate
    arma::vec xbar;           // [NQ] row l2 norms of Xhat
    arma::uvec alpha_hat;     // [NQ] detection indicators (filled by detect_sequences)
    arma::uword iterations = 0;
    bool converged = false;
    double residual_norm = 0.0; // final value of the solver's stopping metric
    arma::vec hyper;            // EM-SBL only: final hyperparameters (original scale)
    std::vector<double> objective_trace; // ADMM / EM-SBL objective per iteration
};

inline arma::vec row_norms(const arma::cx_mat &X) {
    return arma::sqrt(arma::sum(arma::square(arma::abs(X)), 1));
}

// Activity decision with the at-most-one-sequence-per-device constraint: within each
// device's Q-block only the largest score may fire, and only if it reaches zeta
// (boundary inclusive; ties resolved to the lowest message index).
inline arma::uvec detect_sequences(const arma::vec &xbar, double zeta, arma::uword Q) {
    if (Q < 1 || xbar.n_elem % Q != 0)
        throw std::invalid_argument("detect_sequences: score length must be a multiple of Q");
    if (zeta < 0.0)
        throw std::invalid_argument("detect_sequences requires zeta >= 0");
    const arma::uword N = xbar.n_elem / Q;
    arma::uvec alpha(xbar.n_elem, arma::fill::zeros);
    for (arma::uword n = 0; n < N; ++n) {
        arma::uword best_q = 0;
        double best = xbar(n * Q);
        for (arma::uword q = 1; q < Q; ++q)
            if (xbar(n * Q + q) > best) { // strict: ties keep the lowest q
                best = xbar(n * Q + q);
                best_q = q;
            }
        if (best >= zeta)
            alpha(n * Q + best_q) = 1;
    }
    return alpha;
}

namespace detail {

inline void check_problem(const arma::cx_mat &Y, const arma::cx_mat &S) {
    if (Y.n_rows != S.n_rows)
        throw std::invalid_argument("solver: Y and S row counts differ");
    if (S.n_cols == 0 || Y.n_cols == 0)
        throw std::invalid_argument("solver: empty problem");
}

inline double problem_scale(const arma::cx_mat &Y) {
    return arma::norm(Y, "fro") / std::sqrt(static_cast<double>(Y.n_rows * Y.n_cols));
}

inline SparseEstimate zero_estimate(arma::uword NQ, arma::uword M) {
    SparseEstimate est;
    est.Xhat.zeros(NQ, M);
    est.xbar.zeros(NQ);
    est.converged = true;
    return est;
}

inline arma::vec scaled_slab(const SolverParams &prm, arma::uword NQ, double c2) {
    if (prm.gamma_priors.n_elem != NQ)
        throw std::invalid_argument("solver: gamma_priors must have one entry per sequence");
    if (prm.gamma_priors.min() <= 0.0)
        throw std::invalid_argument("solver: slab variances must be positive");
    return prm.gamma_priors / c2;
}

// Spike-and-slab MMSE denoiser evaluated in the eigenbasis of the effective noise
// covariance: for v = x + w, w ~ CN(0, U diag(d) U^H) and x ~ (1-xi) delta_0 +
// xi CN(0, gamma I), returns the posterior mean and the average diagonal Wirtinger
// derivative (used by the Onsager correction).
struct DenoiserOut {
    arma::cx_vec eta_u;  // posterior mean, still in the eigenbasis
    arma::vec jac_diag;  // d eta_m / d v_m, real in the eigenbasis
};

inline DenoiserOut denoise_row(const arma::cx_vec &v_u, const arma::vec &d, double gamma, double log_odds) {
    const arma::uword M = v_u.n_elem;
    DenoiserOut out;
    out.eta_u.set_size(M);
    out.jac_diag.set_size(M);
    double log_det = 0.0, quad = 0.0;
    arma::vec A(M), B(M);
    for (arma::uword m = 0; m < M; ++m) {
        A(m) = gamma / (gamma + d(m));
        B(m) = gamma / (d(m) * (gamma + d(m))); // 1/d - 1/(gamma + d)
        log_det += std::log1p(gamma / d(m));
        quad += B(m) * std::norm(v_u(m));
    }
    const double le = log_odds + log_det - quad;
    const double p1 = 1.0 / (1.0 + std::exp(le)); // posterior slab probability; IEEE-safe at both ends
    const double sig_deriv = p1 * (1.0 - p1);     // vanishes exponentially faster than B |v|^2 grows
    for (arma::uword m = 0; m < M; ++m) {
        const arma::cx_double av = A(m) * v_u(m);
        out.eta_u(m) = p1 * av;
        out.jac_diag(m) =
            p1 * A(m) + ((sig_deriv > 0.0) ? A(m) * B(m) * std::norm(v_u(m)) * sig_deriv : 0.0);
    }
    return out;
}

} // namespace detail

// Approximate message passing with the spike-and-slab MMSE denoiser. Iterates the
// matched-filter update v_j = x_j + (s_j^H R)^T, applies the denoiser row-wise and updates
// the residual with the Onsager correction R <- Y - S X + (NQ/T) R <eta'>. The effective
// noise covariance defaults to the empirical surrogate conj(R^H R) / T; se_samples > 0
// switches to a sampled state-evolution update sigma2 I + (NQ/T) E[e e^H] with a dedicated
// seed. Stops when ||R_next - R||_F < delta on the normalized problem.
inline SparseEstimate amp_decode(const arma::cx_mat &Y, const arma::cx_mat &S, const SolverParams &prm) {
    detail::check_problem(Y, S);
    const arma::uword T = Y.n_rows, M = Y.n_cols, NQ = S.n_cols;
    if (!(prm.xi > 0.0) || prm.xi >= 1.0)
        throw std::invalid_argument("amp_decode requires 0 < xi < 1");
    const double c = detail::problem_scale(Y);
    if (c == 0.0)
        return detail::zero_estimate(NQ, M);
    const arma::vec gam = detail::scaled_slab(prm, NQ, c * c);
    const double sigma2n = prm.sigma2 / (c * c);
    const double log_odds = std::log((1.0 - prm.xi) / prm.xi);
    const double nq_over_t = static_cast<double>(NQ) / static_cast<double>(T);

    const arma::cx_mat Yn = Y / c;
    arma::cx_mat X(NQ, M, arma::fill::zeros);
    arma::cx_mat R = Yn;

    // Sampled state-evolution covariance (only used when se_samples > 0).
    arma::cx_mat sigma_se(M, M, arma::fill::zeros);
    if (prm.se_samples > 0) {
        sigma_se.diag() += sigma2n + nq_over_t * prm.xi * arma::mean(gam);
    }

    SparseEstimate est;
    est.converged = false;
    double stop_metric = arma::datum::inf;
    for (arma::uword t = 0; t < prm.t_max; ++t) {
        // Effective noise covariance of the matched-filter outputs v_j = (s_j^H R)^T + x_j
        // (column convention), whose empirical surrogate is conj(R^H R)/T.
        arma::cx_mat sigma =
            (prm.se_samples > 0) ? sigma_se : arma::cx_mat(arma::conj(R.t() * R) / static_cast<double>(T));
        sigma = (sigma + sigma.t()) / 2.0;
        arma::vec d;
        arma::cx_mat U;
        if (!arma::eig_sym(d, U, sigma))
            throw std::runtime_error("amp_decode: eigendecomposition failed");
        // State evolution lower-bounds the effective covariance by sigma^2 I; flooring the
        // eigenvalues there keeps degenerate directions of the empirical surrogate from
        // inflating the denoiser's evidence terms when the residual is nearly rank-deficient.
        const double d_floor =
            std::max(sigma2n, 1e-15 * std::max({d.max(), sigma2n, gam.max()})) + 1e-300;
        d = arma::clamp(d, d_floor, arma::datum::inf);

        const arma::cx_mat P = (S.t() * R + X).st(); // [M x NQ], column j is v_j = (s_j^H R)^T + x_j
        const arma::cx_mat Pu = U.t() * P;
        arma::cx_mat Xnew(NQ, M);
        arma::vec jac_avg(M, arma::fill::zeros);
        for (arma::uword j = 0; j < NQ; ++j) {
            const auto den = detail::denoise_row(Pu.col(j), d, gam(j), log_odds);
            Xnew.row(j) = (U * den.eta_u).st();
            jac_avg += den.jac_diag;
        }
        jac_avg /= static_cast<double>(NQ);

        const arma::cx_mat onsager = U * arma::diagmat(arma::cx_vec(jac_avg, arma::vec(M, arma::fill::zeros))) * U.t();
        arma::cx_mat Rnew = Yn - S * Xnew + nq_over_t * R * onsager;

        if (prm.se_samples > 0) {
            // Monte-Carlo estimate of E[e e^H] under the prior at the current state.
            Rng se_rng(prm.se_seed, {0x5eULL, static_cast<std::uint64_t>(t)});
            arma::cx_mat acc(M, M, arma::fill::zeros);
            const arma::vec sq = arma::sqrt(d);
            for (arma::uword s = 0; s < prm.se_samples; ++s) {
                const arma::uword j = static_cast<arma::uword>(se_rng.below(NQ));
                arma::cx_vec x(M, arma::fill::zeros);
                if (se_rng.uniform() < prm.xi) {
                    const double sg = std::sqrt(gam(j));
                    for (arma::uword m = 0; m < M; ++m)
                        x(m) = sg * se_rng.cnormal();
                }
                arma::cx_vec w(M);
                for (arma::uword m = 0; m < M; ++m)
                    w(m) = sq(m) * se_rng.cnormal();
                const arma::cx_vec v_u = U.t() * x + w; // w drawn directly in the eigenbasis
                const auto den = detail::denoise_row(v_u, d, gam(j), log_odds);
                const arma::cx_vec err = U * den.eta_u - x;
                acc += err * err.t();
            }
            sigma_se.zeros(M, M);
            sigma_se.diag() += sigma2n;
            sigma_se += (nq_over_t / static_cast<double>(prm.se_samples)) * acc;
        }

        stop_metric = arma::norm(Rnew - R, "fro");
        X = Xnew;
        R = Rnew;
        est.iterations = t + 1;
        if (stop_metric < prm.delta) {
            est.converged = true;
            break;
        }
    }
    est.Xhat = c * X;
    est.xbar = row_norms(est.Xhat);
    est.residual_norm = stop_metric;
    return est;
}

// ADMM for the l2,1-regularized least-squares problem min 1/2 ||Y - S X||_F^2 +
// mu ||X||_{2,1}. Alternates the ridge least-squares Z-update (Woodbury form when T < NQ),
// the row-wise group soft threshold and the dual ascent; stops on ||Z_next - Z||_F < delta
// (normalized problem). Returns the thresholded X, whose rows are exactly sparse. The
// objective trace is reported on the original scale.
inline SparseEstimate admm_l21(const arma::cx_mat &Y, const arma::cx_mat &S, const SolverParams &prm) {
    detail::check_problem(Y, S);
    const arma::uword T = Y.n_rows, M = Y.n_cols, NQ = S.n_cols;
    if (!(prm.rho_admm > 0.0) || prm.mu < 0.0)
        throw std::invalid_argument("admm_l21 requires rho_admm > 0 and mu >= 0");
    const double c = detail::problem_scale(Y);
    if (c == 0.0)
        return detail::zero_estimate(NQ, M);
    const double rho = prm.rho_admm;
    // Normalized-problem weight: an explicit mu is given on the original scale; the
    // automatic default sigma*sqrt(2 ln NQ)*||Y||_F/sqrt(TM) divides to sigma*sqrt(2 ln NQ).
    const double mu_n = (prm.mu > 0.0) ? prm.mu / c
                                       : std::sqrt(prm.sigma2) * std::sqrt(2.0 * std::log(static_cast<double>(NQ)));
    const arma::cx_mat Yn = Y / c;
    const arma::cx_mat StY = S.t() * Yn;

    // Factorize the Z-update system once: (S^H S + rho I)^{-1} directly, or through
    // (S S^H + rho I)^{-1} when the T x T system is the smaller one.
    const bool woodbury = T < NQ;
    arma::cx_mat chol_u;
    if (woodbury) {
        arma::cx_mat K = S * S.t();
        K.diag() += rho;
        if (!arma::chol(chol_u, K))
            throw std::runtime_error("admm_l21: factorization failed");
    } else {
        arma::cx_mat K = S.t() * S;
        K.diag() += rho;
        if (!arma::chol(chol_u, K))
            throw std::runtime_error("admm_l21: factorization failed");
    }
    auto solve_system = [&](const arma::cx_mat &C) {
        if (woodbury) {
            const arma::cx_mat W = S * C;
            const arma::cx_mat t1 = arma::solve(arma::trimatl(chol_u.t()), W);
            const arma::cx_mat t2 = arma::solve(arma::trimatu(chol_u), t1);
            return arma::cx_mat((C - S.t() * t2) / rho);
        }
        const arma::cx_mat t1 = arma::solve(arma::trimatl(chol_u.t()), C);
        return arma::cx_mat(arma::solve(arma::trimatu(chol_u), t1));
    };

    arma::cx_mat X(NQ, M, arma::fill::zeros), Lam(NQ, M, arma::fill::zeros), Zprev(NQ, M, arma::fill::zeros);
    SparseEstimate est;
    const double yn_fro = arma::norm(Yn, "fro");
    est.objective_trace.push_back(c * c * 0.5 * yn_fro * yn_fro);
    double stop_metric = arma::datum::inf;
    for (arma::uword t = 0; t < prm.t_max; ++t) {
        const arma::cx_mat Z = solve_system(StY + rho * X + Lam);
        const arma::cx_mat Cx = Z - Lam / rho;
        const arma::vec cn = row_norms(Cx);
        for (arma::uword j = 0; j < NQ; ++j) {
            const double scale = (cn(j) > mu_n / rho) ? (1.0 - (mu_n / rho) / cn(j)) : 0.0;
            X.row(j) = scale * Cx.row(j);
        }
        Lam += rho * (X - Z);

        const double fit = 0.5 * std::pow(arma::norm(Yn - S * X, "fro"), 2.0);
        est.objective_trace.push_back(c * c * (fit + mu_n * arma::accu(row_norms(X))));

        stop_metric = arma::norm(Z - Zprev, "fro");
        Zprev = Z;
        est.iterations = t + 1;
        if (stop_metric < prm.delta) {
            est.converged = true;
            break;
        }
    }
    est.Xhat = c * X;
    est.xbar = row_norms(est.Xhat);
    est.residual_norm = stop_metric;
    return est;
}

// EM sparse Bayesian learning with per-row hyperparameters. E-step: posterior mean
// X_A = Gamma_A S_A^H Sigma_y^{-1} Y with Sigma_y = sigma^2 I + S_A Gamma_A S_A^H;
// M-step: gamma_i <- ||x_i||^2 / M + F_ii with the posterior variance F_ii = gamma_i -
// gamma_i^2 s_i^H Sigma_y^{-1} s_i. Hyperparameters falling below 1e-12 (normalized
// problem) are clamped to zero and their rows frozen. Stops when both the relative change
// of X and of the hyperparameter vector drop below delta. The objective trace holds the
// Type-II negative log-likelihood M log|Sigma_y| + Tr(Sigma_y^{-1} Y Y^H) (plus the
// normalization constant, so values refer to the original scale), evaluated at the start
// of each iteration; exact EM steps make it non-increasing.
inline SparseEstimate em_sbl(const arma::cx_mat &Y, const arma::cx_mat &S, const SolverParams &prm) {
    detail::check_problem(Y, S);
    const arma::uword T = Y.n_rows, M = Y.n_cols, NQ = S.n_cols;
    if (!(prm.sigma2 > 0.0))
        throw std::invalid_argument("em_sbl requires sigma2 > 0");
    constexpr double kPrune = 1e-12;
    const double raw_scale = detail::problem_scale(Y);
    const double c = (raw_scale > 0.0) ? raw_scale : 1.0; // Y = 0 still iterates (hyperparameters decay)
    const double c2 = c * c;
    const arma::vec slab = detail::scaled_slab(prm, NQ, c2);
    const double s2 = prm.sigma2 / c2;
    const arma::cx_mat Yn = Y / c;
    const double cost_shift = static_cast<double>(M) * static_cast<double>(T) * std::log(c2);

    arma::vec gam = slab;
    arma::cx_mat X(NQ, M, arma::fill::zeros);
    SparseEstimate est;
    double stop_metric = arma::datum::inf;
    for (arma::uword t = 0; t < prm.t_max; ++t) {
        const arma::uvec A = arma::find(gam > kPrune);
        if (A.n_elem == 0) {
            est.converged = true;
            break;
        }
        const arma::cx_mat SA = S.cols(A);
        const arma::vec gA = gam(A);

        arma::cx_mat Sy = SA * arma::diagmat(arma::cx_vec(gA, arma::vec(gA.n_elem, arma::fill::zeros))) * SA.t();
        Sy.diag() += s2;
        Sy = (Sy + Sy.t()) / 2.0;
        arma::cx_mat chol_u;
        if (!arma::chol(chol_u, Sy))
            throw std::runtime_error("em_sbl: covariance factorization failed");
        auto chol_solve = [&](const arma::cx_mat &Bm) {
            const arma::cx_mat t1 = arma::solve(arma::trimatl(chol_u.t()), Bm);
            return arma::cx_mat(arma::solve(arma::trimatu(chol_u), t1));
        };

        const arma::cx_mat SyiY = chol_solve(Yn);
        const double logdet = 2.0 * arma::accu(arma::log(arma::real(chol_u.diag())));
        const double tr = arma::accu(arma::real(arma::conj(Yn) % SyiY));
        est.objective_trace.push_back(static_cast<double>(M) * logdet + tr + cost_shift);

        const arma::cx_mat XA =
            arma::diagmat(arma::cx_vec(gA, arma::vec(gA.n_elem, arma::fill::zeros))) * (SA.t() * SyiY);
        const arma::cx_mat SyiS = chol_solve(SA);
        const arma::vec q = arma::real(arma::sum(arma::conj(SA) % SyiS, 0)).t();
        const arma::vec F = arma::clamp(gA - arma::square(gA) % q, 0.0, arma::datum::inf);
        const arma::vec gA_new = arma::square(row_norms(XA)) / static_cast<double>(M) + F;

        arma::cx_mat Xnew(NQ, M, arma::fill::zeros);
        Xnew.rows(A) = XA;
        arma::vec gam_new(NQ, arma::fill::zeros);
        gam_new(A) = gA_new;
        gam_new.elem(arma::find(gam_new < kPrune)).zeros();

        const double rel_x = arma::norm(Xnew - X, "fro") / std::max(arma::norm(Xnew, "fro"), 1e-300);
        const double rel_g = arma::norm(gam_new - gam, 2) / std::max(arma::norm(gam_new, 2), 1e-300);
        X = Xnew;
        gam = gam_new;
        est.iterations = t + 1;
        stop_metric = std::max(rel_x, rel_g);
        if (stop_metric < prm.delta) {
            est.converged = true;
            break;
        }
    }
    est.Xhat = c * X;
    est.xbar = row_norms(est.Xhat);
    est.hyper = gam * c2;
    est.residual_norm = stop_metric;
    return est;
}

// Simultaneous orthogonal matching pursuit: repeatedly adds the column with the largest
// norm-weighted row-l1 correlation to the residual, refits X on the support by least
// squares (ridge 1e-10 if the Gram matrix is ill-conditioned) and recomputes the residual.
// Stops on relative change < delta, on residual stagnation / column re-selection, or at
// k_max support columns (the last case reports converged = false).
inline SparseEstimate somp(const arma::cx_mat &Y, const arma::cx_mat &S, const SolverParams &prm,
                           arma::uword k_max) {
    detail::check_problem(Y, S);
    const arma::uword M = Y.n_cols, NQ = S.n_cols;
    if (k_max < 1)
        throw std::invalid_argument("somp requires k_max >= 1");
    const double c = detail::problem_scale(Y);
    if (c == 0.0)
        return detail::zero_estimate(NQ, M);
    const arma::cx_mat Yn = Y / c;
    arma::vec col_norm(NQ);
    for (arma::uword j = 0; j < NQ; ++j)
        col_norm(j) = std::max(arma::norm(S.col(j)), 1e-300);

    arma::cx_mat R = Yn;
    arma::cx_mat X(NQ, M, arma::fill::zeros);
    std::vector<arma::uword> support;
    std::vector<bool> in_support(NQ, false);
    SparseEstimate est;
    double stop_metric = arma::datum::inf;
    double r_norm = arma::norm(R, "fro");
    for (arma::uword k = 0; k < k_max; ++k) {
        const arma::vec scores = arma::sum(arma::abs(S.t() * R), 1) / col_norm;
        const arma::uword j = scores.index_max();
        if (in_support[j]) { // no new information left in the residual
            est.converged = true;
            break;
        }
        support.push_back(j);
        in_support[j] = true;

        const arma::uvec H(support);
        const arma::cx_mat SH = S.cols(H);
        arma::cx_mat G = SH.t() * SH;
        const arma::cx_mat rhs = SH.t() * Yn;
        arma::cx_mat XH;
        if (!arma::solve(XH, G, rhs, arma::solve_opts::likely_sympd + arma::solve_opts::no_approx)) {
            G.diag() += 1e-10;
            XH = arma::solve(G, rhs, arma::solve_opts::likely_sympd);
        }
        arma::cx_mat Xnew(NQ, M, arma::fill::zeros);
        Xnew.rows(H) = XH;
        const arma::cx_mat Rnew = Yn - SH * XH;

        stop_metric = arma::norm(Xnew - X, "fro") / std::max(arma::norm(Xnew, "fro"), 1e-300);
        const double r_norm_new = arma::norm(Rnew, "fro");
        X = Xnew;
        R = Rnew;
        est.iterations = k + 1;
        if (stop_metric < prm.delta || r_norm_new > (1.0 - 1e-12) * r_norm) {
            est.converged = true;
            break;
        }
        r_norm = r_norm_new;
    }
    est.Xhat = c * X;
    est.xbar = row_norms(est.Xhat);
    est.residual_norm = stop_metric;
    return est;
}

} // namespace hetsim
