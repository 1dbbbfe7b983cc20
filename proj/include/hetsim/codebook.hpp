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
// Joint waveform design: orthogonal pilots for the broadband devices and, built on the
// complementary part of the same Hadamard basis, pilot-orthogonal sparse headers plus
// low-cross-correlation message bodies for the machine-type devices.

#pragma once

#include <armadillo>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"
#include "rng.hpp"

namespace hetsim {

// Relative slack on the collision-probability target: quoted targets are usually rounded
// to three significant digits, and a target quoted as the rounded achievable probability
// must still select that subset size.
inline constexpr double kChiSlack = 1e-2;

struct infeasible_chi_error : std::runtime_error {
    double min_achievable;
    infeasible_chi_error(const std::string &msg, double m) : std::runtime_error(msg), min_achievable(m) {}
};

inline double log_binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n)
        throw std::invalid_argument("log_binomial requires k <= n");
    return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0);
}

// True when a header support of size z out of n columns meets the collision target:
// 1/C(n, z) <= chi (with kChiSlack relative slack).
inline bool collision_feasible(std::uint64_t n, std::uint64_t z, double chi) {
    return -log_binomial(n, z) <= std::log(chi) + std::log1p(kChiSlack);
}

// Smallest header support size z in {1..floor((L-E)/2)} whose random-subset collision
// probability 1/C(L-E, z) meets the target chi. Throws infeasible_chi_error carrying the
// smallest achievable collision probability when no z qualifies.
inline arma::uword solve_z(arma::uword L, arma::uword E, double chi) {
    if (E >= L)
        throw std::invalid_argument("solve_z requires E < L");
    if (!(chi > 0.0) || chi > 1.0)
        throw std::invalid_argument("solve_z requires chi in (0, 1]");
    const std::uint64_t n = L - E;
    const std::uint64_t z_max = n / 2;
    for (std::uint64_t z = 1; z <= z_max; ++z)
        if (collision_feasible(n, z, chi))
            return static_cast<arma::uword>(z);
    const double min_achievable = (z_max >= 1) ? std::exp(-log_binomial(n, z_max)) : 1.0;
    std::ostringstream msg;
    msg << "collision target chi=" << chi << " infeasible for L-E=" << n
        << "; smallest achievable collision probability is " << min_achievable;
    throw infeasible_chi_error(msg.str(), min_achievable);
}

// Complex Hadamard matrix of order L (power of two): Kronecker powers of the seed
// [[1, 1], [i, -i]]. Entries are unit-modulus 4-PSK symbols; H^H H = L I.
inline arma::cx_mat hadamard_complex(arma::uword L) {
    if (!is_power_of_two(L))
        throw std::invalid_argument("hadamard_complex: unsupported size (L must be a power of two)");
    arma::cx_mat H(1, 1);
    H(0, 0) = arma::cx_double(1.0, 0.0);
    const arma::cx_double i1(0.0, 1.0);
    while (H.n_rows < L) {
        const arma::uword m = H.n_rows;
        arma::cx_mat H2(2 * m, 2 * m);
        H2(arma::span(0, m - 1), arma::span(0, m - 1)) = H;
        H2(arma::span(0, m - 1), arma::span(m, 2 * m - 1)) = H;
        H2(arma::span(m, 2 * m - 1), arma::span(0, m - 1)) = i1 * H;
        H2(arma::span(m, 2 * m - 1), arma::span(m, 2 * m - 1)) = -i1 * H;
        H = std::move(H2);
    }
    return H;
}

// Splits the Hadamard basis into E pilot columns and the L-E column pool left for headers.
// Returned pilots are unscaled basis columns; assemble_codebook applies the power scaling.
inline void assign_pilots(const arma::cx_mat &H, arma::uword E, arma::cx_mat &Psi_raw, arma::cx_mat &B) {
    if (E >= H.n_cols)
        throw std::invalid_argument("assign_pilots requires E < L");
    Psi_raw = (E > 0) ? arma::cx_mat(H.cols(0, E - 1)) : arma::cx_mat(H.n_rows, 0);
    B = H.cols(E, H.n_cols - 1);
}

// Builds one pilot-orthogonal header per MTD: v_n = sum_l vartheta_{n,l} c_{pi_n(l)} with
// a random z-subset pi_n of the non-pilot basis columns and weights drawn from U(0, 1].
// Orthogonality to every pilot is inherited from the basis, whatever the weights.
inline void build_headers(const arma::cx_mat &B, arma::uword z, arma::uword N, Rng &rng, arma::cx_mat &V,
                          arma::umat &pi, arma::mat &vartheta) {
    if (z < 1 || z > B.n_cols)
        throw std::invalid_argument("build_headers requires 1 <= z <= L-E");
    V.zeros(B.n_rows, N);
    pi.set_size(N, z);
    vartheta.set_size(N, z);
    for (arma::uword n = 0; n < N; ++n) {
        bool all_zero = true;
        do {
            const auto subset = rng.choose(B.n_cols, z);
            all_zero = true;
            for (arma::uword l = 0; l < z; ++l) {
                pi(n, l) = static_cast<arma::uword>(subset[l]);
                vartheta(n, l) = rng.uniform_pos();
                all_zero = all_zero && !(vartheta(n, l) > 0.0);
            }
        } while (all_zero); // U(0,1] excludes zero; kept as a guard for the stated contract
        arma::cx_vec v(B.n_rows, arma::fill::zeros);
        for (arma::uword l = 0; l < z; ++l)
            v += vartheta(n, l) * B.col(pi(n, l));
        V.col(n) = v;
    }
}

// kappa-PSK alphabet symbol for a digit in {0..kappa-1}. The binary and quaternary cases
// are exact {+1,-1} and {1, i, -1, -i} so designed orthogonality is exact in floating point.
inline arma::cx_double psk_symbol(std::uint64_t digit, std::uint64_t kappa) {
    if (kappa == 2)
        return arma::cx_double(digit == 0 ? 1.0 : -1.0, 0.0);
    if (kappa == 4) {
        switch (digit & 3) {
        case 0:
            return arma::cx_double(1.0, 0.0);
        case 1:
            return arma::cx_double(0.0, 1.0);
        case 2:
            return arma::cx_double(-1.0, 0.0);
        default:
            return arma::cx_double(0.0, -1.0);
        }
    }
    const double a = 6.283185307179586476925286766559 * static_cast<double>(digit) / static_cast<double>(kappa);
    return arma::cx_double(std::cos(a), std::sin(a));
}

// Candidate message bodies: rows are length-(T-L) kappa-PSK words. The pool is the full
// kappa^(T-L) space when it fits under pool_cap (lexicographic order), otherwise pool_cap
// distinct rows sampled uniformly without replacement.
struct CandidatePool {
    arma::cx_mat rows; // [P x (T-L)]
};

inline CandidatePool make_message_pool(arma::uword len, std::uint64_t kappa, std::uint64_t pool_cap, Rng &rng) {
    if (len < 1)
        throw std::invalid_argument("make_message_pool requires a positive body length");
    if (kappa < 2)
        throw std::invalid_argument("make_message_pool requires kappa >= 2");
    if (pool_cap < 1)
        throw std::invalid_argument("make_message_pool requires pool_cap >= 1");

    // Exact space size with early exit once it exceeds the cap.
    std::uint64_t space = 1;
    bool exhaustive = true;
    for (arma::uword k = 0; k < len; ++k) {
        if (space > pool_cap / kappa + 1) {
            exhaustive = false;
            break;
        }
        space *= kappa;
    }
    exhaustive = exhaustive && space <= pool_cap;

    CandidatePool pool;
    if (exhaustive) {
        pool.rows.set_size(space, len);
        std::vector<std::uint64_t> digits(len, 0);
        for (std::uint64_t r = 0; r < space; ++r) {
            for (arma::uword k = 0; k < len; ++k)
                pool.rows(r, k) = psk_symbol(digits[k], kappa);
            for (arma::uword k = len; k-- > 0;) { // increment base-kappa counter, leftmost digit most significant
                if (++digits[k] < kappa)
                    break;
                digits[k] = 0;
            }
        }
    } else {
        const std::uint64_t P = pool_cap;
        std::set<std::vector<std::uint32_t>> seen;
        pool.rows.set_size(P, len);
        std::vector<std::uint32_t> digits(len);
        std::uint64_t r = 0;
        while (r < P) {
            for (arma::uword k = 0; k < len; ++k)
                digits[k] = static_cast<std::uint32_t>(rng.below(kappa));
            if (!seen.insert(digits).second)
                continue; // without replacement
            for (arma::uword k = 0; k < len; ++k)
                pool.rows(r, k) = psk_symbol(digits[k], kappa);
            ++r;
        }
    }
    return pool;
}

struct MessageSelection {
    arma::uvec indices; // [Q] pool row indices in selection order
    arma::cx_mat rows;  // [Q x (T-L)]
};

// Greedy minimum-cross-correlation selection of Q message bodies. Each step locates the
// unused pair (i, j), i < j, with the smallest |<row_i, row_j>| (ties resolved to the
// lexicographically smallest (i, j)), keeps row i and retires it from further pairing.
inline MessageSelection select_messages(const CandidatePool &pool, arma::uword Q) {
    const arma::uword P = pool.rows.n_rows;
    if (Q < 1 || Q > P)
        throw std::invalid_argument("select_messages requires 1 <= Q <= pool size");
    const arma::mat theta = arma::abs(pool.rows * pool.rows.t()); // pairwise |cross-correlation|
    std::vector<bool> used(P, false);
    MessageSelection sel;
    sel.indices.set_size(Q);
    sel.rows.set_size(Q, pool.rows.n_cols);
    for (arma::uword q = 0; q < Q; ++q) {
        arma::uword pick = P; // invalid
        if (P - q == 1) { // a single candidate left: no pair exists, take it
            for (arma::uword i = 0; i < P; ++i)
                if (!used[i]) {
                    pick = i;
                    break;
                }
        } else {
            double best = arma::datum::inf;
            for (arma::uword i = 0; i + 1 < P; ++i) {
                if (used[i])
                    continue;
                for (arma::uword j = i + 1; j < P; ++j) {
                    if (used[j])
                        continue;
                    if (theta(i, j) < best) { // strict: first minimum in scan order = lex smallest tie
                        best = theta(i, j);
                        pick = i;
                    }
                }
            }
        }
        used[pick] = true;
        sel.indices(q) = pick;
        sel.rows.row(q) = pool.rows.row(pick);
    }
    return sel;
}

// Complete transmit-side design for one experiment point. Sequence (n, q) lives in column
// n*Q + q of S and U; all indices are zero-based.
struct Codebook {
    arma::uword T = 0, L = 0, E = 0, N = 0, Q = 0, z = 0;
    std::uint64_t kappa = 2;
    std::uint64_t seed = 0;
    bool gaussian = false;
    arma::cx_mat Psi;      // [L x E] pilots, scaled so each symbol has power 1/T
    arma::cx_mat V;        // [L x N] unscaled MTD headers
    arma::cx_mat U;        // [(T-L) x N*Q] unscaled message bodies
    arma::cx_mat S;        // [T x N*Q] unit-norm transmit sequences [v_n; u_n^q] / ||.||
    arma::umat pi;         // [N x z] header support sets
    arma::mat vartheta;    // [N x z] header combining weights
};

// Stacks headers over bodies and normalises every column to unit energy (per-symbol
// average power 1/T). Pilots are scaled by 1/sqrt(T) for the same per-symbol power.
inline Codebook assemble_codebook(arma::uword T, const arma::cx_mat &Psi_raw, const arma::cx_mat &V,
                                  const arma::cx_mat &U, arma::uword Q) {
    const arma::uword L = V.n_rows;
    if (Psi_raw.n_rows != L)
        throw std::invalid_argument("assemble_codebook: pilot/header row mismatch");
    if (U.n_rows != T - L)
        throw std::invalid_argument("assemble_codebook: message length must be T-L");
    if (Q < 1 || U.n_cols != V.n_cols * Q)
        throw std::invalid_argument("assemble_codebook: expected N*Q message columns");
    Codebook cb;
    cb.T = T;
    cb.L = L;
    cb.E = Psi_raw.n_cols;
    cb.N = V.n_cols;
    cb.Q = Q;
    cb.Psi = Psi_raw / std::sqrt(static_cast<double>(T));
    cb.V = V;
    cb.U = U;
    cb.S.set_size(T, cb.N * Q);
    for (arma::uword n = 0; n < cb.N; ++n) {
        for (arma::uword q = 0; q < Q; ++q) {
            const arma::uword col = n * Q + q;
            arma::cx_vec s = arma::join_cols(V.col(n), U.col(col));
            const double nrm = arma::norm(s);
            if (!(nrm > 0.0))
                throw std::invalid_argument("assemble_codebook: zero-energy sequence");
            cb.S.col(col) = s / nrm;
        }
    }
    return cb;
}

// Designs the full codebook for a configuration: Hadamard pilots, z-sparse headers on the
// complementary columns and greedily selected low-correlation bodies. The i.i.d. Gaussian
// benchmark (gaussian_codebook = true) replaces every design element by random draws with
// matched energies and no orthogonality structure.
inline Codebook make_codebook(const NetworkConfig &cfg, std::uint64_t seed) {
    const arma::uword T = cfg.coherence_len, L = cfg.pilot_len, E = cfg.n_embb;
    const arma::uword N = cfg.n_mtds, Q = cfg.q_messages;
    Rng rng(seed, {0x636f6465ULL});

    if (cfg.gaussian_codebook) {
        arma::cx_mat Psi_raw(L, E), V(L, N), U(T - L, N * Q);
        for (arma::uword e = 0; e < E; ++e) {
            arma::cx_vec g(L);
            for (arma::uword k = 0; k < L; ++k)
                g(k) = rng.cnormal();
            Psi_raw.col(e) = g * (std::sqrt(static_cast<double>(L)) / arma::norm(g)); // pilot energy matched
        }
        for (arma::uword n = 0; n < N; ++n)
            for (arma::uword k = 0; k < L; ++k)
                V(k, n) = rng.cnormal();
        for (arma::uword c = 0; c < N * Q; ++c)
            for (arma::uword k = 0; k < T - L; ++k)
                U(k, c) = rng.cnormal();
        Codebook cb = assemble_codebook(T, Psi_raw, V, U, Q);
        cb.kappa = cfg.kappa;
        cb.seed = seed;
        cb.gaussian = true;
        return cb;
    }

    const arma::cx_mat H = hadamard_complex(L);
    const arma::uword z = solve_z(L, E, cfg.chi);
    arma::cx_mat Psi_raw, B;
    assign_pilots(H, E, Psi_raw, B);

    arma::cx_mat V;
    arma::umat pi;
    arma::mat vartheta;
    build_headers(B, z, N, rng, V, pi, vartheta);

    arma::cx_mat U(T - L, N * Q);
    if (cfg.shared_pool) {
        const CandidatePool pool = make_message_pool(T - L, cfg.kappa, cfg.pool_cap, rng);
        const MessageSelection sel = select_messages(pool, Q);
        for (arma::uword n = 0; n < N; ++n)
            for (arma::uword q = 0; q < Q; ++q)
                U.col(n * Q + q) = sel.rows.row(q).st();
    } else {
        for (arma::uword n = 0; n < N; ++n) {
            const CandidatePool pool = make_message_pool(T - L, cfg.kappa, cfg.pool_cap, rng);
            const MessageSelection sel = select_messages(pool, Q);
            for (arma::uword q = 0; q < Q; ++q)
                U.col(n * Q + q) = sel.rows.row(q).st();
        }
    }

    Codebook cb = assemble_codebook(T, Psi_raw, V, U, Q);
    cb.z = z;
    cb.kappa = cfg.kappa;
    cb.seed = seed;
    cb.pi = pi;
    cb.vartheta = vartheta;
    return cb;
}

namespace detail {

inline void write_cx(std::ostream &out, const arma::cx_mat &A) {
    out.precision(17);
    for (arma::uword r = 0; r < A.n_rows; ++r) {
        for (arma::uword c = 0; c < A.n_cols; ++c)
            out << (c ? " " : "") << A(r, c).real() << " " << A(r, c).imag();
        out << "\n";
    }
}

inline arma::cx_mat read_cx(std::istream &in, arma::uword rows, arma::uword cols) {
    arma::cx_mat A(rows, cols);
    for (arma::uword r = 0; r < rows; ++r)
        for (arma::uword c = 0; c < cols; ++c) {
            double re = 0.0, im = 0.0;
            if (!(in >> re >> im))
                throw std::runtime_error("codebook file: truncated matrix block");
            A(r, c) = arma::cx_double(re, im);
        }
    return A;
}

} // namespace detail

// Writes the codebook as a self-describing text file (17 significant digits, enough to
// round-trip doubles exactly) so experiments can pin one fixed design.
inline void save_codebook(const Codebook &cb, const std::string &path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    out << "hetsim-codebook v1\n";
    out << "T " << cb.T << " L " << cb.L << " E " << cb.E << " N " << cb.N << " Q " << cb.Q << " z " << cb.z
        << " kappa " << cb.kappa << " seed " << cb.seed << " gaussian " << (cb.gaussian ? 1 : 0) << "\n";
    out << "PSI\n";
    detail::write_cx(out, cb.Psi);
    out << "V\n";
    detail::write_cx(out, cb.V);
    out << "U\n";
    detail::write_cx(out, cb.U);
    out << "S\n";
    detail::write_cx(out, cb.S);
    if (cb.z > 0) {
        out << "PI\n";
        for (arma::uword n = 0; n < cb.pi.n_rows; ++n) {
            for (arma::uword l = 0; l < cb.pi.n_cols; ++l)
                out << (l ? " " : "") << cb.pi(n, l);
            out << "\n";
        }
        out << "THETA\n";
        out.precision(17);
        for (arma::uword n = 0; n < cb.vartheta.n_rows; ++n) {
            for (arma::uword l = 0; l < cb.vartheta.n_cols; ++l)
                out << (l ? " " : "") << cb.vartheta(n, l);
            out << "\n";
        }
    }
    if (!out)
        throw std::runtime_error("failed while writing '" + path + "'");
}

inline Codebook load_codebook(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open codebook file '" + path + "'");
    std::string magic, version;
    in >> magic >> version;
    if (magic != "hetsim-codebook" || version != "v1")
        throw std::runtime_error("'" + path + "' is not a hetsim codebook file");
    Codebook cb;
    std::string key;
    int gaussian = 0;
    auto expect = [&](const char *want) {
        if (!(in >> key) || key != want)
            throw std::runtime_error(std::string("codebook file: expected '") + want + "'");
    };
    expect("T");
    in >> cb.T;
    expect("L");
    in >> cb.L;
    expect("E");
    in >> cb.E;
    expect("N");
    in >> cb.N;
    expect("Q");
    in >> cb.Q;
    expect("z");
    in >> cb.z;
    expect("kappa");
    in >> cb.kappa;
    expect("seed");
    in >> cb.seed;
    expect("gaussian");
    in >> gaussian;
    cb.gaussian = gaussian != 0;
    if (!in || cb.L == 0 || cb.T <= cb.L || cb.N == 0 || cb.Q == 0)
        throw std::runtime_error("codebook file: invalid header dimensions");
    expect("PSI");
    cb.Psi = detail::read_cx(in, cb.L, cb.E);
    expect("V");
    cb.V = detail::read_cx(in, cb.L, cb.N);
    expect("U");
    cb.U = detail::read_cx(in, cb.T - cb.L, cb.N * cb.Q);
    expect("S");
    cb.S = detail::read_cx(in, cb.T, cb.N * cb.Q);
    if (cb.z > 0) {
        expect("PI");
        cb.pi.set_size(cb.N, cb.z);
        for (arma::uword n = 0; n < cb.N; ++n)
            for (arma::uword l = 0; l < cb.z; ++l)
                if (!(in >> cb.pi(n, l)))
                    throw std::runtime_error("codebook file: truncated PI block");
        expect("THETA");
        cb.vartheta.set_size(cb.N, cb.z);
        for (arma::uword n = 0; n < cb.N; ++n)
            for (arma::uword l = 0; l < cb.z; ++l)
                if (!(in >> cb.vartheta(n, l)))
                    throw std::runtime_error("codebook file: truncated THETA block");
    }
    return cb;
}

} // namespace hetsim
