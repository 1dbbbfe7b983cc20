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

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <vector>

namespace hetsim {

// One SplitMix64 step. Used to hash seed material into well-mixed 64-bit words.
inline std::uint64_t splitmix64_next(std::uint64_t &state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives an independent stream seed from a master seed and a list of integer labels
// (counter-based splitting). Trial t of sweep point p always receives the same stream,
// no matter how many worker threads run or in which order trials complete.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> labels) {
    std::uint64_t s = master ^ 0xd1b54a32d192ed03ULL;
    std::uint64_t out = splitmix64_next(s);
    for (std::uint64_t w : labels) {
        s ^= w * 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
        out ^= splitmix64_next(s);
    }
    return out;
}

// Deterministic pseudo-random stream. The engine (mt19937_64) and all conversions to
// doubles are fully specified, so identical seeds give identical draws on any platform.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    Rng(std::uint64_t master, std::initializer_list<std::uint64_t> labels)
        : engine_(derive_seed(master, labels)) {}

    std::uint64_t raw() { return engine_(); }

    // Uniform double in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform double in (0, 1]; never returns zero (used for combining weights).
    double uniform_pos() { return 1.0 - uniform(); }

    // Uniform integer in {0, 1, ..., n-1} via rejection (no modulo bias).
    std::uint64_t below(std::uint64_t n) {
        if (n == 0)
            throw std::invalid_argument("Rng::below requires n > 0");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal draw (Box-Muller; the second value of each pair is cached).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_pos();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Circularly-symmetric complex normal CN(0, 1): real/imag parts N(0, 1/2).
    std::complex<double> cnormal() {
        const double u1 = uniform_pos();
        const double u2 = uniform();
        const double r = std::sqrt(-std::log(u1)); // sqrt(-2 ln u)/sqrt(2)
        const double a = 6.283185307179586476925286766559 * u2;
        return {r * std::cos(a), r * std::sin(a)};
    }

    // k distinct indices drawn uniformly from {0..n-1}, returned in increasing order.
    std::vector<std::uint64_t> choose(std::uint64_t n, std::uint64_t k) {
        if (k > n)
            throw std::invalid_argument("Rng::choose requires k <= n");
        // Partial Fisher-Yates on an index array; result sorted so a subset is a set.
        std::vector<std::uint64_t> idx(n);
        for (std::uint64_t i = 0; i < n; ++i)
            idx[i] = i;
        for (std::uint64_t i = 0; i < k; ++i) {
            const std::uint64_t j = i + below(n - i);
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        std::sort(idx.begin(), idx.end());
        return idx;
    }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace hetsim
