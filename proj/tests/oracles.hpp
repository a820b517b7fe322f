#pragma once

// Test-side reference implementations and frozen constants. Everything here
// is written independently of the solver headers (plain bisection, grid
// search, <random> Monte Carlo) so that a disagreement points at exactly one
// side.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "csun/types.hpp"

namespace oracle {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kLog2e = 1.4426950408889634;

// closed-form slack fixed point for K = M = 1 and l^2 p / sigma^2 = 3:
// w = 1 + 3 / (1 + 3 / w)  =>  w^2 - w - 3 = 0  =>  w = (1 + sqrt(13)) / 2
inline double quad_wstar() { return (1.0 + std::sqrt(13.0)) / 2.0; }

// exponential integral E_1(1); E[log2(1 + Exp(1))] = e * E_1(1) / ln 2
inline constexpr double kE1At1 = 0.21938393439552029;
inline double ergodic_unit_snr() { return std::exp(1.0) * kE1At1 * kLog2e; }

// free-space path loss at 1 km / 5.8 GHz, zero atmospheric term:
// 32.45 + 20 log10(5800) = 107.71855987125874 dB
inline constexpr double kFspl1km58GHz = 107.71855987125874;

// ground radius where a single 0.3 W transmitter at 5.8 GHz drops to -92 dBm:
// allowed loss = 10 log10(3e5) + 92 dB, then invert 20 log10(d_km)
inline double coverage_radius_m() {
    const double allowed_db = 10.0 * std::log10(0.3 / 1e-3) + 92.0;
    const double log10_d_km = (allowed_db - 32.45 - 20.0 * std::log10(5800.0)) / 20.0;
    return std::pow(10.0, log10_d_km) * 1000.0;
}

// ---------------------------------------------------------------------------
// water-filling with caps against a single shared budget row, solved by plain
// bisection on the row multiplier:
//   maximize   sum_j weight_j log2(1 + gain_j p_j)
//   subject to sum_j a_j p_j <= b,  0 <= p_j <= cap_j
// stationarity: p_j(nu) = clamp(weight_j / (ln2 nu a_j) - 1 / gain_j, 0, cap_j)

struct WaterfillResult {
    std::vector<double> p;
    double objective = 0.0;
};

inline WaterfillResult waterfill_budget(const std::vector<double>& weight,
                                        const std::vector<double>& gain,
                                        const std::vector<double>& a, double b,
                                        const std::vector<double>& cap) {
    const std::size_t n = weight.size();
    if (gain.size() != n || a.size() != n || cap.size() != n)
        throw std::invalid_argument("waterfill_budget: size mismatch");
    const double ln2 = std::log(2.0);

    auto point = [&](double nu) {
        std::vector<double> p(n);
        for (std::size_t j = 0; j < n; ++j) {
            double pj = cap[j];
            if (nu > 0.0 && a[j] > 0.0) pj = weight[j] / (ln2 * nu * a[j]) - 1.0 / gain[j];
            if (weight[j] <= 0.0) pj = 0.0;
            p[j] = std::clamp(pj, 0.0, cap[j]);
        }
        return p;
    };
    auto usage = [&](const std::vector<double>& p) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += a[j] * p[j];
        return s;
    };
    auto value = [&](const std::vector<double>& p) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += weight[j] * std::log2(1.0 + gain[j] * p[j]);
        return s;
    };

    std::vector<double> p = point(0.0);
    if (usage(p) > b) {
        double lo = 0.0, hi = 1.0;
        while (usage(point(hi)) > b) hi *= 2.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (usage(point(mid)) > b ? lo : hi) = mid;
        }
        p = point(hi);
        // feasibility guard against the last bisection sliver
        const double u = usage(p);
        if (u > b)
            for (double& pj : p) pj *= b / u;
    }
    return {p, value(p)};
}

// ---------------------------------------------------------------------------
// brute grid helpers for two-variable programs

// maximize f over [0, x1max] x [0, x2max]; f returns -inf when infeasible
template <class F>
inline std::array<double, 3> grid2_max(F&& f, double x1max, double x2max, int steps) {
    double best = -kInf, b1 = 0.0, b2 = 0.0;
    for (int i = 0; i <= steps; ++i)
        for (int j = 0; j <= steps; ++j) {
            const double x1 = x1max * i / steps, x2 = x2max * j / steps;
            const double v = f(x1, x2);
            if (v > best) {
                best = v;
                b1 = x1;
                b2 = x2;
            }
        }
    return {best, b1, b2};
}

// two-stage refinement around the coarse winner
template <class F>
inline std::array<double, 3> grid2_max_refined(F&& f, double x1max, double x2max, int coarse,
                                               int fine) {
    auto c = grid2_max(f, x1max, x2max, coarse);
    const double h1 = x1max / coarse, h2 = x2max / coarse;
    const double lo1 = std::max(0.0, c[1] - h1), hi1 = std::min(x1max, c[1] + h1);
    const double lo2 = std::max(0.0, c[2] - h2), hi2 = std::min(x2max, c[2] + h2);
    double best = c[0], b1 = c[1], b2 = c[2];
    for (int i = 0; i <= fine; ++i)
        for (int j = 0; j <= fine; ++j) {
            const double x1 = lo1 + (hi1 - lo1) * i / fine;
            const double x2 = lo2 + (hi2 - lo2) * j / fine;
            const double v = f(x1, x2);
            if (v > best) {
                best = v;
                b1 = x1;
                b2 = x2;
            }
        }
    return {best, b1, b2};
}

// ---------------------------------------------------------------------------
// independent Monte Carlo estimate of E[log2 det(I_M + S diag(l^2 p / s2) S^H)]
// with standard complex Gaussian S, using <random> and a hand determinant

inline double mc_rate_ref(std::span<const double> p, std::span<const double> l, int M,
                          double sigma2, int samples, unsigned seed) {
    const int K = static_cast<int>(p.size());
    std::vector<double> d(K);
    for (int k = 0; k < K; ++k) d[k] = l[k] * l[k] * p[k] / sigma2;

    std::mt19937_64 eng(seed);
    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
    std::vector<std::vector<std::complex<double>>> A(M,
                                                     std::vector<std::complex<double>>(M));
    std::vector<std::complex<double>> s(M);

    double acc = 0.0;
    for (int it = 0; it < samples; ++it) {
        for (int i = 0; i < M; ++i)
            for (int j = 0; j < M; ++j) A[i][j] = i == j ? 1.0 : 0.0;
        for (int k = 0; k < K; ++k) {
            for (int m = 0; m < M; ++m) s[m] = {gauss(eng), gauss(eng)};
            for (int i = 0; i < M; ++i)
                for (int j = 0; j < M; ++j) A[i][j] += d[k] * s[i] * std::conj(s[j]);
        }
        // LU determinant with partial pivoting; A is Hermitian positive definite
        double logdet = 0.0;
        auto lu = A;
        for (int c = 0; c < M; ++c) {
            int piv = c;
            for (int r = c + 1; r < M; ++r)
                if (std::abs(lu[r][c]) > std::abs(lu[piv][c])) piv = r;
            std::swap(lu[c], lu[piv]);
            logdet += std::log(std::abs(lu[c][c]));
            for (int r = c + 1; r < M; ++r) {
                const auto f = lu[r][c] / lu[c][c];
                for (int cc = c; cc < M; ++cc) lu[r][cc] -= f * lu[c][cc];
            }
        }
        acc += logdet * kLog2e;
    }
    return acc / samples;
}

// ---------------------------------------------------------------------------
// hand-built tiny scenarios

// gain magnitude producing rate target bits at w = 1, M = 1: l = sqrt((2^rate - 1) s2 / p)
inline double gain_for_rate(double rate_bits, double p, double sigma2) {
    return std::sqrt((std::pow(2.0, rate_bits) - 1.0) * sigma2 / p);
}

// All-explicit scenario: trivial geometry, uniform gains, no satellite
// occupancy. Callers overwrite gain_uav / gain_sat / sat_occupancy afterwards.
inline csun::Scenario tiny_scenario(int N, std::vector<int> users, int G, int K, int M,
                                    int Ns, double uav_gain = 1e-5, double sat_gain = 1e-8) {
    csun::Scenario sc;
    sc.num_slots = N;
    sc.users_per_slot = std::move(users);
    sc.num_subchannels = G;
    sc.num_uavs = K;
    sc.antennas_per_user = M;
    sc.num_sat_users = Ns;
    sc.noise_power = 1.9952623149688788e-14;
    sc.carrier_freq = 5.8e9;
    sc.rebuild_offsets();
    sc.gain_uav.assign(static_cast<std::size_t>(sc.total_users()) * G * K, uav_gain);
    sc.gain_sat.assign(static_cast<std::size_t>(N) * Ns * G * K, sat_gain);
    sc.sat_occupancy.assign(static_cast<std::size_t>(N) * Ns * G, 0);
    sc.geometry.uav_pos.assign(static_cast<std::size_t>(N) * K, {5000.0, 5000.0, 200.0});
    sc.geometry.uav_user_pos.assign(sc.total_users(), {5000.0, 5000.0, 0.0});
    sc.geometry.sat_user_pos.assign(Ns, {1000.0, 1000.0, 0.0});
    return sc;
}

inline csun::ConstraintSet loose_constraints(int K) {
    csun::ConstraintSet cs;
    cs.eps_p = 1.0;
    cs.e_com.assign(K, 1e3);
    cs.p_max = 0.3;
    cs.t_total = 100.0;
    cs.t_max = 7.5;
    return cs;
}

// exhaustive assignment search over (U_n + 1)^(N G) digit vectors, against
// externally supplied per-(n,u,g) values; row constraints ignored. Used to
// validate the library's own brute forcer on unconstrained instances.
struct TinyBruteResult {
    double best = 0.0;
    std::vector<std::uint8_t> x;
};

inline TinyBruteResult enumerate_assignments(const csun::Scenario& sc,
                                             const std::vector<double>& value, bool maxmin,
                                             bool require_coverage) {
    const int N = sc.num_slots, G = sc.num_subchannels;
    std::vector<int> digit(static_cast<std::size_t>(N) * G, -1);
    TinyBruteResult best;
    best.best = -kInf;
    std::vector<double> total(sc.total_users());
    for (;;) {
        std::fill(total.begin(), total.end(), 0.0);
        std::vector<int> count(sc.total_users(), 0);
        for (int c = 0; c < N * G; ++c) {
            const int n = c / G, g = c % G, u = digit[c];
            if (u < 0) continue;
            total[sc.user_id(n, u)] += value[sc.x_index(n, u, g)];
            ++count[sc.user_id(n, u)];
        }
        bool ok = true;
        if (require_coverage)
            for (int cn : count) ok = ok && cn > 0;
        if (ok) {
            double v;
            if (maxmin)
                v = *std::min_element(total.begin(), total.end());
            else {
                v = 0.0;
                for (double t : total) v += t;
            }
            if (v > best.best) {
                best.best = v;
                best.x.assign(sc.x_size(), 0);
                for (int c = 0; c < N * G; ++c)
                    if (digit[c] >= 0) best.x[sc.x_index(c / G, digit[c], c % G)] = 1;
            }
        }
        int pos = N * G - 1;
        while (pos >= 0) {
            if (++digit[pos] < sc.users_per_slot[pos / G]) break;
            digit[pos] = -1;
            --pos;
        }
        if (pos < 0) break;
    }
    return best;
}

}  // namespace oracle
