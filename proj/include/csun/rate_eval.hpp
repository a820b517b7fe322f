#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <sstream>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "csun/core_model.hpp"
#include "csun/rng.hpp"
#include "csun/types.hpp"

namespace csun {

struct FixedPointOpts {
    double tol = 1e-12;   // relative residual target (spec requires < 1e-6)
    int max_iters = 10000;
};

namespace detail {

inline double slack_map(double w, std::span<const double> p, std::span<const double> l, int M,
                        double sigma2) {
    double acc = 1.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double l2p = l[k] * l[k] * p[k];
        acc += l2p / (sigma2 + M * l2p / w);
    }
    return acc;
}

}  // namespace detail

inline double slack_residual(double w, std::span<const double> p, std::span<const double> l, int M,
                             double sigma2) {
    return std::abs(w - detail::slack_map(w, p, l, M, sigma2)) / w;
}

// Picard iteration on w = 1 + sum_k l^2 p / (sigma^2 + M l^2 p / w), started
// at w = 1. The map is increasing and bounded, so plain iteration climbs
// monotonically; a 0.5 damping step handles any residual growth.
inline double solve_slack_fixed_point(std::span<const double> p, std::span<const double> l, int M,
                                      double sigma2, const FixedPointOpts& opts = {}) {
    if (p.size() != l.size())
        throw std::invalid_argument("solve_slack_fixed_point: p/l size mismatch");
    for (double pk : p)
        if (pk < 0.0) throw std::domain_error("solve_slack_fixed_point: negative power");

    double w = 1.0;
    double res = slack_residual(w, p, l, M, sigma2);
    if (res == 0.0) return w;
    for (int it = 0; it < opts.max_iters; ++it) {
        const double next = detail::slack_map(w, p, l, M, sigma2);
        const double next_res = slack_residual(next, p, l, M, sigma2);
        w = next_res <= res ? next : 0.5 * (w + next);
        res = slack_residual(w, p, l, M, sigma2);
        if (res < opts.tol) return w;
    }
    std::ostringstream os;
    os << "solve_slack_fixed_point: no convergence after " << opts.max_iters
       << " iterations, last residual " << res;
    throw NumericalError(os.str(), res);
}

// fixed point for every (n,u,g) triple against the allocation's power tensor
inline SlackState solve_slack_all(const Allocation& alloc, const Scenario& sc,
                                  const FixedPointOpts& opts = {}) {
    SlackState s = unit_slack(sc);
    for (int n = 0; n < sc.num_slots; ++n)
        for (int u = 0; u < sc.users_per_slot[n]; ++u)
            for (int g = 0; g < sc.num_subchannels; ++g)
                s.w[sc.x_index(n, u, g)] =
                    solve_slack_fixed_point(column_power(sc, alloc, n, g), user_gains(sc, n, u, g),
                                            sc.antennas_per_user, sc.noise_power, opts);
    return s;
}

// Ergodic rate E[log2 det(I_M + (1/sigma^2) S diag(l^2 p) S^H)] over i.i.d.
// standard complex Gaussian S. Per-sample counter seeding keeps the result
// independent of evaluation order or batching.
inline double mc_ergodic_rate(std::span<const double> p, std::span<const double> l, int M,
                              double sigma2, int samples, std::uint64_t seed) {
    if (samples < 1) throw std::invalid_argument("mc_ergodic_rate: samples must be >= 1");
    if (p.size() != l.size()) throw std::invalid_argument("mc_ergodic_rate: p/l size mismatch");
    const int K = static_cast<int>(p.size());

    std::vector<double> d(K);
    bool all_zero = true;
    for (int k = 0; k < K; ++k) {
        d[k] = l[k] * l[k] * p[k] / sigma2;
        all_zero = all_zero && d[k] == 0.0;
    }
    if (all_zero) return 0.0;

    const double inv_ln2 = 1.4426950408889634;
    double acc = 0.0;
    if (M == 1) {
        for (int s = 0; s < samples; ++s) {
            Rng rng(mix_seed(seed, static_cast<std::uint64_t>(s)));
            double a = 1.0;
            for (int k = 0; k < K; ++k) {
                double re, im;
                rng.next_cgauss(re, im);
                a += d[k] * (re * re + im * im);
            }
            acc += std::log(a) * inv_ln2;
        }
        return acc / samples;
    }

    Eigen::MatrixXcd S(M, K), A(M, M);
    for (int s = 0; s < samples; ++s) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(s)));
        for (int k = 0; k < K; ++k)
            for (int m = 0; m < M; ++m) {
                double re, im;
                rng.next_cgauss(re, im);
                S(m, k) = std::complex<double>(re, im);
            }
        A.setIdentity();
        for (int k = 0; k < K; ++k)
            if (d[k] != 0.0) A.noalias() += d[k] * S.col(k) * S.col(k).adjoint();
        const Eigen::LLT<Eigen::MatrixXcd> llt(A);
        double logdet = 0.0;
        for (int m = 0; m < M; ++m) logdet += std::log(llt.matrixLLT()(m, m).real());
        acc += 2.0 * logdet * inv_ln2;
    }
    return acc / samples;
}

struct McObjectives {
    double d_e = 0.0;
    double d_min = 0.0;
    std::vector<double> per_user;  // indexed by global user id
};

inline McObjectives mc_objectives(const Allocation& alloc, const Scenario& sc, int samples,
                                  std::uint64_t seed) {
    McObjectives out;
    out.per_user.assign(sc.total_users(), 0.0);
    for (int n = 0; n < sc.num_slots; ++n)
        for (int u = 0; u < sc.users_per_slot[n]; ++u)
            for (int g = 0; g < sc.num_subchannels; ++g) {
                const auto xi = sc.x_index(n, u, g);
                if (!alloc.x[xi]) continue;
                const double r =
                    mc_ergodic_rate(column_power(sc, alloc, n, g), user_gains(sc, n, u, g),
                                    sc.antennas_per_user, sc.noise_power, samples,
                                    mix_seed(seed, static_cast<std::uint64_t>(xi) + 1));
                out.per_user[sc.user_id(n, u)] += alloc.t[n] * r;
            }
    for (double v : out.per_user) out.d_e += v;
    out.d_min = out.per_user.empty()
                    ? 0.0
                    : *std::min_element(out.per_user.begin(), out.per_user.end());
    return out;
}

}  // namespace csun
