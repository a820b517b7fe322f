#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>

#include "csun/types.hpp"

namespace csun {

// Closed-form approximate per-subchannel spectral efficiency (bits/s/Hz):
//   sum_k log2(1 + M l_k^2 p_k / (w sigma^2)) + M [log2 w - log2e (1 - 1/w)]
// Exact at the slack fixed point w*.
inline double approx_rate(std::span<const double> p, double w, std::span<const double> l, int M,
                          double sigma2) {
    if (w < 1.0) throw std::domain_error("approx_rate: w must be >= 1");
    if (p.size() != l.size()) throw std::invalid_argument("approx_rate: p/l size mismatch");
    double rate = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (p[k] < 0.0) throw std::domain_error("approx_rate: negative power");
        rate += std::log2(1.0 + M * l[k] * l[k] * p[k] / (w * sigma2));
    }
    const double log2e = 1.4426950408889634;
    rate += M * (std::log2(w) - log2e * (1.0 - 1.0 / w));
    return rate;
}

// same quantity parameterized by v = ln w >= 0
inline double approx_rate_v(std::span<const double> p, double v, std::span<const double> l, int M,
                            double sigma2) {
    if (v < 0.0) throw std::domain_error("approx_rate_v: v must be >= 0");
    return approx_rate(p, std::exp(v), l, M, sigma2);
}

// aggregate leakage power at satellite user i during slot n (watts)
inline double leakage_interference(const Allocation& alloc, const Scenario& sc, int n, int i) {
    if (n < 0 || n >= sc.num_slots || i < 0 || i >= sc.num_sat_users)
        throw std::invalid_argument("leakage_interference: index out of range");
    double acc = 0.0;
    for (int g = 0; g < sc.num_subchannels; ++g) {
        if (!sc.y(n, i, g)) continue;
        bool used = false;
        for (int u = 0; u < sc.users_per_slot[n] && !used; ++u)
            used = alloc.x[sc.x_index(n, u, g)] != 0;
        if (!used) continue;
        for (int k = 0; k < sc.num_uavs; ++k) {
            const double lt = sc.l_sat(n, i, g, k);
            acc += lt * lt * alloc.p[sc.p_index(n, g, k)];
        }
    }
    return acc;
}

// All constraint families against the raw allocation. Interference is gated
// by x and y; energy/power/time act on P and T directly; exclusivity and
// binary/sign checked exactly.
inline FeasibilityReport check_feasibility(const Allocation& alloc, const Scenario& sc,
                                           const ConstraintSet& cs, double tol = 1e-9) {
    if (alloc.x.size() != sc.x_size() || alloc.p.size() != sc.p_size() ||
        alloc.t.size() != static_cast<std::size_t>(sc.num_slots))
        throw std::invalid_argument("check_feasibility: allocation shape mismatch");

    FeasibilityReport rep;
    rep.tolerance = tol;

    double worst_rel = 0.0;
    auto track = [&worst_rel](double excess, double limit, double& family) {
        if (excess > family) family = excess;
        const double rel = excess / std::max(limit, 1e-300);
        if (rel > worst_rel) worst_rel = rel;
    };

    for (int n = 0; n < sc.num_slots; ++n)
        for (int i = 0; i < sc.num_sat_users; ++i)
            track(leakage_interference(alloc, sc, n, i) - cs.eps_p, cs.eps_p,
                  rep.interference_violation);

    for (int k = 0; k < sc.num_uavs; ++k) {
        double energy = 0.0;
        for (int n = 0; n < sc.num_slots; ++n) {
            double slot_power = 0.0;
            for (int g = 0; g < sc.num_subchannels; ++g)
                slot_power += alloc.p[sc.p_index(n, g, k)];
            energy += slot_power * alloc.t[n];
            track(slot_power - cs.p_max, cs.p_max, rep.power_violation);
        }
        track(energy - cs.e_com[k], cs.e_com[k], rep.energy_violation);
    }

    double t_sum = 0.0;
    for (int n = 0; n < sc.num_slots; ++n) {
        t_sum += alloc.t[n];
        track(alloc.t[n] - cs.t_max, cs.t_max, rep.time_violation);
        track(-alloc.t[n], cs.t_max, rep.time_violation);
    }
    track(t_sum - cs.t_total, cs.t_total, rep.time_violation);

    // exact checks: exclusivity per (n,g), binary x, sign of p
    for (int n = 0; n < sc.num_slots; ++n)
        for (int g = 0; g < sc.num_subchannels; ++g) {
            int owners = 0;
            for (int u = 0; u < sc.users_per_slot[n]; ++u) {
                const auto xv = alloc.x[sc.x_index(n, u, g)];
                if (xv != 0 && xv != 1) rep.assignment_violation = std::max(rep.assignment_violation, 1.0);
                owners += xv != 0;
            }
            if (owners > 1)
                rep.assignment_violation = std::max(rep.assignment_violation, double(owners - 1));
        }
    for (double pv : alloc.p)
        if (pv < 0.0) rep.assignment_violation = std::max(rep.assignment_violation, -pv);

    rep.worst_relative = std::max(worst_rel, rep.assignment_violation > 0.0 ? 1.0 : 0.0);
    rep.feasible = worst_rel <= tol && rep.assignment_violation == 0.0;
    return rep;
}

// per-(n,g) gain vector for user u, as a span into gain_uav
inline std::span<const double> user_gains(const Scenario& sc, int n, int u, int g) {
    return {sc.gain_uav.data() + sc.l_index(n, u, g, 0), static_cast<std::size_t>(sc.num_uavs)};
}

inline std::span<const double> column_power(const Scenario& sc, const Allocation& alloc, int n,
                                            int g) {
    return {alloc.p.data() + sc.p_index(n, g, 0), static_cast<std::size_t>(sc.num_uavs)};
}

// per-user efficiency totals sum_g x T_n R_a, indexed by global user id
inline std::vector<double> per_user_totals(const Allocation& alloc, const SlackState& slack,
                                           const Scenario& sc) {
    std::vector<double> totals(sc.total_users(), 0.0);
    for (int n = 0; n < sc.num_slots; ++n)
        for (int u = 0; u < sc.users_per_slot[n]; ++u) {
            double acc = 0.0;
            for (int g = 0; g < sc.num_subchannels; ++g) {
                const auto xi = sc.x_index(n, u, g);
                if (!alloc.x[xi]) continue;
                acc += alloc.t[n] * approx_rate(column_power(sc, alloc, n, g), slack.w[xi],
                                                user_gains(sc, n, u, g), sc.antennas_per_user,
                                                sc.noise_power);
            }
            totals[sc.user_id(n, u)] = acc;
        }
    return totals;
}

inline double objective_sum(const Allocation& alloc, const SlackState& slack, const Scenario& sc) {
    const auto totals = per_user_totals(alloc, slack, sc);
    return std::accumulate(totals.begin(), totals.end(), 0.0);
}

inline double objective_min(const Allocation& alloc, const SlackState& slack, const Scenario& sc) {
    const auto totals = per_user_totals(alloc, slack, sc);
    return totals.empty() ? 0.0 : *std::min_element(totals.begin(), totals.end());
}

}  // namespace csun
