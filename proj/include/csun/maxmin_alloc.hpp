#pragma once

#include <algorithm>
#include <cassert>
#include <sstream>
#include <vector>

#include "csun/sum_alloc.hpp"

namespace csun {

namespace detail {

// gain/rate matrix for the greedy passes: frozen rates, or channel strength
// when nothing transmits yet
inline std::vector<double> greedy_values(const BcdState& state, const Scenario& sc) {
    Allocation frozen{state.x, state.p, state.t};
    std::vector<double> value(sc.x_size(), 0.0);
    double vmax = 0.0;
    for (int n = 0; n < sc.num_slots; ++n)
        for (int u = 0; u < sc.users_per_slot[n]; ++u)
            for (int g = 0; g < sc.num_subchannels; ++g) {
                const double v = column_value(sc, frozen, state.w, n, u, g);
                value[sc.x_index(n, u, g)] = v;
                vmax = std::max(vmax, v);
            }
    if (vmax > 0.0) return value;
    for (int n = 0; n < sc.num_slots; ++n)
        for (int u = 0; u < sc.users_per_slot[n]; ++u)
            for (int g = 0; g < sc.num_subchannels; ++g) {
                double s = 0.0;
                for (int k = 0; k < sc.num_uavs; ++k) {
                    const double lv = sc.l(n, u, g, k);
                    s += lv * lv;
                }
                value[sc.x_index(n, u, g)] = s;
            }
    return value;
}

// coverage-first greedy assignment: worst-off users pick their single best
// free column first (lowest index on ties), leftover columns go to whichever
// user values them most
inline std::vector<std::uint8_t> coverage_init(const Scenario& sc,
                                               const std::vector<double>& value) {
    const int N = sc.num_slots, G = sc.num_subchannels;
    std::vector<std::uint8_t> x(sc.x_size(), 0);
    std::vector<double> total(sc.total_users(), 0.0);
    for (int n = 0; n < N; ++n) {
        const int Un = sc.users_per_slot[n];
        std::vector<char> taken(G, 0);
        std::vector<char> covered(Un, 0);
        for (int round = 0; round < Un; ++round) {
            int u_min = -1;
            for (int u = 0; u < Un; ++u) {
                if (covered[u]) continue;
                if (u_min < 0 || total[sc.user_id(n, u)] < total[sc.user_id(n, u_min)]) u_min = u;
            }
            int g_best = -1;
            for (int g = 0; g < G; ++g) {
                if (taken[g]) continue;
                if (g_best < 0 ||
                    value[sc.x_index(n, u_min, g)] > value[sc.x_index(n, u_min, g_best)])
                    g_best = g;
            }
            x[sc.x_index(n, u_min, g_best)] = 1;
            taken[g_best] = 1;
            covered[u_min] = 1;
            total[sc.user_id(n, u_min)] += value[sc.x_index(n, u_min, g_best)];
        }
        for (int g = 0; g < G; ++g) {
            if (taken[g]) continue;
            int u_best = 0;
            for (int u = 1; u < Un; ++u)
                if (value[sc.x_index(n, u, g)] > value[sc.x_index(n, u_best, g)]) u_best = u;
            x[sc.x_index(n, u_best, g)] = 1;
            total[sc.user_id(n, u_best)] += value[sc.x_index(n, u_best, g)];
        }
    }
    return x;
}

}  // namespace detail

// Greedy max-min subchannel allocation against frozen P, T, w. Coverage
// first: users pick their single best column worst-off-first, leftovers go
// to their best user. Then repeated transfers of the donor's cheapest column
// to the worst-off user, accepted only when the transfer does not invert
// their order, so the slot minimum never decreases.
inline std::vector<std::uint8_t> allocate_subchannels_maxmin(BcdState& state, const Scenario& sc) {
    const int N = sc.num_slots, G = sc.num_subchannels;
    for (int n = 0; n < N; ++n)
        if (sc.users_per_slot[n] > G)
            throw std::invalid_argument(
                "allocate_subchannels_maxmin: more users than subchannels in a slot (every user "
                "needs at least one subchannel)");

    const std::vector<double> value = detail::greedy_values(state, sc);
    std::vector<std::uint8_t> x = detail::coverage_init(sc, value);

    std::vector<double> total(sc.total_users(), 0.0);
    std::vector<int> count(sc.total_users(), 0);
    for (int n = 0; n < N; ++n)
        for (int u = 0; u < sc.users_per_slot[n]; ++u)
            for (int g = 0; g < G; ++g)
                if (x[sc.x_index(n, u, g)]) {
                    total[sc.user_id(n, u)] += value[sc.x_index(n, u, g)];
                    ++count[sc.user_id(n, u)];
                }

    auto global_min = [&]() { return *std::min_element(total.begin(), total.end()); };
    double tau_prev = global_min();
    for (int sweep = 0; sweep < N * G + 2; ++sweep) {
        bool moved = false;
        for (int n = 0; n < N; ++n) {
            const int Un = sc.users_per_slot[n];
            int u_star = 0, u_best = -1;
            for (int u = 1; u < Un; ++u)
                if (total[sc.user_id(n, u)] < total[sc.user_id(n, u_star)]) u_star = u;
            for (int u = 0; u < Un; ++u) {
                if (count[sc.user_id(n, u)] < 2 || u == u_star) continue;
                if (u_best < 0 || total[sc.user_id(n, u)] > total[sc.user_id(n, u_best)])
                    u_best = u;
            }
            if (u_best < 0) continue;
            int g_star = -1;
            for (int g = 0; g < G; ++g) {
                if (!x[sc.x_index(n, u_best, g)]) continue;
                if (g_star < 0 ||
                    value[sc.x_index(n, u_best, g)] < value[sc.x_index(n, u_best, g_star)])
                    g_star = g;
            }
            const double gain = value[sc.x_index(n, u_star, g_star)];
            const double loss = value[sc.x_index(n, u_best, g_star)];
            const int id_star = sc.user_id(n, u_star), id_best = sc.user_id(n, u_best);
            if (total[id_star] + gain <= total[id_best] - loss) {
                const double pair_min_before = std::min(total[id_star], total[id_best]);
                x[sc.x_index(n, u_best, g_star)] = 0;
                x[sc.x_index(n, u_star, g_star)] = 1;
                total[id_best] -= loss;
                total[id_star] += gain;
                --count[id_best];
                ++count[id_star];
                assert(std::min(total[id_star], total[id_best]) >= pair_min_before - 1e-12);
                (void)pair_min_before;
                moved = true;
            }
        }
        const double tau = global_min();
        if (!moved || detail::relative_change(tau_prev, tau) <= 1e-3) break;
        tau_prev = tau;
    }
    return x;
}

// Algorithm-5 power step: alternate the epigraph max-min solve at frozen v
// with the v fixed point. Scored by the true minimum (slack refit per
// iterate); best pair wins, starting from the incumbent powers.
struct MaxminPowerResult {
    std::vector<double> p;
    SlackState w;
    double tau = 0.0;
};

inline MaxminPowerResult allocate_power_maxmin(BcdState& state, const Scenario& sc,
                                               const ConstraintSet& cs) {
    const auto owners = detail::column_owners(sc, state.x);
    const auto pv = detail::build_power_rows(sc, cs, owners, state.t);
    const int nv = static_cast<int>(pv.ngk.size());
    const int R = sc.total_users();

    std::vector<char> served(R, 0);
    for (int j = 0; j < nv; ++j) served[pv.user[j]] = 1;
    for (int r = 0; r < R; ++r)
        if (!served[r])
            throw std::invalid_argument(
                "allocate_power_maxmin: a user has no subchannel (coverage precondition)");

    Allocation cur{state.x, std::vector<double>(sc.p_size(), 0.0), state.t};
    for (int j = 0; j < nv; ++j) {
        const auto [n, g, k] = pv.ngk[j];
        cur.p[sc.p_index(n, g, k)] = state.p[sc.p_index(n, g, k)];
    }
    SlackState best_w = solve_slack_all(cur, sc);
    std::vector<double> best_p = cur.p;
    double best_tau = objective_min(cur, best_w, sc);

    MinrowProgram prog;
    prog.rows = pv.rows;
    prog.rhs = pv.rhs;
    prog.num_minrows = R;
    prog.owner = pv.user;
    prog.weight.resize(nv);
    prog.gain.resize(nv);
    for (int j = 0; j < nv; ++j) prog.weight[j] = state.t[pv.ngk[j][0]];

    const double log2e = 1.4426950408889634;
    const int nr = static_cast<int>(pv.rows.size());
    const int K = sc.num_uavs, Ns = sc.num_sat_users;
    SlackState w_cur = unit_slack(sc);  // v^0 = 0
    MinrowOpts mopts;
    // warm multipliers from the previous outer iteration, remapped by row id
    if (static_cast<int>(state.duals.nu.size()) == sc.num_slots * Ns &&
        static_cast<int>(state.duals.xi.size()) == K &&
        static_cast<int>(state.duals.theta.size()) == sc.num_slots * K) {
        mopts.warm_multipliers.assign(nr, 0.0);
        for (int idx = 0; idx < pv.n_interference; ++idx)
            mopts.warm_multipliers[idx] = state.duals.nu[pv.irow_ni[idx]];
        for (int k = 0; k < K; ++k)
            mopts.warm_multipliers[pv.n_interference + k] = state.duals.xi[k];
        for (int nk = 0; nk < pv.n_power; ++nk)
            mopts.warm_multipliers[pv.n_interference + pv.n_energy + nk] = state.duals.theta[nk];
    }

    // the incumbent certifies a feasible tau under the current gains
    auto program_min_at = [&](const std::vector<double>& pfull) {
        std::vector<double> val = prog.minrow_constant;
        for (int j = 0; j < nv; ++j) {
            const auto [n, g, k] = pv.ngk[j];
            val[pv.user[j]] +=
                prog.weight[j] * std::log2(1.0 + prog.gain[j] * pfull[sc.p_index(n, g, k)]);
        }
        return *std::min_element(val.begin(), val.end());
    };

    mopts.tau_tol = 1e-4;  // the alternation stop rule only needs 1e-3
    std::ostringstream trace;
    std::vector<double> last_mult;
    double prev_tau = 0.0, prev_kernel_tau = 0.0, first_kernel_tau = 0.0, beta = 1.0;
    for (int it = 1; it <= state.config.max_power_iters; ++it) {
        prog.minrow_constant.assign(R, 0.0);
        for (int j = 0; j < nv; ++j) {
            const auto [n, g, k] = pv.ngk[j];
            const int u = owners[static_cast<std::size_t>(n) * sc.num_subchannels + g];
            const double wv = w_cur.w[sc.x_index(n, u, g)];
            const double lv = sc.l(n, u, g, k);
            prog.gain[j] = sc.antennas_per_user * lv * lv / (wv * sc.noise_power);
            if (k == 0)
                prog.minrow_constant[pv.user[j]] += state.t[n] * sc.antennas_per_user *
                                                    (std::log2(wv) - log2e * (1.0 - 1.0 / wv));
        }
        mopts.tau_floor = program_min_at(best_p) * (1.0 - 1e-9);
        // probe hints: across outer iterations the first alternation lands near
        // the previous first-alternation optimum (same v = 0 world); within the
        // loop, consecutive alternations barely move once v settles
        mopts.tau_hints.clear();
        if (it == 1) {
            if (state.duals.tau > 0.0) mopts.tau_hints.push_back(state.duals.tau * 1.001);
        } else {
            if (mopts.tau_floor > 0.0) mopts.tau_hints.push_back(mopts.tau_floor * 1.002);
            if (it >= 3 && prev_kernel_tau > 0.0)
                mopts.tau_hints.push_back(prev_kernel_tau * 1.001);
        }
        const auto sol = maximize_minrow_concave(prog, mopts);
        mopts.warm_multipliers = sol.multipliers;
        last_mult = sol.multipliers;
        prev_kernel_tau = sol.tau;
        if (it == 1) first_kernel_tau = sol.tau;

        detail::scatter_power(sc, pv, sol.p, cur.p);
        const SlackState w_ref = solve_slack_all(cur, sc);  // v-update at the new P
        const double tau = objective_min(cur, w_ref, sc);
        if (tau > best_tau) {
            best_tau = tau;
            best_p = cur.p;
            best_w = w_ref;
        }
        trace << (it > 1 ? "," : "") << tau;
        const double rel = detail::relative_change(prev_tau, tau);
        if (it > 1 && rel <= state.config.inner_tol) break;
        // same flip-flop guard as the sum-objective alternation
        if (it > 1 && tau < prev_tau) beta = std::max(0.5 * beta, 0.0625);
        if (beta == 1.0)
            w_cur = w_ref;
        else
            for (std::size_t idx = 0; idx < w_cur.w.size(); ++idx)
                w_cur.w[idx] += beta * (w_ref.w[idx] - w_cur.w[idx]);
        prev_tau = tau;
        if (it == state.config.max_power_iters)
            throw NumericalError("allocate_power_maxmin: no convergence", rel, trace.str());
    }

    if (first_kernel_tau > 0.0) state.duals.tau = first_kernel_tau;
    if (!last_mult.empty()) {
        state.duals.nu.assign(static_cast<std::size_t>(sc.num_slots) * Ns, 0.0);
        state.duals.xi.assign(K, 0.0);
        state.duals.theta.assign(static_cast<std::size_t>(sc.num_slots) * K, 0.0);
        for (int idx = 0; idx < pv.n_interference; ++idx)
            state.duals.nu[pv.irow_ni[idx]] = last_mult[idx];
        for (int k = 0; k < K; ++k) state.duals.xi[k] = last_mult[pv.n_interference + k];
        for (int nk = 0; nk < pv.n_power; ++nk)
            state.duals.theta[nk] = last_mult[pv.n_interference + pv.n_energy + nk];
    }
    return {best_p, best_w, best_tau};
}

// epigraph LP: maximize tau subject to c_{n,u} T_n >= tau, energy rows, the
// total-time budget and the per-slot box
inline std::vector<double> schedule_time_maxmin(const BcdState& state, const Scenario& sc,
                                                const ConstraintSet& cs) {
    const int N = sc.num_slots, K = sc.num_uavs, G = sc.num_subchannels;
    Allocation a{state.x, state.p, state.t};
    LinearProgram lp;
    lp.objective.assign(N + 1, 0.0);
    lp.objective[N] = 1.0;  // tau
    for (int n = 0; n < N; ++n)
        for (int u = 0; u < sc.users_per_slot[n]; ++u) {
            double c = 0.0;
            for (int g = 0; g < G; ++g)
                if (state.x[sc.x_index(n, u, g)])
                    c += approx_rate(column_power(sc, a, n, g), state.w.w[sc.x_index(n, u, g)],
                                     user_gains(sc, n, u, g), sc.antennas_per_user,
                                     sc.noise_power);
            std::vector<double> row(N + 1, 0.0);
            row[n] = -c;
            row[N] = 1.0;
            lp.rows.push_back(std::move(row));
            lp.rhs.push_back(0.0);
        }
    for (int k = 0; k < K; ++k) {
        std::vector<double> row(N + 1, 0.0);
        for (int n = 0; n < N; ++n)
            for (int g = 0; g < G; ++g) {
                bool assigned = false;
                for (int u = 0; u < sc.users_per_slot[n]; ++u)
                    assigned = assigned || state.x[sc.x_index(n, u, g)];
                if (assigned) row[n] += state.p[sc.p_index(n, g, k)];
            }
        lp.rows.push_back(std::move(row));
        lp.rhs.push_back(cs.e_com[k]);
    }
    {
        std::vector<double> row(N + 1, 1.0);
        row[N] = 0.0;
        lp.rows.push_back(std::move(row));
        lp.rhs.push_back(cs.t_total);
    }
    lp.lower.assign(N + 1, 0.0);
    lp.upper.assign(N + 1, cs.t_max);
    lp.upper[N] = kInf;
    const auto sol = solve_lp(lp);
    if (sol.status != LpStatus::optimal)
        throw NumericalError("schedule_time_maxmin: LP not optimal (T = 0 is always feasible)",
                             0.0);
    return {sol.x.begin(), sol.x.begin() + N};
}

// Algorithm 6: the max-min block-coordinate loop, same shell and guards as
// joint_sum with the minimum per-user efficiency as the objective.
inline JointResult joint_maxmin(const Scenario& sc, const ConstraintSet& cs,
                                const SolverConfig& config = {}) {
    validate_scenario(sc);
    validate_constraints(cs, sc);
    BcdState st = make_bcd_state(sc, cs, config);
    JointResult out;

    auto violation = [&]() {
        return check_feasibility({st.x, st.p, st.t}, sc, cs).worst_relative;
    };
    auto push = [&](const char* phase, double obj) {
        out.trace.push_back({st.r, phase, obj, violation()});
        st.objective_trace.push_back(obj);
    };

    double tau_prev = 0.0;
    for (st.r = 1; st.r <= config.max_outer; ++st.r) {
        auto x_new = allocate_subchannels_maxmin(st, sc);
        const double t_keep = objective_min({st.x, st.p, st.t}, st.w, sc);
        const double t_new = objective_min({x_new, st.p, st.t}, st.w, sc);
        if (t_new >= t_keep) st.x = std::move(x_new);
        push("subchannel", std::max(t_new, t_keep));

        auto pw = allocate_power_maxmin(st, sc, cs);
        st.p = std::move(pw.p);
        st.w = std::move(pw.w);
        push("power", pw.tau);

        st.t = schedule_time_maxmin(st, sc, cs);
        const double tau_cur = objective_min({st.x, st.p, st.t}, st.w, sc);
        push("time", tau_cur);

        if (st.r > 1 && detail::relative_change(tau_prev, tau_cur) <= config.outer_tol) {
            out.converged = true;
            tau_prev = tau_cur;
            break;
        }
        tau_prev = tau_cur;
    }
    out.outer_iters = std::min(st.r, config.max_outer);
    out.alloc = {st.x, st.p, st.t};
    out.slack = st.w;
    out.objective = tau_prev;
    return out;
}

}  // namespace csun
