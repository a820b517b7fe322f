#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "csun/core_model.hpp"
#include "csun/opt_kernels.hpp"
#include "csun/rate_eval.hpp"
#include "csun/types.hpp"

namespace csun {

struct SolverConfig {
    double outer_tol = 1e-2;  // relative objective change across outer iterations
    double inner_tol = 1e-3;  // relative change inside the power alternation
    double step1 = 0.0;       // subgradient step scale, interference rows (0 = auto)
    double step2 = 0.0;       // energy rows
    double step3 = 0.0;       // power rows
    int max_outer = 30;
    int max_subchannel_iters = 500;
    int max_power_iters = 200;
    int mc_samples = 10000;  // used by harness consumers, carried here for convenience
};

struct TraceRow {
    int outer_iter = 0;
    std::string phase;  // "subchannel" | "power" | "time"
    double objective = 0.0;
    double worst_violation = 0.0;
};

struct BcdState {
    int r = 0;
    std::vector<std::uint8_t> x;
    std::vector<double> p;
    std::vector<double> t;
    SlackState w;
    std::vector<double> objective_trace;
    SolverConfig config;
    DualState duals;
    bool subchannel_converged = true;
};

inline BcdState make_bcd_state(const Scenario& sc, const ConstraintSet& cs,
                               const SolverConfig& config = {}) {
    BcdState st;
    st.config = config;
    st.x.assign(sc.x_size(), 0);
    st.p.assign(sc.p_size(), 0.0);
    st.t.assign(sc.num_slots, std::min(cs.t_total / sc.num_slots, cs.t_max));
    st.w = unit_slack(sc);
    return st;
}

namespace detail {

// owner user index per (n,g) column, -1 when unassigned
inline std::vector<int> column_owners(const Scenario& sc, const std::vector<std::uint8_t>& x) {
    std::vector<int> owner(static_cast<std::size_t>(sc.num_slots) * sc.num_subchannels, -1);
    for (int n = 0; n < sc.num_slots; ++n)
        for (int u = 0; u < sc.users_per_slot[n]; ++u)
            for (int g = 0; g < sc.num_subchannels; ++g)
                if (x[sc.x_index(n, u, g)])
                    owner[static_cast<std::size_t>(n) * sc.num_subchannels + g] = u;
    return owner;
}

struct PowerVars {
    std::vector<std::array<int, 3>> ngk;  // variable -> (n, g, k)
    std::vector<int> user;                // variable -> global user id
    std::vector<std::vector<double>> rows;
    std::vector<double> rhs;
    std::vector<int> irow_ni;  // interference row -> flat n * Ns + i
    int n_interference = 0, n_energy = 0, n_power = 0;
};

// shared row block for the power subproblems: interference rows (n,i), energy
// rows per UAV k, per-slot power rows (n,k); variables are the (n,g,k)
// entries of assigned columns only
inline PowerVars build_power_rows(const Scenario& sc, const ConstraintSet& cs,
                                  const std::vector<int>& owners, const std::vector<double>& t) {
    PowerVars pv;
    const int G = sc.num_subchannels, K = sc.num_uavs;
    std::vector<int> var_at(sc.p_size(), -1);
    for (int n = 0; n < sc.num_slots; ++n)
        for (int g = 0; g < G; ++g) {
            const int u = owners[static_cast<std::size_t>(n) * G + g];
            if (u < 0) continue;
            for (int k = 0; k < K; ++k) {
                var_at[sc.p_index(n, g, k)] = static_cast<int>(pv.ngk.size());
                pv.ngk.push_back({n, g, k});
                pv.user.push_back(sc.user_id(n, u));
            }
        }
    const int nv = static_cast<int>(pv.ngk.size());
    for (int n = 0; n < sc.num_slots; ++n)
        for (int i = 0; i < sc.num_sat_users; ++i) {
            std::vector<double> row(nv, 0.0);
            bool any = false;
            for (int g = 0; g < G; ++g) {
                if (!sc.y(n, i, g)) continue;
                for (int k = 0; k < K; ++k) {
                    const int j = var_at[sc.p_index(n, g, k)];
                    if (j < 0) continue;
                    const double ls = sc.l_sat(n, i, g, k);
                    row[j] = ls * ls;
                    any = any || row[j] > 0.0;
                }
            }
            if (!any) continue;  // vacuous row, skip
            pv.rows.push_back(std::move(row));
            pv.rhs.push_back(cs.eps_p);
            pv.irow_ni.push_back(n * sc.num_sat_users + i);
            ++pv.n_interference;
        }
    for (int k = 0; k < K; ++k) {
        std::vector<double> row(nv, 0.0);
        for (int j = 0; j < nv; ++j)
            if (pv.ngk[j][2] == k) row[j] = t[pv.ngk[j][0]];
        pv.rows.push_back(std::move(row));
        pv.rhs.push_back(cs.e_com[k]);
        ++pv.n_energy;
    }
    for (int n = 0; n < sc.num_slots; ++n)
        for (int k = 0; k < K; ++k) {
            std::vector<double> row(nv, 0.0);
            for (int j = 0; j < nv; ++j)
                if (pv.ngk[j][0] == n && pv.ngk[j][2] == k) row[j] = 1.0;
            pv.rows.push_back(std::move(row));
            pv.rhs.push_back(cs.p_max);
            ++pv.n_power;
        }
    return pv;
}

inline void scatter_power(const Scenario& sc, const PowerVars& pv,
                          const std::vector<double>& compact, std::vector<double>& full) {
    full.assign(sc.p_size(), 0.0);
    for (std::size_t j = 0; j < pv.ngk.size(); ++j)
        full[sc.p_index(pv.ngk[j][0], pv.ngk[j][1], pv.ngk[j][2])] = compact[j];
}

// T_n * R_a for one user on one column at the given slack
inline double column_value(const Scenario& sc, const Allocation& a, const SlackState& w, int n,
                           int u, int g) {
    return a.t[n] * approx_rate(column_power(sc, a, n, g), w.w[sc.x_index(n, u, g)],
                                user_gains(sc, n, u, g), sc.antennas_per_user, sc.noise_power);
}

inline double relative_change(double prev, double cur) {
    const double scale = std::max(std::abs(cur), 1e-300);
    return std::abs(cur - prev) / scale;
}

}  // namespace detail

// Algorithm 1: dual-subgradient subchannel pricing against frozen P, T, w.
// Iterates price -> argmax assignment -> projected multiplier step with
// diminishing step delta/t; stops on the first repeated assignment and
// returns the best feasible assignment seen. Multipliers are kept normalized
// by their row limits (stored in state.duals).
inline std::vector<std::uint8_t> allocate_subchannels_sum(BcdState& state, const Scenario& sc,
                                                          const ConstraintSet& cs) {
    const int N = sc.num_slots, G = sc.num_subchannels, K = sc.num_uavs;
    const int Ns = sc.num_sat_users;
    state.subchannel_converged = true;

    Allocation frozen{state.x, state.p, state.t};

    // cold start: nothing transmitted yet, so prices carry no signal; assign
    // every column to its best-gain user so the power phase has full support
    if (std::all_of(state.p.begin(), state.p.end(), [](double v) { return v == 0.0; })) {
        std::vector<std::uint8_t> x(sc.x_size(), 0);
        for (int n = 0; n < N; ++n)
            for (int g = 0; g < G; ++g) {
                int best_u = 0;
                double best = -1.0;
                for (int u = 0; u < sc.users_per_slot[n]; ++u) {
                    double s = 0.0;
                    for (int k = 0; k < K; ++k) {
                        const double lv = sc.l(n, u, g, k);
                        s += lv * lv;
                    }
                    if (s > best) {
                        best = s;
                        best_u = u;
                    }
                }
                x[sc.x_index(n, best_u, g)] = 1;
            }
        state.duals = DualState{};
        return x;
    }

    // frozen per-column rates T_n R_a(P_{n,g}, w_{n,u,g})
    std::vector<double> rate(sc.x_size(), 0.0);
    double rate_scale = 0.0;
    for (int n = 0; n < N; ++n)
        for (int u = 0; u < sc.users_per_slot[n]; ++u)
            for (int g = 0; g < G; ++g) {
                const double r = detail::column_value(sc, frozen, state.w, n, u, g);
                rate[sc.x_index(n, u, g)] = r;
                rate_scale = std::max(rate_scale, r);
            }

    // column contributions to each normalized row
    std::vector<double> icol(static_cast<std::size_t>(N) * Ns * G, 0.0);
    for (int n = 0; n < N; ++n)
        for (int i = 0; i < Ns; ++i)
            for (int g = 0; g < G; ++g) {
                if (!sc.y(n, i, g)) continue;
                double s = 0.0;
                for (int k = 0; k < K; ++k) {
                    const double ls = sc.l_sat(n, i, g, k);
                    s += ls * ls * state.p[sc.p_index(n, g, k)];
                }
                icol[sc.y_index(n, i, g)] = s / cs.eps_p;
            }
    auto ecol = [&](int n, int g, int k) {
        return state.t[n] * state.p[sc.p_index(n, g, k)] / cs.e_com[k];
    };
    auto pcol = [&](int n, int g, int k) { return state.p[sc.p_index(n, g, k)] / cs.p_max; };

    const double d1 = state.config.step1 > 0.0 ? state.config.step1 : std::max(rate_scale, 1.0);
    const double d2 = state.config.step2 > 0.0 ? state.config.step2 : d1;
    const double d3 = state.config.step3 > 0.0 ? state.config.step3 : d1;

    std::vector<std::vector<double>> lam(N, std::vector<double>(Ns, 0.0));
    std::vector<double> mu(K, 0.0);
    std::vector<std::vector<double>> gam(N, std::vector<double>(K, 0.0));

    std::set<std::vector<std::uint8_t>> seen;
    std::vector<std::uint8_t> best_x;
    double best_obj = -1.0;
    std::vector<std::uint8_t> x(sc.x_size(), 0);

    for (int t = 1; t <= state.config.max_subchannel_iters; ++t) {
        // price each column and assign to the argmax user where positive
        std::fill(x.begin(), x.end(), 0);
        for (int n = 0; n < N; ++n)
            for (int g = 0; g < G; ++g) {
                double pen = 0.0;
                for (int i = 0; i < Ns; ++i) pen += lam[n][i] * icol[sc.y_index(n, i, g)];
                for (int k = 0; k < K; ++k)
                    pen += mu[k] * ecol(n, g, k) + gam[n][k] * pcol(n, g, k);
                int best_u = -1;
                double best_v = 0.0;
                for (int u = 0; u < sc.users_per_slot[n]; ++u) {
                    const double v = rate[sc.x_index(n, u, g)] - pen;
                    if (v > best_v) {
                        best_v = v;
                        best_u = u;
                    }
                }
                if (best_u >= 0) x[sc.x_index(n, best_u, g)] = 1;
            }

        // candidate usage and objective under the gated rows
        double obj = 0.0, worst = 0.0;
        std::vector<double> eu(K, 0.0);
        for (int n = 0; n < N; ++n) {
            std::vector<double> pu(K, 0.0);
            std::vector<double> iu(Ns, 0.0);
            for (int g = 0; g < G; ++g) {
                int owner = -1;
                for (int u = 0; u < sc.users_per_slot[n]; ++u)
                    if (x[sc.x_index(n, u, g)]) owner = u;
                if (owner < 0) continue;
                obj += rate[sc.x_index(n, owner, g)];
                for (int i = 0; i < Ns; ++i) iu[i] += icol[sc.y_index(n, i, g)];
                for (int k = 0; k < K; ++k) {
                    eu[k] += ecol(n, g, k);
                    pu[k] += pcol(n, g, k);
                }
            }
            for (int i = 0; i < Ns; ++i) {
                worst = std::max(worst, iu[i] - 1.0);
                lam[n][i] = std::max(0.0, lam[n][i] + d1 / t * (iu[i] - 1.0));
            }
            for (int k = 0; k < K; ++k) {
                worst = std::max(worst, pu[k] - 1.0);
                gam[n][k] = std::max(0.0, gam[n][k] + d3 / t * (pu[k] - 1.0));
            }
        }
        for (int k = 0; k < K; ++k) {
            worst = std::max(worst, eu[k] - 1.0);
            mu[k] = std::max(0.0, mu[k] + d2 / t * (eu[k] - 1.0));
        }
        if (worst <= 1e-9 && obj > best_obj) {
            best_obj = obj;
            best_x = x;
        }
        if (!seen.insert(x).second) break;  // assignment repeated: cycle reached
        if (t == state.config.max_subchannel_iters) state.subchannel_converged = false;
    }

    state.duals = DualState{};
    state.duals.lambda = lam;
    state.duals.mu = mu;
    state.duals.gamma = gam;
    state.duals.zeta.assign(N, std::vector<double>(G, 0.0));
    state.duals.delta1 = d1;
    state.duals.delta2 = d2;
    state.duals.delta3 = d3;

    if (best_obj >= 0.0) return best_x;
    return x;  // nothing feasible seen (frozen blocks themselves violate rows)
}

// Algorithm 2: alternate the frozen-w concave power solve with the slack
// fixed point until the objective settles. Every iterate is scored by the
// true objective (slack refit at its own powers) and the best pair is
// returned, which also covers the previous outer block's powers.
inline std::pair<std::vector<double>, SlackState> allocate_power_sum(BcdState& state,
                                                                     const Scenario& sc,
                                                                     const ConstraintSet& cs) {
    const auto owners = detail::column_owners(sc, state.x);
    const auto pv = detail::build_power_rows(sc, cs, owners, state.t);
    const int nv = static_cast<int>(pv.ngk.size());

    Allocation cur{state.x, std::vector<double>(sc.p_size(), 0.0), state.t};
    if (nv == 0) return {cur.p, unit_slack(sc)};

    // previous outer block as the incumbent (unassigned columns zeroed)
    for (int j = 0; j < nv; ++j) {
        const auto [n, g, k] = pv.ngk[j];
        cur.p[sc.p_index(n, g, k)] = state.p[sc.p_index(n, g, k)];
    }
    SlackState best_w = solve_slack_all(cur, sc);
    std::vector<double> best_p = cur.p;
    double best_obj = objective_sum(cur, best_w, sc);

    SeparableConcaveProgram prog;
    prog.rows = pv.rows;
    prog.rhs = pv.rhs;
    prog.weight.resize(nv);
    prog.gain.resize(nv);
    for (int j = 0; j < nv; ++j) prog.weight[j] = state.t[pv.ngk[j][0]];

    SlackState w_cur = unit_slack(sc);  // w^0 = 1 per the listing
    ConcaveOpts copts;
    std::ostringstream trace;
    double prev_obj = 0.0, beta = 1.0;
    for (int it = 1; it <= state.config.max_power_iters; ++it) {
        for (int j = 0; j < nv; ++j) {
            const auto [n, g, k] = pv.ngk[j];
            const int u = owners[static_cast<std::size_t>(n) * sc.num_subchannels + g];
            const double lv = sc.l(n, u, g, k);
            prog.gain[j] = sc.antennas_per_user * lv * lv /
                           (w_cur.w[sc.x_index(n, u, g)] * sc.noise_power);
        }
        const auto sol = maximize_separable_concave(prog, copts);
        copts.warm_multipliers = sol.multipliers;

        detail::scatter_power(sc, pv, sol.p, cur.p);
        const SlackState w_ref = solve_slack_all(cur, sc);
        const double obj = objective_sum(cur, w_ref, sc);
        if (obj > best_obj) {
            best_obj = obj;
            best_p = cur.p;
            best_w = w_ref;
        }
        trace << (it > 1 ? "," : "") << obj;
        const double rel = detail::relative_change(prev_obj, obj);
        if (it > 1 && rel <= state.config.inner_tol) break;
        // the alternation can flip-flop between two accumulation points;
        // damp the slack fed to the next subproblem once that shows up
        if (it > 1 && obj < prev_obj) beta = std::max(0.5 * beta, 0.0625);
        if (beta == 1.0)
            w_cur = w_ref;
        else
            for (std::size_t idx = 0; idx < w_cur.w.size(); ++idx)
                w_cur.w[idx] += beta * (w_ref.w[idx] - w_cur.w[idx]);
        prev_obj = obj;
        if (it == state.config.max_power_iters)
            throw NumericalError("allocate_power_sum: no convergence", rel, trace.str());
    }
    return {best_p, best_w};
}

// hovering-time LP: maximize sum_n c_n T_n under energy rows, the total-time
// budget and the per-slot box
inline std::vector<double> schedule_time_sum(const BcdState& state, const Scenario& sc,
                                             const ConstraintSet& cs) {
    const int N = sc.num_slots, K = sc.num_uavs, G = sc.num_subchannels;
    Allocation a{state.x, state.p, state.t};
    LinearProgram lp;
    lp.objective.assign(N, 0.0);
    for (int n = 0; n < N; ++n)
        for (int u = 0; u < sc.users_per_slot[n]; ++u)
            for (int g = 0; g < G; ++g)
                if (state.x[sc.x_index(n, u, g)])
                    lp.objective[n] +=
                        approx_rate(column_power(sc, a, n, g), state.w.w[sc.x_index(n, u, g)],
                                    user_gains(sc, n, u, g), sc.antennas_per_user, sc.noise_power);
    for (int k = 0; k < K; ++k) {
        std::vector<double> row(N, 0.0);
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
    lp.rows.emplace_back(N, 1.0);
    lp.rhs.push_back(cs.t_total);
    lp.lower.assign(N, 0.0);
    lp.upper.assign(N, cs.t_max);
    const auto sol = solve_lp(lp);
    if (sol.status != LpStatus::optimal)
        throw NumericalError("schedule_time_sum: LP not optimal (T = 0 is always feasible)", 0.0);
    return sol.x;
}

struct JointResult {
    Allocation alloc;
    SlackState slack;
    std::vector<TraceRow> trace;
    int outer_iters = 0;
    double objective = 0.0;
    bool converged = false;
};

// Algorithm 3: subchannel -> power -> time block-coordinate descent. Each
// phase is guarded so the reported objective never decreases: the subchannel
// candidate is only adopted when it scores at least as well as the incumbent
// assignment, the power solver returns its best iterate, and the time LP is
// exact with the previous T feasible.
inline JointResult joint_sum(const Scenario& sc, const ConstraintSet& cs,
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

    double d_prev = 0.0;
    for (st.r = 1; st.r <= config.max_outer; ++st.r) {
        auto x_new = allocate_subchannels_sum(st, sc, cs);
        const SlackState w_now = st.w;  // slack depends on P only, not on x
        const double d_keep = objective_sum({st.x, st.p, st.t}, w_now, sc);
        const double d_new = objective_sum({x_new, st.p, st.t}, w_now, sc);
        if (d_new >= d_keep) st.x = std::move(x_new);
        push("subchannel", std::max(d_new, d_keep));

        auto [p_new, w_new] = allocate_power_sum(st, sc, cs);
        st.p = std::move(p_new);
        st.w = std::move(w_new);
        push("power", objective_sum({st.x, st.p, st.t}, st.w, sc));

        st.t = schedule_time_sum(st, sc, cs);
        const double d_cur = objective_sum({st.x, st.p, st.t}, st.w, sc);
        push("time", d_cur);

        if (st.r > 1 && detail::relative_change(d_prev, d_cur) <= config.outer_tol) {
            out.converged = true;
            d_prev = d_cur;
            break;
        }
        d_prev = d_cur;
    }
    out.outer_iters = std::min(st.r, config.max_outer);
    out.alloc = {st.x, st.p, st.t};
    out.slack = st.w;
    out.objective = d_prev;
    return out;
}

}  // namespace csun
