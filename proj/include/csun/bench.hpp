#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "csun/channel.hpp"
#include "csun/maxmin_alloc.hpp"
#include "csun/rate_eval.hpp"

namespace csun {

// Equal-allocation reference scheme: gain-greedy subchannels with coverage,
// equal hovering time, per-UAV power split equally across the slot's
// assigned columns, then one uniform scale-down (the minimal one) so the
// interference and energy rows hold.
struct BaselineResult {
    Allocation alloc;
    SlackState slack;
    double power_scale = 1.0;
};

inline BaselineResult baseline_equal(const Scenario& sc, const ConstraintSet& cs) {
    validate_scenario(sc);
    validate_constraints(cs, sc);
    const int N = sc.num_slots, G = sc.num_subchannels, K = sc.num_uavs;

    BaselineResult out;
    out.alloc = zero_allocation(sc);
    out.alloc.t.assign(N, std::min(cs.t_max, cs.t_total / N));

    BcdState probe;
    probe.x = out.alloc.x;
    probe.p = out.alloc.p;
    probe.t = out.alloc.t;
    probe.w = unit_slack(sc);
    out.alloc.x = detail::coverage_init(sc, detail::greedy_values(probe, sc));

    const auto owners = detail::column_owners(sc, out.alloc.x);
    for (int n = 0; n < N; ++n) {
        int active = 0;
        for (int g = 0; g < G; ++g)
            if (owners[static_cast<std::size_t>(n) * G + g] >= 0) ++active;
        if (active == 0) continue;
        const double per = cs.p_max / active;
        for (int g = 0; g < G; ++g) {
            if (owners[static_cast<std::size_t>(n) * G + g] < 0) continue;
            for (int k = 0; k < K; ++k) out.alloc.p[sc.p_index(n, g, k)] = per;
        }
    }

    double scale = 1.0;
    for (int n = 0; n < N; ++n)
        for (int i = 0; i < sc.num_sat_users; ++i) {
            const double leak = leakage_interference(out.alloc, sc, n, i);
            if (leak > cs.eps_p) scale = std::min(scale, cs.eps_p / leak);
        }
    for (int k = 0; k < K; ++k) {
        double e = 0.0;
        for (int n = 0; n < N; ++n)
            for (int g = 0; g < G; ++g) e += out.alloc.t[n] * out.alloc.p[sc.p_index(n, g, k)];
        if (e > cs.e_com[k]) scale = std::min(scale, cs.e_com[k] / e);
    }
    if (scale < 1.0) {
        scale *= 1.0 - 1e-12;
        for (double& p : out.alloc.p) p *= scale;
    }
    out.power_scale = scale;
    out.slack = solve_slack_all(out.alloc, sc);
    return out;
}

// Exhaustive assignment search against frozen P, T, w. Used as the oracle
// for the subchannel heuristics and for the relaxation equivalence check.
struct BruteForceResult {
    std::vector<std::uint8_t> x;
    double value = 0.0;
    bool found = false;
};

inline BruteForceResult brute_force_assignment(const Scenario& sc, const ConstraintSet& cs,
                                               const Allocation& frozen, const SlackState& w,
                                               bool maxmin, bool enforce_relaxed_rows) {
    const int N = sc.num_slots, G = sc.num_subchannels, K = sc.num_uavs;
    const int Ns = sc.num_sat_users;

    double combos = 1.0;
    for (int n = 0; n < N; ++n)
        for (int g = 0; g < G; ++g) combos *= sc.users_per_slot[n] + 1;
    if (combos > 1e6)
        throw std::invalid_argument("brute_force_assignment: search space exceeds 1e6");

    // per-column frozen values and row contributions
    std::vector<int> col_n, col_g;
    for (int n = 0; n < N; ++n)
        for (int g = 0; g < G; ++g) {
            col_n.push_back(n);
            col_g.push_back(g);
        }
    const int ncols = static_cast<int>(col_n.size());
    std::vector<double> value(sc.x_size(), 0.0);
    for (int n = 0; n < N; ++n)
        for (int u = 0; u < sc.users_per_slot[n]; ++u)
            for (int g = 0; g < G; ++g)
                value[sc.x_index(n, u, g)] = detail::column_value(sc, frozen, w, n, u, g);
    std::vector<double> leak(static_cast<std::size_t>(ncols) * std::max(Ns, 1), 0.0);
    std::vector<double> pk(static_cast<std::size_t>(ncols) * K, 0.0);
    for (int c = 0; c < ncols; ++c) {
        const int n = col_n[c], g = col_g[c];
        for (int i = 0; i < Ns; ++i) {
            if (!sc.y(n, i, g)) continue;
            double s = 0.0;
            for (int k = 0; k < K; ++k) {
                const double ls = sc.l_sat(n, i, g, k);
                s += ls * ls * frozen.p[sc.p_index(n, g, k)];
            }
            leak[static_cast<std::size_t>(c) * Ns + i] = s;
        }
        for (int k = 0; k < K; ++k)
            pk[static_cast<std::size_t>(c) * K + k] = frozen.p[sc.p_index(n, g, k)];
    }

    BruteForceResult best;
    std::vector<int> digit(ncols, -1);
    std::vector<double> totals(sc.total_users());
    std::vector<double> iu(static_cast<std::size_t>(N) * std::max(Ns, 1));
    std::vector<double> eu(K), pu(static_cast<std::size_t>(N) * K);

    for (;;) {
        bool feasible = true;
        std::fill(totals.begin(), totals.end(), 0.0);
        if (enforce_relaxed_rows) {
            std::fill(iu.begin(), iu.end(), 0.0);
            std::fill(eu.begin(), eu.end(), 0.0);
            std::fill(pu.begin(), pu.end(), 0.0);
        }
        for (int c = 0; c < ncols; ++c) {
            const int u = digit[c];
            if (u < 0) continue;
            const int n = col_n[c];
            totals[sc.user_id(n, u)] += value[sc.x_index(n, u, col_g[c])];
            if (enforce_relaxed_rows) {
                for (int i = 0; i < Ns; ++i)
                    iu[static_cast<std::size_t>(n) * Ns + i] +=
                        leak[static_cast<std::size_t>(c) * Ns + i];
                for (int k = 0; k < K; ++k) {
                    const double p = pk[static_cast<std::size_t>(c) * K + k];
                    eu[k] += frozen.t[n] * p;
                    pu[static_cast<std::size_t>(n) * K + k] += p;
                }
            }
        }
        if (enforce_relaxed_rows) {
            for (int n = 0; n < N && feasible; ++n)
                for (int i = 0; i < Ns; ++i)
                    feasible = feasible &&
                               iu[static_cast<std::size_t>(n) * Ns + i] <= cs.eps_p * (1 + 1e-12);
            for (int k = 0; k < K && feasible; ++k)
                feasible = feasible && eu[k] <= cs.e_com[k] * (1 + 1e-12);
            for (int n = 0; n < N && feasible; ++n)
                for (int k = 0; k < K; ++k)
                    feasible = feasible &&
                               pu[static_cast<std::size_t>(n) * K + k] <= cs.p_max * (1 + 1e-12);
        }
        if (feasible && maxmin) {
            // coverage: every user needs at least one column
            std::vector<int> cnt(sc.total_users(), 0);
            for (int c = 0; c < ncols; ++c)
                if (digit[c] >= 0) ++cnt[sc.user_id(col_n[c], digit[c])];
            for (int cn : cnt) feasible = feasible && cn > 0;
        }
        if (feasible) {
            double v;
            if (maxmin) {
                v = totals[0];
                for (double t : totals) v = std::min(v, t);
            } else {
                v = 0.0;
                for (double t : totals) v += t;
            }
            if (!best.found || v > best.value) {
                best.found = true;
                best.value = v;
                best.x.assign(sc.x_size(), 0);
                for (int c = 0; c < ncols; ++c)
                    if (digit[c] >= 0) best.x[sc.x_index(col_n[c], digit[c], col_g[c])] = 1;
            }
        }
        int pos = ncols - 1;
        while (pos >= 0) {
            if (++digit[pos] < sc.users_per_slot[col_n[pos]]) break;
            digit[pos] = -1;
            --pos;
        }
        if (pos < 0) break;
    }
    return best;
}

// per-(slot, subchannel) ground coverage masks on a rectangular grid of cell
// centers; a cell is covered when the summed received power over the swarm
// clears the threshold
struct CoverageGrid {
    int nx = 0, ny = 0;
    int num_slots = 0, num_subchannels = 0;
    double x0 = 0.0, y0 = 0.0, dx = 0.0, dy = 0.0;
    std::vector<std::uint8_t> mask;  // [(n*G + g)*ny*nx + iy*nx + ix]

    bool covered(int n, int g, int iy, int ix) const {
        return mask[((static_cast<std::size_t>(n) * num_subchannels + g) * ny + iy) * nx + ix] !=
               0;
    }
    double cell_x(int ix) const { return x0 + (ix + 0.5) * dx; }
    double cell_y(int iy) const { return y0 + (iy + 0.5) * dy; }
};

inline CoverageGrid coverage_map(const Allocation& alloc, const Scenario& sc, int nx, int ny,
                                 double x0, double y0, double x1, double y1,
                                 double threshold_watts, double atten_db_per_km = 0.0) {
    if (nx <= 0 || ny <= 0) throw std::invalid_argument("coverage_map: grid must be positive");
    if (!(x1 > x0) || !(y1 > y0)) throw std::invalid_argument("coverage_map: empty extent");
    const int N = sc.num_slots, G = sc.num_subchannels, K = sc.num_uavs;
    CoverageGrid grid;
    grid.nx = nx;
    grid.ny = ny;
    grid.num_slots = N;
    grid.num_subchannels = G;
    grid.x0 = x0;
    grid.y0 = y0;
    grid.dx = (x1 - x0) / nx;
    grid.dy = (y1 - y0) / ny;
    grid.mask.assign(static_cast<std::size_t>(N) * G * ny * nx, 0);

    std::vector<double> g2(K);  // squared path gain per UAV at the current point
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            const Vec3 pt{grid.cell_x(ix), grid.cell_y(iy), 0.0};
            for (int n = 0; n < N; ++n) {
                for (int k = 0; k < K; ++k) {
                    const double d = std::max(distance(pt, sc.geometry.uav_pos[
                                                               static_cast<std::size_t>(n) * K + k]),
                                              1.0);
                    const double a =
                        db_to_amplitude_gain(-fspl_db(d, sc.carrier_freq, atten_db_per_km));
                    g2[k] = a * a;
                }
                for (int g = 0; g < G; ++g) {
                    double rx = 0.0;
                    for (int k = 0; k < K; ++k) rx += g2[k] * alloc.p[sc.p_index(n, g, k)];
                    if (rx > threshold_watts)
                        grid.mask[((static_cast<std::size_t>(n) * G + g) * ny + iy) * nx + ix] = 1;
                }
            }
        }
    return grid;
}

// Seeded experiment sweep: for each (value, snapshot) generate one scenario
// and run the three arms against it. D_e / D_min come from the Monte Carlo
// evaluator with a per-snapshot seed shared by all arms.
struct SweepConfig {
    std::string param;  // eps_p (dBm) | num_uavs | num_subchannels | e_total (J)
    std::vector<double> values;
    int snapshots = 1;
    std::uint64_t seed = 1;
    ScenarioConfig base = desk_config();
    double e_total = 30.0;
    SolverConfig solver;
    int mc_samples = 10000;
    bool deterministic_timing = false;
    int workers = 0;  // 0 = hardware concurrency
};

struct SweepRow {
    std::string param;
    double value = 0.0;
    int snapshot = 0;
    std::string arm;
    double d_e = 0.0;
    double d_min = 0.0;
    int outer_iters = 0;
    double wall_ms = 0.0;
};

inline std::vector<SweepRow> run_sweep(const SweepConfig& cfg) {
    if (cfg.param != "eps_p" && cfg.param != "num_uavs" && cfg.param != "num_subchannels" &&
        cfg.param != "e_total")
        throw std::invalid_argument("run_sweep: unknown parameter '" + cfg.param + "'");
    if (cfg.values.empty()) throw std::invalid_argument("run_sweep: no values");
    if (cfg.snapshots < 1) throw std::invalid_argument("run_sweep: snapshots must be >= 1");

    struct Point {
        ScenarioConfig scfg;
        double e_total;
        double eps_override;
        double value;
    };
    std::vector<Point> points;
    for (double value : cfg.values) {
        Point pt{cfg.base, cfg.e_total, 0.0, value};
        if (cfg.param == "num_uavs") {
            pt.scfg.num_uavs = static_cast<int>(value);
            if (pt.scfg.num_uavs < 1 || pt.scfg.num_uavs != value)
                throw std::invalid_argument("run_sweep: num_uavs values must be positive integers");
        } else if (cfg.param == "num_subchannels") {
            pt.scfg.num_subchannels = static_cast<int>(value);
            if (pt.scfg.num_subchannels < 1 || pt.scfg.num_subchannels != value)
                throw std::invalid_argument(
                    "run_sweep: num_subchannels values must be positive integers");
        } else if (cfg.param == "e_total") {
            pt.e_total = value;
        } else {
            pt.eps_override = dbm_to_watts(value);
        }
        points.push_back(std::move(pt));
    }

    // worker pool over (value, snapshot) tasks; results land in fixed slots so
    // the merged order is deterministic no matter the interleaving
    const int tasks = static_cast<int>(points.size()) * cfg.snapshots;
    std::vector<std::array<SweepRow, 3>> results(tasks);

    auto run_task = [&](int ti) {
        const int vi = ti / cfg.snapshots, si = ti % cfg.snapshots;
        ScenarioConfig scfg = points[vi].scfg;
        scfg.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(si));
        const Scenario sc = generate_scenario(scfg);
        ConstraintSet cs = default_constraints(scfg.num_uavs, points[vi].e_total);
        if (points[vi].eps_override > 0.0) cs.eps_p = points[vi].eps_override;
        const std::uint64_t mc_seed = mix_seed(scfg.seed, 0xC0FFEEULL);

        auto emit = [&](int slot, const char* arm, const Allocation& alloc, int iters, double ms) {
            const auto rep = check_feasibility(alloc, sc, cs);
            if (!rep.feasible)
                throw NumericalError(std::string("run_sweep: infeasible allocation from ") + arm,
                                     rep.worst_relative);
            const auto mc = mc_objectives(alloc, sc, cfg.mc_samples, mc_seed);
            results[ti][slot] = {cfg.param,  points[vi].value, si,    arm, mc.d_e, mc.d_min,
                                 iters,      cfg.deterministic_timing ? 0.0 : ms};
        };
        using clock = std::chrono::steady_clock;
        auto ms_since = [](clock::time_point t0) {
            return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
        };

        auto t0 = clock::now();
        const auto sum_res = joint_sum(sc, cs, cfg.solver);
        emit(0, "joint_sum", sum_res.alloc, sum_res.outer_iters, ms_since(t0));

        t0 = clock::now();
        const auto mm_res = joint_maxmin(sc, cs, cfg.solver);
        emit(1, "joint_maxmin", mm_res.alloc, mm_res.outer_iters, ms_since(t0));

        t0 = clock::now();
        const auto base_res = baseline_equal(sc, cs);
        emit(2, "baseline_equal", base_res.alloc, 0, ms_since(t0));
    };

    int workers = cfg.workers > 0 ? cfg.workers
                                  : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min(workers, tasks));
    if (workers == 1) {
        for (int ti = 0; ti < tasks; ++ti) run_task(ti);
    } else {
        std::atomic<int> next{0};
        std::mutex err_mutex;
        std::exception_ptr err;
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int wk = 0; wk < workers; ++wk)
            pool.emplace_back([&] {
                for (;;) {
                    const int ti = next.fetch_add(1);
                    if (ti >= tasks) return;
                    try {
                        run_task(ti);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(err_mutex);
                        if (!err) err = std::current_exception();
                        return;
                    }
                }
            });
        for (auto& th : pool) th.join();
        if (err) std::rethrow_exception(err);
    }

    std::vector<SweepRow> rows;
    rows.reserve(static_cast<std::size_t>(tasks) * 3);
    for (const auto& slot : results)
        for (const auto& row : slot) rows.push_back(row);
    return rows;
}

}  // namespace csun
