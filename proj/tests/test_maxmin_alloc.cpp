#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "csun/bench.hpp"
#include "csun/maxmin_alloc.hpp"
#include "oracles.hpp"

using namespace csun;

namespace {

std::vector<double> totals_of(const Scenario& sc, const BcdState& st,
                              const std::vector<std::uint8_t>& x) {
    return per_user_totals({x, st.p, st.t}, st.w, sc);
}

double min_total(const Scenario& sc, const BcdState& st, const std::vector<std::uint8_t>& x) {
    const auto t = totals_of(sc, st, x);
    return *std::min_element(t.begin(), t.end());
}

int assignedTo(const Scenario& sc, const std::vector<std::uint8_t>& x, int u) {
    int c = 0;
    for (int g = 0; g < sc.num_subchannels; ++g) c += x[sc.x_index(0, u, g)] != 0;
    return c;
}

}  // namespace

TEST_CASE("coverage greedy with a lone user assigns everything") {
    auto sc = oracle::tiny_scenario(1, {1}, 4, 1, 1, 0);
    const auto cs = oracle::loose_constraints(1);
    auto st = make_bcd_state(sc, cs);
    for (double& p : st.p) p = 0.05;
    st.w = solve_slack_all({st.x, st.p, st.t}, sc);

    const auto x = allocate_subchannels_maxmin(st, sc);
    int cnt = 0;
    for (int g = 0; g < 4; ++g) cnt += x[sc.x_index(0, 0, g)];
    REQUIRE(cnt == 4);
}

TEST_CASE("coverage greedy reaches the exhaustive optimum on the 3-1-1 instance") {
    // per-column values user 0: (3, 1, 1), user 1: (2, 2, 2); the best
    // achievable minimum is 3 and a donor transfer that would invert the
    // pair order must be rejected
    auto sc = oracle::tiny_scenario(1, {2}, 3, 1, 1, 0);
    const double v0[3] = {3.0, 1.0, 1.0}, v1[3] = {2.0, 2.0, 2.0};
    const double pcol = 0.1;
    for (int g = 0; g < 3; ++g) {
        sc.gain_uav[sc.l_index(0, 0, g, 0)] = oracle::gain_for_rate(v0[g], pcol, sc.noise_power);
        sc.gain_uav[sc.l_index(0, 1, g, 0)] = oracle::gain_for_rate(v1[g], pcol, sc.noise_power);
    }
    ConstraintSet cs = oracle::loose_constraints(1);
    cs.t_total = 1.0;
    cs.t_max = 1.0;
    auto st = make_bcd_state(sc, cs);
    for (double& p : st.p) p = pcol;
    st.w = unit_slack(sc);  // values are exact at w = 1

    const auto x = allocate_subchannels_maxmin(st, sc);
    REQUIRE(min_total(sc, st, x) == Catch::Approx(3.0).epsilon(1e-9));

    const auto brute = brute_force_assignment(sc, cs, {st.x, st.p, st.t}, st.w, true, false);
    REQUIRE(brute.found);
    REQUIRE(brute.value == Catch::Approx(3.0).epsilon(1e-9));
    REQUIRE(min_total(sc, st, x) == Catch::Approx(brute.value).epsilon(1e-9));
}

TEST_CASE("identical users split the columns evenly") {
    auto sc = oracle::tiny_scenario(1, {2}, 4, 1, 1, 0);
    const auto cs = oracle::loose_constraints(1);
    auto st = make_bcd_state(sc, cs);
    for (double& p : st.p) p = 0.05;
    st.w = solve_slack_all({st.x, st.p, st.t}, sc);

    const auto x = allocate_subchannels_maxmin(st, sc);
    REQUIRE(assignedTo(sc, x, 0) == 2);
    REQUIRE(assignedTo(sc, x, 1) == 2);
    const auto tt = totals_of(sc, st, x);
    REQUIRE(tt[0] == Catch::Approx(tt[1]).epsilon(1e-12));
}

TEST_CASE("more users than subchannels is a configuration error") {
    auto sc = oracle::tiny_scenario(1, {3}, 2, 1, 1, 0);
    const auto cs = oracle::loose_constraints(1);
    auto st = make_bcd_state(sc, cs);
    REQUIRE_THROWS_AS(allocate_subchannels_maxmin(st, sc), std::invalid_argument);
}

TEST_CASE("coverage greedy never loses ground and always covers") {
    Rng rng(606);
    for (int trial = 0; trial < 20; ++trial) {
        const int G = 3 + int(rng.next_u64() % 3);
        const int U = 2 + int(rng.next_u64() % 2);
        auto sc = oracle::tiny_scenario(2, {U, U}, G, 1, 1, 0);
        for (double& g : sc.gain_uav) g = rng.uniform(5e-7, 8e-6);
        const auto cs = oracle::loose_constraints(1);
        auto st = make_bcd_state(sc, cs);
        for (double& p : st.p) p = rng.uniform(0.01, 0.1);
        st.w = solve_slack_all({st.x, st.p, st.t}, sc);

        const auto init = detail::coverage_init(sc, detail::greedy_values(st, sc));
        const auto x = allocate_subchannels_maxmin(st, sc);

        // Property 1: every user keeps at least one subchannel; exclusivity holds
        for (int n = 0; n < 2; ++n)
            for (int u = 0; u < U; ++u) {
                int cnt = 0;
                for (int g = 0; g < G; ++g) cnt += x[sc.x_index(n, u, g)];
                REQUIRE(cnt >= 1);
            }
        for (int n = 0; n < 2; ++n)
            for (int g = 0; g < G; ++g) {
                int owners = 0;
                for (int u = 0; u < U; ++u) owners += x[sc.x_index(n, u, g)];
                REQUIRE(owners <= 1);
            }
        REQUIRE(min_total(sc, st, x) >= min_total(sc, st, init) - 1e-12);
    }
}

TEST_CASE("coverage greedy stays within 0.8 of the exhaustive maxmin") {
    Rng rng(909);
    for (int trial = 0; trial < 5; ++trial) {
        auto sc = oracle::tiny_scenario(1, {2}, 4, 1, 1, 0);
        for (double& g : sc.gain_uav) g = rng.uniform(5e-7, 8e-6);
        const auto cs = oracle::loose_constraints(1);
        auto st = make_bcd_state(sc, cs);
        for (double& p : st.p) p = rng.uniform(0.02, 0.1);
        st.w = solve_slack_all({st.x, st.p, st.t}, sc);

        const auto x = allocate_subchannels_maxmin(st, sc);
        const auto brute = brute_force_assignment(sc, cs, {st.x, st.p, st.t}, st.w, true, false);
        REQUIRE(brute.found);
        const double got = min_total(sc, st, x);
        REQUIRE(got >= 0.8 * brute.value);
        REQUIRE(got <= brute.value * (1.0 + 1e-9));
    }
}

TEST_CASE("maxmin power step") {
    SECTION("single user saturates the power cap") {
        auto sc = oracle::tiny_scenario(1, {1}, 1, 1, 1, 0);
        const auto cs = oracle::loose_constraints(1);
        auto st = make_bcd_state(sc, cs);  // T = 7.5
        st.x[sc.x_index(0, 0, 0)] = 1;

        const auto res = allocate_power_maxmin(st, sc, cs);
        REQUIRE(res.p[sc.p_index(0, 0, 0)] == Catch::Approx(0.3).epsilon(1e-8));
        const double l = sc.l(0, 0, 0, 0);
        const double wstar =
            solve_slack_fixed_point(std::vector{0.3}, std::vector{l}, 1, sc.noise_power);
        const double want =
            7.5 * approx_rate(std::vector{0.3}, wstar, std::vector{l}, 1, sc.noise_power);
        REQUIRE(res.tau == Catch::Approx(want).epsilon(1e-9));
        // returned slack is the fixed point of the returned powers
        REQUIRE(slack_residual(res.w.w[sc.x_index(0, 0, 0)], std::vector{0.3}, std::vector{l},
                               1, sc.noise_power) < 1e-6);
    }
    SECTION("identical users share the slot power evenly") {
        auto sc = oracle::tiny_scenario(1, {2}, 2, 1, 1, 0);
        const auto cs = oracle::loose_constraints(1);
        auto st = make_bcd_state(sc, cs);
        st.x[sc.x_index(0, 0, 0)] = 1;
        st.x[sc.x_index(0, 1, 1)] = 1;

        const auto res = allocate_power_maxmin(st, sc, cs);
        REQUIRE(res.p[sc.p_index(0, 0, 0)] ==
                Catch::Approx(res.p[sc.p_index(0, 1, 0)]).epsilon(2e-3));
        const auto tt = per_user_totals({st.x, res.p, st.t}, res.w, sc);
        REQUIRE(tt[0] == Catch::Approx(tt[1]).epsilon(2e-3));
        REQUIRE(res.p[sc.p_index(0, 0, 0)] + res.p[sc.p_index(0, 1, 0)] <=
                cs.p_max * (1.0 + 1e-9));
    }
    SECTION("10:1 gains against the exact grid oracle") {
        auto sc = oracle::tiny_scenario(1, {2}, 2, 1, 1, 0);
        const double l1 = 2e-6;
        const double l0 = l1 * std::sqrt(10.0);
        sc.gain_uav[sc.l_index(0, 0, 0, 0)] = l0;
        sc.gain_uav[sc.l_index(0, 1, 1, 0)] = l1;
        ConstraintSet cs = oracle::loose_constraints(1);
        cs.e_com = {0.75};  // with T = 7.5: p0 + p1 <= 0.1, below the 0.3 cap
        auto st = make_bcd_state(sc, cs);
        st.x[sc.x_index(0, 0, 0)] = 1;
        st.x[sc.x_index(0, 1, 1)] = 1;

        const auto res = allocate_power_maxmin(st, sc, cs);
        auto exact = [&](double p0, double p1) {
            if (p0 + p1 > 0.1) return -oracle::kInf;
            const double wa = solve_slack_fixed_point(std::vector{p0}, std::vector{l0}, 1,
                                                      sc.noise_power);
            const double wb = solve_slack_fixed_point(std::vector{p1}, std::vector{l1}, 1,
                                                      sc.noise_power);
            return 7.5 * std::min(approx_rate(std::vector{p0}, wa, std::vector{l0}, 1,
                                              sc.noise_power),
                                  approx_rate(std::vector{p1}, wb, std::vector{l1}, 1,
                                              sc.noise_power));
        };
        const auto ref = oracle::grid2_max_refined(exact, 0.1, 0.1, 150, 150);
        REQUIRE(res.tau == Catch::Approx(ref[0]).epsilon(2e-3));
        REQUIRE(res.tau <= ref[0] * (1.0 + 2e-3));
    }
}

TEST_CASE("maxmin time lp") {
    SECTION("rates 1 and 2 under a 9 s budget give T = (6, 3)") {
        auto sc = oracle::tiny_scenario(2, {1, 1}, 1, 1, 1, 0);
        sc.gain_uav[sc.l_index(0, 0, 0, 0)] = oracle::gain_for_rate(1.0, 0.1, sc.noise_power);
        sc.gain_uav[sc.l_index(1, 0, 0, 0)] = oracle::gain_for_rate(2.0, 0.1, sc.noise_power);
        ConstraintSet cs = oracle::loose_constraints(1);
        cs.t_total = 9.0;
        auto st = make_bcd_state(sc, cs);
        st.x[sc.x_index(0, 0, 0)] = 1;
        st.x[sc.x_index(1, 0, 0)] = 1;
        for (double& p : st.p) p = 0.1;
        st.w = unit_slack(sc);

        const auto t = schedule_time_maxmin(st, sc, cs);
        REQUIRE(t[0] == Catch::Approx(6.0).margin(1e-7));
        REQUIRE(t[1] == Catch::Approx(3.0).margin(1e-7));
        const double tau = objective_min({st.x, st.p, t}, st.w, sc);
        REQUIRE(tau == Catch::Approx(6.0).margin(1e-7));
    }
    SECTION("single slot takes the box limit") {
        auto sc = oracle::tiny_scenario(1, {1}, 1, 1, 1, 0);
        const auto cs = oracle::loose_constraints(1);
        auto st = make_bcd_state(sc, cs);
        st.x[sc.x_index(0, 0, 0)] = 1;
        st.p[sc.p_index(0, 0, 0)] = 0.1;
        st.w = solve_slack_all({st.x, st.p, st.t}, sc);
        const auto t = schedule_time_maxmin(st, sc, cs);
        REQUIRE(t[0] == Catch::Approx(7.5).margin(1e-8));
    }
    SECTION("a silent user pins tau at zero but the lp stays solvable") {
        auto sc = oracle::tiny_scenario(2, {1, 1}, 2, 1, 1, 0);
        ConstraintSet cs = oracle::loose_constraints(1);
        auto st = make_bcd_state(sc, cs);
        st.x[sc.x_index(0, 0, 0)] = 1;  // slot 1 user left silent
        for (double& p : st.p) p = 0.05;
        st.w = solve_slack_all({st.x, st.p, st.t}, sc);

        const auto t = schedule_time_maxmin(st, sc, cs);
        double sum = 0.0;
        for (double v : t) {
            REQUIRE(v >= -1e-9);
            REQUIRE(v <= cs.t_max + 1e-9);
            sum += v;
        }
        REQUIRE(sum <= cs.t_total + 1e-9);
        REQUIRE(objective_min({st.x, st.p, t}, st.w, sc) == Catch::Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("enforced and relaxed exhaustive search agree after a feasible block") {
    // with powers produced under the assignment-gated rows, unassigned
    // columns are silent, so no alternative assignment can exceed the limits
    for (std::uint64_t seed : {21ull, 22ull, 23ull, 24ull, 25ull}) {
        ScenarioConfig cfg = desk_config();
        cfg.num_slots = 1;
        cfg.users_per_slot = {2};
        cfg.num_subchannels = 3;
        cfg.num_uavs = 2;
        cfg.antennas_per_user = 2;
        cfg.num_sat_users = 2;
        cfg.seed = seed;
        const Scenario sc = generate_scenario(cfg);
        const ConstraintSet cs = default_constraints(cfg.num_uavs);

        auto st = make_bcd_state(sc, cs);
        st.x = allocate_subchannels_sum(st, sc, cs);  // cold gain-greedy
        auto [p, w] = allocate_power_sum(st, sc, cs);
        st.p = std::move(p);
        st.w = std::move(w);
        const Allocation frozen{st.x, st.p, st.t};

        for (bool maxmin : {false, true}) {
            const auto hard = brute_force_assignment(sc, cs, frozen, st.w, maxmin, true);
            const auto soft = brute_force_assignment(sc, cs, frozen, st.w, maxmin, false);
            REQUIRE(hard.found);
            REQUIRE(soft.found);
            REQUIRE(hard.value == Catch::Approx(soft.value).margin(1e-12));
            REQUIRE(hard.x == soft.x);
        }
    }
}

TEST_CASE("joint maxmin ascent is monotone, feasible and covered") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
        ScenarioConfig cfg = desk_config();
        cfg.num_slots = 2;
        cfg.users_per_slot = {2, 2};
        cfg.num_subchannels = 4;
        cfg.num_uavs = 2;
        cfg.antennas_per_user = 2;
        cfg.num_sat_users = 2;
        cfg.seed = seed;
        const Scenario sc = generate_scenario(cfg);
        const ConstraintSet cs = default_constraints(cfg.num_uavs);

        const auto res = joint_maxmin(sc, cs);
        REQUIRE(res.outer_iters <= 10);
        REQUIRE(res.converged);
        REQUIRE(check_feasibility(res.alloc, sc, cs).feasible);
        REQUIRE(res.objective > 0.0);  // every user served

        double prev = -oracle::kInf;
        for (const auto& row : res.trace) {
            REQUIRE(row.objective >= prev - 1e-9 * std::max(1.0, std::abs(prev)));
            REQUIRE(row.worst_violation <= 1e-9);
            prev = row.objective;
        }
        REQUIRE(res.objective ==
                Catch::Approx(objective_min(res.alloc, res.slack, sc)).epsilon(1e-12));
    }
}
