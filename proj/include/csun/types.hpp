#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "csun/units.hpp"

namespace csun {

// non-convergence of an iterative routine; carries the last residual so the
// caller can tell how close it got
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, double residual, std::string trace = {})
        : std::runtime_error(what), last_residual(residual), iteration_trace(std::move(trace)) {}
    double last_residual;
    std::string iteration_trace;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& context, const std::string& what)
        : std::runtime_error(context + ": " + what), field_context(context) {}
    std::string field_context;
};

struct Geometry {
    std::vector<Vec3> uav_pos;       // [n*K + k]
    std::vector<Vec3> uav_user_pos;  // ragged [n][u], flattened with the scenario's user offsets
    std::vector<Vec3> sat_user_pos;  // [i]
};

// Static network snapshot: dimensions, large-scale amplitude gains and
// satellite occupancy. Gains are amplitudes; formulas square them.
struct Scenario {
    int num_uavs = 0;          // K, also the number of transmit antennas per subchannel
    int antennas_per_user = 0; // M
    int num_subchannels = 0;   // G
    int num_slots = 0;         // N
    std::vector<int> users_per_slot;  // U_n, size N
    int num_sat_users = 0;     // N_s
    double noise_power = 0.0;  // sigma^2, watts
    double carrier_freq = 0.0; // hertz

    std::vector<double> gain_uav;          // l[n][u][g][k], ragged in u
    std::vector<double> gain_sat;          // l~[n][i][g][k]
    std::vector<std::uint8_t> sat_occupancy;  // y[n][i][g]
    Geometry geometry;

    std::vector<int> user_offset;  // prefix sums of users_per_slot, size N+1

    int total_users() const { return user_offset.empty() ? 0 : user_offset.back(); }
    // global user id for (n,u); also indexes geometry.uav_user_pos
    int user_id(int n, int u) const { return user_offset[n] + u; }

    std::size_t l_index(int n, int u, int g, int k) const {
        return (static_cast<std::size_t>(user_id(n, u)) * num_subchannels + g) * num_uavs + k;
    }
    std::size_t lsat_index(int n, int i, int g, int k) const {
        return ((static_cast<std::size_t>(n) * num_sat_users + i) * num_subchannels + g) * num_uavs + k;
    }
    std::size_t y_index(int n, int i, int g) const {
        return (static_cast<std::size_t>(n) * num_sat_users + i) * num_subchannels + g;
    }
    // x and w share the ragged [n][u][g] layout
    std::size_t x_index(int n, int u, int g) const {
        return static_cast<std::size_t>(user_id(n, u)) * num_subchannels + g;
    }
    std::size_t p_index(int n, int g, int k) const {
        return (static_cast<std::size_t>(n) * num_subchannels + g) * num_uavs + k;
    }

    double l(int n, int u, int g, int k) const { return gain_uav[l_index(n, u, g, k)]; }
    double l_sat(int n, int i, int g, int k) const { return gain_sat[lsat_index(n, i, g, k)]; }
    bool y(int n, int i, int g) const { return sat_occupancy[y_index(n, i, g)] != 0; }

    std::size_t x_size() const { return static_cast<std::size_t>(total_users()) * num_subchannels; }
    std::size_t p_size() const {
        return static_cast<std::size_t>(num_slots) * num_subchannels * num_uavs;
    }

    void rebuild_offsets() {
        user_offset.assign(1, 0);
        for (int un : users_per_slot) user_offset.push_back(user_offset.back() + un);
    }
};

struct ConstraintSet {
    double eps_p = 0.0;           // interference temperature threshold, watts
    std::vector<double> e_com;    // per-UAV communication energy budget, joules
    double p_max = 0.0;           // per-UAV per-slot transmit power cap, watts
    double t_total = 0.0;         // total hovering time budget, seconds
    double t_max = 0.0;           // per-slot hovering time cap, seconds
};

struct Allocation {
    std::vector<std::uint8_t> x;  // subchannel ownership, [n][u][g] ragged
    std::vector<double> p;        // transmit power, [n][g][k], watts
    std::vector<double> t;        // hovering time per slot, seconds
};

inline Allocation zero_allocation(const Scenario& sc) {
    Allocation a;
    a.x.assign(sc.x_size(), 0);
    a.p.assign(sc.p_size(), 0.0);
    a.t.assign(sc.num_slots, 0.0);
    return a;
}

struct SlackState {
    std::vector<double> w;  // [n][u][g] ragged, w >= 1 (v = ln w >= 0)
};

inline SlackState unit_slack(const Scenario& sc) {
    SlackState s;
    s.w.assign(sc.x_size(), 1.0);
    return s;
}

struct FeasibilityReport {
    double interference_violation = 0.0;  // watts
    double energy_violation = 0.0;        // joules
    double power_violation = 0.0;         // watts
    double time_violation = 0.0;          // seconds
    double assignment_violation = 0.0;    // exclusivity / binary / sign, exact
    double worst_relative = 0.0;          // max violation normalized by its limit
    bool feasible = false;
    double tolerance = 0.0;
};

inline void validate_scenario(const Scenario& sc) {
    auto fail = [](const std::string& m) { throw std::invalid_argument("scenario: " + m); };
    if (sc.num_uavs <= 0) fail("num_uavs must be positive");
    if (sc.antennas_per_user <= 0) fail("antennas_per_user must be positive");
    if (sc.num_subchannels <= 0) fail("num_subchannels must be positive");
    if (sc.num_slots <= 0) fail("num_slots must be positive");
    if (static_cast<int>(sc.users_per_slot.size()) != sc.num_slots)
        fail("users_per_slot size != num_slots");
    for (int un : sc.users_per_slot)
        if (un <= 0) fail("users_per_slot entries must be positive");
    if (sc.num_sat_users < 0) fail("num_sat_users must be non-negative");
    if (!(sc.noise_power > 0.0)) fail("noise_power must be positive");
    if (!(sc.carrier_freq > 0.0)) fail("carrier_freq must be positive");
    if (static_cast<int>(sc.user_offset.size()) != sc.num_slots + 1)
        fail("user_offset size != num_slots+1");
    for (int n = 0; n < sc.num_slots; ++n)
        if (sc.user_offset[n + 1] - sc.user_offset[n] != sc.users_per_slot[n])
            fail("user_offset inconsistent with users_per_slot");
    const std::size_t nl = static_cast<std::size_t>(sc.total_users()) * sc.num_subchannels * sc.num_uavs;
    if (sc.gain_uav.size() != nl) fail("gain_uav size mismatch");
    const std::size_t nls = static_cast<std::size_t>(sc.num_slots) * sc.num_sat_users *
                            sc.num_subchannels * sc.num_uavs;
    if (sc.gain_sat.size() != nls) fail("gain_sat size mismatch");
    if (sc.sat_occupancy.size() !=
        static_cast<std::size_t>(sc.num_slots) * sc.num_sat_users * sc.num_subchannels)
        fail("sat_occupancy size mismatch");
    for (double v : sc.gain_uav)
        if (!(std::isfinite(v) && v > 0.0 && v <= 1.0)) fail("gain_uav entries must be in (0,1]");
    for (double v : sc.gain_sat)
        if (!(std::isfinite(v) && v > 0.0 && v <= 1.0)) fail("gain_sat entries must be in (0,1]");
    for (auto b : sc.sat_occupancy)
        if (b != 0 && b != 1) fail("sat_occupancy entries must be 0/1");
    if (sc.geometry.uav_pos.size() != static_cast<std::size_t>(sc.num_slots) * sc.num_uavs)
        fail("geometry.uav_pos size mismatch");
    if (sc.geometry.uav_user_pos.size() != static_cast<std::size_t>(sc.total_users()))
        fail("geometry.uav_user_pos size mismatch");
    if (sc.geometry.sat_user_pos.size() != static_cast<std::size_t>(sc.num_sat_users))
        fail("geometry.sat_user_pos size mismatch");
}

inline void validate_constraints(const ConstraintSet& cs, const Scenario& sc) {
    auto fail = [](const std::string& m) { throw std::invalid_argument("constraints: " + m); };
    if (!(cs.eps_p > 0.0)) fail("eps_p must be positive");
    if (static_cast<int>(cs.e_com.size()) != sc.num_uavs) fail("e_com size != num_uavs");
    for (double e : cs.e_com)
        if (!(e > 0.0)) fail("e_com entries must be positive");
    if (!(cs.p_max > 0.0)) fail("p_max must be positive");
    if (!(cs.t_total > 0.0)) fail("t_total must be positive");
    if (!(cs.t_max > 0.0)) fail("t_max must be positive");
    if (cs.t_max > cs.t_total) fail("t_max must not exceed t_total");
}

}  // namespace csun
