#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "csun/rng.hpp"
#include "csun/types.hpp"
#include "csun/units.hpp"

namespace csun {

struct ScenarioConfig {
    double area_x = 10000.0;      // meters
    double area_y = 10000.0;
    double uav_altitude = 200.0;  // meters
    double swarm_radius = 50.0;   // UAV ring radius around the group centroid
    int num_uavs = 4;
    int antennas_per_user = 4;
    int num_subchannels = 8;
    int num_slots = 5;
    std::vector<int> users_per_slot = {4, 4, 4, 4, 4};
    int num_sat_users = 5;
    double carrier_freq = 5.8e9;              // hertz
    double noise_power = 1.9952623149688788e-14;  // -107 dBm in watts
    double atten_db_per_km = 0.01;
    double occupancy_density = 0.5;           // rho_y
    double subchannel_jitter_db = 0.0;        // 0 keeps l frequency-flat across g
    std::uint64_t seed = 1;
};

inline ScenarioConfig desk_config() {
    ScenarioConfig cfg;  // defaults are the desk preset
    cfg.subchannel_jitter_db = 3.0;
    return cfg;
}

inline ScenarioConfig paper_config() {
    ScenarioConfig cfg;
    cfg.num_uavs = 6;
    cfg.antennas_per_user = 6;
    cfg.num_subchannels = 16;
    cfg.num_slots = 20;
    cfg.users_per_slot.assign(20, 10);
    cfg.num_sat_users = 10;
    cfg.subchannel_jitter_db = 3.0;
    return cfg;
}

inline ConstraintSet default_constraints(int num_uavs, double e_total = 30.0) {
    ConstraintSet cs;
    cs.eps_p = dbm_to_watts(-77.0);
    cs.e_com.assign(num_uavs, e_total / num_uavs);
    cs.p_max = 0.3;
    cs.t_total = 100.0;
    cs.t_max = 7.5;
    return cs;
}

// ITU-R P.525 free-space path loss plus optional constant atmospheric term
inline double fspl_db(double distance_m, double freq_hz, double atten_db_per_km = 0.0) {
    if (!(distance_m > 0.0)) throw std::domain_error("fspl_db: distance must be positive");
    if (!(freq_hz > 0.0)) throw std::domain_error("fspl_db: frequency must be positive");
    const double d_km = distance_m / 1000.0;
    const double f_mhz = freq_hz / 1e6;
    return 32.45 + 20.0 * std::log10(f_mhz) + 20.0 * std::log10(d_km) + atten_db_per_km * d_km;
}

inline void validate_config(const ScenarioConfig& cfg) {
    auto fail = [](const std::string& m) { throw std::invalid_argument("scenario config: " + m); };
    if (!(cfg.area_x > 0.0 && cfg.area_y > 0.0)) fail("area must be positive");
    if (!(cfg.uav_altitude >= 10.0)) fail("uav_altitude must be at least 10 m");
    if (cfg.swarm_radius < 0.0) fail("swarm_radius must be non-negative");
    if (cfg.num_uavs <= 0 || cfg.antennas_per_user <= 0 || cfg.num_subchannels <= 0 ||
        cfg.num_slots <= 0 || cfg.num_sat_users < 0)
        fail("dimensions must be positive");
    if (static_cast<int>(cfg.users_per_slot.size()) != cfg.num_slots)
        fail("users_per_slot size must equal num_slots");
    for (int un : cfg.users_per_slot)
        if (un <= 0) fail("every slot needs at least one user");
    if (!(cfg.carrier_freq > 0.0)) fail("carrier_freq must be positive");
    if (!(cfg.noise_power > 0.0)) fail("noise_power must be positive");
    if (cfg.atten_db_per_km < 0.0) fail("atten_db_per_km must be non-negative");
    if (cfg.occupancy_density < 0.0 || cfg.occupancy_density > 1.0)
        fail("occupancy_density must be in [0,1]");
    if (cfg.subchannel_jitter_db < 0.0) fail("subchannel_jitter_db must be non-negative");
}

// Draw order (fixed for reproducibility): user positions, satellite user
// positions, occupancy, then jitter values in storage order.
inline Scenario generate_scenario(const ScenarioConfig& cfg) {
    validate_config(cfg);
    Rng rng(cfg.seed);

    Scenario sc;
    sc.num_uavs = cfg.num_uavs;
    sc.antennas_per_user = cfg.antennas_per_user;
    sc.num_subchannels = cfg.num_subchannels;
    sc.num_slots = cfg.num_slots;
    sc.users_per_slot = cfg.users_per_slot;
    sc.num_sat_users = cfg.num_sat_users;
    sc.noise_power = cfg.noise_power;
    sc.carrier_freq = cfg.carrier_freq;
    sc.rebuild_offsets();

    const int N = sc.num_slots, K = sc.num_uavs, G = sc.num_subchannels, Ns = sc.num_sat_users;

    for (int n = 0; n < N; ++n)
        for (int u = 0; u < sc.users_per_slot[n]; ++u)
            sc.geometry.uav_user_pos.push_back(
                {rng.uniform(0.0, cfg.area_x), rng.uniform(0.0, cfg.area_y), 0.0});
    for (int i = 0; i < Ns; ++i)
        sc.geometry.sat_user_pos.push_back(
            {rng.uniform(0.0, cfg.area_x), rng.uniform(0.0, cfg.area_y), 0.0});

    sc.sat_occupancy.resize(static_cast<std::size_t>(N) * Ns * G);
    for (auto& b : sc.sat_occupancy) b = rng.next_double() < cfg.occupancy_density ? 1 : 0;

    // swarm waypoint: ring around each group centroid at the configured altitude
    sc.geometry.uav_pos.resize(static_cast<std::size_t>(N) * K);
    for (int n = 0; n < N; ++n) {
        Vec3 c{0.0, 0.0, 0.0};
        for (int u = 0; u < sc.users_per_slot[n]; ++u) {
            const Vec3& q = sc.geometry.uav_user_pos[sc.user_id(n, u)];
            c.x += q.x;
            c.y += q.y;
        }
        c.x /= sc.users_per_slot[n];
        c.y /= sc.users_per_slot[n];
        for (int k = 0; k < K; ++k) {
            const double a = 6.283185307179586477 * k / K;
            sc.geometry.uav_pos[static_cast<std::size_t>(n) * K + k] = {
                c.x + cfg.swarm_radius * std::cos(a), c.y + cfg.swarm_radius * std::sin(a),
                cfg.uav_altitude};
        }
    }

    auto path_amplitude = [&](const Vec3& a, const Vec3& b, double jitter_db) {
        const double d = std::max(distance(a, b), 1.0);
        return db_to_amplitude_gain(-fspl_db(d, cfg.carrier_freq, cfg.atten_db_per_km) + jitter_db);
    };

    sc.gain_uav.resize(static_cast<std::size_t>(sc.total_users()) * G * K);
    for (int n = 0; n < N; ++n)
        for (int u = 0; u < sc.users_per_slot[n]; ++u)
            for (int g = 0; g < G; ++g)
                for (int k = 0; k < K; ++k) {
                    const double j = cfg.subchannel_jitter_db > 0.0
                                         ? cfg.subchannel_jitter_db * rng.next_gauss()
                                         : 0.0;
                    sc.gain_uav[sc.l_index(n, u, g, k)] =
                        path_amplitude(sc.geometry.uav_user_pos[sc.user_id(n, u)],
                                       sc.geometry.uav_pos[static_cast<std::size_t>(n) * K + k], j);
                }

    sc.gain_sat.resize(static_cast<std::size_t>(N) * Ns * G * K);
    for (int n = 0; n < N; ++n)
        for (int i = 0; i < Ns; ++i)
            for (int g = 0; g < G; ++g)
                for (int k = 0; k < K; ++k) {
                    const double j = cfg.subchannel_jitter_db > 0.0
                                         ? cfg.subchannel_jitter_db * rng.next_gauss()
                                         : 0.0;
                    sc.gain_sat[sc.lsat_index(n, i, g, k)] =
                        path_amplitude(sc.geometry.sat_user_pos[i],
                                       sc.geometry.uav_pos[static_cast<std::size_t>(n) * K + k], j);
                }

    validate_scenario(sc);
    return sc;
}

namespace detail {

inline nlohmann::json vec3_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

inline Vec3 vec3_from(const nlohmann::json& j, const std::string& ctx) {
    if (!j.is_array() || j.size() != 3) throw ParseError(ctx, "expected [x,y,z]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline const nlohmann::json& field(const nlohmann::json& j, const char* name,
                                   const std::string& ctx) {
    auto it = j.find(name);
    if (it == j.end()) throw ParseError(ctx + "." + name, "missing field");
    return *it;
}

}  // namespace detail

inline nlohmann::json scenario_to_json(const Scenario& sc) {
    using nlohmann::json;
    json meta;
    meta["num_uavs"] = sc.num_uavs;
    meta["antennas_per_user"] = sc.antennas_per_user;
    meta["num_subchannels"] = sc.num_subchannels;
    meta["num_slots"] = sc.num_slots;
    meta["users_per_slot"] = sc.users_per_slot;
    meta["num_sat_users"] = sc.num_sat_users;
    meta["noise_power_w"] = sc.noise_power;
    meta["carrier_freq_hz"] = sc.carrier_freq;

    json l = json::array();
    for (int n = 0; n < sc.num_slots; ++n) {
        json ln = json::array();
        for (int u = 0; u < sc.users_per_slot[n]; ++u) {
            json lu = json::array();
            for (int g = 0; g < sc.num_subchannels; ++g) {
                json lg = json::array();
                for (int k = 0; k < sc.num_uavs; ++k) lg.push_back(sc.l(n, u, g, k));
                lu.push_back(std::move(lg));
            }
            ln.push_back(std::move(lu));
        }
        l.push_back(std::move(ln));
    }

    json lt = json::array();
    for (int n = 0; n < sc.num_slots; ++n) {
        json ln = json::array();
        for (int i = 0; i < sc.num_sat_users; ++i) {
            json li = json::array();
            for (int g = 0; g < sc.num_subchannels; ++g) {
                json lg = json::array();
                for (int k = 0; k < sc.num_uavs; ++k) lg.push_back(sc.l_sat(n, i, g, k));
                li.push_back(std::move(lg));
            }
            ln.push_back(std::move(li));
        }
        lt.push_back(std::move(ln));
    }

    json y = json::array();
    for (int n = 0; n < sc.num_slots; ++n) {
        json yn = json::array();
        for (int i = 0; i < sc.num_sat_users; ++i) {
            json yi = json::array();
            for (int g = 0; g < sc.num_subchannels; ++g) yi.push_back(int(sc.y(n, i, g)));
            yn.push_back(std::move(yi));
        }
        y.push_back(std::move(yn));
    }

    json geo;
    json uav = json::array();
    for (int n = 0; n < sc.num_slots; ++n) {
        json row = json::array();
        for (int k = 0; k < sc.num_uavs; ++k)
            row.push_back(detail::vec3_json(sc.geometry.uav_pos[std::size_t(n) * sc.num_uavs + k]));
        uav.push_back(std::move(row));
    }
    geo["uav_pos"] = std::move(uav);
    json up = json::array();
    for (int n = 0; n < sc.num_slots; ++n) {
        json row = json::array();
        for (int u = 0; u < sc.users_per_slot[n]; ++u)
            row.push_back(detail::vec3_json(sc.geometry.uav_user_pos[sc.user_id(n, u)]));
        up.push_back(std::move(row));
    }
    geo["uav_user_pos"] = std::move(up);
    json sp = json::array();
    for (const auto& v : sc.geometry.sat_user_pos) sp.push_back(detail::vec3_json(v));
    geo["sat_user_pos"] = std::move(sp);

    return json{{"meta", std::move(meta)},
                {"l", std::move(l)},
                {"l_tilde", std::move(lt)},
                {"y", std::move(y)},
                {"geometry", std::move(geo)}};
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
    using detail::field;
    Scenario sc;
    try {
        const auto& meta = field(j, "meta", "scenario");
        sc.num_uavs = field(meta, "num_uavs", "meta").get<int>();
        sc.antennas_per_user = field(meta, "antennas_per_user", "meta").get<int>();
        sc.num_subchannels = field(meta, "num_subchannels", "meta").get<int>();
        sc.num_slots = field(meta, "num_slots", "meta").get<int>();
        sc.users_per_slot = field(meta, "users_per_slot", "meta").get<std::vector<int>>();
        sc.num_sat_users = field(meta, "num_sat_users", "meta").get<int>();
        sc.noise_power = field(meta, "noise_power_w", "meta").get<double>();
        sc.carrier_freq = field(meta, "carrier_freq_hz", "meta").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("meta", e.what());
    }
    if (static_cast<int>(sc.users_per_slot.size()) != sc.num_slots)
        throw ParseError("meta.users_per_slot", "size must equal num_slots");
    sc.rebuild_offsets();

    const int N = sc.num_slots, K = sc.num_uavs, G = sc.num_subchannels, Ns = sc.num_sat_users;
    auto idx_ctx = [](const char* name, std::initializer_list<int> idx) {
        std::ostringstream os;
        os << name;
        for (int v : idx) os << '[' << v << ']';
        return os.str();
    };

    try {
        const auto& l = field(j, "l", "scenario");
        sc.gain_uav.resize(static_cast<std::size_t>(sc.total_users()) * G * K);
        for (int n = 0; n < N; ++n)
            for (int u = 0; u < sc.users_per_slot[n]; ++u)
                for (int g = 0; g < G; ++g)
                    for (int k = 0; k < K; ++k) {
                        const double v = l.at(n).at(u).at(g).at(k).get<double>();
                        if (!(std::isfinite(v) && v > 0.0 && v <= 1.0))
                            throw ParseError(idx_ctx("l", {n, u, g, k}),
                                             "amplitude gain must be in (0,1]");
                        sc.gain_uav[sc.l_index(n, u, g, k)] = v;
                    }
        const auto& lt = field(j, "l_tilde", "scenario");
        sc.gain_sat.resize(static_cast<std::size_t>(N) * Ns * G * K);
        for (int n = 0; n < N; ++n)
            for (int i = 0; i < Ns; ++i)
                for (int g = 0; g < G; ++g)
                    for (int k = 0; k < K; ++k) {
                        const double v = lt.at(n).at(i).at(g).at(k).get<double>();
                        if (!(std::isfinite(v) && v > 0.0 && v <= 1.0))
                            throw ParseError(idx_ctx("l_tilde", {n, i, g, k}),
                                             "amplitude gain must be in (0,1]");
                        sc.gain_sat[sc.lsat_index(n, i, g, k)] = v;
                    }
        const auto& y = field(j, "y", "scenario");
        sc.sat_occupancy.resize(static_cast<std::size_t>(N) * Ns * G);
        for (int n = 0; n < N; ++n)
            for (int i = 0; i < Ns; ++i)
                for (int g = 0; g < G; ++g) {
                    const int v = y.at(n).at(i).at(g).get<int>();
                    if (v != 0 && v != 1)
                        throw ParseError(idx_ctx("y", {n, i, g}), "occupancy must be 0 or 1");
                    sc.sat_occupancy[sc.y_index(n, i, g)] = static_cast<std::uint8_t>(v);
                }
        const auto& geo = field(j, "geometry", "scenario");
        const auto& uav = field(geo, "uav_pos", "geometry");
        sc.geometry.uav_pos.resize(static_cast<std::size_t>(N) * K);
        for (int n = 0; n < N; ++n)
            for (int k = 0; k < K; ++k)
                sc.geometry.uav_pos[std::size_t(n) * K + k] =
                    detail::vec3_from(uav.at(n).at(k), idx_ctx("geometry.uav_pos", {n, k}));
        const auto& up = field(geo, "uav_user_pos", "geometry");
        sc.geometry.uav_user_pos.resize(sc.total_users());
        for (int n = 0; n < N; ++n)
            for (int u = 0; u < sc.users_per_slot[n]; ++u)
                sc.geometry.uav_user_pos[sc.user_id(n, u)] =
                    detail::vec3_from(up.at(n).at(u), idx_ctx("geometry.uav_user_pos", {n, u}));
        const auto& sp = field(geo, "sat_user_pos", "geometry");
        sc.geometry.sat_user_pos.resize(Ns);
        for (int i = 0; i < Ns; ++i)
            sc.geometry.sat_user_pos[i] =
                detail::vec3_from(sp.at(i), idx_ctx("geometry.sat_user_pos", {i}));
    } catch (const ParseError&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("scenario tensors", e.what());
    }

    try {
        validate_scenario(sc);
    } catch (const std::invalid_argument& e) {
        throw ParseError("scenario", e.what());
    }
    return sc;
}

inline void save_scenario(const Scenario& sc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_scenario: cannot open " + path);
    out << scenario_to_json(sc).dump() << '\n';
    if (!out) throw std::runtime_error("save_scenario: write failed for " + path);
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, "cannot open file");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path, e.what());
    }
    return scenario_from_json(j);
}

inline ScenarioConfig config_from_json(const nlohmann::json& j) {
    ScenarioConfig cfg;
    try {
        if (j.contains("preset")) {
            const auto p = j["preset"].get<std::string>();
            if (p == "desk")
                cfg = desk_config();
            else if (p == "paper")
                cfg = paper_config();
            else
                throw ParseError("preset", "unknown preset '" + p + "'");
        }
        auto opt = [&](const char* name, auto& target) {
            if (j.contains(name)) target = j[name].get<std::decay_t<decltype(target)>>();
        };
        opt("area_x_m", cfg.area_x);
        opt("area_y_m", cfg.area_y);
        opt("uav_altitude_m", cfg.uav_altitude);
        opt("swarm_radius_m", cfg.swarm_radius);
        opt("num_uavs", cfg.num_uavs);
        opt("antennas_per_user", cfg.antennas_per_user);
        opt("num_subchannels", cfg.num_subchannels);
        opt("num_slots", cfg.num_slots);
        if (j.contains("users_per_slot")) {
            const auto& ups = j["users_per_slot"];
            if (ups.is_array())
                cfg.users_per_slot = ups.get<std::vector<int>>();
            else
                cfg.users_per_slot.assign(cfg.num_slots, ups.get<int>());
        } else if (static_cast<int>(cfg.users_per_slot.size()) != cfg.num_slots) {
            cfg.users_per_slot.assign(cfg.num_slots, cfg.users_per_slot.empty()
                                                         ? 4
                                                         : cfg.users_per_slot.front());
        }
        opt("num_sat_users", cfg.num_sat_users);
        opt("carrier_freq_hz", cfg.carrier_freq);
        opt("noise_power_w", cfg.noise_power);
        opt("atten_db_per_km", cfg.atten_db_per_km);
        opt("occupancy_density", cfg.occupancy_density);
        opt("subchannel_jitter_db", cfg.subchannel_jitter_db);
        opt("seed", cfg.seed);
    } catch (const ParseError&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("scenario config", e.what());
    }
    return cfg;
}

inline ScenarioConfig load_scenario_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, "cannot open file");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path, e.what());
    }
    return config_from_json(j);
}

}  // namespace csun
