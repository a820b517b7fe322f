#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "csun/bench.hpp"

namespace csun {

// shortest decimal string that round-trips the double
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return {buf, res.ptr};
}

inline ConstraintSet constraints_from_json(const nlohmann::json& j) {
    auto field = [&](const char* name) -> const nlohmann::json& {
        if (!j.contains(name)) throw ParseError(std::string("constraints.") + name, "missing field");
        return j.at(name);
    };
    ConstraintSet cs;
    try {
        cs.eps_p = dbm_to_watts(field("eps_p_dbm").get<double>());
        cs.e_com = field("e_com_joules").get<std::vector<double>>();
        cs.p_max = field("p_max_watts").get<double>();
        cs.t_total = field("t_total_s").get<double>();
        cs.t_max = field("t_max_s").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("constraints", e.what());
    }
    return cs;
}

inline nlohmann::json constraints_to_json(const ConstraintSet& cs) {
    return {{"eps_p_dbm", watts_to_dbm(cs.eps_p)},
            {"e_com_joules", cs.e_com},
            {"p_max_watts", cs.p_max},
            {"t_total_s", cs.t_total},
            {"t_max_s", cs.t_max}};
}

inline ConstraintSet load_constraints(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, "cannot open file");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path, e.what());
    }
    return constraints_from_json(j);
}

inline void save_constraints(const ConstraintSet& cs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError(path, "cannot open file for writing");
    out << constraints_to_json(cs).dump(2) << '\n';
}

inline nlohmann::json allocation_to_json(const Allocation& alloc, const Scenario& sc,
                                         nlohmann::json meta = {}) {
    nlohmann::json jx = nlohmann::json::array();
    for (int id = 0; id < sc.total_users(); ++id) {
        nlohmann::json row = nlohmann::json::array();
        for (int g = 0; g < sc.num_subchannels; ++g)
            row.push_back(static_cast<int>(
                alloc.x[static_cast<std::size_t>(id) * sc.num_subchannels + g]));
        jx.push_back(std::move(row));
    }
    nlohmann::json jp = nlohmann::json::array();
    for (int n = 0; n < sc.num_slots; ++n) {
        nlohmann::json jg = nlohmann::json::array();
        for (int g = 0; g < sc.num_subchannels; ++g) {
            nlohmann::json jk = nlohmann::json::array();
            for (int k = 0; k < sc.num_uavs; ++k) jk.push_back(alloc.p[sc.p_index(n, g, k)]);
            jg.push_back(std::move(jk));
        }
        jp.push_back(std::move(jg));
    }
    nlohmann::json out{{"x", std::move(jx)}, {"p", std::move(jp)}, {"t", alloc.t}};
    if (!meta.is_null() && !meta.empty()) out["meta"] = std::move(meta);
    return out;
}

inline Allocation allocation_from_json(const nlohmann::json& j, const Scenario& sc) {
    Allocation alloc = zero_allocation(sc);
    try {
        const auto& jx = j.at("x");
        if (static_cast<int>(jx.size()) != sc.total_users())
            throw ParseError("allocation.x", "row count must equal the user count");
        for (int id = 0; id < sc.total_users(); ++id) {
            const auto& row = jx.at(id);
            if (static_cast<int>(row.size()) != sc.num_subchannels)
                throw ParseError("allocation.x", "row width must equal num_subchannels");
            for (int g = 0; g < sc.num_subchannels; ++g) {
                const int v = row.at(g).get<int>();
                if (v != 0 && v != 1) throw ParseError("allocation.x", "entries must be 0/1");
                alloc.x[static_cast<std::size_t>(id) * sc.num_subchannels + g] =
                    static_cast<std::uint8_t>(v);
            }
        }
        const auto& jp = j.at("p");
        for (int n = 0; n < sc.num_slots; ++n)
            for (int g = 0; g < sc.num_subchannels; ++g)
                for (int k = 0; k < sc.num_uavs; ++k)
                    alloc.p[sc.p_index(n, g, k)] = jp.at(n).at(g).at(k).get<double>();
        alloc.t = j.at("t").get<std::vector<double>>();
        if (static_cast<int>(alloc.t.size()) != sc.num_slots)
            throw ParseError("allocation.t", "size must equal num_slots");
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("allocation", e.what());
    }
    return alloc;
}

inline void save_allocation(const Allocation& alloc, const Scenario& sc, const std::string& path,
                            nlohmann::json meta = {}) {
    std::ofstream out(path);
    if (!out) throw ParseError(path, "cannot open file for writing");
    out << allocation_to_json(alloc, sc, std::move(meta)).dump(2) << '\n';
}

inline Allocation load_allocation(const std::string& path, const Scenario& sc) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, "cannot open file");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path, e.what());
    }
    return allocation_from_json(j, sc);
}

// objective_label names the third column: D_a for the sum solver, tau for max-min
inline std::string trace_csv(const std::vector<TraceRow>& rows,
                             const std::string& objective_label) {
    std::ostringstream os;
    os << "outer_iter,phase," << objective_label << ",worst_violation\n";
    for (const auto& r : rows)
        os << r.outer_iter << ',' << r.phase << ',' << format_double(r.objective) << ','
           << format_double(r.worst_violation) << '\n';
    return os.str();
}

inline void write_trace_csv(const std::vector<TraceRow>& rows, const std::string& objective_label,
                            const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError(path, "cannot open file for writing");
    out << trace_csv(rows, objective_label);
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "param,value,snapshot,arm,D_e,D_min,outer_iters,wall_ms\n";
    for (const auto& r : rows)
        os << r.param << ',' << format_double(r.value) << ',' << r.snapshot << ',' << r.arm << ','
           << format_double(r.d_e) << ',' << format_double(r.d_min) << ',' << r.outer_iters << ','
           << format_double(r.wall_ms) << '\n';
    return os.str();
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError(path, "cannot open file for writing");
    out << sweep_csv(rows);
}

// covered cells only; a P = 0 allocation therefore produces just the header
inline std::string coverage_csv(const CoverageGrid& grid) {
    std::ostringstream os;
    os << "slot,subchannel,iy,ix,x_m,y_m\n";
    for (int n = 0; n < grid.num_slots; ++n)
        for (int g = 0; g < grid.num_subchannels; ++g)
            for (int iy = 0; iy < grid.ny; ++iy)
                for (int ix = 0; ix < grid.nx; ++ix)
                    if (grid.covered(n, g, iy, ix))
                        os << n << ',' << g << ',' << iy << ',' << ix << ','
                           << format_double(grid.cell_x(ix)) << ','
                           << format_double(grid.cell_y(iy)) << '\n';
    return os.str();
}

inline void write_coverage_csv(const CoverageGrid& grid, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError(path, "cannot open file for writing");
    out << coverage_csv(grid);
}

}  // namespace csun
