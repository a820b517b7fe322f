#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "csun/bench.hpp"
#include "csun/channel.hpp"
#include "csun/io.hpp"
#include "csun/maxmin_alloc.hpp"
#include "csun/sum_alloc.hpp"

namespace {

csun::ScenarioConfig resolve_config(const std::string& spec) {
    if (spec == "desk") return csun::desk_config();
    if (spec == "paper") return csun::paper_config();
    return csun::load_scenario_config(spec);
}

int run_gen(const std::string& config, std::uint64_t seed, bool seed_set,
            const std::string& out) {
    csun::ScenarioConfig cfg = resolve_config(config);
    if (seed_set) cfg.seed = seed;
    csun::Scenario sc = csun::generate_scenario(cfg);
    csun::save_scenario(sc, out);
    std::cout << "wrote " << out << " (slots=" << sc.num_slots << " users=" << sc.total_users()
              << " subchannels=" << sc.num_subchannels << " uavs=" << sc.num_uavs << ")\n";
    return 0;
}

int run_solve(const std::string& objective, const std::string& scenario_path,
              const std::string& constraints_path, const std::string& trace_path,
              const std::string& out_path, int mc_samples, std::uint64_t mc_seed) {
    const csun::Scenario sc = csun::load_scenario(scenario_path);
    const csun::ConstraintSet cs = csun::load_constraints(constraints_path);
    csun::SolverConfig config;

    csun::JointResult res;
    std::string label;
    if (objective == "sum") {
        res = csun::joint_sum(sc, cs, config);
        label = "D_a";
    } else {
        res = csun::joint_maxmin(sc, cs, config);
        label = "tau";
    }

    const auto rep = csun::check_feasibility(res.alloc, sc, cs);
    std::cout << label << "=" << csun::format_double(res.objective)
              << " outer_iters=" << res.outer_iters << " converged=" << (res.converged ? 1 : 0)
              << " worst_violation=" << csun::format_double(rep.worst_relative) << '\n';

    nlohmann::json meta{{"objective", objective},
                        {"value", res.objective},
                        {"outer_iters", res.outer_iters},
                        {"converged", res.converged},
                        {"worst_violation", rep.worst_relative}};
    if (mc_samples > 0) {
        const auto mc = csun::mc_objectives(res.alloc, sc, mc_samples, mc_seed);
        std::cout << "mc_D_e=" << csun::format_double(mc.d_e)
                  << " mc_D_min=" << csun::format_double(mc.d_min) << '\n';
        meta["mc_d_e"] = mc.d_e;
        meta["mc_d_min"] = mc.d_min;
        meta["mc_samples"] = mc_samples;
    }
    if (!trace_path.empty()) csun::write_trace_csv(res.trace, label, trace_path);
    if (!out_path.empty()) csun::save_allocation(res.alloc, sc, out_path, std::move(meta));
    return 0;
}

int run_sweep(const std::string& param, const std::vector<double>& values, int snapshots,
              std::uint64_t seed, const std::string& out, const std::string& preset,
              int mc_samples, double e_total, bool deterministic_timing, int workers) {
    csun::SweepConfig cfg;
    cfg.param = param;
    cfg.values = values;
    cfg.snapshots = snapshots;
    cfg.seed = seed;
    cfg.base = preset == "paper" ? csun::paper_config() : csun::desk_config();
    cfg.mc_samples = mc_samples;
    cfg.e_total = e_total;
    cfg.deterministic_timing = deterministic_timing;
    cfg.workers = workers;
    const auto rows = csun::run_sweep(cfg);
    csun::write_sweep_csv(rows, out);
    std::cout << "wrote " << out << " (" << rows.size() << " rows)\n";
    return 0;
}

int run_coverage(const std::string& scenario_path, const std::string& alloc_path,
                 double threshold_dbm, const std::string& grid, const std::string& out,
                 double atten, std::vector<double> extent) {
    const csun::Scenario sc = csun::load_scenario(scenario_path);
    const csun::Allocation alloc = csun::load_allocation(alloc_path, sc);

    const auto xpos = grid.find('x');
    if (xpos == std::string::npos)
        throw std::invalid_argument("grid must look like 200x200");
    int nx = 0, ny = 0;
    try {
        nx = std::stoi(grid.substr(0, xpos));
        ny = std::stoi(grid.substr(xpos + 1));
    } catch (const std::exception&) {
        throw std::invalid_argument("grid must look like 200x200");
    }

    if (extent.empty()) {
        // default to the bounding box of everything placed in the scenario
        double x0 = csun::kInf, y0 = csun::kInf, x1 = -csun::kInf, y1 = -csun::kInf;
        auto take = [&](const csun::Vec3& v) {
            x0 = std::min(x0, v.x);
            y0 = std::min(y0, v.y);
            x1 = std::max(x1, v.x);
            y1 = std::max(y1, v.y);
        };
        for (const auto& v : sc.geometry.uav_pos) take(v);
        for (const auto& v : sc.geometry.uav_user_pos) take(v);
        for (const auto& v : sc.geometry.sat_user_pos) take(v);
        extent = {x0, y0, x1, y1};
    }
    const auto grid_map =
        csun::coverage_map(alloc, sc, nx, ny, extent[0], extent[1], extent[2], extent[3],
                           csun::dbm_to_watts(threshold_dbm), atten);
    csun::write_coverage_csv(grid_map, out);
    std::size_t covered = 0;
    for (auto b : grid_map.mask) covered += b != 0;
    std::cout << "wrote " << out << " (" << covered << " covered cell entries)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"resource allocation for a cognitive satellite-UAV network"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen", "generate a scenario JSON file");
    std::string gen_config = "desk", gen_out;
    std::uint64_t gen_seed = 0;
    auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "RNG seed override");
    gen->add_option("--config", gen_config, "config JSON file or preset name (desk, paper)");
    gen->add_option("--out", gen_out, "output scenario path")->required();

    auto* solve = app.add_subcommand("solve", "run a joint allocation solver");
    std::string so_objective, so_scenario, so_constraints, so_trace, so_out;
    int so_mc_samples = 0;
    std::uint64_t so_mc_seed = 1;
    solve->add_option("--objective", so_objective, "sum or maxmin")
        ->required()
        ->check(CLI::IsMember({"sum", "maxmin"}));
    solve->add_option("--scenario", so_scenario, "scenario JSON")->required();
    solve->add_option("--constraints", so_constraints, "constraints JSON")->required();
    solve->add_option("--trace", so_trace, "write per-phase objective trace CSV here");
    solve->add_option("--out", so_out, "write the allocation JSON here");
    solve->add_option("--mc-samples", so_mc_samples, "validate with this many Monte Carlo draws");
    solve->add_option("--mc-seed", so_mc_seed, "Monte Carlo seed");

    auto* sweep = app.add_subcommand("sweep", "parameter sweep across solver arms");
    std::string sw_param, sw_out, sw_preset = "desk";
    std::vector<double> sw_values;
    int sw_snapshots = 1, sw_mc_samples = 10000;
    std::uint64_t sw_seed = 1;
    double sw_e_total = 30.0;
    bool sw_det_timing = false;
    sweep->add_option("--param", sw_param, "eps_p, num_uavs, num_subchannels or e_total")
        ->required();
    sweep->add_option("--values", sw_values, "comma separated parameter values")
        ->required()
        ->delimiter(',');
    sweep->add_option("--snapshots", sw_snapshots, "scenario draws per value");
    sweep->add_option("--seed", sw_seed, "sweep seed");
    sweep->add_option("--out", sw_out, "output CSV path")->required();
    sweep->add_option("--preset", sw_preset, "base scenario preset")
        ->check(CLI::IsMember({"desk", "paper"}));
    sweep->add_option("--mc-samples", sw_mc_samples, "Monte Carlo draws per objective estimate");
    sweep->add_option("--e-total", sw_e_total, "total communication energy budget in joules");
    sweep->add_flag("--deterministic-timing", sw_det_timing, "write 0.0 for wall_ms");
    int sw_workers = 0;
    sweep->add_option("--workers", sw_workers, "worker threads (0 = hardware concurrency)");

    auto* coverage = app.add_subcommand("coverage", "rasterize the covered region");
    std::string cov_scenario, cov_alloc, cov_grid = "200x200", cov_out;
    double cov_threshold = -92.0, cov_atten = 0.0;
    std::vector<double> cov_extent;
    coverage->add_option("--scenario", cov_scenario, "scenario JSON")->required();
    coverage->add_option("--alloc", cov_alloc, "allocation JSON")->required();
    coverage->add_option("--threshold-dbm", cov_threshold, "receive power threshold in dBm");
    coverage->add_option("--grid", cov_grid, "raster size, e.g. 200x200");
    coverage->add_option("--out", cov_out, "output CSV path")->required();
    coverage->add_option("--atten", cov_atten, "extra attenuation in dB per km");
    coverage->add_option("--extent", cov_extent, "x0,y0,x1,y1 in meters")
        ->delimiter(',')
        ->expected(4);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed())
            return run_gen(gen_config, gen_seed, gen_seed_opt->count() > 0, gen_out);
        if (solve->parsed())
            return run_solve(so_objective, so_scenario, so_constraints, so_trace, so_out,
                             so_mc_samples, so_mc_seed);
        if (sweep->parsed())
            return run_sweep(sw_param, sw_values, sw_snapshots, sw_seed, sw_out, sw_preset,
                             sw_mc_samples, sw_e_total, sw_det_timing, sw_workers);
        if (coverage->parsed())
            return run_coverage(cov_scenario, cov_alloc, cov_threshold, cov_grid, cov_out,
                                cov_atten, cov_extent);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
