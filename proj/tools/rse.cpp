// rse: command-line front end (simulate, cluster, check, sweep).
#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "rse/config.hpp"
#include "rse/error.hpp"
#include "rse/pipeline.hpp"

namespace fs = std::filesystem;
using namespace rse;

namespace {

struct RunConfig {
  std::string grid = "rts24";
  std::string scenario = "loadstep.cfg";
  std::string output_dir = "out";
  std::vector<std::string> overrides;
  std::optional<double> theta, dt, margin;
  std::optional<long> target_K;
  long seed = 0;  // reserved; the pipeline is deterministic
};

fs::path resolve(const std::string& arg, const char* ext) {
  const fs::path p(arg);
  if (fs::exists(p)) return p;
  const fs::path d = fs::path(RSE_DATA_DIR) / p;
  if (fs::exists(d)) return d;
  fs::path with = d;
  with += ext;
  if (p.extension().empty() && fs::exists(with)) return with;
  throw Error(ErrorCode::ConfigInvalid, "file not found: " + arg);
}

fs::path output_dir(const RunConfig& c) {
  fs::path d = c.output_dir;
  if (const char* env = std::getenv("RSE_OUTPUT_DIR"); env && *env) d = env;
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw Error(ErrorCode::ConfigInvalid, "cannot create output directory " + d.string());
  return d;
}

void write_json(const fs::path& p, const nlohmann::json& j) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorCode::ConfigInvalid, "cannot write " + p.string());
  f << j.dump(2) << "\n";
}

std::pair<GridSpec, ScenarioSpec> load(const RunConfig& c) {
  GridSpec g = parse_grid_file(resolve(c.grid, ".grid"));
  ScenarioSpec s = parse_scenario_file(resolve(c.scenario, ".cfg"));
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigInvalid, "override must be key=value: " + kv);
    apply_override(s, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.theta) apply_override(s, "theta", format_double(*c.theta));
  if (c.target_K) apply_override(s, "target_K", std::to_string(*c.target_K));
  if (c.dt) apply_override(s, "dt", format_double(*c.dt));
  if (c.margin) apply_override(s, "margin", format_double(*c.margin));
  return {g, s};
}

IndexSet trusted_of(const GridModel& model, const ScenarioSpec& s) {
  IndexSet attacked;
  if (s.attack) attacked = build_attack(model, *s.attack).attacked;
  std::sort(attacked.begin(), attacked.end());
  return complement(attacked, model.sys.outputs());
}

void write_sweep_csv(const fs::path& p, const std::vector<SweepRow>& rows) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorCode::ConfigInvalid, "cannot write " + p.string());
  f << "K,theta,approx_error,fully_covered\n";
  for (const auto& r : rows) {
    f << r.K << "," << format_double(r.theta) << "," << format_double(r.approx_error) << ","
      << (r.covered ? 1 : 0) << "\n";
  }
}

void print_sweep(const std::vector<SweepRow>& rows) {
  std::cout << std::setw(6) << "K" << std::setw(16) << "theta" << std::setw(16) << "approx_error"
            << "\n";
  for (const auto& r : rows) {
    std::cout << std::setw(6) << r.K << std::setw(16) << r.theta << std::setw(16) << r.approx_error
              << "\n";
  }
}

std::vector<SweepRow> sweep_for(const GridSpec& g, const ScenarioSpec& s, const GridModel& model) {
  const SubspaceDecomposition dec = stable_subspace(model.sys);
  const SimilarityFactor phi = compute_phi(model.sys, dec);
  const SimResult plant = simulate_plant(model, s);
  (void)g;
  return cluster_sweep(phi, plant.y, default_sweep(s, model.sys.outputs()), trusted_of(model, s));
}

int cmd_simulate(const RunConfig& c) {
  auto [g, s] = load(c);
  const fs::path out = output_dir(c);
  const PipelineResult r = run_pipeline(g, s);
  write_csv(r.sim, out / "simulate.csv");
  write_json(out / "metrics.json", metrics_json(r));
  write_json(out / "pipeline.json", pipeline_json(r));
  if (r.clusters) {
    write_json(out / "cluster_report.json",
               cluster_report_json(r.phi, *r.clusters, trusted_of(r.model, s), r.model, r.error_poles));
  }
  std::cout << "estimator: " << to_string(r.path) << "\n";
  if (r.sim.has_estimator) std::cout << "state_rmse: " << r.sim.metrics.state_rmse << "\n";
  if (r.sim.metrics.approx_error) std::cout << "approx_error: " << *r.sim.metrics.approx_error << "\n";
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

int cmd_cluster(const RunConfig& c) {
  auto [g, s] = load(c);
  const fs::path out = output_dir(c);
  const GridModel model = s.sensors ? assemble_state_space(g, *s.sensors) : assemble_state_space(g);
  const SubspaceDecomposition dec = stable_subspace(model.sys);
  const SimilarityFactor phi = compute_phi(model.sys, dec);
  const IndexSet trusted = trusted_of(model, s);
  const Dendrogram dendro = build_dendrogram(phi);
  ClusterSet cs;
  if (s.theta) cs = form_clusters(phi, dendro, *s.theta, trusted);
  else if (s.target_K) cs = form_clusters_k(phi, dendro, *s.target_K, trusted);
  else cs = form_clusters(phi, dendro, min_theta_for_coverage(phi, dendro, trusted), trusted);
  std::optional<ErrorSystemPoles> poles;
  if (cs.fully_covered()) poles = error_system_poles(model.sys, dec, cs.Pi);
  write_json(out / "cluster_report.json", cluster_report_json(phi, cs, trusted, model, poles));
  const auto rows = sweep_for(g, s, model);
  write_json(out / "sweep.json", sweep_json(rows));
  write_sweep_csv(out / "sweep.csv", rows);
  std::cout << "K = " << cs.size() << ", theta = " << cs.theta
            << ", covered = " << (cs.fully_covered() ? "yes" : "no") << "\n";
  print_sweep(rows);
  return 0;
}

int cmd_sweep(const RunConfig& c) {
  auto [g, s] = load(c);
  const fs::path out = output_dir(c);
  const GridModel model = s.sensors ? assemble_state_space(g, *s.sensors) : assemble_state_space(g);
  const auto rows = sweep_for(g, s, model);
  write_json(out / "sweep.json", sweep_json(rows));
  write_sweep_csv(out / "sweep.csv", rows);
  print_sweep(rows);
  return 0;
}

int cmd_check(const RunConfig& c) {
  auto [g, s] = load(c);
  const auto rows = run_checks(g, s);
  bool all = true;
  for (const auto& r : rows) {
    std::cout << (r.pass ? "PASS " : "FAIL ") << std::left << std::setw(30) << r.name << std::right
              << std::setw(14) << r.value << "  bound " << r.bound;
    if (!r.detail.empty()) std::cout << "  " << r.detail;
    std::cout << "\n";
    all = all && r.pass;
  }
  const fs::path out = output_dir(c);
  write_json(out / "checks.json", checks_json(rows));
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clustering-based resilient state estimation for power grids"};
  app.require_subcommand(1);
  RunConfig cfg;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--grid", cfg.grid, "grid name (in the data directory) or path")->capture_default_str();
    sub->add_option("--scenario", cfg.scenario, "scenario name or path")->capture_default_str();
    sub->add_option("--output-dir,-o", cfg.output_dir, "output directory (env RSE_OUTPUT_DIR wins)")
        ->capture_default_str();
    sub->add_option("--set", cfg.overrides, "key=value override (theta, target_K, dt, record_dt, "
                                            "duration, margin, metrics_start, estimator, sensors)");
    sub->add_option("--theta", cfg.theta, "clustering threshold");
    sub->add_option("--target-K", cfg.target_K, "cluster count");
    sub->add_option("--dt", cfg.dt, "integration step");
    sub->add_option("--margin", cfg.margin, "observer decay margin");
    sub->add_option("--seed", cfg.seed, "reserved; runs are deterministic");
  };
  auto* sim = app.add_subcommand("simulate", "run the full pipeline and write CSV + JSON");
  auto* clu = app.add_subcommand("cluster", "cluster report and K sweep");
  auto* chk = app.add_subcommand("check", "invariant diagnostics table");
  auto* swp = app.add_subcommand("sweep", "approximation error across cluster counts");
  for (auto* s : {sim, clu, chk, swp}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(cfg);
    if (clu->parsed()) return cmd_cluster(cfg);
    if (chk->parsed()) return cmd_check(cfg);
    if (swp->parsed()) return cmd_sweep(cfg);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_config_error() ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
