#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rse/attack.hpp"
#include "rse/clustering.hpp"
#include "rse/grid.hpp"
#include "rse/observer.hpp"
#include "rse/sim.hpp"

namespace rse {

enum class EstimatorMode { Auto, None, Standard, Resilient };

struct LoadStep {
  int bus = 0;
  double delta = 0.0;
  double t_on = 0.0;
  double t_off = 0.0;
};

/// One `[attack]` row: a sensor selector and its signal.
struct AttackEntry {
  std::string selector;
  AttackSignal signal;
};

struct AttackSpec {
  double t_start = 0.0;
  double t_end = 0.0;
  std::vector<AttackEntry> entries;
};

/// Scenario file contents (same dialect as grid files).
struct ScenarioSpec {
  double duration = 400.0;
  double dt = 1e-3;
  double record_dt = 0.1;
  double metrics_start = 0.0;
  std::vector<LoadStep> load_events;
  std::optional<std::vector<Sensor>> sensors;  // default: all frequency + all power
  std::optional<AttackSpec> attack;
  EstimatorMode estimator = EstimatorMode::Auto;
  std::optional<double> theta;
  std::optional<long> target_K;
  double margin = 0.1;
  std::vector<long> sweep_K;  // empty: {5, 10, 21, 40, m} clipped to m
};

ScenarioSpec parse_scenario(const std::string& text, const std::string& source = "<string>");
ScenarioSpec parse_scenario_file(const std::filesystem::path& path);

/// key=value override (theta, target_K, dt, record_dt, duration, margin,
/// metrics_start, estimator, sensors). Throws ConfigInvalid.
void apply_override(ScenarioSpec& spec, const std::string& key, const std::string& value);

/// Selector syntax: a sensor name (`w_b3`, `P_b3`), `w_*`, `P_*`, `*`,
/// or `w_gen`, `w_load`, `P_gen`, `P_load`. Throws UnknownQuantity.
IndexSet resolve_selector(const GridModel& model, const std::string& selector);

AttackScenario build_attack(const GridModel& model, const AttackSpec& spec);

struct SweepRow {
  Eigen::Index K = 0;
  double theta = 0.0;
  double approx_error = 0.0;
  bool covered = false;
};

struct PipelineResult {
  GridSpec grid;
  GridModel model;
  ScenarioSpec scenario;
  SubspaceDecomposition dec;
  SimilarityFactor phi;
  std::optional<AttackScenario> attack;
  std::optional<Classification> classification;
  EstimatorMode path = EstimatorMode::None;
  std::optional<ClusterSet> clusters;
  std::optional<Matrix> C_bar;
  std::optional<ObservabilityResult> augmented_rank;
  std::optional<ErrorSystemPoles> error_poles;
  std::optional<ObserverDesign> design;
  SimResult sim;
};

/// parse -> assemble -> classify -> cluster -> augment -> design -> simulate
/// -> metrics. Errors are re-thrown with the failing stage prepended.
PipelineResult run_pipeline(const GridSpec& grid, const ScenarioSpec& scenario);
PipelineResult run_pipeline(const std::filesystem::path& grid_file,
                            const std::filesystem::path& scenario_file);

/// Plant-only simulation output for the scenario's load events.
SimResult simulate_plant(const GridModel& model, const ScenarioSpec& scenario);

/// (K, theta, aggregate approximation error) for each K, from recorded
/// outputs Y (T x m). Runs in parallel over K; rows are returned in input order.
std::vector<SweepRow> cluster_sweep(const SimilarityFactor& phi, const Matrix& Y,
                                    const std::vector<long>& Ks, const IndexSet& trusted);
std::vector<long> default_sweep(const ScenarioSpec& spec, Eigen::Index m);

struct CheckRow {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool pass = false;
  std::string detail;
};

/// Invariant diagnostics for a grid + scenario.
std::vector<CheckRow> run_checks(const GridSpec& grid, const ScenarioSpec& scenario);

nlohmann::json cluster_report_json(const SimilarityFactor& phi, const ClusterSet& clusters,
                                   const IndexSet& trusted, const GridModel& model,
                                   const std::optional<ErrorSystemPoles>& poles);
nlohmann::json metrics_json(const PipelineResult& r);
nlohmann::json pipeline_json(const PipelineResult& r);
nlohmann::json sweep_json(const std::vector<SweepRow>& rows);
nlohmann::json checks_json(const std::vector<CheckRow>& rows);

/// Minimal JSON-Schema subset (type, required, properties, items, enum,
/// minimum). Returns an empty string when valid, else the first violation.
std::string validate_json(const nlohmann::json& doc, const nlohmann::json& schema);

std::string_view to_string(EstimatorMode mode);

}  // namespace rse
