#include "rse/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <thread>

#include "rse/config.hpp"
#include "rse/error.hpp"

namespace rse {

namespace {

[[noreturn]] void parse_fail(const std::string& source, int line, const std::string& msg) {
  throw Error(ErrorCode::ParseError, source + ":" + std::to_string(line) + ": " + msg);
}

EstimatorMode parse_mode(const std::string& v) {
  if (v == "auto") return EstimatorMode::Auto;
  if (v == "none") return EstimatorMode::None;
  if (v == "standard") return EstimatorMode::Standard;
  if (v == "resilient") return EstimatorMode::Resilient;
  throw Error(ErrorCode::ConfigInvalid, "estimator must be auto|none|standard|resilient, got '" + v + "'");
}

std::vector<Sensor> sensors_preset(const std::string& v) {
  if (v == "all" || v == "default") return {};
  throw Error(ErrorCode::ConfigInvalid, "sensors override must be 'all', got '" + v + "'");
}

AttackSignal parse_signal(const ConfigRow& r, const std::string& source) {
  AttackSignal s;
  const auto& f = r.fields;
  const std::string& kind = f[1];
  auto num = [&](size_t i, const char* name) { return to_double(f[i], source, r.line, name); };
  if (kind == "bias") {
    if (f.size() != 3) parse_fail(source, r.line, "bias needs: selector bias amplitude");
    s.kind = SignalKind::Bias;
    s.amplitude = num(2, "amplitude");
  } else if (kind == "ramp") {
    if (f.size() != 3) parse_fail(source, r.line, "ramp needs: selector ramp slope");
    s.kind = SignalKind::Ramp;
    s.slope = num(2, "slope");
  } else if (kind == "sinusoid") {
    if (f.size() != 4 && f.size() != 5) {
      parse_fail(source, r.line, "sinusoid needs: selector sinusoid amplitude frequency [phase]");
    }
    s.kind = SignalKind::Sinusoid;
    s.amplitude = num(2, "amplitude");
    s.frequency = num(3, "frequency");
    if (f.size() == 5) s.phase = num(4, "phase");
  } else {
    parse_fail(source, r.line, "unknown attack signal '" + kind + "'");
  }
  return s;
}

template <class F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.code(), std::string(stage) + ": " + e.message());
  }
}

nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

std::string_view to_string(EstimatorMode mode) {
  switch (mode) {
    case EstimatorMode::Auto: return "auto";
    case EstimatorMode::None: return "none";
    case EstimatorMode::Standard: return "standard";
    case EstimatorMode::Resilient: return "resilient";
  }
  return "none";
}

ScenarioSpec parse_scenario(const std::string& text, const std::string& source) {
  const ConfigDocument doc = parse_config(text, source);
  ScenarioSpec sp;
  static const std::set<std::string> known = {"scenario", "load_events", "sensors",
                                              "attack", "estimator", "sweep"};
  std::set<std::string> seen;
  for (const auto& s : doc.sections) {
    if (!known.count(s.name)) parse_fail(source, s.line, "unknown section [" + s.name + "]");
    if (!seen.insert(s.name).second) parse_fail(source, s.line, "duplicate section [" + s.name + "]");
  }
  auto d = [&](const ConfigEntry& e) { return to_double(e.value, source, e.line, e.key); };
  auto no_rows = [&](const ConfigSection& s) {
    if (!s.rows.empty()) parse_fail(source, s.rows[0].line, "unexpected row in [" + s.name + "]");
  };
  auto no_entries = [&](const ConfigSection& s) {
    if (!s.entries.empty()) {
      parse_fail(source, s.entries[0].line, "unexpected key '" + s.entries[0].key + "'");
    }
  };

  if (const auto* s = doc.find("scenario")) {
    no_rows(*s);
    for (const auto& e : s->entries) {
      if (e.key == "duration") sp.duration = d(e);
      else if (e.key == "dt") sp.dt = d(e);
      else if (e.key == "record_dt") sp.record_dt = d(e);
      else if (e.key == "metrics_start") sp.metrics_start = d(e);
      else parse_fail(source, e.line, "unknown key '" + e.key + "' in [scenario]");
    }
  }
  if (const auto* s = doc.find("load_events")) {
    no_entries(*s);
    for (const auto& r : s->rows) {
      if (r.fields.size() != 4) parse_fail(source, r.line, "load event needs: bus delta t_on t_off");
      sp.load_events.push_back({static_cast<int>(to_long(r.fields[0], source, r.line, "bus")),
                                to_double(r.fields[1], source, r.line, "delta"),
                                to_double(r.fields[2], source, r.line, "t_on"),
                                to_double(r.fields[3], source, r.line, "t_off")});
    }
  }
  if (const auto* s = doc.find("sensors")) {
    no_entries(*s);
    std::vector<Sensor> list;
    for (const auto& r : s->rows) {
      if (r.fields.size() != 2) parse_fail(source, r.line, "sensor needs: bus quantity");
      Sensor sn;
      sn.bus = static_cast<int>(to_long(r.fields[0], source, r.line, "bus"));
      sn.quantity = parse_quantity(r.fields[1]);
      list.push_back(sn);
    }
    sp.sensors = list;
  }
  if (const auto* s = doc.find("attack")) {
    AttackSpec a;
    bool has_start = false, has_end = false;
    for (const auto& e : s->entries) {
      if (e.key == "t_start") { a.t_start = d(e); has_start = true; }
      else if (e.key == "t_end") { a.t_end = d(e); has_end = true; }
      else parse_fail(source, e.line, "unknown key '" + e.key + "' in [attack]");
    }
    if (!has_start || !has_end) parse_fail(source, s->line, "[attack] needs t_start and t_end");
    for (const auto& r : s->rows) {
      if (r.fields.size() < 2) parse_fail(source, r.line, "attack row needs: selector kind params");
      a.entries.push_back({r.fields[0], parse_signal(r, source)});
    }
    sp.attack = a;
  }
  if (const auto* s = doc.find("estimator")) {
    no_rows(*s);
    for (const auto& e : s->entries) {
      if (e.key == "mode") sp.estimator = parse_mode(e.value);
      else if (e.key == "theta") sp.theta = d(e);
      else if (e.key == "target_K") sp.target_K = to_long(e.value, source, e.line, e.key);
      else if (e.key == "margin") sp.margin = d(e);
      else parse_fail(source, e.line, "unknown key '" + e.key + "' in [estimator]");
    }
  }
  if (const auto* s = doc.find("sweep")) {
    no_rows(*s);
    for (const auto& e : s->entries) {
      if (e.key != "K") parse_fail(source, e.line, "unknown key '" + e.key + "' in [sweep]");
      std::istringstream in(e.value);
      std::string tok;
      while (in >> tok) sp.sweep_K.push_back(to_long(tok, source, e.line, "K"));
    }
  }
  if (sp.theta && sp.target_K) {
    throw Error(ErrorCode::ConfigInvalid, source + ": set either theta or target_K, not both");
  }
  return sp;
}

ScenarioSpec parse_scenario_file(const std::filesystem::path& path) {
  return parse_scenario(read_text_file(path), path.string());
}

void apply_override(ScenarioSpec& sp, const std::string& key, const std::string& value) {
  auto num = [&]() {
    try {
      return to_double(value, "override", 0, key);
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigInvalid, "override " + key + ": " + e.message());
    }
  };
  if (key == "theta") {
    sp.theta = num();
    sp.target_K.reset();
  } else if (key == "target_K") {
    const double v = num();
    if (v != std::floor(v)) throw Error(ErrorCode::ConfigInvalid, "target_K must be an integer");
    sp.target_K = static_cast<long>(v);
    sp.theta.reset();
  } else if (key == "dt") {
    sp.dt = num();
  } else if (key == "record_dt") {
    sp.record_dt = num();
  } else if (key == "duration") {
    sp.duration = num();
  } else if (key == "margin") {
    sp.margin = num();
  } else if (key == "metrics_start") {
    sp.metrics_start = num();
  } else if (key == "estimator") {
    sp.estimator = parse_mode(value);
  } else if (key == "sensors") {
    sensors_preset(value);
    sp.sensors.reset();
  } else {
    throw Error(ErrorCode::ConfigInvalid, "unknown override key '" + key + "'");
  }
}

IndexSet resolve_selector(const GridModel& model, const std::string& sel) {
  IndexSet out;
  const auto& s = model.sensors;
  for (size_t i = 0; i < s.size(); ++i) {
    const bool w = s[i].quantity == Quantity::Frequency;
    const bool gen = model.index.is_generator(s[i].bus);
    bool hit = false;
    if (sel == "*") hit = true;
    else if (sel == "w_*") hit = w;
    else if (sel == "P_*") hit = !w;
    else if (sel == "w_gen") hit = w && gen;
    else if (sel == "w_load") hit = w && !gen;
    else if (sel == "P_gen") hit = !w && gen;
    else if (sel == "P_load") hit = !w && !gen;
    else hit = sensor_name(s[i]) == sel;
    if (hit) out.push_back(static_cast<Eigen::Index>(i));
  }
  if (out.empty()) {
    throw Error(ErrorCode::UnknownQuantity, "attack selector '" + sel + "' matches no sensor");
  }
  return out;
}

AttackScenario build_attack(const GridModel& model, const AttackSpec& spec) {
  AttackScenario a;
  a.t_start = spec.t_start;
  a.t_end = spec.t_end;
  for (const auto& e : spec.entries) {
    for (auto i : resolve_selector(model, e.selector)) {
      if (std::find(a.attacked.begin(), a.attacked.end(), i) != a.attacked.end()) {
        throw Error(ErrorCode::ValidationError,
                    "sensor " + sensor_name(model.sensors[static_cast<size_t>(i)]) +
                        " is attacked by more than one row");
      }
      a.attacked.push_back(i);
      a.signals.push_back(e.signal);
    }
  }
  a.validate(model.sys.outputs());
  return a;
}

namespace {

SimOptions base_options(const GridModel& model, const ScenarioSpec& sp) {
  SimOptions o;
  o.duration = sp.duration;
  o.dt = sp.dt;
  o.record_dt = sp.record_dt;
  o.metrics_start = sp.metrics_start;
  o.disturbance = model.disturbance;
  for (const auto& ev : sp.load_events) {
    const auto& lb = model.index.load_buses;
    const auto it = std::find(lb.begin(), lb.end(), ev.bus);
    if (it == lb.end()) {
      throw Error(ErrorCode::UnknownBus,
                  "load event at bus " + std::to_string(ev.bus) + ", which is not a load bus");
    }
    o.events.push_back({it - lb.begin(), ev.delta, ev.t_on, ev.t_off});
  }
  return o;
}

void name_result(SimResult& r, const GridModel& model) {
  r.state_names = model.index.state_names();
  r.output_names.clear();
  for (const auto& s : model.sensors) r.output_names.push_back(sensor_name(s));
}

}  // namespace

SimResult simulate_plant(const GridModel& model, const ScenarioSpec& sp) {
  SimOptions o = base_options(model, sp);
  SimResult r = simulate(model.sys, o);
  name_result(r, model);
  return r;
}

PipelineResult run_pipeline(const std::filesystem::path& grid_file,
                            const std::filesystem::path& scenario_file) {
  const GridSpec g = staged("parse grid", [&] { return parse_grid_file(grid_file); });
  const ScenarioSpec s = staged("parse scenario", [&] { return parse_scenario_file(scenario_file); });
  return run_pipeline(g, s);
}

PipelineResult run_pipeline(const GridSpec& grid, const ScenarioSpec& sp) {
  PipelineResult R;
  R.grid = grid;
  R.scenario = sp;
  R.model = staged("assemble", [&] {
    return sp.sensors ? assemble_state_space(grid, *sp.sensors) : assemble_state_space(grid);
  });
  const LtiSystem& sys = R.model.sys;
  const Eigen::Index m = sys.outputs();
  R.dec = staged("decompose", [&] { return stable_subspace(sys); });
  R.phi = staged("similarity", [&] { return compute_phi(sys, R.dec); });

  IndexSet attacked;
  if (sp.attack) {
    staged("attack", [&] {
      R.attack = build_attack(R.model, *sp.attack);
      attacked = R.attack->attacked;
      std::sort(attacked.begin(), attacked.end());
      R.classification = classify(sys, sys.C, attacked);
    });
  }
  const IndexSet trusted = complement(attacked, m);

  EstimatorMode path = sp.estimator;
  if (path == EstimatorMode::Auto) {
    path = (R.classification && R.classification->kind == AttackClass::RequiresAugmentation)
               ? EstimatorMode::Resilient
               : EstimatorMode::Standard;
  }
  R.path = path;

  SimOptions opts = staged("simulate", [&] { return base_options(R.model, sp); });
  if (sp.attack) opts.attack = R.attack;

  if (path == EstimatorMode::Resilient) {
    staged("cluster", [&] {
      const Dendrogram dendro = build_dendrogram(R.phi);
      if (sp.theta) {
        R.clusters = form_clusters(R.phi, dendro, *sp.theta, trusted);
      } else if (sp.target_K) {
        R.clusters = form_clusters_k(R.phi, dendro, *sp.target_K, trusted);
      } else {
        R.clusters = form_clusters(R.phi, dendro, min_theta_for_coverage(R.phi, dendro, trusted),
                                   trusted);
      }
      R.clusters->validate();
      if (!R.clusters->fully_covered()) {
        throw Error(ErrorCode::UncoveredCluster,
                    "a cluster has no trusted measurement at theta = " +
                        format_double(R.clusters->theta));
      }
    });
    staged("augment", [&] {
      R.C_bar = augment_measurement_matrix(sys.C, R.clusters->Pi, attacked);
      R.augmented_rank = observability_rank(sys.dynamics(), *R.C_bar);
      R.error_poles = error_system_poles(sys, R.dec, R.clusters->Pi);
    });
    staged("design", [&] {
      R.design = design_gain(sys, R.dec, *R.C_bar, sp.margin);
      Estimator e;
      e.design = *R.design;
      e.resilient = true;
      e.attacked = attacked;
      e.surrogate = surrogate_map(*R.clusters, attacked);
      e.input_map = Matrix::Zero(m, m);
      Eigen::Index row = 0;
      for (auto i : trusted) e.input_map(row++, i) = 1.0;
      e.input_map.bottomRows(static_cast<Eigen::Index>(attacked.size())) = e.surrogate;
      opts.estimator = e;
    });
  } else if (path == EstimatorMode::Standard) {
    staged("design", [&] {
      const Matrix C1 = select_rows(sys.C, trusted);
      R.design = design_gain(sys, R.dec, C1, sp.margin);
      Estimator e;
      e.design = *R.design;
      e.input_map = Matrix::Zero(static_cast<Eigen::Index>(trusted.size()), m);
      for (size_t k = 0; k < trusted.size(); ++k) e.input_map(static_cast<Eigen::Index>(k), trusted[k]) = 1.0;
      opts.estimator = e;
    });
  }

  R.sim = staged("simulate", [&] { return simulate(sys, opts); });
  name_result(R.sim, R.model);
  if (R.clusters) {
    R.sim.metrics.approx_error = staged("metrics", [&] {
      return approximation_error(R.sim.y, *R.clusters).aggregate;
    });
  }
  return R;
}

std::vector<long> default_sweep(const ScenarioSpec& spec, Eigen::Index m) {
  std::vector<long> ks = spec.sweep_K;
  if (ks.empty()) ks = {5, 10, 21, 40, static_cast<long>(m)};
  std::vector<long> out;
  for (long k : ks) {
    if (k >= 1 && k <= m && std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<SweepRow> cluster_sweep(const SimilarityFactor& phi, const Matrix& Y,
                                    const std::vector<long>& Ks, const IndexSet& trusted) {
  const Dendrogram dendro = build_dendrogram(phi);
  std::vector<SweepRow> rows(Ks.size());
  std::vector<std::exception_ptr> errs(Ks.size());
  auto work = [&](size_t k) {
    try {
      const ClusterSet cs = form_clusters_k(phi, dendro, Ks[k], trusted);
      rows[k] = {cs.size(), cs.theta, approximation_error(Y, cs).aggregate, cs.fully_covered()};
    } catch (...) {
      errs[k] = std::current_exception();
    }
  };
  const size_t hw = std::max(1u, std::thread::hardware_concurrency());
  for (size_t base = 0; base < Ks.size(); base += hw) {
    std::vector<std::thread> pool;
    for (size_t k = base; k < std::min(Ks.size(), base + hw); ++k) pool.emplace_back(work, k);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errs) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

std::vector<CheckRow> run_checks(const GridSpec& grid, const ScenarioSpec& sp) {
  std::vector<CheckRow> rows;
  auto add = [&](std::string name, double value, double bound, bool pass, std::string detail = {}) {
    rows.push_back({std::move(name), value, bound, pass, std::move(detail)});
  };
  const GridModel model = sp.sensors ? assemble_state_space(grid, *sp.sensors)
                                     : assemble_state_space(grid);
  const LtiSystem& sys = model.sys;
  const Matrix A = sys.dynamics();
  const double an = A.norm();

  const Matrix& Y = model.ybus;
  const double rowsum = Y.rowwise().sum().cwiseAbs().maxCoeff();
  add("ybus_row_sums", rowsum, 1e-12, rowsum <= 1e-12);
  const double asym = (Y - Y.transpose()).norm();
  add("ybus_symmetric", asym, 0.0, asym == 0.0);

  const SubspaceDecomposition dec = stable_subspace(sys);
  add("zero_modes", static_cast<double>(dec.zero_modes), 1.0, dec.zero_modes == 1);
  const double bio = (dec.V_bar.transpose() * dec.U_bar -
                      Matrix::Identity(dec.stable_dim(), dec.stable_dim())).norm();
  add("biorthonormality", bio, 1e-10, bio <= 1e-10);
  const double nullres =
      std::max((A * dec.u_max).norm(), (dec.v_max.transpose() * A).norm()) / an;
  add("null_vectors", nullres, 1e-8, nullres <= 1e-8);
  const Matrix sigma0 = dec.u_max * (dec.v_max.transpose() * A * dec.u_max) * dec.v_max.transpose();
  const double recon = (A - dec.U_bar * dec.A_bar * dec.V_bar.transpose() - sigma0).norm() / an;
  add("reconstruction", recon, 1e-8, recon <= 1e-8);
  const double absc = spectral_abscissa(dec.A_bar);
  add("stable_part_abscissa", absc, 0.0, absc < 0.0);

  const Gramian gc = semistable_gramian(sys, GramianSide::Controllability, dec);
  const Matrix Qc = dec.V_bar.transpose() * dec.V_bar;
  const double rc = lyapunov_residual(dec.A_bar, gc.W_bar, Qc);
  add("lyapunov_controllability", rc, 1e-10, rc <= 1e-10);
  const Gramian go = semistable_gramian(sys, GramianSide::Observability, dec);
  const Matrix CU = sys.C * dec.U_bar;
  const double ro = lyapunov_residual(dec.A_bar.transpose(), go.W_bar, CU.transpose() * CU);
  add("lyapunov_observability", ro, 1e-10, ro <= 1e-10);
  Eigen::SelfAdjointEigenSolver<Matrix> es(go.W);
  const double mineig = es.eigenvalues()(0) / std::max(1e-300, es.eigenvalues().cwiseAbs().maxCoeff());
  add("gramian_psd", mineig, -1e-10, mineig >= -1e-10);

  const SimilarityFactor phi = compute_phi(sys, dec);
  const StableRealization sp0 = stable_part(sys, dec);
  const Matrix Wc = gc.W_bar;
  double t1 = 0.0;
  for (Eigen::Index i = 0; i < sys.outputs(); ++i) {
    const double h2 = std::sqrt(std::max(0.0, (CU.row(i) * Wc * CU.row(i).transpose())(0, 0)));
    if (h2 > 0) t1 = std::max(t1, std::abs(phi.row_norms(i) - h2) / h2);
  }
  (void)sp0;
  add("phi_row_norms_vs_h2", t1, 1e-8, t1 <= 1e-8);

  const ObservabilityResult full = observability_rank(A, sys.C);
  add("observable_full_sensor_set", static_cast<double>(full.rank), static_cast<double>(A.rows()),
      full.is_observable);

  if (sp.attack) {
    const AttackScenario atk = build_attack(model, *sp.attack);
    IndexSet attacked = atk.attacked;
    std::sort(attacked.begin(), attacked.end());
    const Classification cls = classify(sys, sys.C, attacked);
    add("attack_classification", static_cast<double>(cls.trusted_rank.rank),
        static_cast<double>(A.rows()), true, std::string(to_string(cls.kind)));
    const IndexSet trusted = complement(attacked, sys.outputs());
    if (trusted.empty()) {
      add("augmentation", 0.0, 0.0, false, "AllMeasurementsAttacked: no trusted measurement");
    } else {
      const double theta = min_theta_for_coverage(phi, trusted);
      const ClusterSet cs = form_clusters(phi, theta, trusted);
      const double pu = (cs.Pi * cs.Pi.transpose() - Matrix::Identity(cs.size(), cs.size())).norm();
      add("pi_unitarity", pu, 1e-10, pu <= 1e-10, "K=" + std::to_string(cs.size()));
      add("trusted_coverage", theta, theta, cs.fully_covered());
      const Matrix Cb = augment_measurement_matrix(sys.C, cs.Pi, attacked);
      const ObservabilityResult aug = observability_rank(A, Cb);
      add("augmented_observable", static_cast<double>(aug.rank), static_cast<double>(A.rows()),
          aug.is_observable);
      const ErrorSystemPoles ep = error_system_poles(sys, dec, cs.Pi);
      const bool small = ep.zero_mode_residue <= 1e-8 * sys.C.norm();
      add("error_system_residue", ep.zero_mode_residue, 1e-8 * sys.C.norm(),
          !small || ep.max_real_part < 0.0,
          small ? "zero mode cancelled" : "residue reported (diagnostic)");
    }
  }
  return rows;
}

nlohmann::json cluster_report_json(const SimilarityFactor& phi, const ClusterSet& cs,
                                   const IndexSet& trusted, const GridModel& model,
                                   const std::optional<ErrorSystemPoles>& poles) {
  using nlohmann::json;
  std::set<Eigen::Index> tr(trusted.begin(), trusted.end());
  json clusters = json::array();
  for (Eigen::Index k = 0; k < cs.size(); ++k) {
    const auto& c = cs.clusters[static_cast<size_t>(k)];
    json members = json::array(), idx = json::array(), coeff = json::array(), trm = json::array();
    for (size_t j = 0; j < c.size(); ++j) {
      members.push_back(sensor_name(model.sensors[static_cast<size_t>(c[j])]));
      idx.push_back(c[j]);
      coeff.push_back(cs.p[static_cast<size_t>(k)](static_cast<Eigen::Index>(j)));
      if (tr.count(c[j])) trm.push_back(c[j]);
    }
    clusters.push_back({{"index", k},
                        {"members", members},
                        {"member_indices", idx},
                        {"coefficients", coeff},
                        {"trusted_members", trm},
                        {"covered", static_cast<bool>(cs.covered[static_cast<size_t>(k)])},
                        {"silent", static_cast<int>(k) == cs.silent},
                        {"max_pairwise_d", cs.diameter(phi, k)}});
  }
  const double pu = (cs.Pi * cs.Pi.transpose() - Matrix::Identity(cs.size(), cs.size())).norm();
  json diag = {{"pi_unitarity_error", pu}};
  if (poles) {
    diag["premise_ratio"] = poles->premise_ratio;
    diag["zero_mode_residue"] = poles->zero_mode_residue;
    diag["zero_mode_cancelled"] = poles->zero_mode_cancelled;
    diag["max_pole_real_part"] = finite_or_null(poles->max_real_part);
  }
  return {{"theta", cs.theta},
          {"K", cs.size()},
          {"m", cs.m},
          {"fully_covered", cs.fully_covered()},
          {"clusters", clusters},
          {"diagnostics", diag}};
}

nlohmann::json metrics_json(const PipelineResult& r) {
  using nlohmann::json;
  const auto& mt = r.sim.metrics;
  json j = {{"estimator", std::string(to_string(r.path))},
            {"n", r.model.sys.states()},
            {"m", r.model.sys.outputs()},
            {"samples", r.sim.samples()},
            {"duration", r.scenario.duration},
            {"dt", r.scenario.dt},
            {"record_dt", r.scenario.record_dt},
            {"metrics_start", r.scenario.metrics_start},
            {"max_abs_state", mt.max_abs_state},
            {"approx_error", mt.approx_error ? json(*mt.approx_error) : json(nullptr)}};
  if (r.sim.has_estimator) {
    j["state_rmse"] = finite_or_null(mt.state_rmse);
    j["state_rmse_abs"] = finite_or_null(mt.state_rmse_abs);
    j["residual_final"] = finite_or_null(mt.residual_final);
    j["residual_rms_max"] = mt.residual_rms.size() ? finite_or_null(mt.residual_rms.maxCoeff()) : json(nullptr);
    j["stability_margin"] = finite_or_null(r.design->stability_margin);
  } else {
    j["state_rmse"] = nullptr;
    j["state_rmse_abs"] = nullptr;
    j["residual_final"] = nullptr;
    j["residual_rms_max"] = nullptr;
    j["stability_margin"] = nullptr;
  }
  return j;
}

nlohmann::json pipeline_json(const PipelineResult& r) {
  using nlohmann::json;
  json j;
  j["grid"] = {{"name", r.grid.name},
               {"buses", r.grid.buses.size()},
               {"generators", r.grid.generators.size()},
               {"loads", r.grid.loads.size()},
               {"branches", r.grid.branches.size()},
               {"n", r.model.sys.states()},
               {"m", r.model.sys.outputs()}};
  j["decomposition"] = {{"zero_modes", r.dec.zero_modes},
                        {"tol_zero", r.dec.tol_zero},
                        {"stable_abscissa", spectral_abscissa(r.dec.A_bar)}};
  if (r.classification) {
    json names = json::array();
    for (auto i : r.classification->attacked) names.push_back(sensor_name(r.model.sensors[static_cast<size_t>(i)]));
    const auto& tr = r.classification->trusted_rank;
    j["attack"] = {{"attacked", names},
                   {"classification", std::string(to_string(r.classification->kind))},
                   {"trusted_pbh_rank", tr.rank},
                   {"trusted_weakest_ratio", finite_or_null(tr.weakest_ratio)}};
  } else {
    j["attack"] = nullptr;
  }
  j["estimator"] = std::string(to_string(r.path));
  if (r.clusters) {
    j["clustering"] = {{"theta", r.clusters->theta}, {"K", r.clusters->size()}};
  } else {
    j["clustering"] = nullptr;
  }
  if (r.augmented_rank) {
    j["augmented"] = {{"pbh_rank", r.augmented_rank->rank},
                      {"observable", r.augmented_rank->is_observable},
                      {"weakest_ratio", finite_or_null(r.augmented_rank->weakest_ratio)}};
  } else {
    j["augmented"] = nullptr;
  }
  if (r.design) {
    j["observer"] = {{"requested_margin", r.design->requested_margin},
                     {"design_margin", r.design->design_margin},
                     {"stability_margin", finite_or_null(r.design->stability_margin)},
                     {"margin_met", r.design->margin_met}};
  } else {
    j["observer"] = nullptr;
  }
  return j;
}

nlohmann::json sweep_json(const std::vector<SweepRow>& rows) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& r : rows) {
    a.push_back({{"K", r.K}, {"theta", r.theta}, {"approx_error", r.approx_error},
                 {"fully_covered", r.covered}});
  }
  return {{"rows", a}};
}

nlohmann::json checks_json(const std::vector<CheckRow>& rows) {
  nlohmann::json a = nlohmann::json::array();
  bool all = true;
  for (const auto& r : rows) {
    a.push_back({{"name", r.name}, {"value", finite_or_null(r.value)}, {"bound", finite_or_null(r.bound)},
                 {"pass", r.pass}, {"detail", r.detail}});
    all = all && r.pass;
  }
  return {{"checks", a}, {"all_pass", all}};
}

namespace {

bool type_ok(const nlohmann::json& v, const std::string& t) {
  if (t == "object") return v.is_object();
  if (t == "array") return v.is_array();
  if (t == "string") return v.is_string();
  if (t == "number") return v.is_number();
  if (t == "integer") return v.is_number_integer();
  if (t == "boolean") return v.is_boolean();
  if (t == "null") return v.is_null();
  return false;
}

std::string check(const nlohmann::json& v, const nlohmann::json& s, const std::string& path) {
  if (s.contains("type")) {
    bool ok = false;
    if (s["type"].is_array()) {
      for (const auto& t : s["type"]) ok = ok || type_ok(v, t.get<std::string>());
    } else {
      ok = type_ok(v, s["type"].get<std::string>());
    }
    if (!ok) return path + ": expected type " + s["type"].dump();
  }
  if (s.contains("enum")) {
    bool ok = false;
    for (const auto& e : s["enum"]) ok = ok || e == v;
    if (!ok) return path + ": value not in enum";
  }
  if (s.contains("minimum") && v.is_number() && v.get<double>() < s["minimum"].get<double>()) {
    return path + ": below minimum";
  }
  if (v.is_object()) {
    if (s.contains("required")) {
      for (const auto& k : s["required"]) {
        if (!v.contains(k.get<std::string>())) return path + ": missing key " + k.get<std::string>();
      }
    }
    if (s.contains("properties")) {
      for (const auto& [k, sub] : s["properties"].items()) {
        if (v.contains(k)) {
          auto err = check(v[k], sub, path + "." + k);
          if (!err.empty()) return err;
        }
      }
    }
  }
  if (v.is_array() && s.contains("items")) {
    for (size_t i = 0; i < v.size(); ++i) {
      auto err = check(v[i], s["items"], path + "[" + std::to_string(i) + "]");
      if (!err.empty()) return err;
    }
  }
  return {};
}

}  // namespace

std::string validate_json(const nlohmann::json& doc, const nlohmann::json& schema) {
  return check(doc, schema, "$");
}

}  // namespace rse
