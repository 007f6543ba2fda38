#include "rse/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "rse/config.hpp"
#include "rse/error.hpp"

namespace rse {

namespace {

void require(bool ok, ErrorCode code, const std::string& msg) {
  if (!ok) throw Error(code, msg);
}

std::string bus_label(int id) { return "bus " + std::to_string(id); }

}  // namespace

bool GridSpec::has_bus(int id) const {
  for (const auto& b : buses) {
    if (b.id == id) return true;
  }
  return false;
}

const Bus& GridSpec::bus(int id) const {
  for (const auto& b : buses) {
    if (b.id == id) return b;
  }
  throw Error(ErrorCode::UnknownBus, bus_label(id) + " is not declared");
}

double GridSpec::network_scale() const { return 2.0 * std::numbers::pi * f_nom; }

void GridSpec::validate() const {
  require(std::isfinite(base_mva) && base_mva > 0, ErrorCode::ValidationError,
          "base_mva must be positive");
  require(std::isfinite(f_nom) && f_nom > 0, ErrorCode::ValidationError,
          "f_nom must be positive");
  require(!buses.empty(), ErrorCode::ValidationError, "grid has no buses");

  std::set<int> ids;
  for (const auto& b : buses) {
    require(ids.insert(b.id).second, ErrorCode::ValidationError,
            "duplicate " + bus_label(b.id));
  }
  for (const auto& br : branches) {
    require(has_bus(br.from), ErrorCode::UnknownBus,
            "branch endpoint " + bus_label(br.from) + " is not declared");
    require(has_bus(br.to), ErrorCode::UnknownBus,
            "branch endpoint " + bus_label(br.to) + " is not declared");
    require(br.from != br.to, ErrorCode::ValidationError,
            "branch is a self-loop at " + bus_label(br.from));
    require(std::isfinite(br.b) && br.b > 0, ErrorCode::ValidationError,
            "branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                ": susceptance must be positive");
  }

  std::set<int> seen_gen, seen_load;
  for (const auto& g : generators) {
    const Bus& b = bus(g.bus);
    const std::string where = "generator at " + bus_label(g.bus);
    require(b.kind == BusKind::Generator, ErrorCode::ValidationError,
            where + ": bus is not a generator bus");
    require(seen_gen.insert(g.bus).second, ErrorCode::ValidationError,
            where + ": parameters given twice");
    for (double v : {g.J, g.D, g.T_u, g.T_g, g.K_t, g.r, g.e_T}) {
      require(std::isfinite(v), ErrorCode::ValidationError, where + ": non-finite parameter");
    }
    require(g.J > 0, ErrorCode::ValidationError, where + ": J must be > 0");
    require(g.D >= 0, ErrorCode::ValidationError, where + ": D must be >= 0");
    require(g.T_u > 0, ErrorCode::ValidationError, where + ": T_u must be > 0");
    require(g.T_g > 0, ErrorCode::ValidationError, where + ": T_g must be > 0");
    require(g.r > 0, ErrorCode::ValidationError, where + ": r must be > 0");
  }
  for (const auto& l : loads) {
    const Bus& b = bus(l.bus);
    const std::string where = "load at " + bus_label(l.bus);
    require(b.kind == BusKind::Load, ErrorCode::ValidationError,
            where + ": bus is not a load bus");
    require(seen_load.insert(l.bus).second, ErrorCode::ValidationError,
            where + ": parameters given twice");
    for (double v : {l.J, l.D, l.L_nominal}) {
      require(std::isfinite(v), ErrorCode::ValidationError, where + ": non-finite parameter");
    }
    require(l.J > 0, ErrorCode::ValidationError, where + ": J must be > 0");
    require(l.D >= 0, ErrorCode::ValidationError, where + ": D must be >= 0");
  }
  for (const auto& b : buses) {
    if (b.kind == BusKind::Generator) {
      require(seen_gen.count(b.id) == 1, ErrorCode::ValidationError,
              bus_label(b.id) + ": generator parameters missing");
    } else {
      require(seen_load.count(b.id) == 1, ErrorCode::ValidationError,
              bus_label(b.id) + ": load parameters missing");
    }
  }

  // Connectivity by union-find over branch endpoints.
  std::map<int, int> parent;
  for (const auto& b : buses) parent[b.id] = b.id;
  auto root = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& br : branches) parent[root(br.from)] = root(br.to);
  const int r0 = root(buses.front().id);
  for (const auto& b : buses) {
    require(root(b.id) == r0, ErrorCode::DisconnectedNetwork,
            bus_label(b.id) + " is not connected to " + bus_label(buses.front().id));
  }
}

StateIndex make_state_index(const GridSpec& grid) {
  StateIndex idx;
  for (const auto& g : grid.generators) {
    idx.gen_pos_[g.bus] = idx.n_G++;
    idx.gen_buses.push_back(g.bus);
  }
  for (const auto& l : grid.loads) {
    idx.load_pos_[l.bus] = idx.n_L++;
    idx.load_buses.push_back(l.bus);
  }
  return idx;
}

bool StateIndex::is_generator(int bus) const { return gen_pos_.count(bus) != 0; }
bool StateIndex::has_bus(int bus) const {
  return gen_pos_.count(bus) != 0 || load_pos_.count(bus) != 0;
}

Eigen::Index StateIndex::omega(int bus) const {
  if (auto it = gen_pos_.find(bus); it != gen_pos_.end()) return it->second;
  if (auto it = load_pos_.find(bus); it != load_pos_.end()) return 4 * n_G + it->second;
  throw Error(ErrorCode::UnknownBus, bus_label(bus) + " has no state");
}

Eigen::Index StateIndex::power(int bus) const {
  if (auto it = gen_pos_.find(bus); it != gen_pos_.end()) return 3 * n_G + it->second;
  if (auto it = load_pos_.find(bus); it != load_pos_.end()) {
    return 4 * n_G + n_L + it->second;
  }
  throw Error(ErrorCode::UnknownBus, bus_label(bus) + " has no state");
}

Eigen::Index StateIndex::turbine(int bus) const {
  auto it = gen_pos_.find(bus);
  if (it == gen_pos_.end()) throw Error(ErrorCode::UnknownBus, bus_label(bus) + " is not a generator");
  return n_G + it->second;
}

Eigen::Index StateIndex::governor(int bus) const {
  auto it = gen_pos_.find(bus);
  if (it == gen_pos_.end()) throw Error(ErrorCode::UnknownBus, bus_label(bus) + " is not a generator");
  return 2 * n_G + it->second;
}

std::vector<std::string> StateIndex::state_names() const {
  std::vector<std::string> names(static_cast<size_t>(size()));
  for (int b : gen_buses) {
    const auto s = std::to_string(b);
    names[omega(b)] = "w_G" + s;
    names[turbine(b)] = "PT_G" + s;
    names[governor(b)] = "a_G" + s;
    names[power(b)] = "P_G" + s;
  }
  for (int b : load_buses) {
    const auto s = std::to_string(b);
    names[omega(b)] = "w_L" + s;
    names[power(b)] = "P_L" + s;
  }
  return names;
}

Matrix build_ybus(const GridSpec& grid) {
  grid.validate();
  const auto N = static_cast<Eigen::Index>(grid.buses.size());
  std::map<int, Eigen::Index> pos;
  for (Eigen::Index i = 0; i < N; ++i) pos[grid.buses[i].id] = i;
  Matrix Y = Matrix::Zero(N, N);
  for (const auto& br : grid.branches) {
    const auto i = pos.at(br.from);
    const auto j = pos.at(br.to);
    Y(i, j) -= br.b;
    Y(j, i) -= br.b;
  }
  // Diagonal as the negated off-diagonal row sum so rows sum to zero.
  for (Eigen::Index i = 0; i < N; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < N; ++j) {
      if (j != i) s += Y(i, j);
    }
    Y(i, i) = -s;
  }
  return Y;
}

YbusBlocks partition_ybus(const GridSpec& grid, const Matrix& ybus) {
  std::map<int, Eigen::Index> pos;
  for (size_t i = 0; i < grid.buses.size(); ++i) pos[grid.buses[i].id] = static_cast<Eigen::Index>(i);
  const StateIndex idx = make_state_index(grid);
  std::vector<Eigen::Index> g, l;
  for (int b : idx.gen_buses) g.push_back(pos.at(b));
  for (int b : idx.load_buses) l.push_back(pos.at(b));
  auto block = [&](const std::vector<Eigen::Index>& r, const std::vector<Eigen::Index>& c) {
    Matrix M(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(c.size()));
    for (size_t i = 0; i < r.size(); ++i)
      for (size_t j = 0; j < c.size(); ++j) M(i, j) = ybus(r[i], c[j]);
    return M;
  };
  return {block(g, g), block(g, l), block(l, g), block(l, l)};
}

std::string sensor_name(const Sensor& s) {
  return (s.quantity == Quantity::Frequency ? "w_b" : "P_b") + std::to_string(s.bus);
}

Quantity parse_quantity(const std::string& text) {
  if (text == "frequency" || text == "omega" || text == "w") return Quantity::Frequency;
  if (text == "power" || text == "P") return Quantity::Power;
  throw Error(ErrorCode::UnknownQuantity, "unknown measured quantity '" + text + "'");
}

std::vector<Sensor> default_sensors(const GridSpec& grid) {
  std::vector<int> ids;
  for (const auto& b : grid.buses) ids.push_back(b.id);
  std::sort(ids.begin(), ids.end());
  std::vector<Sensor> out;
  for (int id : ids) out.push_back({id, Quantity::Frequency});
  for (int id : ids) out.push_back({id, Quantity::Power});
  return out;
}

Matrix build_measurement_matrix(const GridSpec& grid, const StateIndex& index,
                                const std::vector<Sensor>& sensors) {
  Matrix C = Matrix::Zero(static_cast<Eigen::Index>(sensors.size()), index.size());
  for (size_t k = 0; k < sensors.size(); ++k) {
    const Sensor& s = sensors[k];
    if (!grid.has_bus(s.bus) || !index.has_bus(s.bus)) {
      throw Error(ErrorCode::UnknownBus, "sensor references unknown " + bus_label(s.bus));
    }
    const auto col = s.quantity == Quantity::Frequency ? index.omega(s.bus) : index.power(s.bus);
    C(static_cast<Eigen::Index>(k), col) = 1.0;
  }
  return C;
}

GridModel assemble_state_space(const GridSpec& grid) {
  return assemble_state_space(grid, default_sensors(grid));
}

GridModel assemble_state_space(const GridSpec& grid, const std::vector<Sensor>& sensors) {
  GridModel model;
  model.ybus = build_ybus(grid);  // validates
  model.index = make_state_index(grid);
  model.sensors = sensors;
  const StateIndex& ix = model.index;
  const Eigen::Index n = ix.size();

  Matrix A = Matrix::Zero(n, n);
  Matrix B = Matrix::Zero(n, ix.n_G);
  for (int k = 0; k < ix.n_G; ++k) {
    const auto& g = grid.generators[static_cast<size_t>(k)];
    const auto w = ix.omega(g.bus), pt = ix.turbine(g.bus), a = ix.governor(g.bus),
               p = ix.power(g.bus);
    A(w, w) = -g.D / g.J;
    A(w, pt) = 1.0 / g.J;
    A(w, p) = -1.0 / g.J;
    A(w, a) = g.e_T / g.J;
    A(pt, pt) = -1.0 / g.T_u;
    A(pt, a) = g.K_t / g.T_u;
    A(a, a) = -g.r / g.T_g;
    A(a, w) = -1.0 / g.T_g;
    B(a, k) = 1.0 / g.T_g;
  }
  model.disturbance = Matrix::Zero(n, ix.n_L);
  for (int k = 0; k < ix.n_L; ++k) {
    const auto& l = grid.loads[static_cast<size_t>(k)];
    const auto w = ix.omega(l.bus), p = ix.power(l.bus);
    A(w, w) = -l.D / l.J;
    A(w, p) = -1.0 / l.J;
    model.disturbance(w, k) = -1.0 / l.J;
  }
  // Network: every bus injection follows P' = 2 pi f_nom * Y_bus * omega.
  const double ys = grid.network_scale();
  for (size_t i = 0; i < grid.buses.size(); ++i) {
    const auto pi = ix.power(grid.buses[i].id);
    for (size_t j = 0; j < grid.buses.size(); ++j) {
      const double y = model.ybus(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (y != 0.0) A(pi, ix.omega(grid.buses[j].id)) = ys * y;
    }
  }

  Matrix C = build_measurement_matrix(grid, ix, sensors);
  Matrix K = Matrix::Zero(ix.n_G, C.rows());
  model.sys = LtiSystem(std::move(A), std::move(B), std::move(K), std::move(C));
  return model;
}

namespace {

const ConfigSection& need_section(const ConfigDocument& doc, std::string_view name) {
  const auto all = doc.find_all(name);
  if (all.empty()) {
    throw Error(ErrorCode::ParseError, doc.source + ": missing section [" + std::string(name) + "]");
  }
  if (all.size() > 1) {
    throw Error(ErrorCode::ParseError, doc.source + ":" + std::to_string(all[1]->line) +
                                           ": duplicate section [" + std::string(name) + "]");
  }
  return *all.front();
}

void need_fields(const ConfigDocument& doc, const ConfigRow& row, size_t n,
                 std::string_view what) {
  if (row.fields.size() != n) {
    std::ostringstream os;
    os << doc.source << ":" << row.line << ": " << what << " row needs " << n
       << " fields, got " << row.fields.size();
    throw Error(ErrorCode::ParseError, os.str());
  }
}

void no_entries(const ConfigDocument& doc, const ConfigSection& s) {
  if (!s.entries.empty()) {
    throw Error(ErrorCode::ParseError, doc.source + ":" + std::to_string(s.entries[0].line) +
                                           ": unexpected key '" + s.entries[0].key +
                                           "' in [" + s.name + "]");
  }
}

}  // namespace

GridSpec parse_grid(const std::string& text, const std::string& source) {
  const ConfigDocument doc = parse_config(text, source);
  GridSpec g;
  const auto& hdr = need_section(doc, "grid");
  for (const auto& e : hdr.entries) {
    if (e.key == "name") {
      g.name = e.value;
    } else if (e.key == "base_mva") {
      g.base_mva = to_double(e.value, source, e.line, e.key);
    } else if (e.key == "f_nom") {
      g.f_nom = to_double(e.value, source, e.line, e.key);
    } else {
      throw Error(ErrorCode::ParseError,
                  source + ":" + std::to_string(e.line) + ": unknown key '" + e.key + "'");
    }
  }
  if (!hdr.rows.empty()) {
    throw Error(ErrorCode::ParseError,
                source + ":" + std::to_string(hdr.rows[0].line) + ": unexpected row in [grid]");
  }
  for (const auto& s : doc.sections) {
    if (s.name != "grid" && s.name != "buses" && s.name != "branches" &&
        s.name != "generators" && s.name != "loads") {
      throw Error(ErrorCode::ParseError, source + ":" + std::to_string(s.line) +
                                             ": unknown section [" + s.name + "]");
    }
  }

  const auto& buses = need_section(doc, "buses");
  no_entries(doc, buses);
  for (const auto& r : buses.rows) {
    need_fields(doc, r, 2, "bus");
    Bus b;
    b.id = static_cast<int>(to_long(r.fields[0], source, r.line, "id"));
    if (r.fields[1] == "generator") {
      b.kind = BusKind::Generator;
    } else if (r.fields[1] == "load") {
      b.kind = BusKind::Load;
    } else {
      throw Error(ErrorCode::ParseError, source + ":" + std::to_string(r.line) +
                                             ": field 'kind': expected generator|load, got '" +
                                             r.fields[1] + "'");
    }
    g.buses.push_back(b);
  }
  const auto& branches = need_section(doc, "branches");
  no_entries(doc, branches);
  for (const auto& r : branches.rows) {
    need_fields(doc, r, 3, "branch");
    g.branches.push_back({static_cast<int>(to_long(r.fields[0], source, r.line, "from")),
                          static_cast<int>(to_long(r.fields[1], source, r.line, "to")),
                          to_double(r.fields[2], source, r.line, "b")});
  }
  const auto& gens = need_section(doc, "generators");
  no_entries(doc, gens);
  for (const auto& r : gens.rows) {
    need_fields(doc, r, 8, "generator");
    GeneratorParams p;
    p.bus = static_cast<int>(to_long(r.fields[0], source, r.line, "bus"));
    p.J = to_double(r.fields[1], source, r.line, "J");
    p.D = to_double(r.fields[2], source, r.line, "D");
    p.T_u = to_double(r.fields[3], source, r.line, "T_u");
    p.T_g = to_double(r.fields[4], source, r.line, "T_g");
    p.K_t = to_double(r.fields[5], source, r.line, "K_t");
    p.r = to_double(r.fields[6], source, r.line, "r");
    p.e_T = to_double(r.fields[7], source, r.line, "e_T");
    g.generators.push_back(p);
  }
  const auto& loads = need_section(doc, "loads");
  no_entries(doc, loads);
  for (const auto& r : loads.rows) {
    need_fields(doc, r, 4, "load");
    LoadParams p;
    p.bus = static_cast<int>(to_long(r.fields[0], source, r.line, "bus"));
    p.J = to_double(r.fields[1], source, r.line, "J");
    p.D = to_double(r.fields[2], source, r.line, "D");
    p.L_nominal = to_double(r.fields[3], source, r.line, "L_nominal");
    g.loads.push_back(p);
  }
  g.validate();
  return g;
}

GridSpec parse_grid_file(const std::filesystem::path& path) {
  return parse_grid(read_text_file(path), path.string());
}

std::string serialize_grid(const GridSpec& g) {
  std::ostringstream os;
  auto d = [](double v) { return format_double(v); };
  os << "[grid]\n";
  if (!g.name.empty()) os << "name = " << g.name << "\n";
  os << "base_mva = " << d(g.base_mva) << "\n";
  os << "f_nom = " << d(g.f_nom) << "\n\n";
  os << "[buses]\n# id kind\n";
  for (const auto& b : g.buses) {
    os << b.id << " " << (b.kind == BusKind::Generator ? "generator" : "load") << "\n";
  }
  os << "\n[branches]\n# from to b\n";
  for (const auto& br : g.branches) os << br.from << " " << br.to << " " << d(br.b) << "\n";
  os << "\n[generators]\n# bus J D T_u T_g K_t r e_T\n";
  for (const auto& p : g.generators) {
    os << p.bus << " " << d(p.J) << " " << d(p.D) << " " << d(p.T_u) << " " << d(p.T_g) << " "
       << d(p.K_t) << " " << d(p.r) << " " << d(p.e_T) << "\n";
  }
  os << "\n[loads]\n# bus J D L_nominal\n";
  for (const auto& p : g.loads) {
    os << p.bus << " " << d(p.J) << " " << d(p.D) << " " << d(p.L_nominal) << "\n";
  }
  return os.str();
}

}  // namespace rse
