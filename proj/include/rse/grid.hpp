#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rse/lti.hpp"

namespace rse {

enum class BusKind { Generator, Load };

struct Bus {
  int id = 0;
  BusKind kind = BusKind::Load;
  bool operator==(const Bus&) const = default;
};

struct Branch {
  int from = 0;
  int to = 0;
  double b = 0.0;  // susceptance, p.u.
  bool operator==(const Branch&) const = default;
};

struct GeneratorParams {
  int bus = 0;
  double J = 0.0;    // inertia
  double D = 0.0;    // damping
  double T_u = 0.0;  // turbine time constant
  double T_g = 0.0;  // governor time constant
  double K_t = 0.0;  // turbine gain
  double r = 0.0;    // droop
  double e_T = 0.0;  // turbine coupling
  bool operator==(const GeneratorParams&) const = default;
};

struct LoadParams {
  int bus = 0;
  double J = 0.0;
  double D = 0.0;
  double L_nominal = 0.0;
  bool operator==(const LoadParams&) const = default;
};

struct GridSpec {
  std::string name;
  double base_mva = 100.0;
  double f_nom = 60.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<GeneratorParams> generators;
  std::vector<LoadParams> loads;

  /// Throws ValidationError / UnknownBus / DisconnectedNetwork.
  void validate() const;
  const Bus& bus(int id) const;
  bool has_bus(int id) const;
  /// Scale on the network rows, 2 pi f_nom (frequency states are p.u.).
  double network_scale() const;

  bool operator==(const GridSpec&) const = default;
};

/// State layout [omega_G; P_T; a; P_G; omega_L; P_L]. Generators and loads are
/// ordered as they appear in GridSpec::generators / GridSpec::loads.
struct StateIndex {
  int n_G = 0;
  int n_L = 0;
  std::vector<int> gen_buses;
  std::vector<int> load_buses;

  Eigen::Index size() const { return 4 * n_G + 2 * n_L; }
  Eigen::Index omega(int bus) const;
  Eigen::Index power(int bus) const;
  /// Turbine / governor states (generator buses only).
  Eigen::Index turbine(int bus) const;
  Eigen::Index governor(int bus) const;
  bool is_generator(int bus) const;
  bool has_bus(int bus) const;
  std::vector<std::string> state_names() const;

 private:
  friend StateIndex make_state_index(const GridSpec& grid);
  std::map<int, int> gen_pos_;
  std::map<int, int> load_pos_;
};

StateIndex make_state_index(const GridSpec& grid);

/// Weighted Laplacian of branch susceptances, rows/columns in
/// GridSpec::buses order. Throws DisconnectedNetwork.
Matrix build_ybus(const GridSpec& grid);

struct YbusBlocks {
  Matrix GG, GL, LG, LL;
};
/// Y_bus partitioned by bus kind (generator/load order as in StateIndex).
YbusBlocks partition_ybus(const GridSpec& grid, const Matrix& ybus);

enum class Quantity { Frequency, Power };

struct Sensor {
  int bus = 0;
  Quantity quantity = Quantity::Frequency;
  bool operator==(const Sensor&) const = default;
};

std::string sensor_name(const Sensor& s);
/// Parses "frequency"/"power" (also "w"/"omega"/"P"); throws UnknownQuantity.
Quantity parse_quantity(const std::string& text);

/// Frequency sensors at every bus (ascending id), then power sensors.
std::vector<Sensor> default_sensors(const GridSpec& grid);

/// One 0/1 row per sensor. Throws UnknownBus.
Matrix build_measurement_matrix(const GridSpec& grid, const StateIndex& index,
                                const std::vector<Sensor>& sensors);

struct GridModel {
  LtiSystem sys;
  StateIndex index;
  std::vector<Sensor> sensors;
  /// n x n_L map from load-power deviation to state derivative.
  Matrix disturbance;
  Matrix ybus;
};

/// Assembles the linearized swing/turbine/governor/network model. B is the
/// governor set-point channel; K is zero.
GridModel assemble_state_space(const GridSpec& grid);
GridModel assemble_state_space(const GridSpec& grid, const std::vector<Sensor>& sensors);

GridSpec parse_grid(const std::string& text, const std::string& source = "<string>");
GridSpec parse_grid_file(const std::filesystem::path& path);
std::string serialize_grid(const GridSpec& grid);

}  // namespace rse
