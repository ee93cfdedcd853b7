#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dsr {

using Complex = std::complex<double>;

/// Raised by parse_feeder on malformed input (syntax, dangling reference,
/// duplicate id, impedance dimension mismatch).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class Phase : int { a = 0, b = 1, c = 2 };

inline constexpr int phase_ordinal(Phase p) { return static_cast<int>(p); }
inline constexpr char phase_char(Phase p) { return "abc"[phase_ordinal(p)]; }

/// Ordered subset of {a,b,c}. Iteration order is always a, b, c.
class PhaseSet {
 public:
  PhaseSet() = default;

  static PhaseSet from_string(std::string_view s);

  void add(Phase p) { bits_ |= mask(p); }
  bool contains(Phase p) const { return bits_ & mask(p); }
  bool empty() const { return bits_ == 0; }
  int size() const;

  /// Position of `p` in this set's a<b<c ordering, or -1 if absent.
  /// Impedance matrices and per-phase arrays are indexed by this.
  int index_of(Phase p) const;

  bool subset_of(PhaseSet other) const { return (bits_ & ~other.bits_) == 0; }

  std::vector<Phase> list() const;
  std::string to_string() const;

  bool operator==(const PhaseSet&) const = default;

 private:
  static constexpr std::uint8_t mask(Phase p) {
    return static_cast<std::uint8_t>(1u << phase_ordinal(p));
  }
  std::uint8_t bits_ = 0;
};

struct Bus {
  std::string id;
  PhaseSet phases;
  double vmin = 0.9;  // per-unit voltage magnitude bounds
  double vmax = 1.1;
};

struct SwitchInfo {
  bool dispatchable = true;
  bool initially_closed = false;
};

struct LineParams {
  std::string id;
  std::string from_bus;
  std::string to_bus;
  PhaseSet phases;
  /// Row-major impedance matrix (r + jx, per-unit) over this line's phase
  /// ordering; size n*n where n = phases.size().
  std::vector<Complex> impedance;
  /// Per-phase apparent power bound (per-unit), aligned with phases.list().
  std::vector<double> thermal_limit;
  /// Present iff this line is a switch (k in Gamma).
  std::optional<SwitchInfo> switch_info;
  /// Angle-difference limits (radians). Documented data, unused under
  /// LinDistFlow.
  double theta_min = -0.5236;
  double theta_max = 0.5236;

  bool is_switch() const { return switch_info.has_value(); }
  int n_phases() const { return phases.size(); }
  Complex z(int row, int col) const { return impedance[row * n_phases() + col]; }
};

struct LoadSpec {
  std::string id;
  std::string bus;
  PhaseSet phases;
  /// demand[i] is the profile for phases.list()[i]: either a single value
  /// (broadcast over the horizon) or one value per timestep. kW + j kvar.
  std::vector<std::vector<Complex>> demand;
  double priority = 1.0;  // weight kappa
};

enum class DgKind { generator, pv, battery };

struct DgSpec {
  std::string id;
  std::string bus;
  PhaseSet phases;
  /// Per-phase box bounds on (p, q), kW/kvar, aligned with phases.list().
  std::vector<Complex> smin;
  std::vector<Complex> smax;
  bool grid_forming_capable = false;
  DgKind kind = DgKind::generator;
};

struct BatterySpec {
  std::string dg_id;
  double energy_cap = 0.0;      // kWh
  double initial_energy = 0.0;  // kWh
  double rate_min = 0.0;        // kW, bound on extraction rate p~
  double rate_max = 0.0;
  /// (slope, intercept-kW) pairs of the piecewise output envelope.
  std::vector<std::pair<double, double>> loss_segments;
};

struct Horizon {
  int n_steps = 1;
  double dt_hours = 1.0;
};

struct FeederModel {
  std::string name;
  double base_kva = 1000.0;
  double base_kv = 4.16;
  Horizon horizon;

  std::vector<Bus> buses;
  std::vector<LineParams> lines;
  std::vector<LoadSpec> loads;
  std::vector<DgSpec> dgs;
  std::vector<BatterySpec> batteries;

  // Derived adjacency, populated by parse_feeder / link().
  std::unordered_map<std::string, int> bus_index;
  std::unordered_map<std::string, int> line_index;
  std::unordered_map<std::string, int> load_index;
  std::unordered_map<std::string, int> dg_index;
  std::unordered_map<std::string, int> battery_index;  // keyed by dg_id
  std::vector<std::vector<int>> lines_from;  // E_i^+ per bus
  std::vector<std::vector<int>> lines_to;    // E_i^- per bus
  std::vector<std::vector<int>> dgs_at;      // D(i) per bus
  std::vector<std::vector<int>> loads_at;

  const Bus& bus(const std::string& id) const;
  const LineParams& line(const std::string& id) const;
  const LoadSpec& load(const std::string& id) const;
  const DgSpec& dg(const std::string& id) const;

  int n_switches() const;

  /// Rebuilds indices and adjacency. Throws ParseError on duplicate ids or
  /// dangling references.
  void link();
};

FeederModel parse_feeder(const std::string& text);
std::string serialize_feeder(const FeederModel& model);

struct Violation {
  std::string object_id;
  std::string rule;
};

std::vector<Violation> validate_feeder(const FeederModel& model);

/// Demand of `load_id` on `phase` at timestep `t`, in kW + j kvar.
/// Constant profiles broadcast across t.
Complex demand_at(const FeederModel& model, const std::string& load_id,
                  Phase phase, int t);

}  // namespace dsr
