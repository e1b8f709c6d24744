#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace dynresp {

/// A transmission line contributing the flow output p = b * (theta_from - theta_to).
/// Bus indices are zero-based.
struct Line {
  int from_bus = 0;
  int to_bus = 0;
  double susceptance = 0.0;

  bool operator==(const Line&) const = default;
};

/// The linearized swing system M x'' + D x' + K x = u together with the
/// linear maps from rotor angles to observed bus angles and line flows.
///
/// Indices are zero-based in memory; case files and channel names use
/// one-based ids.
struct GridCase {
  Eigen::VectorXd inertia;   // diagonal of M
  Eigen::VectorXd damping;   // diagonal of D
  Eigen::MatrixXd jacobian;  // K
  Eigen::MatrixXd bus_angle_map;  // n_buses x n_machines; row n is a_n
  std::vector<Line> lines;
  std::vector<std::optional<double>> distance_miles;  // per bus, may be empty

  // Recorded at validation time.
  bool jacobian_symmetric = false;
  bool jacobian_psd = false;

  int n_machines() const { return static_cast<int>(inertia.size()); }
  int n_buses() const { return static_cast<int>(bus_angle_map.rows()); }

  /// Uniform damping ratio gamma if D = gamma * M within `tol` (relative).
  std::optional<double> uniform_damping_ratio(double tol = 1e-9) const;

  bool operator==(const GridCase& other) const;
};

/// Symmetry tolerance used when classifying K.
inline constexpr double kSymmetryTol = 1e-8;

/// Validates invariants and records the symmetry / PSD status of K.
/// Throws dynresp::Error on violations.
void validate(GridCase& c);

GridCase parse_case(std::string_view text, const std::string& origin = "<string>");
GridCase load_case(const std::filesystem::path& path);
std::string format_case(const GridCase& c);
void write_case(const GridCase& c, const std::filesystem::path& path);

enum class Topology { kChain, kRing, kComplete };
Topology parse_topology(std::string_view s);

/// Synthetic case whose K is the weighted Laplacian of the chosen topology.
/// Inertia in [0.5, 2], damping ratio in [0.1, 0.3], line weights in [0.5, 3];
/// deterministic for a fixed seed.
GridCase make_synthetic_case(int n, Topology topology, std::uint64_t seed);

/// Replace damping with D = gamma_i * M_i.
void set_damping_ratios(GridCase& c, const Eigen::VectorXd& gammas);
void set_uniform_damping(GridCase& c, double gamma);

// ---------------------------------------------------------------------------
// Output specifications

enum class OutputKind { kBusAngle, kLineFlow };

struct OutputSpec {
  OutputKind kind = OutputKind::kBusAngle;
  int bus = 0;      // bus-angle target (zero-based)
  int from_bus = 0; // line endpoints (zero-based)
  int to_bus = 0;
  double scale = 1.0;

  static OutputSpec bus_angle(int bus, double scale = 1.0);
  static OutputSpec line(int from, int to, double scale = 1.0);

  /// "bus:7" or "7" for a bus angle, "line:7-8" or "7-8" for a line (one-based).
  static OutputSpec parse(std::string_view text);
  std::string location() const;  // "7" or "7-8", one-based
};

/// Susceptance of the declared line between two buses, in either
/// orientation. Throws if no such line is declared.
double line_susceptance(const GridCase& c, int from, int to);

/// Stacked output rows. Bus rows are a_n; line rows are b_nm (a_n - a_m).
Eigen::MatrixXd output_matrix(const GridCase& c, const std::vector<OutputSpec>& targets);

}  // namespace dynresp
