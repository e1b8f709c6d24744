#include "dynresp/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "dynresp/error.hpp"
#include "text_util.hpp"

namespace dynresp {

using detail::format_double;
using detail::parse_double;
using detail::parse_int;
using detail::split_ws;
using detail::trim;

std::optional<double> GridCase::uniform_damping_ratio(double tol) const {
  if (inertia.size() == 0) return std::nullopt;
  const double gamma = damping(0) / inertia(0);
  for (int i = 1; i < n_machines(); ++i) {
    const double g = damping(i) / inertia(i);
    if (std::abs(g - gamma) > tol * std::max(1.0, std::abs(gamma))) return std::nullopt;
  }
  return gamma;
}

bool GridCase::operator==(const GridCase& o) const {
  auto same = [](const auto& a, const auto& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
  };
  return same(inertia, o.inertia) && same(damping, o.damping) && same(jacobian, o.jacobian) &&
         same(bus_angle_map, o.bus_angle_map) && lines == o.lines &&
         distance_miles == o.distance_miles;
}

void validate(GridCase& c) {
  const int n = c.n_machines();
  require(n >= 1, "case has no machines");
  require(c.damping.size() == n, "damping has " + std::to_string(c.damping.size()) +
                                     " entries, expected " + std::to_string(n));
  for (int i = 0; i < n; ++i) {
    require(std::isfinite(c.inertia(i)) && c.inertia(i) > 0.0,
            "non-positive inertia for machine " + std::to_string(i + 1));
    require(std::isfinite(c.damping(i)) && c.damping(i) > 0.0,
            "non-positive damping for machine " + std::to_string(i + 1));
  }
  require(c.jacobian.rows() == n && c.jacobian.cols() == n,
          "jacobian is " + std::to_string(c.jacobian.rows()) + "x" +
              std::to_string(c.jacobian.cols()) + ", expected " + std::to_string(n) + "x" +
              std::to_string(n));
  require(c.jacobian.allFinite(), "jacobian has non-finite entries");

  if (c.bus_angle_map.size() == 0) c.bus_angle_map = Eigen::MatrixXd::Identity(n, n);
  require(c.bus_angle_map.cols() == n,
          "bus_angle_map rows have dimension " + std::to_string(c.bus_angle_map.cols()) +
              ", expected " + std::to_string(n));
  const int nb = c.n_buses();
  for (const Line& l : c.lines) {
    require(l.from_bus >= 0 && l.from_bus < nb && l.to_bus >= 0 && l.to_bus < nb,
            "line " + std::to_string(l.from_bus + 1) + "-" + std::to_string(l.to_bus + 1) +
                " references an undeclared bus");
    require(l.from_bus != l.to_bus, "degenerate line at bus " + std::to_string(l.from_bus + 1));
  }
  if (!c.distance_miles.empty()) {
    require(static_cast<int>(c.distance_miles.size()) == nb,
            "coordinates reference more buses than declared");
  }

  const double scale = std::max(1.0, c.jacobian.cwiseAbs().maxCoeff());
  c.jacobian_symmetric = (c.jacobian - c.jacobian.transpose()).cwiseAbs().maxCoeff() <= kSymmetryTol * scale;
  if (c.jacobian_symmetric) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (c.jacobian + c.jacobian.transpose()),
                                                      Eigen::EigenvaluesOnly);
    c.jacobian_psd = es.eigenvalues().minCoeff() >= -1e-10 * scale;
  } else {
    c.jacobian_psd = false;
  }
}

namespace {

enum class Section { kNone, kMachines, kJacobian, kBusMap, kLines, kCoords };

std::vector<double> parse_row(const std::vector<std::string_view>& tok, const std::string& ctx) {
  std::vector<double> row;
  row.reserve(tok.size());
  for (auto t : tok) row.push_back(parse_double(t, ctx));
  return row;
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows, const std::string& what,
                          const std::string& origin) {
  if (rows.empty()) return {};
  const auto cols = rows.front().size();
  Eigen::MatrixXd m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) {
      fail(ErrorCode::kParse, origin + ": [" + what + "] row " + std::to_string(r + 1) + " has " +
                                  std::to_string(rows[r].size()) + " entries, expected " +
                                  std::to_string(cols));
    }
    for (std::size_t j = 0; j < cols; ++j) m(r, j) = rows[r][j];
  }
  return m;
}

}  // namespace

GridCase parse_case(std::string_view text, const std::string& origin) {
  Section section = Section::kNone;
  std::vector<std::pair<long long, std::pair<double, double>>> machines;
  std::vector<std::vector<double>> jac_rows, map_rows;
  struct RawLine { long long from, to; double b; };
  std::vector<RawLine> raw_lines;
  std::vector<std::pair<long long, double>> coords;

  std::size_t line_no = 0;
  for (auto raw : detail::split(text, '\n')) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string_view::npos) raw = raw.substr(0, hash);
    const auto line = trim(raw);
    if (line.empty()) continue;
    const std::string ctx = origin + ":" + std::to_string(line_no);

    if (line.front() == '[') {
      if (line.back() != ']') fail(ErrorCode::kParse, ctx + ": malformed section header");
      const auto name = trim(line.substr(1, line.size() - 2));
      if (name == "machines") section = Section::kMachines;
      else if (name == "jacobian") section = Section::kJacobian;
      else if (name == "bus_angle_map") section = Section::kBusMap;
      else if (name == "lines") section = Section::kLines;
      else if (name == "coords") section = Section::kCoords;
      else fail(ErrorCode::kParse, ctx + ": unknown section [" + std::string(name) + "]");
      continue;
    }

    const auto tok = split_ws(line);
    switch (section) {
      case Section::kNone:
        fail(ErrorCode::kParse, ctx + ": data outside of any section");
      case Section::kMachines:
        if (tok.size() != 3) fail(ErrorCode::kParse, ctx + ": [machines] expects 'id inertia damping'");
        machines.push_back({parse_int(tok[0], ctx + " machine id"),
                            {parse_double(tok[1], ctx + " inertia"), parse_double(tok[2], ctx + " damping")}});
        break;
      case Section::kJacobian:
        jac_rows.push_back(parse_row(tok, ctx + " jacobian"));
        break;
      case Section::kBusMap:
        map_rows.push_back(parse_row(tok, ctx + " bus_angle_map"));
        break;
      case Section::kLines:
        if (tok.size() != 3) fail(ErrorCode::kParse, ctx + ": [lines] expects 'from to susceptance'");
        raw_lines.push_back({parse_int(tok[0], ctx + " from"), parse_int(tok[1], ctx + " to"),
                             parse_double(tok[2], ctx + " susceptance")});
        break;
      case Section::kCoords:
        if (tok.size() != 2) fail(ErrorCode::kParse, ctx + ": [coords] expects 'id distance_miles'");
        coords.push_back({parse_int(tok[0], ctx + " bus id"), parse_double(tok[1], ctx + " distance")});
        break;
    }
  }

  if (machines.empty()) fail(ErrorCode::kParse, origin + ": missing [machines] section");
  GridCase c;
  const int n = static_cast<int>(machines.size());
  c.inertia.resize(n);
  c.damping.resize(n);
  for (int i = 0; i < n; ++i) {
    if (machines[i].first != i + 1) {
      fail(ErrorCode::kParse, origin + ": machine ids must be 1.." + std::to_string(n) +
                                  " in order (found " + std::to_string(machines[i].first) + ")");
    }
    c.inertia(i) = machines[i].second.first;
    c.damping(i) = machines[i].second.second;
  }
  if (jac_rows.empty()) fail(ErrorCode::kParse, origin + ": missing [jacobian] section");
  c.jacobian = to_matrix(jac_rows, "jacobian", origin);
  c.bus_angle_map = to_matrix(map_rows, "bus_angle_map", origin);
  const int nb = map_rows.empty() ? n : static_cast<int>(map_rows.size());
  for (const auto& rl : raw_lines) {
    c.lines.push_back({static_cast<int>(rl.from - 1), static_cast<int>(rl.to - 1), rl.b});
  }
  if (!coords.empty()) {
    c.distance_miles.assign(nb, std::nullopt);
    for (auto [id, d] : coords) {
      if (id < 1 || id > nb) {
        fail(ErrorCode::kParse, origin + ": [coords] references undeclared bus " + std::to_string(id));
      }
      c.distance_miles[id - 1] = d;
    }
  }
  try {
    validate(c);
  } catch (const Error& e) {
    throw Error(e.code(), origin + ": " + e.what());
  }
  return c;
}

GridCase load_case(const std::filesystem::path& path) {
  return parse_case(detail::read_file(path), path.string());
}

std::string format_case(const GridCase& c) {
  std::ostringstream out;
  out << "[machines]\n# id inertia damping\n";
  for (int i = 0; i < c.n_machines(); ++i) {
    out << (i + 1) << ' ' << format_double(c.inertia(i)) << ' ' << format_double(c.damping(i)) << '\n';
  }
  auto dense = [&out](const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << format_double(m(r, j));
      out << '\n';
    }
  };
  out << "\n[jacobian]\n";
  dense(c.jacobian);
  out << "\n[bus_angle_map]\n";
  dense(c.bus_angle_map);
  if (!c.lines.empty()) {
    out << "\n[lines]\n# from to susceptance\n";
    for (const Line& l : c.lines) {
      out << (l.from_bus + 1) << ' ' << (l.to_bus + 1) << ' ' << format_double(l.susceptance) << '\n';
    }
  }
  if (!c.distance_miles.empty()) {
    out << "\n[coords]\n# id distance_miles\n";
    for (std::size_t i = 0; i < c.distance_miles.size(); ++i) {
      if (c.distance_miles[i]) out << (i + 1) << ' ' << format_double(*c.distance_miles[i]) << '\n';
    }
  }
  return out.str();
}

void write_case(const GridCase& c, const std::filesystem::path& path) {
  detail::write_file_atomic(path, format_case(c));
}

Topology parse_topology(std::string_view s) {
  if (s == "chain") return Topology::kChain;
  if (s == "ring") return Topology::kRing;
  if (s == "complete") return Topology::kComplete;
  fail(ErrorCode::kInvalidArgument, "unknown topology '" + std::string(s) + "' (chain|ring|complete)");
}

GridCase make_synthetic_case(int n, Topology topology, std::uint64_t seed) {
  require(n >= 1, "synthetic case needs at least one machine");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> inertia_dist(0.5, 2.0);
  std::uniform_real_distribution<double> ratio_dist(0.1, 0.3);
  std::uniform_real_distribution<double> weight_dist(0.5, 3.0);

  GridCase c;
  c.inertia.resize(n);
  c.damping.resize(n);
  for (int i = 0; i < n; ++i) {
    c.inertia(i) = inertia_dist(rng);
    c.damping(i) = ratio_dist(rng) * c.inertia(i);
  }

  std::vector<std::pair<int, int>> edges;
  switch (topology) {
    case Topology::kChain:
      for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
      break;
    case Topology::kRing:
      for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
      if (n >= 3) edges.emplace_back(n - 1, 0);
      break;
    case Topology::kComplete:
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) edges.emplace_back(i, j);
      break;
  }

  c.jacobian = Eigen::MatrixXd::Zero(n, n);
  for (auto [a, b] : edges) {
    const double w = weight_dist(rng);
    c.jacobian(a, a) += w;
    c.jacobian(b, b) += w;
    c.jacobian(a, b) -= w;
    c.jacobian(b, a) -= w;
    c.lines.push_back({a, b, w});
  }
  c.bus_angle_map = Eigen::MatrixXd::Identity(n, n);
  validate(c);
  return c;
}

void set_damping_ratios(GridCase& c, const Eigen::VectorXd& gammas) {
  require(gammas.size() == c.n_machines(), "damping ratio list has " + std::to_string(gammas.size()) +
                                               " entries, expected " + std::to_string(c.n_machines()));
  for (int i = 0; i < c.n_machines(); ++i) {
    require(gammas(i) > 0.0, "damping ratio must be positive");
    c.damping(i) = gammas(i) * c.inertia(i);
  }
}

void set_uniform_damping(GridCase& c, double gamma) {
  set_damping_ratios(c, Eigen::VectorXd::Constant(c.n_machines(), gamma));
}

// ---------------------------------------------------------------------------

OutputSpec OutputSpec::bus_angle(int bus, double scale) {
  OutputSpec s;
  s.kind = OutputKind::kBusAngle;
  s.bus = bus;
  s.scale = scale;
  return s;
}

OutputSpec OutputSpec::line(int from, int to, double scale) {
  OutputSpec s;
  s.kind = OutputKind::kLineFlow;
  s.from_bus = from;
  s.to_bus = to;
  s.scale = scale;
  return s;
}

OutputSpec OutputSpec::parse(std::string_view text) {
  text = trim(text);
  std::string_view body = text;
  bool want_line = false;
  if (const auto colon = text.find(':'); colon != std::string_view::npos) {
    const auto prefix = text.substr(0, colon);
    body = text.substr(colon + 1);
    if (prefix == "line" || prefix == "line_flow") want_line = true;
    else if (prefix != "bus" && prefix != "bus_angle") {
      fail(ErrorCode::kInvalidArgument, "unknown output spec '" + std::string(text) + "'");
    }
  }
  if (const auto dash = body.find('-'); dash != std::string_view::npos) {
    const auto from = parse_int(body.substr(0, dash), "line spec");
    const auto to = parse_int(body.substr(dash + 1), "line spec");
    return line(static_cast<int>(from - 1), static_cast<int>(to - 1));
  }
  if (want_line) fail(ErrorCode::kInvalidArgument, "line spec needs 'from-to': '" + std::string(text) + "'");
  return bus_angle(static_cast<int>(parse_int(body, "bus spec") - 1));
}

std::string OutputSpec::location() const {
  if (kind == OutputKind::kBusAngle) return std::to_string(bus + 1);
  return std::to_string(from_bus + 1) + "-" + std::to_string(to_bus + 1);
}

double line_susceptance(const GridCase& c, int from, int to) {
  require(from != to, "degenerate line " + std::to_string(from + 1) + "-" + std::to_string(to + 1));
  for (const Line& l : c.lines) {
    if ((l.from_bus == from && l.to_bus == to) || (l.from_bus == to && l.to_bus == from)) {
      return l.susceptance;
    }
  }
  fail(ErrorCode::kInvalidArgument,
       "unknown line " + std::to_string(from + 1) + "-" + std::to_string(to + 1));
}

Eigen::MatrixXd output_matrix(const GridCase& c, const std::vector<OutputSpec>& targets) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(targets.size()), c.n_machines());
  const int nb = c.n_buses();
  for (std::size_t r = 0; r < targets.size(); ++r) {
    const OutputSpec& t = targets[r];
    const auto row = static_cast<Eigen::Index>(r);
    if (t.kind == OutputKind::kBusAngle) {
      require(t.bus >= 0 && t.bus < nb, "unknown bus " + std::to_string(t.bus + 1));
      out.row(row) = t.scale * c.bus_angle_map.row(t.bus);
    } else {
      require(t.from_bus >= 0 && t.from_bus < nb && t.to_bus >= 0 && t.to_bus < nb,
              "unknown line " + t.location());
      const double b = line_susceptance(c, t.from_bus, t.to_bus);
      out.row(row) = t.scale * b * (c.bus_angle_map.row(t.from_bus) - c.bus_angle_map.row(t.to_bus));
    }
  }
  return out;
}

}  // namespace dynresp
