#include "dynresp/io.hpp"

#include <cmath>

#include "dynresp/error.hpp"
#include "text_util.hpp"

namespace dynresp {

using detail::format_double;
using detail::parse_double;
using detail::split;
using detail::trim;

namespace {

template <class Fn>
void for_each_line(std::string_view text, Fn fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    fn(text.substr(start, end - start), line_no);
    if (end == text.size()) break;
    start = end + 1;
  }
}

std::string where(const std::string& origin, std::size_t line) {
  return origin + ":" + std::to_string(line);
}

}  // namespace

std::string format_trace_csv(const SignalTrace& trace) {
  trace.validate();
  std::string out = "t";
  for (const auto& ch : trace.channels) {
    out += ',';
    out += ch.name();
  }
  out += '\n';
  const double ts = trace.sample_period();
  for (Eigen::Index j = 0; j < trace.n_samples(); ++j) {
    out += format_double(trace.start_time_s + static_cast<double>(j) * ts);
    for (int i = 0; i < trace.n_channels(); ++i) {
      out += ',';
      out += format_double(trace.data(i, j));
    }
    out += '\n';
  }
  return out;
}

SignalTrace parse_trace_csv(std::string_view text, const std::string& origin) {
  SignalTrace tr;
  std::vector<double> times;
  std::vector<std::vector<double>> columns;
  bool header_done = false;
  for_each_line(text, [&](std::string_view raw, std::size_t line_no) {
    const std::string_view line = trim(raw);
    if (line.empty()) return;
    const auto fields = split(line, ',');
    if (!header_done) {
      if (trim(fields[0]) != "t") {
        fail(ErrorCode::kParse, where(origin, line_no) + ": first column must be 't'");
      }
      for (std::size_t i = 1; i < fields.size(); ++i) {
        tr.channels.push_back(Channel::parse(trim(fields[i])));
      }
      columns.resize(tr.channels.size());
      header_done = true;
      return;
    }
    if (fields.size() != tr.channels.size() + 1) {
      fail(ErrorCode::kParse, where(origin, line_no) + ": expected " +
                                  std::to_string(tr.channels.size() + 1) + " fields, got " +
                                  std::to_string(fields.size()));
    }
    times.push_back(parse_double(fields[0], where(origin, line_no) + " field t"));
    for (std::size_t i = 0; i < tr.channels.size(); ++i) {
      columns[i].push_back(parse_double(fields[i + 1], where(origin, line_no) + " field " +
                                                           tr.channels[i].name()));
    }
  });
  if (!header_done) fail(ErrorCode::kParse, origin + ": empty trace file");

  const auto m = static_cast<Eigen::Index>(times.size());
  tr.data.resize(static_cast<Eigen::Index>(tr.channels.size()), m);
  for (std::size_t i = 0; i < columns.size(); ++i) {
    for (Eigen::Index j = 0; j < m; ++j) tr.data(static_cast<Eigen::Index>(i), j) = columns[i][j];
  }
  if (m >= 2) {
    const double span = times.back() - times.front();
    if (!(span > 0.0)) fail(ErrorCode::kParse, origin + ": time column is not increasing");
    tr.sample_rate_hz = static_cast<double>(m - 1) / span;
  }
  if (m >= 1) tr.start_time_s = times.front();
  tr.validate();
  return tr;
}

std::string format_trace_sidecar(const SignalTrace& trace) {
  std::string out;
  out += "sample_rate_hz=" + format_double(trace.sample_rate_hz) + "\n";
  out += "start_time_s=" + format_double(trace.start_time_s) + "\n";
  out += "n_samples=" + std::to_string(trace.n_samples()) + "\n";
  for (const auto& [k, v] : trace.metadata) out += k + "=" + v + "\n";
  return out;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  std::filesystem::path p = csv;
  p += ".meta";
  return p;
}

void write_trace(const SignalTrace& trace, const std::filesystem::path& csv) {
  detail::write_file_atomic(csv, format_trace_csv(trace));
  detail::write_file_atomic(sidecar_path(csv), format_trace_sidecar(trace));
}

SignalTrace read_trace(const std::filesystem::path& csv) {
  SignalTrace tr = parse_trace_csv(detail::read_file(csv), csv.string());
  const auto meta = sidecar_path(csv);
  if (!std::filesystem::exists(meta)) return tr;
  for (const auto& [k, v] : parse_key_values(detail::read_file(meta), meta.string())) {
    if (k == "sample_rate_hz") {
      tr.sample_rate_hz = parse_double(v, meta.string() + " sample_rate_hz");
    } else if (k == "start_time_s") {
      tr.start_time_s = parse_double(v, meta.string() + " start_time_s");
    } else if (k != "n_samples") {
      tr.metadata[k] = v;
    }
  }
  tr.validate();
  return tr;
}

std::string format_response_csv(const std::vector<ImpulseResponse>& responses) {
  std::string out = "tau,value,source,target,kind\n";
  for (const auto& r : responses) {
    require(r.lags_s.size() == r.values.size(), "response lag and value counts differ");
    for (std::size_t j = 0; j < r.size(); ++j) {
      out += format_double(r.lags_s[j]);
      out += ',';
      out += format_double(r.values[j]);
      out += ',' + r.source + ',' + r.target + ',' + r.kind + '\n';
    }
  }
  return out;
}

std::vector<ImpulseResponse> parse_response_csv(std::string_view text, const std::string& origin) {
  std::vector<ImpulseResponse> out;
  bool header_done = false;
  for_each_line(text, [&](std::string_view raw, std::size_t line_no) {
    const std::string_view line = trim(raw);
    if (line.empty()) return;
    const auto f = split(line, ',');
    if (!header_done) {
      if (f.size() != 5 || trim(f[0]) != "tau" || trim(f[1]) != "value") {
        fail(ErrorCode::kParse, where(origin, line_no) +
                                    ": expected header tau,value,source,target,kind");
      }
      header_done = true;
      return;
    }
    if (f.size() != 5) {
      fail(ErrorCode::kParse, where(origin, line_no) + ": expected 5 fields, got " +
                                  std::to_string(f.size()));
    }
    const double tau = parse_double(f[0], where(origin, line_no) + " field tau");
    const double value = parse_double(f[1], where(origin, line_no) + " field value");
    const std::string source(trim(f[2])), target(trim(f[3])), kind(trim(f[4]));
    const bool same = !out.empty() && out.back().source == source && out.back().target == target &&
                      out.back().kind == kind && tau > out.back().lags_s.back();
    if (!same) {
      ImpulseResponse r;
      r.source = source;
      r.target = target;
      r.kind = kind;
      out.push_back(std::move(r));
    }
    out.back().lags_s.push_back(tau);
    out.back().values.push_back(value);
  });
  if (!header_done) fail(ErrorCode::kParse, origin + ": empty response file");
  return out;
}

void write_responses(const std::vector<ImpulseResponse>& responses, const std::filesystem::path& path) {
  detail::write_file_atomic(path, format_response_csv(responses));
}

std::vector<ImpulseResponse> read_responses(const std::filesystem::path& path) {
  return parse_response_csv(detail::read_file(path), path.string());
}

std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text,
                                                                  const std::string& origin) {
  std::vector<std::pair<std::string, std::string>> out;
  for_each_line(text, [&](std::string_view raw, std::size_t line_no) {
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) return;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || trim(line.substr(0, eq)).empty()) {
      fail(ErrorCode::kParse, where(origin, line_no) + ": expected key=value");
    }
    out.emplace_back(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
  });
  return out;
}

}  // namespace dynresp
