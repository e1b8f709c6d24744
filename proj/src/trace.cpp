#include "dynresp/trace.hpp"

#include <set>

#include "dynresp/error.hpp"

namespace dynresp {

namespace {

constexpr std::pair<ChannelKind, std::string_view> kKindNames[] = {
    {ChannelKind::kRotorAngle, "rotor_angle"}, {ChannelKind::kRotorFreq, "rotor_freq"},
    {ChannelKind::kBusAngle, "bus_angle"},     {ChannelKind::kBusFreq, "bus_freq"},
    {ChannelKind::kLineFlow, "line_flow"},     {ChannelKind::kInput, "input"},
};

}  // namespace

std::string_view to_string(ChannelKind k) {
  for (const auto& [kind, name] : kKindNames) {
    if (kind == k) return name;
  }
  return "unknown";
}

ChannelKind parse_channel_kind(std::string_view s) {
  for (const auto& [kind, name] : kKindNames) {
    if (name == s) return kind;
  }
  fail(ErrorCode::kParse, "unknown channel kind '" + std::string(s) + "'");
}

std::string Channel::name() const { return std::string(to_string(kind)) + ":" + location; }

Channel Channel::parse(std::string_view name) {
  const auto colon = name.find(':');
  if (colon == std::string_view::npos || colon + 1 >= name.size()) {
    fail(ErrorCode::kParse, "channel name '" + std::string(name) + "' is not <kind>:<location>");
  }
  return {parse_channel_kind(name.substr(0, colon)), std::string(name.substr(colon + 1))};
}

std::optional<int> SignalTrace::find(std::string_view name) const {
  for (int i = 0; i < n_channels(); ++i) {
    if (channels[i].name() == name) return i;
  }
  return std::nullopt;
}

int SignalTrace::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  std::string avail;
  for (const auto& ch : channels) {
    if (!avail.empty()) avail += ", ";
    avail += ch.name();
  }
  fail(ErrorCode::kInvalidArgument,
       "channel '" + std::string(name) + "' not found; available: " + avail);
}

std::vector<std::string> SignalTrace::channel_names() const {
  std::vector<std::string> out;
  out.reserve(channels.size());
  for (const auto& ch : channels) out.push_back(ch.name());
  return out;
}

void SignalTrace::add_channel(const Channel& ch, const Eigen::RowVectorXd& samples) {
  require(!find(ch.name()), "duplicate channel '" + ch.name() + "'");
  if (channels.empty() && data.size() == 0) {
    data.resize(0, samples.size());
  }
  require(samples.size() == data.cols(), "channel '" + ch.name() + "' has " +
                                             std::to_string(samples.size()) + " samples, expected " +
                                             std::to_string(data.cols()));
  data.conservativeResize(data.rows() + 1, Eigen::NoChange);
  data.row(data.rows() - 1) = samples;
  channels.push_back(ch);
}

void SignalTrace::validate() const {
  require(sample_rate_hz > 0.0, "sample rate must be positive");
  require(data.rows() == n_channels(), "trace has " + std::to_string(n_channels()) +
                                           " channels but " + std::to_string(data.rows()) +
                                           " data rows");
  std::set<std::string> seen;
  for (const auto& ch : channels) {
    require(seen.insert(ch.name()).second, "duplicate channel '" + ch.name() + "'");
  }
}

}  // namespace dynresp
