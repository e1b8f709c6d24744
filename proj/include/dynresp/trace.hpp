#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace dynresp {

enum class ChannelKind { kRotorAngle, kRotorFreq, kBusAngle, kBusFreq, kLineFlow, kInput };

std::string_view to_string(ChannelKind k);
ChannelKind parse_channel_kind(std::string_view s);

inline bool is_angle_kind(ChannelKind k) {
  return k == ChannelKind::kRotorAngle || k == ChannelKind::kBusAngle;
}
inline bool is_freq_kind(ChannelKind k) {
  return k == ChannelKind::kRotorFreq || k == ChannelKind::kBusFreq;
}

struct Channel {
  ChannelKind kind = ChannelKind::kRotorAngle;
  std::string location;  // one-based id, "7" or "7-8"

  std::string name() const;  // "<kind>:<location>"
  static Channel parse(std::string_view name);
  bool operator==(const Channel&) const = default;
};

/// Uniformly sampled multi-channel record (the PMU data model).
/// `data` is channels x samples.
struct SignalTrace {
  double sample_rate_hz = 1.0;
  double start_time_s = 0.0;
  std::vector<Channel> channels;
  Eigen::MatrixXd data;
  std::map<std::string, std::string> metadata;

  double sample_period() const { return 1.0 / sample_rate_hz; }
  Eigen::Index n_samples() const { return data.cols(); }
  int n_channels() const { return static_cast<int>(channels.size()); }

  std::optional<int> find(std::string_view name) const;
  int index_of(std::string_view name) const;  // throws listing available channels
  std::vector<std::string> channel_names() const;

  /// Appends a channel; throws if the name already exists or lengths differ.
  void add_channel(const Channel& ch, const Eigen::RowVectorXd& samples);

  /// Throws on duplicate names, non-positive rate, or shape mismatch.
  void validate() const;
};

}  // namespace dynresp
