#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dynresp/modal.hpp"
#include "dynresp/response.hpp"
#include "dynresp/trace.hpp"

namespace dynresp {

enum class Scaling { kTheoretical, kNadirMatch, kNone };
enum class XcorrMethod { kFft, kDirect };

struct RecoveryConfig {
  // Channel names ("bus_angle:2") or bare source locations ("2"); see select_channels.
  std::string source_channel;
  std::string target_channel;
  double passband_low_hz = 0.1;
  double passband_high_hz = 0.8;
  // Response of the target quantity itself (kAngle: angle, bus angle, line
  // flow) or of its time derivative (kFrequency). Defaults to the target
  // channel's own kind.
  std::optional<ResponseKind> response;
  // When set, must equal the order implied by the channel kinds.
  std::optional<int> differentiation_order;
  Scaling scaling = Scaling::kTheoretical;
  double gamma = 0.2;
  double alpha = 1.0;
  double nadir_reference = -1.0;
  std::optional<double> max_lag_s;  // default min(20 s, record/4)
  std::optional<bool> subtract_reference_angle;  // default: true if an angle channel is involved
  XcorrMethod method = XcorrMethod::kFft;

  /// Parses `key=value` text. Keys: source, target, passband ("lo,hi"),
  /// passband_low_hz, passband_high_hz, response, differentiation_order,
  /// scaling, gamma, alpha, nadir_reference, max_lag_s,
  /// subtract_reference_angle, method.
  static RecoveryConfig parse(std::string_view text, const std::string& origin = "<string>");

  /// Applies one key=value setting; throws kParse on unknown keys or bad values.
  void set(std::string_view key, std::string_view value);

  std::string format() const;
};

Scaling parse_scaling(std::string_view s);
std::string_view to_string(Scaling s);

/// Equivalence relation between a (source, target) channel pair and the
/// response being recovered.
struct Relation {
  int differentiation_order = 0;
  double sign = -1.0;  // theoretical scale is sign * 2 gamma / alpha
  std::string tag;     // e.g. "angle-angle/order2"
};

/// order = 1 + [response is frequency] - [source is frequency] - [target is frequency];
/// sign = -1 for angle-like targets and +1 for frequency targets.
/// Throws when the order would be negative (integration is not supported).
Relation relation_for(ChannelKind source, ChannelKind target, ResponseKind response);

struct ChannelPair {
  int source = 0;
  int target = 0;
};

/// Resolves the source and target channels. A full channel name is used
/// verbatim. A bare source location ("2") picks the channel of the target's
/// kind at that location (bus_angle for line-flow targets), falling back to
/// the rotor channel of the same quantity. A bare target "7" means
/// bus_angle:7 and "7-8" means line_flow:7-8. Missing channels raise an
/// error listing those available.
ChannelPair select_channels(const SignalTrace& trace, std::string_view source,
                            std::string_view target);

/// Reference-angle subtraction (optional) followed by zero-phase bandpass and
/// residual-mean removal on every non-input channel.
SignalTrace preprocess(const SignalTrace& trace, double low_hz, double high_hz,
                       bool subtract_reference_angle);
SignalTrace preprocess(const SignalTrace& trace, const RecoveryConfig& cfg);

/// C[tau] = (1/M) sum_m x[m] y[m - tau] for tau = 0..max_lag, samples outside
/// the record taken as zero.
std::vector<double> cross_correlate(std::span<const double> x, std::span<const double> y,
                                    std::size_t max_lag, XcorrMethod method = XcorrMethod::kFft);

/// Second-order accurate derivative of a uniformly sampled curve: centered
/// in the interior, one-sided three-point at the ends. Order 2 applies the
/// first derivative twice.
std::vector<double> differentiate(std::span<const double> curve, int order, double step);

/// Full pipeline: select, preprocess, cross-correlate, differentiate, scale.
ImpulseResponse recover(const SignalTrace& trace, const RecoveryConfig& cfg);

/// Recovery from an already preprocessed trace (skips the filtering stage).
ImpulseResponse recover_preprocessed(const SignalTrace& filtered, const RecoveryConfig& cfg);

}  // namespace dynresp
