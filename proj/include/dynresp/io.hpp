#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dynresp/response.hpp"
#include "dynresp/trace.hpp"

namespace dynresp {

/// Trace CSV: column `t` followed by one column per channel named
/// `<kind>:<location>`. Values use the shortest round-trip decimal form.
std::string format_trace_csv(const SignalTrace& trace);
SignalTrace parse_trace_csv(std::string_view text, const std::string& origin = "<string>");

/// Sidecar lines are `key=value`; sample_rate_hz and start_time_s are always
/// present, followed by the trace metadata.
std::string format_trace_sidecar(const SignalTrace& trace);

/// Path of the sidecar that accompanies a trace CSV ("<csv>.meta").
std::filesystem::path sidecar_path(const std::filesystem::path& csv);

/// Writes the CSV and its sidecar atomically.
void write_trace(const SignalTrace& trace, const std::filesystem::path& csv);

/// Reads a trace CSV. The sample rate comes from the sidecar when present,
/// otherwise from the spacing of the `t` column.
SignalTrace read_trace(const std::filesystem::path& csv);

/// Impulse-response CSV with header `tau,value,source,target,kind`.
std::string format_response_csv(const std::vector<ImpulseResponse>& responses);
std::vector<ImpulseResponse> parse_response_csv(std::string_view text,
                                                const std::string& origin = "<string>");
void write_responses(const std::vector<ImpulseResponse>& responses, const std::filesystem::path& path);
std::vector<ImpulseResponse> read_responses(const std::filesystem::path& path);

/// Plain `key=value` text with `#` comments and blank lines ignored.
/// Pairs are returned in file order; repeated keys are kept.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text,
                                                                  const std::string& origin);

}  // namespace dynresp
