#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace msj {

// Locale-independent numeric formatting ('.' decimals, shortest round-trip
// for doubles) so CSV output is byte-stable across environments.
std::string format_full(double v);

// 9 significant digits (the event-history time format).
std::string format_sig9(double v);

double parse_double(std::string_view text, const std::string& context);
std::int64_t parse_int(std::string_view text, const std::string& context);

// Minimal CSV splitting: fields never contain commas or quotes in any of the
// pinned schemas, so no quoting support is needed.
std::vector<std::string_view> split_csv_line(std::string_view line);

void write_text_file(const std::string& path, std::string_view content);
std::string read_text_file(const std::string& path);

// FNV-1a, hex encoded; manifests use it to fingerprint configs.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace msj
