#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace samdp {

// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

// Strict parsers; throw std::invalid_argument on trailing garbage or overflow.
double parse_double(std::string_view token);
long long parse_int(std::string_view token);

std::vector<std::string_view> split_ws(std::string_view line);

// Parses a header of the form "#<magic> v1 key=value ...". Returns the key/value
// pairs; throws ParseError(line 1) if the magic or version does not match.
std::map<std::string, std::string> parse_header(std::string_view line, std::string_view magic);

// FNV-1a 64-bit, hex-encoded.
std::string checksum(std::string_view bytes);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace samdp
