#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace pcs {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);

std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_integer(std::string_view text);

}  // namespace pcs
