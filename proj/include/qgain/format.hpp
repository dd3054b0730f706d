#pragma once

// Locale-independent number formatting shared by all text artifacts.

#include <string>
#include <string_view>

namespace qgain {

/// Shortest general form with 17 significant digits, '.' as decimal point.
std::string format_double(double value);

/// Parses a double written in C locale; throws ValidationError on junk.
double parse_double(std::string_view text);

} // namespace qgain
