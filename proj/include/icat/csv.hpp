#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace icat::csv {

/// Splits one RFC 4180 record (no embedded newlines).
std::vector<std::string> split_line(std::string_view line);

/// Quotes a field when it contains a comma, quote or newline.
std::string escape(std::string_view field);

std::string join(const std::vector<std::string>& fields);

/// Shortest decimal form that round-trips the double.
std::string format_number(double value);

}  // namespace icat::csv
