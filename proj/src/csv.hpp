#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace synthkt::csv {

// Splits one record, honouring double-quoted fields ("" escapes a quote).
std::vector<std::string> split_record(std::string_view line, char delimiter);

// Quotes a field when it contains the delimiter, a quote or a newline.
std::string escape_field(std::string_view field, char delimiter);

bool parse_double(std::string_view text, double& out);

std::string_view trim(std::string_view text);

}  // namespace synthkt::csv
