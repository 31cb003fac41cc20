#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace cb2::csv {

// Splits one CSV line. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_line(std::string_view line);

// Quotes a field only when it needs quoting.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);

}  // namespace cb2::csv
