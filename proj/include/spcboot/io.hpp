#pragma once

#include <istream>
#include <map>
#include <string>
#include <vector>

#include "spcboot/model.hpp"

namespace spcboot {

inline constexpr const char* tool_version = "spcboot 0.1.0";

// %.17g, which round-trips every double.
std::string format_double(double v);

// One value per line with an optional "x" header. Blank lines and lines starting
// with '#' are skipped. Malformed lines raise ParseError naming the line.
Sample read_scalar_csv(std::istream& in, const std::string& source);
Sample read_scalar_csv_file(const std::string& path);

// Header "y,x1,...,xd"; the intercept column is added on read.
JointSample read_joint_csv(std::istream& in, const std::string& source);
JointSample read_joint_csv_file(const std::string& path);

// Parses "a,b,c" into finite doubles; ParseError mentions `where` on failure.
std::vector<double> parse_csv_numbers(const std::string& line, const std::string& where);

using KeyValues = std::map<std::string, std::string>;

// key=value lines; '#' comment lines and blank lines are skipped.
KeyValues read_key_values(std::istream& in, const std::string& source);
KeyValues read_key_values_file(const std::string& path);

const std::string& require_key(const KeyValues& kv, const std::string& key, const std::string& source);
double require_double(const KeyValues& kv, const std::string& key, const std::string& source);

}  // namespace spcboot
