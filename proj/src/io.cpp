#include "spcboot/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "spcboot/error.hpp"

namespace spcboot {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool skippable(const std::string& line) { return line.empty() || line.front() == '#'; }

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::parse_error, "cannot open '" + path + "'");
  return in;
}

double parse_number(const std::string& field, const std::string& where) {
  const std::string t = trim(field);
  if (t.empty()) fail(ErrorCode::parse_error, where + ": empty field");
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) fail(ErrorCode::parse_error, where + ": '" + t + "' is not a number");
  if (!std::isfinite(v)) fail(ErrorCode::non_finite_observation, where + ": value is not finite");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> parse_csv_numbers(const std::string& line, const std::string& where) {
  std::vector<double> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(parse_number(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start),
                               where + ", field " + std::to_string(out.size() + 1)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

Sample read_scalar_csv(std::istream& in, const std::string& source) {
  std::vector<double> values;
  std::string raw;
  bool first = true;
  for (std::size_t line_no = 1; std::getline(in, raw); ++line_no) {
    const std::string line = trim(raw);
    if (skippable(line)) continue;
    if (first && line == "x") {
      first = false;
      continue;
    }
    first = false;
    const std::string where = source + " line " + std::to_string(line_no);
    if (line.find(',') != std::string::npos)
      fail(ErrorCode::parse_error, where + ": expected one value per line");
    values.push_back(parse_number(line, where));
  }
  return Sample(std::move(values));
}

Sample read_scalar_csv_file(const std::string& path) {
  std::ifstream in = open_input(path);
  return read_scalar_csv(in, path);
}

JointSample read_joint_csv(std::istream& in, const std::string& source) {
  std::string raw;
  std::size_t line_no = 0;
  std::string header;
  while (std::getline(in, raw)) {
    ++line_no;
    header = trim(raw);
    if (!skippable(header)) break;
    header.clear();
  }
  if (header.empty()) fail(ErrorCode::parse_error, source + ": missing header y,x1,...,xd");
  std::size_t columns = 1;
  for (char ch : header) columns += ch == ',' ? 1 : 0;
  if (header.rfind("y", 0) != 0)
    fail(ErrorCode::parse_error, source + " line " + std::to_string(line_no) + ": header must start with y");
  const std::size_t d = columns;  // covariates plus the intercept
  std::vector<double> y;
  std::vector<double> x;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (skippable(line)) continue;
    const std::string where = source + " line " + std::to_string(line_no);
    const std::vector<double> fields = parse_csv_numbers(line, where);
    if (fields.size() != columns)
      fail(ErrorCode::parse_error, where + ": expected " + std::to_string(columns) + " fields, got " +
                                       std::to_string(fields.size()));
    y.push_back(fields[0]);
    x.push_back(1.0);
    x.insert(x.end(), fields.begin() + 1, fields.end());
  }
  return JointSample(std::move(y), std::move(x), d);
}

JointSample read_joint_csv_file(const std::string& path) {
  std::ifstream in = open_input(path);
  return read_joint_csv(in, path);
}

KeyValues read_key_values(std::istream& in, const std::string& source) {
  KeyValues kv;
  std::string raw;
  for (std::size_t line_no = 1; std::getline(in, raw); ++line_no) {
    const std::string line = trim(raw);
    if (skippable(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0)
      fail(ErrorCode::parse_error, source + " line " + std::to_string(line_no) + ": expected key=value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values_file(const std::string& path) {
  std::ifstream in = open_input(path);
  return read_key_values(in, path);
}

const std::string& require_key(const KeyValues& kv, const std::string& key, const std::string& source) {
  const auto it = kv.find(key);
  if (it == kv.end()) fail(ErrorCode::parse_error, source + ": missing key '" + key + "'");
  return it->second;
}

double require_double(const KeyValues& kv, const std::string& key, const std::string& source) {
  return parse_number(require_key(kv, key, source), source + " key '" + key + "'");
}

}  // namespace spcboot
