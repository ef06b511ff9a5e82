#include "impact_qlbs/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "impact_qlbs/errors.hpp"

namespace impact_qlbs::csv {

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& text, const std::filesystem::path& file) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0')
    throw ConfigError(file.string() + ": bad numeric field '" + text + "'");
  return v;
}

}  // namespace

void write_paths(const std::filesystem::path& file, const Eigen::MatrixXd& values) {
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot open for writing: " + file.string());
  out << "path";
  for (Eigen::Index t = 0; t < values.cols(); ++t) out << ",t" << t;
  out << '\n';
  for (Eigen::Index k = 0; k < values.rows(); ++k) {
    out << k;
    for (Eigen::Index t = 0; t < values.cols(); ++t) out << ',' << format_full(values(k, t));
    out << '\n';
  }
  if (!out) throw ConfigError("write failed: " + file.string());
}

Eigen::MatrixXd read_paths(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open: " + file.string());

  std::string line;
  if (!std::getline(in, line)) throw ConfigError(file.string() + ": missing header");
  const auto header = split_line(line);
  if (header.empty() || header[0] != "path")
    throw ConfigError(file.string() + ": header must start with 'path'");
  const std::size_t n_cols = header.size() - 1;
  if (n_cols == 0) throw ConfigError(file.string() + ": no time columns");

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != header.size())
      throw ConfigError(file.string() + ": row " + std::to_string(rows.size()) +
                        " has " + std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(header.size()));
    std::vector<double> row(n_cols);
    for (std::size_t i = 0; i < n_cols; ++i) row[i] = parse_double(fields[i + 1], file);
    rows.push_back(std::move(row));
  }

  Eigen::MatrixXd values(static_cast<Eigen::Index>(rows.size()),
                         static_cast<Eigen::Index>(n_cols));
  for (std::size_t k = 0; k < rows.size(); ++k)
    for (std::size_t t = 0; t < n_cols; ++t)
      values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)) = rows[k][t];
  return values;
}

void write_costs(const std::filesystem::path& file, const Eigen::VectorXd& totals) {
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot open for writing: " + file.string());
  out << "path,total_cost\n";
  for (Eigen::Index k = 0; k < totals.size(); ++k)
    out << k << ',' << format_full(totals(k)) << '\n';
  if (!out) throw ConfigError("write failed: " + file.string());
}

}  // namespace impact_qlbs::csv
