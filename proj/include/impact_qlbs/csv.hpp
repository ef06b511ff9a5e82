#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>

namespace impact_qlbs::csv {

/// Decimal text with 17 significant digits; parses back to the same double.
std::string format_full(double v);

/// Header `path,t0,...,tT`, one row per path. Works for any per-path,
/// per-time matrix (rates, positions, portfolio values).
void write_paths(const std::filesystem::path& file, const Eigen::MatrixXd& values);
Eigen::MatrixXd read_paths(const std::filesystem::path& file);

/// Header `path,total_cost`.
void write_costs(const std::filesystem::path& file, const Eigen::VectorXd& totals);

}  // namespace impact_qlbs::csv
