#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pemadm/sim.hpp"

namespace pemadm::csv {

/// Shortest round-trip decimal form, locale independent; "nan", "inf", "-inf" for non-finite values.
std::string format(double v);
/// Parses what format() writes; throws std::invalid_argument otherwise.
double parse(const std::string& s);

/// step,time_s,rmse,x1_mean,x1_std,...,u_mean,u_std,gap_mean,gap_std.
/// With one input the input columns are u_mean/u_std, otherwise u1_mean, ...
/// gap = -(x1 + delta); the gap columns hold "nan" when delta is absent.
std::string summary(const MonteCarloSummary& s, double h, std::optional<double> delta);
/// trial,cost,collided (collided empty when no gap offset was configured).
std::string costs(const MonteCarloSummary& s);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws std::out_of_range when absent.
    int column(const std::string& name) const;
    std::vector<double> numbers(const std::string& name) const;
};

/// Minimal reader for the files produced here (no quoting).
Table read(const std::string& path);
Table parse_table(const std::string& text);

void write_file(const std::string& path, const std::string& content);

}  // namespace pemadm::csv
