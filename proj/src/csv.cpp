#include "pemadm/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "pemadm/json_io.hpp"

namespace pemadm::csv {

std::string format(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse(const std::string& s) {
    if (s == "nan") return std::nan("");
    if (s == "inf") return HUGE_VAL;
    if (s == "-inf") return -HUGE_VAL;
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::invalid_argument("csv: not a number: \"" + s + "\"");
    return v;
}

std::string summary(const MonteCarloSummary& s, double h, std::optional<double> delta) {
    const auto n1 = s.x_mean.cols();
    const auto n2 = s.u_mean.cols();
    std::string out = "step,time_s,rmse";
    for (Eigen::Index i = 0; i < n1; ++i) out += ",x" + std::to_string(i + 1) + "_mean,x" + std::to_string(i + 1) + "_std";
    for (Eigen::Index i = 0; i < n2; ++i) {
        const std::string name = n2 == 1 ? "u" : "u" + std::to_string(i + 1);
        out += "," + name + "_mean," + name + "_std";
    }
    out += ",gap_mean,gap_std\n";
    for (std::size_t k = 0; k < s.rmse.size(); ++k) {
        const auto r = static_cast<Eigen::Index>(k);
        out += std::to_string(k) + ',' + format(static_cast<double>(k) * h) + ',' + format(s.rmse[k]);
        for (Eigen::Index i = 0; i < n1; ++i) out += ',' + format(s.x_mean(r, i)) + ',' + format(s.x_std(r, i));
        for (Eigen::Index i = 0; i < n2; ++i) out += ',' + format(s.u_mean(r, i)) + ',' + format(s.u_std(r, i));
        if (delta) {
            out += ',' + format(-(s.x_mean(r, 0) + *delta)) + ',' + format(s.x_std(r, 0));
        } else {
            out += ",nan,nan";
        }
        out += '\n';
    }
    return out;
}

std::string costs(const MonteCarloSummary& s) {
    std::string out = "trial,cost,collided\n";
    for (std::size_t m = 0; m < s.costs.size(); ++m) {
        out += std::to_string(m) + ',' + format(s.costs[m]) + ',';
        if (!s.collided.empty()) out += s.collided[m] ? '1' : '0';
        out += '\n';
    }
    return out;
}

int Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    throw std::out_of_range("csv: no column \"" + name + "\"");
}

std::vector<double> Table::numbers(const std::string& name) const {
    const int c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& row : rows) out.push_back(row.at(c).empty() ? std::nan("") : parse(row.at(c)));
    return out;
}

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

Table parse_table(const std::string& text) {
    Table t;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (first) {
            t.header = split(line);
            first = false;
        } else {
            auto row = split(line);
            if (row.size() != t.header.size()) throw std::invalid_argument("csv: row width differs from header");
            t.rows.push_back(std::move(row));
        }
    }
    return t;
}

Table read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInput("file not found: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_table(ss.str());
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

}  // namespace pemadm::csv
