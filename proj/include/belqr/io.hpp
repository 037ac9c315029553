#pragma once
// CSV datasets and JSON report output.

#include "belqr/core.hpp"
#include "belqr/simulation.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

namespace belqr {

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    std::string out = s.substr(b, e - b + 1);
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
    return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') quoted = !quoted;
        if (c == ',' && !quoted) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

}  // namespace detail

/// Reads a header-row CSV; the design is an intercept followed by `covariates`
/// in the requested order. Rows are numbered as file lines (header = 1).
inline Dataset read_dataset(std::istream& in, const std::string& response, const std::vector<std::string>& covariates,
                            const std::string& source = "input") {
    std::string line;
    if (!std::getline(in, line) || detail::trim(line).empty())
        throw Error("cli", source + ": empty file (no header row)");
    const auto header = detail::split_csv_line(line);
    auto column_of = [&](const std::string& name) -> std::size_t {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return j;
        throw Error("cli", source + ": missing column '" + name + "'");
    };
    const std::size_t ycol = column_of(response);
    std::vector<std::size_t> xcols;
    for (const auto& c : covariates) xcols.push_back(column_of(c));

    std::vector<double> y;
    std::vector<std::vector<double>> x;
    long row = 1;
    auto parse = [&](const std::vector<std::string>& cells, std::size_t j) {
        const std::string& cell = cells[j];
        if (cell.empty()) throw Error("cli", source + ": blank cell at row " + std::to_string(row) + ", column '" + header[j] + "'");
        double v = 0.0;
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
            throw Error("cli", source + ": non-numeric cell '" + cell + "' at row " + std::to_string(row) + ", column '" +
                                   header[j] + "'");
        return v;
    };
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw Error("cli", source + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                                   " cells, header has " + std::to_string(header.size()));
        y.push_back(parse(cells, ycol));
        std::vector<double> xr;
        for (auto j : xcols) xr.push_back(parse(cells, j));
        x.push_back(std::move(xr));
    }
    if (y.empty()) throw Error("cli", source + ": no data rows");
    const auto n = static_cast<Eigen::Index>(y.size());
    Vector yv = Eigen::Map<Vector>(y.data(), n);
    Matrix cov(n, static_cast<Eigen::Index>(covariates.size()));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < cov.cols(); ++j) cov(i, j) = x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return Dataset::with_intercept(std::move(yv), cov, covariates);
}

inline Dataset load_dataset(const std::string& path, const std::string& response,
                            const std::vector<std::string>& covariates) {
    std::ifstream in(path);
    if (!in) throw Error("cli", "cannot open dataset '" + path + "'");
    return read_dataset(in, response, covariates, path);
}

/// CSV with header y,<names...> for a dataset (intercept column omitted).
inline void write_dataset_csv(std::ostream& os, const Dataset& data, const std::string& response = "y") {
    const auto old = os.precision(17);
    os << response;
    for (const auto& nm : data.names()) os << ',' << nm;
    os << '\n';
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        os << data.y()(i);
        for (Eigen::Index j = 1; j <= data.p(); ++j) os << ',' << data.X()(i, j);
        os << '\n';
    }
    os.precision(old);
}

inline nlohmann::json report_json(const ExperimentReport& r) {
    nlohmann::json j;
    j["experiment"] = r.experiment;
    j["model"] = r.model;
    j["n"] = r.n;
    j["replications"] = r.replications;
    j["seed"] = r.seed;
    j["cells"] = nlohmann::json::array();
    for (const auto& c : r.cells)
        j["cells"].push_back({{"group", c.group},
                              {"method", c.method},
                              {"coefficient", c.coefficient},
                              {"statistic", c.statistic},
                              {"value", c.value},
                              {"se", c.se}});
    j["notes"] = r.notes;
    return j;
}

}  // namespace belqr
