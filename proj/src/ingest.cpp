#include "sparch/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace sparch {

namespace {

std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, delim)) out.push_back(cell);
    return out;
}

std::vector<RawPanelRecord> load_long_format(const std::string& path, const PanelSchema& schema,
                                             bool require_positive) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_panel: cannot open " + path);
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("load_panel: empty file");
    const auto cols = split(header, schema.delimiter);
    auto col_index = [&](const std::string& name) {
        auto it = std::find(cols.begin(), cols.end(), name);
        if (it == cols.end())
            throw std::runtime_error("load_panel: missing column '" + name + "'");
        return static_cast<int>(it - cols.begin());
    };
    const int li = col_index(schema.location_column);
    const int vi = col_index(schema.variable_column);
    const int ti = col_index(schema.time_column);
    const int xi = col_index(schema.value_column);

    std::vector<RawPanelRecord> records;
    std::set<std::tuple<std::string, std::string, std::string>> seen;
    std::string line;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split(line, schema.delimiter);
        const int needed = std::max({li, vi, ti, xi}) + 1;
        if (static_cast<int>(cells.size()) < needed)
            throw std::runtime_error("load_panel: parse error at line " + std::to_string(lineno));
        RawPanelRecord rec;
        rec.location_id = cells[li];
        rec.variable = cells[vi];
        rec.time = cells[ti];
        try {
            rec.value = std::stod(cells[xi]);
        } catch (const std::exception&) {
            throw std::runtime_error("load_panel: bad value at line " + std::to_string(lineno));
        }
        if (require_positive && !(rec.value > 0.0))
            throw std::runtime_error("load_panel: non-positive price at line " +
                                     std::to_string(lineno));
        auto key = std::make_tuple(rec.location_id, rec.variable, rec.time);
        if (!seen.insert(key).second)
            throw std::runtime_error("load_panel: duplicate key (" + rec.location_id + "," +
                                     rec.variable + "," + rec.time + ")");
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace

std::vector<RawPanelRecord> load_panel(const std::string& path, const PanelSchema& schema) {
    return load_long_format(path, schema, /*require_positive=*/true);
}

Panel to_returns(const std::vector<RawPanelRecord>& records, const IngestOptions& options) {
    if (options.jitter_sd < 0.0) throw std::invalid_argument("to_returns: jitter_sd < 0");
    std::vector<std::string> locations, variables, times;
    {
        std::set<std::string> ls, vs, ts;
        for (const auto& r : records) {
            ls.insert(r.location_id);
            vs.insert(r.variable);
            ts.insert(r.time);
        }
        locations.assign(ls.begin(), ls.end());
        variables.assign(vs.begin(), vs.end());
        times.assign(ts.begin(), ts.end());
    }
    const int n = static_cast<int>(locations.size());
    const int p = static_cast<int>(variables.size());
    const int m = static_cast<int>(times.size());
    if (m < 3) throw std::runtime_error("to_returns: series too short (need >= 3 time points)");

    auto index_of = [](const std::vector<std::string>& v, const std::string& s) {
        return static_cast<int>(std::lower_bound(v.begin(), v.end(), s) - v.begin());
    };

    const double nan = std::numeric_limits<double>::quiet_NaN();
    // prices[j] is n x m
    std::vector<Eigen::MatrixXd> prices(p, Eigen::MatrixXd::Constant(n, m, nan));
    for (const auto& r : records)
        prices[index_of(variables, r.variable)](index_of(locations, r.location_id),
                                                index_of(times, r.time)) = r.value;

    for (int j = 0; j < p; ++j) {
        for (int i = 0; i < n; ++i) {
            for (int t = 0; t < m; ++t) {
                if (std::isnan(prices[j](i, t))) {
                    if (options.missing_policy == MissingPolicy::Error || t == 0)
                        throw std::runtime_error("to_returns: missing price for (" +
                                                 locations[i] + "," + variables[j] + "," +
                                                 times[t] + ")");
                    prices[j](i, t) = prices[j](i, t - 1);  // carry forward
                }
            }
        }
    }

    std::mt19937_64 rng(options.jitter_seed);
    std::normal_distribution<double> jitter(0.0, options.jitter_sd);

    // m-1 return slices; slice 0 becomes the conditioning slice Y0
    std::vector<Eigen::MatrixXd> slices(m - 1, Eigen::MatrixXd::Zero(n, p));
    for (int j = 0; j < p; ++j)
        for (int i = 0; i < n; ++i)
            for (int t = 1; t < m; ++t) {
                double r = std::log(prices[j](i, t) / prices[j](i, t - 1));
                if (r == 0.0 && options.jitter_sd > 0.0) {
                    do {
                        r = jitter(rng);
                    } while (r == 0.0);
                }
                slices[t - 1](i, j) = r;
            }

    Panel panel(Dimensions(n, p, m - 2), std::move(slices));
    panel.location_ids = locations;
    panel.variable_names = variables;
    panel.time_labels.assign(times.begin() + 1, times.end());
    return panel;
}

std::string PanelSummary::to_text() const {
    std::ostringstream os;
    os << "panel dims: n=" << dims.n << " p=" << dims.p << " T=" << dims.t_len << "\n";
    os << "jittered zero candidates (|r| < 5e-4): " << jittered_zeros << "\n";
    for (int j = 0; j < dims.p; ++j) {
        os << variable_names[j] << ": mean=" << overall_mean[j] << " var=" << overall_var[j]
           << "\n  cross-location mean by time:";
        for (double v : mean_by_time[j]) os << " " << v;
        os << "\n";
    }
    return os.str();
}

PanelSummary panel_summary(const Panel& panel) {
    PanelSummary s;
    s.dims = panel.dims;
    s.variable_names = panel.variable_names;
    const int p = panel.dims.p;
    s.mean_by_time.resize(p);
    s.overall_mean.assign(p, 0.0);
    s.overall_var.assign(p, 0.0);
    const int slices = static_cast<int>(panel.slices.size());
    for (int j = 0; j < p; ++j) {
        double sum = 0.0, sum_sq = 0.0;
        long count = 0;
        for (int t = 0; t < slices; ++t) {
            const double mt = panel.slices[t].col(j).mean();
            s.mean_by_time[j].push_back(mt);
            sum += panel.slices[t].col(j).sum();
            sum_sq += panel.slices[t].col(j).squaredNorm();
            count += panel.dims.n;
        }
        s.overall_mean[j] = sum / count;
        s.overall_var[j] = sum_sq / count - s.overall_mean[j] * s.overall_mean[j];
        for (int t = 0; t < slices; ++t)
            for (int i = 0; i < panel.dims.n; ++i)
                if (std::abs(panel.slices[t](i, j)) < 5e-4) ++s.jittered_zeros;
    }
    return s;
}

Panel load_observation_panel(const std::string& path, const PanelSchema& schema) {
    auto records = load_long_format(path, schema, /*require_positive=*/false);
    std::vector<std::string> locations, variables, times;
    {
        std::set<std::string> ls, vs, ts;
        for (const auto& r : records) {
            ls.insert(r.location_id);
            vs.insert(r.variable);
            ts.insert(r.time);
        }
        locations.assign(ls.begin(), ls.end());
        variables.assign(vs.begin(), vs.end());
        times.assign(ts.begin(), ts.end());
    }
    const int n = static_cast<int>(locations.size());
    const int p = static_cast<int>(variables.size());
    const int m = static_cast<int>(times.size());
    if (m < 2) throw std::runtime_error("load_observation_panel: need >= 2 time points");
    auto index_of = [](const std::vector<std::string>& v, const std::string& s) {
        return static_cast<int>(std::lower_bound(v.begin(), v.end(), s) - v.begin());
    };
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<Eigen::MatrixXd> slices(m, Eigen::MatrixXd::Constant(n, p, nan));
    for (const auto& r : records)
        slices[index_of(times, r.time)](index_of(locations, r.location_id),
                                        index_of(variables, r.variable)) = r.value;
    for (const auto& s : slices)
        if (!s.allFinite())
            throw std::runtime_error("load_observation_panel: incomplete panel");
    Panel panel(Dimensions(n, p, m - 1), std::move(slices));
    panel.location_ids = locations;
    panel.variable_names = variables;
    panel.time_labels = times;
    return panel;
}

void save_observation_panel(const Panel& panel, const std::string& path, char delimiter) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_observation_panel: cannot open " + path);
    out.precision(17);
    out << "location" << delimiter << "variable" << delimiter << "time" << delimiter
        << "value\n";
    for (int t = 0; t < static_cast<int>(panel.slices.size()); ++t)
        for (int j = 0; j < panel.dims.p; ++j)
            for (int i = 0; i < panel.dims.n; ++i)
                out << panel.location_ids[i] << delimiter << panel.variable_names[j] << delimiter
                    << panel.time_labels[t] << delimiter << panel.slices[t](i, j) << "\n";
}

}  // namespace sparch
