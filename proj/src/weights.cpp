#include "sparch/weights.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace sparch {

SpatialWeights::SpatialWeights(int n_, std::vector<WeightEntry> entries_, bool standardized_)
    : n(n_), entries(std::move(entries_)), standardized(standardized_) {
    if (n < 1) throw std::invalid_argument("SpatialWeights: n must be >= 1");
    std::sort(entries.begin(), entries.end(), [](const WeightEntry& a, const WeightEntry& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    Eigen::VectorXd rs = Eigen::VectorXd::Zero(n), cs = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < entries.size(); ++k) {
        const auto& e = entries[k];
        if (e.row < 0 || e.row >= n || e.col < 0 || e.col >= n)
            throw std::invalid_argument("SpatialWeights: index out of range");
        if (e.row == e.col && e.weight != 0.0)
            throw std::invalid_argument("SpatialWeights: nonzero diagonal entry");
        if (e.weight < 0.0) throw std::invalid_argument("SpatialWeights: negative weight");
        if (k > 0 && entries[k - 1].row == e.row && entries[k - 1].col == e.col)
            throw std::invalid_argument("SpatialWeights: duplicate (row, col) entry");
        rs[e.row] += std::abs(e.weight);
        cs[e.col] += std::abs(e.weight);
    }
    max_abs_row_sum = rs.size() ? rs.maxCoeff() : 0.0;
    max_abs_col_sum = cs.size() ? cs.maxCoeff() : 0.0;
}

Eigen::SparseMatrix<double> SpatialWeights::to_sparse() const {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(entries.size());
    for (const auto& e : entries) trips.emplace_back(e.row, e.col, e.weight);
    Eigen::SparseMatrix<double> m(n, n);
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
}

Eigen::MatrixXd SpatialWeights::to_dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : entries) m(e.row, e.col) = e.weight;
    return m;
}

Eigen::VectorXd SpatialWeights::row_sums() const {
    Eigen::VectorXd rs = Eigen::VectorXd::Zero(n);
    for (const auto& e : entries) rs[e.row] += e.weight;
    return rs;
}

Eigen::VectorXcd SpatialWeights::eigenvalues() const {
    Eigen::EigenSolver<Eigen::MatrixXd> es(to_dense(), /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("SpatialWeights: eigen decomposition failed");
    return es.eigenvalues();
}

std::string WeightsValidationReport::to_text() const {
    std::ostringstream os;
    os << "zero_diagonal: " << (zero_diagonal ? "pass" : "FAIL") << "\n"
       << "nonnegative: " << (nonnegative ? "pass" : "FAIL") << "\n"
       << "max_abs_row_sum: " << max_abs_row_sum << " (bound " << bound << "): "
       << (row_sums_within_bound ? "pass" : "FAIL") << "\n"
       << "max_abs_col_sum: " << max_abs_col_sum << "\n"
       << "isolated_locations: " << isolated_locations << "\n"
       << "overall: " << (passed() ? "pass" : "FAIL") << "\n";
    return os.str();
}

SpatialWeights grid_contiguity(int rows, int cols, ContiguityScheme scheme) {
    if (rows < 1 || cols < 1 || rows * cols < 2)
        throw std::invalid_argument("grid_contiguity: grid must have at least 2 cells");
    auto idx = [cols](int r, int c) { return r * cols + c; };
    std::vector<WeightEntry> entries;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    if (scheme == ContiguityScheme::Rook && dr != 0 && dc != 0) continue;
                    const int rr = r + dr, cc = c + dc;
                    if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
                    entries.push_back({idx(r, c), idx(rr, cc), 1.0});
                }
            }
        }
    }
    return SpatialWeights(rows * cols, std::move(entries));
}

SpatialWeights row_standardize(const SpatialWeights& w) {
    Eigen::VectorXd rs = w.row_sums();
    std::vector<WeightEntry> entries = w.entries;
    for (auto& e : entries) {
        if (e.weight < 0.0) throw std::invalid_argument("row_standardize: negative weight");
        if (rs[e.row] > 0.0) e.weight /= rs[e.row];
    }
    return SpatialWeights(w.n, std::move(entries), /*standardized=*/true);
}

WeightsValidationReport validate_weights(const SpatialWeights& w, double bound) {
    WeightsValidationReport rep;
    rep.bound = bound;
    rep.zero_diagonal = true;
    rep.nonnegative = true;
    std::vector<char> has_neighbour(w.n, 0);
    for (const auto& e : w.entries) {
        if (e.row == e.col && e.weight != 0.0) rep.zero_diagonal = false;
        if (e.weight < 0.0) rep.nonnegative = false;
        if (e.weight != 0.0) has_neighbour[e.row] = 1;
    }
    rep.max_abs_row_sum = w.max_abs_row_sum;
    rep.max_abs_col_sum = w.max_abs_col_sum;
    rep.row_sums_within_bound = w.max_abs_row_sum <= bound;
    rep.col_sums_finite = std::isfinite(w.max_abs_col_sum);
    rep.isolated_locations =
        static_cast<int>(std::count(has_neighbour.begin(), has_neighbour.end(), 0));
    return rep;
}

namespace {

SpatialWeights load_coordinate_list(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("load_weights: empty file");
    int n = 0;
    if (std::sscanf(header.c_str(), "n=%d", &n) != 1 || n < 1)
        throw std::runtime_error("load_weights: expected header 'n=<int>'");
    std::vector<WeightEntry> entries;
    std::map<std::pair<int, int>, bool> seen;
    std::string line;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        WeightEntry e;
        if (!(ls >> e.row >> e.col >> e.weight))
            throw std::runtime_error("load_weights: parse error at line " + std::to_string(lineno));
        if (seen.count({e.row, e.col}))
            throw std::runtime_error("load_weights: duplicate entry (" + std::to_string(e.row) +
                                     "," + std::to_string(e.col) + ")");
        seen[{e.row, e.col}] = true;
        entries.push_back(e);
    }
    return SpatialWeights(n, std::move(entries));
}

SpatialWeights load_dense_csv(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw std::runtime_error("load_weights: parse error at line " +
                                         std::to_string(lineno));
            }
        }
        rows.push_back(std::move(row));
    }
    const int n = static_cast<int>(rows.size());
    if (n == 0) throw std::runtime_error("load_weights: empty file");
    std::vector<WeightEntry> entries;
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(rows[i].size()) != n)
            throw std::runtime_error("load_weights: matrix is not square");
        for (int j = 0; j < n; ++j)
            if (rows[i][j] != 0.0) entries.push_back({i, j, rows[i][j]});
    }
    return SpatialWeights(n, std::move(entries));
}

}  // namespace

SpatialWeights load_weights(const std::string& path, WeightsFormat format) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_weights: cannot open " + path);
    return format == WeightsFormat::CoordinateList ? load_coordinate_list(in)
                                                   : load_dense_csv(in);
}

void save_weights(const SpatialWeights& w, const std::string& path, WeightsFormat format) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_weights: cannot open " + path);
    out.precision(17);
    if (format == WeightsFormat::CoordinateList) {
        out << "n=" << w.n << "\n";
        for (const auto& e : w.entries) out << e.row << " " << e.col << " " << e.weight << "\n";
    } else {
        Eigen::MatrixXd m = w.to_dense();
        for (int i = 0; i < w.n; ++i) {
            for (int j = 0; j < w.n; ++j) out << (j ? "," : "") << m(i, j);
            out << "\n";
        }
    }
}

}  // namespace sparch
