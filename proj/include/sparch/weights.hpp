#ifndef SPARCH_WEIGHTS_HPP
#define SPARCH_WEIGHTS_HPP

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <string>
#include <vector>

namespace sparch {

enum class ContiguityScheme { Rook, Queen };
enum class WeightsFormat { CoordinateList, DenseCsv };

struct WeightEntry {
    int row = 0;
    int col = 0;
    double weight = 0.0;
};

/// Sparse nonnegative n x n spatial weight matrix with zero diagonal.
struct SpatialWeights {
    int n = 0;
    std::vector<WeightEntry> entries;  // sorted by (row, col), no duplicates
    bool standardized = false;
    double max_abs_row_sum = 0.0;
    double max_abs_col_sum = 0.0;

    SpatialWeights() = default;
    SpatialWeights(int n_, std::vector<WeightEntry> entries_, bool standardized_ = false);

    Eigen::SparseMatrix<double> to_sparse() const;
    Eigen::MatrixXd to_dense() const;
    Eigen::VectorXd row_sums() const;

    // Complex spectrum; computed via dense eigensolver.
    Eigen::VectorXcd eigenvalues() const;
};

struct WeightsValidationReport {
    bool zero_diagonal = false;
    bool nonnegative = false;
    double max_abs_row_sum = 0.0;
    double max_abs_col_sum = 0.0;
    double bound = 0.0;
    bool row_sums_within_bound = false;
    bool col_sums_finite = false;  // reported, not gated: column sums of a
                                   // row-stochastic W routinely exceed 1
    int isolated_locations = 0;    // rows with no neighbours
    bool passed() const { return zero_diagonal && nonnegative && row_sums_within_bound; }
    std::string to_text() const;
};

// Binary adjacency on a rows x cols lattice; Rook = shared edge,
// Queen = shared edge or corner. Unstandardized.
SpatialWeights grid_contiguity(int rows, int cols, ContiguityScheme scheme);

// Divide each nonzero row by its sum; zero rows stay zero.
SpatialWeights row_standardize(const SpatialWeights& w);

WeightsValidationReport validate_weights(const SpatialWeights& w, double bound);

SpatialWeights load_weights(const std::string& path, WeightsFormat format);
void save_weights(const SpatialWeights& w, const std::string& path, WeightsFormat format);

}  // namespace sparch

#endif  // SPARCH_WEIGHTS_HPP
