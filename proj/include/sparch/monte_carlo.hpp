#ifndef SPARCH_MONTE_CARLO_HPP
#define SPARCH_MONTE_CARLO_HPP

#include <map>
#include <string>
#include <vector>

#include "sparch/estimator.hpp"
#include "sparch/types.hpp"
#include "sparch/weights.hpp"

namespace sparch {

enum class BuiltinModel { A, B, C };
enum class TableFormat { AlignedText, Csv };

struct McSize {
    int grid_rows = 0;
    int grid_cols = 0;
    int t_len = 0;
    int n() const { return grid_rows * grid_cols; }
};

struct McDesign {
    std::string model_id;
    // Data-generating parameters. a0 is the untransformed intercept A0 (one
    // entry per variable, constant across space); the centered a-tilde is
    // error-distribution dependent and derived per cell as a0 + E(ln eps^2).
    Eigen::VectorXd a0;
    ParamSet params0;  // psi/pi blocks; a_tilde filled per cell
    ContiguityScheme scheme = ContiguityScheme::Queen;
    std::vector<McSize> sizes;
    std::vector<ErrorDist> error_dists;
    int replications = 200;
    std::uint64_t seed = 1;
    int burn_in = 50;
};

struct McCellKey {
    std::string model_id;
    std::string error_dist;
    int n = 0;
    int t_len = 0;
    auto operator<=>(const McCellKey&) const = default;
};

struct McCell {
    // Per packed parameter (a per-variable entries averaged into one "a"
    // column for reporting).
    Eigen::VectorXd bias;
    Eigen::VectorXd rmse;
    Eigen::VectorXd truth;
    int replications = 0;
    int failures = 0;
    double convergence_rate = 0.0;
    bool flagged = false;  // > 20% failures
    std::vector<Eigen::VectorXd> estimates;  // per successful replication
};

struct McReport {
    std::map<McCellKey, McCell> cells;
    std::vector<std::string> param_names;  // a, psi11, psi21, psi12, psi22, ...
};

// Reference bivariate designs: A0 = ones, Psi/Pi per model, p = 2,
// Queen row-standardized grids 5x5/7x7/10x10 paired with T = 30/100/200.
McDesign builtin_design(BuiltinModel model);

// simulate -> fit per replication; replication-level seed stream derived
// from (seed, cell, replication) so results are worker-count independent.
McReport run_design(const McDesign& design, int workers = 1,
                    bool keep_estimates = false);

// Bias and RMSE tables per (model, error_dist), rows by (n, T) ascending,
// columns in the order a, psi11, psi21, psi12, psi22, pi11, pi21, pi12, pi22.
std::string emit_tables(const McReport& report, TableFormat format);

std::uint64_t replication_seed(std::uint64_t base_seed, const McCellKey& cell, int replication);

}  // namespace sparch

#endif  // SPARCH_MONTE_CARLO_HPP
