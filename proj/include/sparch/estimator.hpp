#ifndef SPARCH_ESTIMATOR_HPP
#define SPARCH_ESTIMATOR_HPP

#include <optional>
#include <string>

#include "sparch/likelihood.hpp"
#include "sparch/simulate.hpp"
#include "sparch/types.hpp"
#include "sparch/weights.hpp"

namespace sparch {

struct FitOptions {
    int max_iterations = 500;
    double gradient_tolerance = 1e-6;  // on the gradient scaled by 1/(npT)
    std::optional<Eigen::VectorXd> initial_theta;
    double stability_margin = 0.999;  // max spectral radius during the search
    int multistart_count = 0;
    std::uint64_t multistart_seed = 0;
    bool compute_std_errors = true;
};

struct FitResult {
    ParamSet params;             // estimates on the a-tilde scale
    Eigen::MatrixXd a_estimate;  // back-transformed A = A~ - E(ln eps^2)
    Eigen::VectorXd theta;       // packed estimates
    Eigen::VectorXd std_errors;  // NaN where unavailable
    Eigen::VectorXd t_values;    // estimate / SE
    bool std_errors_ok = false;
    double log_lik = 0.0;
    double log_lik_per_obs = 0.0;
    bool converged = false;
    int iterations = 0;
    double gradient_norm = 0.0;  // scaled sup-norm at the solution
    double spectral_radius_at_solution = 0.0;
    AMode a_mode = AMode::ConstantAcrossSpace;
};

struct AssumptionReport {
    bool zero_free = true;                 // A1
    std::vector<std::array<int, 3>> zero_locations;
    bool weights_bounded = true;           // A4
    bool s_invertible = true;              // A4 at the estimate
    bool stable = true;                    // A3 / Prop. 1 at the estimate
    double spectral_radius = 0.0;
    double residual_var_rel_dev = 0.0;     // A2: |sample var / sigma2_u - 1|
    bool t1_mode_ok = true;                // T = 1 requires constant-A mode
    bool all_pass() const {
        return zero_free && weights_bounded && s_invertible && stable && t1_mode_ok;
    }
    std::string to_text() const;
};

FitResult fit(const Panel& panel, const SpatialWeights& w, const ErrorDist& error_dist,
              AMode a_mode, const FitOptions& options = {});

// Same, reusing an existing workspace (Monte-Carlo path).
FitResult fit(const LikelihoodWorkspace& ws, const ErrorDist& error_dist, AMode a_mode,
              const FitOptions& options = {});

// sqrt(diag((-H)^{-1})) with H the central-finite-difference Hessian of the
// analytic gradient. Returns NaN entries when -H is not positive definite.
Eigen::VectorXd standard_errors(const Eigen::VectorXd& theta_hat,
                                const LikelihoodWorkspace& ws, double sigma2_u,
                                AMode a_mode, bool* ok = nullptr);

AssumptionReport validate_assumptions(const Panel& panel, const SpatialWeights& w,
                                      const FitResult& result);

}  // namespace sparch

#endif  // SPARCH_ESTIMATOR_HPP
