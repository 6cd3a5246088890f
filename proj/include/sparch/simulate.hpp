#ifndef SPARCH_SIMULATE_HPP
#define SPARCH_SIMULATE_HPP

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <memory>

#include "sparch/types.hpp"
#include "sparch/weights.hpp"

namespace sparch {

struct StabilityReport {
    double spectral_radius = 0.0;  // of S^{-1}(Pi' (x) I)
    bool s_invertible = false;
    bool stable = false;
    double min_s_eigen_modulus = 0.0;  // min |1 - lambda(Psi) mu(W)|
};

// Spectral-radius condition for stability across time. The np x np operator
// decomposes over the spectrum of W: for each eigenvalue mu of W, the block
// (I_p - mu Psi')^{-1} Pi' contributes p eigenvalues.
StabilityReport check_stability(const ParamSet& params, const SpatialWeights& w);

// Same, but with a precomputed W spectrum (saves the O(n^3) eigensolve).
StabilityReport check_stability(const ParamSet& params, const Eigen::VectorXcd& w_eigenvalues);

struct SimOutput {
    Panel panel;                            // T+1 slices, slice 0 = Y0
    std::vector<Eigen::MatrixXd> log_h;     // T slices (t = 1..T), n x p
    std::vector<Eigen::MatrixXd> innovations;  // T+1 slices of Xi draws
};

// Reusable sampler for one (weights, error_dist, params) configuration;
// factorizes S_np once, then runs any number of seeded sample paths.
class Simulator {
  public:
    Simulator(const SpatialWeights& w, const ErrorDist& dist, const ParamSet& params,
              AMode a_mode, int n);

    const StabilityReport& stability() const { return stability_; }

    // Draws burn_in + T + 1 slices, discards the first burn_in; the next
    // slice becomes Y0. Deterministic given seed.
    SimOutput run(std::uint64_t seed, int t_len, int burn_in) const;

    Eigen::VectorXd stationary_log_mean() const;

  private:
    int n_, p_;
    ErrorDist dist_;
    Eigen::MatrixXd a_mat_;  // n x p broadcast intercept (a-tilde scale)
    Eigen::MatrixXd psi_, pi_;
    Eigen::SparseMatrix<double> w_sparse_;
    StabilityReport stability_;
    Eigen::SparseMatrix<double> s_;  // I - Psi' (x) W
    std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> s_lu_;
    Eigen::VectorXd stationary_mean_;
};

// One-shot convenience wrappers.
SimOutput simulate(const ModelConfig& config, const ParamSet& params, int burn_in = 50);
Eigen::VectorXd stationary_log_mean(const ParamSet& params, const SpatialWeights& w);

// I_np - Psi' (x) W as a sparse matrix.
Eigen::SparseMatrix<double> build_s_matrix(const Eigen::MatrixXd& psi,
                                           const SpatialWeights& w);

}  // namespace sparch

#endif  // SPARCH_SIMULATE_HPP
