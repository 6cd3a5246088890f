#ifndef SPARCH_LIKELIHOOD_HPP
#define SPARCH_LIKELIHOOD_HPP

#include <Eigen/Dense>
#include <vector>

#include "sparch/types.hpp"
#include "sparch/weights.hpp"

namespace sparch {

// Precomputed per-fit state: the log-squared data, the spatial lags W X_t,
// and the spectrum of W. Read-only after construction.
class LikelihoodWorkspace {
  public:
    LikelihoodWorkspace(const Panel& panel, const SpatialWeights& w);

    const Dimensions& dims() const { return dims_; }
    const Eigen::VectorXcd& w_eigenvalues() const { return w_eigen_; }
    const std::vector<Eigen::MatrixXd>& x() const { return x_; }        // T+1, n x p
    const std::vector<Eigen::MatrixXd>& wx() const { return wx_; }      // T+1, n x p
    const SpatialWeights& weights() const { return *weights_; }

  private:
    Dimensions dims_;
    const SpatialWeights* weights_;
    std::vector<Eigen::MatrixXd> x_;   // ln Y^2 slices
    std::vector<Eigen::MatrixXd> wx_;  // W * ln Y^2 slices
    Eigen::VectorXcd w_eigen_;
};

// ln|det(I - Psi' (x) W)| via the Kronecker eigenvalue identity
// eig(A (x) B) = {lambda_i mu_j}. Throws SingularJacobian when some
// |1 - lambda mu| < 1e-12.
double log_det_s(const Eigen::MatrixXd& psi, const Eigen::VectorXcd& w_eigenvalues);

// r_t = S ddot-y_t - vec(A~) - (Pi' (x) I) ddot-y_{t-1} in matrix form:
// R_t = X_t - W X_t Psi - X_{t-1} Pi - A. Returns T matrices (t = 1..T).
std::vector<Eigen::MatrixXd> residuals(const Eigen::VectorXd& theta,
                                       const LikelihoodWorkspace& ws, AMode a_mode);

// -(Tnp/2) ln(2 pi sigma2_u) + T ln|S| - (1/(2 sigma2_u)) sum_t |r_t|^2
double log_likelihood(const Eigen::VectorXd& theta, const LikelihoodWorkspace& ws,
                      double sigma2_u, AMode a_mode);

// Same objective divided by n*p*T (diagnostic scaling).
double log_likelihood_per_obs(const Eigen::VectorXd& theta, const LikelihoodWorkspace& ws,
                              double sigma2_u, AMode a_mode);

// Analytic gradient in the packed layout.
Eigen::VectorXd log_likelihood_gradient(const Eigen::VectorXd& theta,
                                        const LikelihoodWorkspace& ws, double sigma2_u,
                                        AMode a_mode);

// Objective and gradient in one pass.
double log_likelihood_with_gradient(const Eigen::VectorXd& theta,
                                    const LikelihoodWorkspace& ws, double sigma2_u,
                                    AMode a_mode, Eigen::VectorXd& grad);

}  // namespace sparch

#endif  // SPARCH_LIKELIHOOD_HPP
