#include "sparch/likelihood.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <cmath>
#include <numbers>

namespace sparch {

LikelihoodWorkspace::LikelihoodWorkspace(const Panel& panel, const SpatialWeights& w)
    : dims_(panel.dims), weights_(&w) {
    if (w.n != dims_.n)
        throw std::invalid_argument("LikelihoodWorkspace: weights dimension mismatch");
    x_ = log_sq_transform(panel);
    Eigen::SparseMatrix<double> ws = w.to_sparse();
    wx_.reserve(x_.size());
    for (const auto& xt : x_) wx_.push_back(ws * xt);
    w_eigen_ = w.eigenvalues();
}

double log_det_s(const Eigen::MatrixXd& psi, const Eigen::VectorXcd& w_eigenvalues) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(psi.cast<std::complex<double>>());
    const Eigen::VectorXcd lambda = es.eigenvalues();
    double sum = 0.0;
    for (int l = 0; l < lambda.size(); ++l) {
        for (int i = 0; i < w_eigenvalues.size(); ++i) {
            const double mod = std::abs(1.0 - lambda[l] * w_eigenvalues[i]);
            if (mod < 1e-12) throw SingularJacobian("log_det_s: S_np is singular");
            sum += std::log(mod);
        }
    }
    return sum;
}

namespace {

Eigen::MatrixXd broadcast_a(const ParamSet& params, const Dimensions& dims, AMode a_mode) {
    if (a_mode == AMode::ConstantAcrossSpace)
        return params.a_tilde.transpose().replicate(dims.n, 1);
    return params.a_tilde;
}

}  // namespace

std::vector<Eigen::MatrixXd> residuals(const Eigen::VectorXd& theta,
                                       const LikelihoodWorkspace& ws, AMode a_mode) {
    const Dimensions& d = ws.dims();
    ParamSet params = unpack_params(theta, d, a_mode, 1.0);
    const Eigen::MatrixXd a_mat = broadcast_a(params, d, a_mode);
    std::vector<Eigen::MatrixXd> out;
    out.reserve(d.t_len);
    for (int t = 1; t <= d.t_len; ++t)
        out.push_back(ws.x()[t] - ws.wx()[t] * params.psi - ws.x()[t - 1] * params.pi - a_mat);
    return out;
}

double log_likelihood(const Eigen::VectorXd& theta, const LikelihoodWorkspace& ws,
                      double sigma2_u, AMode a_mode) {
    const Dimensions& d = ws.dims();
    ParamSet params = unpack_params(theta, d, a_mode, sigma2_u);
    const Eigen::MatrixXd a_mat = broadcast_a(params, d, a_mode);
    const double ldet = log_det_s(params.psi, ws.w_eigenvalues());
    double quad = 0.0;
    for (int t = 1; t <= d.t_len; ++t) {
        Eigen::MatrixXd r =
            ws.x()[t] - ws.wx()[t] * params.psi - ws.x()[t - 1] * params.pi - a_mat;
        quad += r.squaredNorm();
    }
    const double T = d.t_len;
    return -0.5 * T * d.np() * std::log(2.0 * std::numbers::pi * sigma2_u) + T * ldet -
           quad / (2.0 * sigma2_u);
}

double log_likelihood_per_obs(const Eigen::VectorXd& theta, const LikelihoodWorkspace& ws,
                              double sigma2_u, AMode a_mode) {
    const Dimensions& d = ws.dims();
    return log_likelihood(theta, ws, sigma2_u, a_mode) /
           (static_cast<double>(d.np()) * d.t_len);
}

double log_likelihood_with_gradient(const Eigen::VectorXd& theta,
                                    const LikelihoodWorkspace& ws, double sigma2_u,
                                    AMode a_mode, Eigen::VectorXd& grad) {
    const Dimensions& d = ws.dims();
    const int p = d.p;
    ParamSet params = unpack_params(theta, d, a_mode, sigma2_u);
    const Eigen::MatrixXd a_mat = broadcast_a(params, d, a_mode);
    const double T = d.t_len;

    const double ldet = log_det_s(params.psi, ws.w_eigenvalues());

    double quad = 0.0;
    Eigen::MatrixXd r_sum = Eigen::MatrixXd::Zero(d.n, p);
    Eigen::MatrixXd g_psi_quad = Eigen::MatrixXd::Zero(p, p);
    Eigen::MatrixXd g_pi_quad = Eigen::MatrixXd::Zero(p, p);
    for (int t = 1; t <= d.t_len; ++t) {
        Eigen::MatrixXd r =
            ws.x()[t] - ws.wx()[t] * params.psi - ws.x()[t - 1] * params.pi - a_mat;
        quad += r.squaredNorm();
        r_sum += r;
        g_psi_quad += ws.wx()[t].transpose() * r;
        g_pi_quad += ws.x()[t - 1].transpose() * r;
    }

    // d ln|S| / d psi_kl = -Re sum_i mu_i [(I - mu_i Psi')^{-1}]_{kl}
    const Eigen::MatrixXcd psi_t = params.psi.transpose().cast<std::complex<double>>();
    const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(p, p);
    Eigen::MatrixXcd g_det_c = Eigen::MatrixXcd::Zero(p, p);
    for (int i = 0; i < ws.w_eigenvalues().size(); ++i) {
        const std::complex<double> mu = ws.w_eigenvalues()[i];
        if (mu == 0.0) continue;
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(eye - mu * psi_t);
        g_det_c -= mu * lu.inverse();
    }
    const Eigen::MatrixXd g_det = g_det_c.real();

    const double inv_s2 = 1.0 / sigma2_u;
    Eigen::MatrixXd g_psi = T * g_det + inv_s2 * g_psi_quad;
    Eigen::MatrixXd g_pi = inv_s2 * g_pi_quad;

    const int a_len = (a_mode == AMode::ConstantAcrossSpace) ? p : d.n * p;
    grad.resize(a_len + 2 * p * p);
    if (a_mode == AMode::ConstantAcrossSpace)
        grad.head(a_len) = inv_s2 * r_sum.colwise().sum().transpose();
    else
        grad.head(a_len) = inv_s2 * Eigen::Map<const Eigen::VectorXd>(r_sum.data(), a_len);
    grad.segment(a_len, p * p) = Eigen::Map<const Eigen::VectorXd>(g_psi.data(), p * p);
    grad.tail(p * p) = Eigen::Map<const Eigen::VectorXd>(g_pi.data(), p * p);

    return -0.5 * T * d.np() * std::log(2.0 * std::numbers::pi * sigma2_u) + T * ldet -
           quad / (2.0 * sigma2_u);
}

Eigen::VectorXd log_likelihood_gradient(const Eigen::VectorXd& theta,
                                        const LikelihoodWorkspace& ws, double sigma2_u,
                                        AMode a_mode) {
    Eigen::VectorXd grad;
    log_likelihood_with_gradient(theta, ws, sigma2_u, a_mode, grad);
    return grad;
}

}  // namespace sparch
