#include "sparch/simulate.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>
#include <stdexcept>

namespace sparch {

namespace {

StabilityReport stability_from_spectrum(const Eigen::MatrixXd& psi, const Eigen::MatrixXd& pi,
                                        const Eigen::VectorXcd& mu) {
    const int p = static_cast<int>(psi.rows());
    StabilityReport rep;
    rep.min_s_eigen_modulus = std::numeric_limits<double>::infinity();

    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> psi_es(psi.cast<std::complex<double>>());
    const Eigen::VectorXcd lambda = psi_es.eigenvalues();

    const Eigen::MatrixXcd psi_t = psi.transpose().cast<std::complex<double>>();
    const Eigen::MatrixXcd pi_t = pi.transpose().cast<std::complex<double>>();
    const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(p, p);

    double radius = 0.0;
    for (int i = 0; i < mu.size(); ++i) {
        for (int l = 0; l < p; ++l)
            rep.min_s_eigen_modulus =
                std::min(rep.min_s_eigen_modulus, std::abs(1.0 - lambda[l] * mu[i]));
        // eigenvalues of the i-th p x p block (I - mu_i Psi')^{-1} Pi'
        Eigen::MatrixXcd m = eye - mu[i] * psi_t;
        Eigen::FullPivLU<Eigen::MatrixXcd> lu(m);
        if (!lu.isInvertible()) continue;  // counted via min_s_eigen_modulus
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(lu.solve(pi_t));
        radius = std::max(radius, es.eigenvalues().cwiseAbs().maxCoeff());
    }
    rep.spectral_radius = radius;
    rep.s_invertible = rep.min_s_eigen_modulus > 1e-10;
    rep.stable = rep.s_invertible && rep.spectral_radius < 1.0;
    return rep;
}

}  // namespace

StabilityReport check_stability(const ParamSet& params, const Eigen::VectorXcd& w_eigenvalues) {
    return stability_from_spectrum(params.psi, params.pi, w_eigenvalues);
}

StabilityReport check_stability(const ParamSet& params, const SpatialWeights& w) {
    return stability_from_spectrum(params.psi, params.pi, w.eigenvalues());
}

Eigen::SparseMatrix<double> build_s_matrix(const Eigen::MatrixXd& psi, const SpatialWeights& w) {
    const int p = static_cast<int>(psi.rows());
    const int n = w.n;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(n) * p + w.entries.size() * p * p);
    for (int k = 0; k < n * p; ++k) trips.emplace_back(k, k, 1.0);
    // block (k, l) of Psi' (x) W is psi(l, k) * W
    for (int k = 0; k < p; ++k)
        for (int l = 0; l < p; ++l) {
            const double c = psi(l, k);
            if (c == 0.0) continue;
            for (const auto& e : w.entries)
                trips.emplace_back(k * n + e.row, l * n + e.col, -c * e.weight);
        }
    Eigen::SparseMatrix<double> s(n * p, n * p);
    s.setFromTriplets(trips.begin(), trips.end());
    return s;
}

Simulator::Simulator(const SpatialWeights& w, const ErrorDist& dist, const ParamSet& params,
                     AMode a_mode, int n)
    : n_(n), p_(params.var_count()), dist_(dist), psi_(params.psi), pi_(params.pi) {
    params.validate(Dimensions(n, p_, 1), a_mode);
    if (a_mode == AMode::ConstantAcrossSpace)
        a_mat_ = params.a_tilde.transpose().replicate(n_, 1);
    else
        a_mat_ = params.a_tilde;
    w_sparse_ = w.to_sparse();

    stability_ = check_stability(params, w);
    if (!stability_.stable)
        throw std::runtime_error("simulate: unstable process (spectral radius " +
                                 std::to_string(stability_.spectral_radius) + ")");

    s_ = build_s_matrix(psi_, w);
    s_lu_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
    s_lu_->compute(s_);
    if (s_lu_->info() != Eigen::Success)
        throw std::runtime_error("simulate: sparse LU factorization of S failed");

    // (S - Pi' (x) I) m = vec(A-tilde)
    std::vector<Eigen::Triplet<double>> trips;
    for (int k = 0; k < p_; ++k)
        for (int l = 0; l < p_; ++l) {
            const double c = pi_(l, k);
            if (c == 0.0) continue;
            for (int i = 0; i < n_; ++i) trips.emplace_back(k * n_ + i, l * n_ + i, -c);
        }
    Eigen::SparseMatrix<double> pi_kron(n_ * p_, n_ * p_);
    pi_kron.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseMatrix<double> s_minus = s_ + pi_kron;  // pi_kron holds -(Pi' (x) I)
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(s_minus);
    if (lu.info() != Eigen::Success)
        throw std::runtime_error("simulate: stationary-mean solve failed");
    stationary_mean_ =
        lu.solve(Eigen::Map<const Eigen::VectorXd>(a_mat_.data(), n_ * p_));
}

Eigen::VectorXd Simulator::stationary_log_mean() const { return stationary_mean_; }

SimOutput Simulator::run(std::uint64_t seed, int t_len, int burn_in) const {
    if (t_len < 1) throw std::invalid_argument("simulate: t_len must be >= 1");
    if (burn_in < 0) throw std::invalid_argument("simulate: burn_in must be >= 0");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::student_t_distribution<double> student(dist_.kind == ErrorKind::StudentT ? dist_.df
                                                                                  : 3.0);
    const double t_scale =
        dist_.kind == ErrorKind::StudentT ? std::sqrt((dist_.df - 2.0) / dist_.df) : 1.0;
    auto draw = [&]() {
        return dist_.kind == ErrorKind::StandardNormal ? normal(rng) : t_scale * student(rng);
    };

    Eigen::MatrixXd x_prev =
        Eigen::Map<const Eigen::MatrixXd>(stationary_mean_.data(), n_, p_);

    SimOutput out;
    std::vector<Eigen::MatrixXd> y_slices;
    const int total = burn_in + t_len + 1;
    for (int step = 0; step < total; ++step) {
        Eigen::MatrixXd xi(n_, p_);
        for (int j = 0; j < p_; ++j)
            for (int i = 0; i < n_; ++i) xi(i, j) = draw();
        Eigen::MatrixXd ln_xi_sq = xi.array().square().log().matrix();
        Eigen::MatrixXd u = ln_xi_sq.array() - dist_.mean_log_sq;
        Eigen::MatrixXd rhs = a_mat_ + x_prev * pi_ + u;
        Eigen::VectorXd x_vec =
            s_lu_->solve(Eigen::Map<const Eigen::VectorXd>(rhs.data(), n_ * p_));
        if (s_lu_->info() != Eigen::Success)
            throw std::runtime_error("simulate: linear solve failed");
        Eigen::MatrixXd x = Eigen::Map<const Eigen::MatrixXd>(x_vec.data(), n_, p_);

        if (step >= burn_in) {
            Eigen::MatrixXd log_h = x - ln_xi_sq;
            Eigen::MatrixXd y = ((log_h.array() / 2.0).exp() * xi.array()).matrix();
            y_slices.push_back(std::move(y));
            out.innovations.push_back(std::move(xi));
            if (step > burn_in) out.log_h.push_back(std::move(log_h));
        }
        x_prev = std::move(x);
    }
    out.panel = Panel(Dimensions(n_, p_, t_len), std::move(y_slices));
    return out;
}

SimOutput simulate(const ModelConfig& config, const ParamSet& params, int burn_in) {
    if (config.weights == nullptr) throw std::invalid_argument("simulate: weights not set");
    if (config.weights->n != config.dims.n)
        throw std::invalid_argument("simulate: weights dimension mismatch");
    Simulator sim(*config.weights, config.error_dist, params, config.a_mode, config.dims.n);
    return sim.run(config.seed, config.dims.t_len, burn_in);
}

Eigen::VectorXd stationary_log_mean(const ParamSet& params, const SpatialWeights& w) {
    // a_tilde mode inferred from its shape
    const int p = params.var_count();
    AMode mode;
    if (params.a_tilde.rows() == p && params.a_tilde.cols() == 1)
        mode = AMode::ConstantAcrossSpace;
    else if (params.a_tilde.rows() == w.n && params.a_tilde.cols() == p)
        mode = AMode::FreePerLocation;
    else
        throw std::invalid_argument("stationary_log_mean: a_tilde shape mismatch");
    Simulator sim(w, ErrorDist::standard_normal(), params, mode, w.n);
    return sim.stationary_log_mean();
}

}  // namespace sparch
