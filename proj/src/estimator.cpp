#include "sparch/estimator.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace sparch {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool feasible(const Eigen::VectorXd& theta, const LikelihoodWorkspace& ws, AMode a_mode,
              double sigma2_u, double margin, double* radius_out = nullptr) {
    ParamSet params = unpack_params(theta, ws.dims(), a_mode, sigma2_u);
    StabilityReport rep = check_stability(params, ws.w_eigenvalues());
    if (radius_out) *radius_out = rep.spectral_radius;
    return rep.min_s_eigen_modulus > 1e-10 && rep.spectral_radius < margin;
}

Eigen::VectorXd default_start(const LikelihoodWorkspace& ws, AMode a_mode) {
    // closed-form maximizer of the A-tilde block at Psi = Pi = 0
    const Dimensions& d = ws.dims();
    const int p = d.p;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(packed_size(d, a_mode));
    if (a_mode == AMode::ConstantAcrossSpace) {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
        for (int t = 1; t <= d.t_len; ++t) mean += ws.x()[t].colwise().mean().transpose();
        theta.head(p) = mean / d.t_len;
    } else {
        Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(d.n, p);
        for (int t = 1; t <= d.t_len; ++t) mean += ws.x()[t];
        mean /= d.t_len;
        theta.head(d.n * p) = Eigen::Map<const Eigen::VectorXd>(mean.data(), d.n * p);
    }
    return theta;
}

struct BfgsOutcome {
    Eigen::VectorXd theta;
    double value = -kInf;
    bool converged = false;
    int iterations = 0;
    double scaled_grad_norm = kInf;
};

BfgsOutcome bfgs_maximize(const Eigen::VectorXd& start, const LikelihoodWorkspace& ws,
                          double sigma2_u, AMode a_mode, const FitOptions& opt) {
    const Dimensions& d = ws.dims();
    const double obs_scale = static_cast<double>(d.np()) * d.t_len;
    const int dim = static_cast<int>(start.size());

    auto eval = [&](const Eigen::VectorXd& th, Eigen::VectorXd& g) -> double {
        if (!feasible(th, ws, a_mode, sigma2_u, opt.stability_margin)) return -kInf;
        try {
            return log_likelihood_with_gradient(th, ws, sigma2_u, a_mode, g);
        } catch (const SingularJacobian&) {
            return -kInf;
        }
    };

    BfgsOutcome out;
    out.theta = start;
    Eigen::VectorXd g(dim);
    double f = eval(out.theta, g);
    if (!std::isfinite(f)) return out;  // infeasible start
    out.value = f;

    Eigen::MatrixXd b_inv = Eigen::MatrixXd::Identity(dim, dim);
    for (int it = 0; it < opt.max_iterations; ++it) {
        out.iterations = it;
        out.scaled_grad_norm = g.cwiseAbs().maxCoeff() / obs_scale;
        if (out.scaled_grad_norm <= opt.gradient_tolerance) {
            out.converged = true;
            break;
        }

        Eigen::VectorXd dir = b_inv * g;  // ascent direction
        if (dir.dot(g) <= 0.0) {          // reset on loss of positive definiteness
            b_inv.setIdentity();
            dir = g;
        }

        // backtracking line search with Armijo condition; infeasible trial
        // points evaluate to -inf and shrink the step
        double step = 1.0;
        const double slope = g.dot(dir);
        Eigen::VectorXd g_new(dim), theta_new;
        double f_new = -kInf;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            theta_new = out.theta + step * dir;
            f_new = eval(theta_new, g_new);
            if (std::isfinite(f_new) && f_new >= out.value + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            out.converged = out.scaled_grad_norm <= 1e2 * opt.gradient_tolerance;
            break;
        }

        Eigen::VectorXd s = theta_new - out.theta;
        Eigen::VectorXd y = g - g_new;  // gradient of -L increases along s
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            Eigen::MatrixXd left =
                Eigen::MatrixXd::Identity(dim, dim) - rho * s * y.transpose();
            b_inv = left * b_inv * left.transpose() + rho * s * s.transpose();
        }
        out.theta = std::move(theta_new);
        out.value = f_new;
        g = std::move(g_new);
    }
    return out;
}

}  // namespace

Eigen::VectorXd standard_errors(const Eigen::VectorXd& theta_hat,
                                const LikelihoodWorkspace& ws, double sigma2_u,
                                AMode a_mode, bool* ok) {
    const int dim = static_cast<int>(theta_hat.size());
    Eigen::MatrixXd hess(dim, dim);
    for (int j = 0; j < dim; ++j) {
        const double h = 1e-5 * std::max(1.0, std::abs(theta_hat[j]));
        Eigen::VectorXd tp = theta_hat, tm = theta_hat;
        tp[j] += h;
        tm[j] -= h;
        Eigen::VectorXd gp = log_likelihood_gradient(tp, ws, sigma2_u, a_mode);
        Eigen::VectorXd gm = log_likelihood_gradient(tm, ws, sigma2_u, a_mode);
        hess.col(j) = (gp - gm) / (2.0 * h);
    }
    hess = 0.5 * (hess + hess.transpose().eval());

    Eigen::VectorXd se = Eigen::VectorXd::Constant(dim, std::numeric_limits<double>::quiet_NaN());
    Eigen::LLT<Eigen::MatrixXd> llt(-hess);
    if (llt.info() == Eigen::Success) {
        Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(dim, dim));
        bool all_pos = true;
        for (int j = 0; j < dim; ++j) {
            if (cov(j, j) > 0.0)
                se[j] = std::sqrt(cov(j, j));
            else
                all_pos = false;
        }
        if (ok) *ok = all_pos;
    } else if (ok) {
        *ok = false;
    }
    return se;
}

FitResult fit(const LikelihoodWorkspace& ws, const ErrorDist& error_dist, AMode a_mode,
              const FitOptions& options) {
    const Dimensions& d = ws.dims();
    if (d.t_len == 1 && a_mode != AMode::ConstantAcrossSpace)
        throw std::invalid_argument("fit: T = 1 requires constant-across-space intercept");
    for (int j = 0; j < d.p; ++j) {
        double mn = kInf, mx = -kInf;
        for (int t = 1; t <= d.t_len; ++t) {
            mn = std::min(mn, ws.x()[t].col(j).minCoeff());
            mx = std::max(mx, ws.x()[t].col(j).maxCoeff());
        }
        if (mx - mn < 1e-12)
            throw DegenerateData("fit: variable " + std::to_string(j) +
                                 " has constant ln Y^2");
    }
    const double sigma2_u = error_dist.var_log_sq;

    Eigen::VectorXd start =
        options.initial_theta ? *options.initial_theta : default_start(ws, a_mode);
    BfgsOutcome best = bfgs_maximize(start, ws, sigma2_u, a_mode, options);

    if (options.multistart_count > 0) {
        std::mt19937_64 rng(options.multistart_seed);
        std::normal_distribution<double> jitter(0.0, 0.05);
        for (int k = 0; k < options.multistart_count; ++k) {
            Eigen::VectorXd s2 = start;
            for (int j = 0; j < s2.size(); ++j) s2[j] += jitter(rng);
            BfgsOutcome cand = bfgs_maximize(s2, ws, sigma2_u, a_mode, options);
            if (cand.value > best.value) best = cand;
        }
    }

    FitResult res;
    res.a_mode = a_mode;
    res.theta = best.theta;
    res.params = unpack_params(best.theta, d, a_mode, sigma2_u);
    res.a_estimate = res.params.a_untransformed(error_dist.mean_log_sq);
    res.log_lik = best.value;
    res.log_lik_per_obs = best.value / (static_cast<double>(d.np()) * d.t_len);
    res.converged = best.converged;
    res.iterations = best.iterations;
    res.gradient_norm = best.scaled_grad_norm;
    res.spectral_radius_at_solution =
        check_stability(res.params, ws.w_eigenvalues()).spectral_radius;

    if (options.compute_std_errors) {
        res.std_errors = standard_errors(best.theta, ws, sigma2_u, a_mode, &res.std_errors_ok);
        res.t_values = res.theta.array() / res.std_errors.array();
    } else {
        res.std_errors = Eigen::VectorXd::Constant(best.theta.size(),
                                                   std::numeric_limits<double>::quiet_NaN());
        res.t_values = res.std_errors;
    }
    return res;
}

FitResult fit(const Panel& panel, const SpatialWeights& w, const ErrorDist& error_dist,
              AMode a_mode, const FitOptions& options) {
    LikelihoodWorkspace ws(panel, w);
    return fit(ws, error_dist, a_mode, options);
}

std::string AssumptionReport::to_text() const {
    std::ostringstream os;
    os << "A1 zero-free panel: " << (zero_free ? "pass" : "FAIL");
    if (!zero_free) os << " (" << zero_locations.size() << " zeros)";
    os << "\nA4 weight boundedness: " << (weights_bounded ? "pass" : "FAIL")
       << "\nA4 S invertible at estimate: " << (s_invertible ? "pass" : "FAIL")
       << "\nA3/Prop.1 stability at estimate: " << (stable ? "pass" : "FAIL")
       << " (spectral radius " << spectral_radius << ")"
       << "\nA2 residual variance rel. deviation from sigma2_u: " << residual_var_rel_dev
       << "\nT=1 mode consistency: " << (t1_mode_ok ? "pass" : "FAIL")
       << "\noverall: " << (all_pass() ? "pass" : "FAIL") << "\n";
    return os.str();
}

AssumptionReport validate_assumptions(const Panel& panel, const SpatialWeights& w,
                                      const FitResult& result) {
    AssumptionReport rep;
    try {
        panel.require_zero_free();
    } catch (const ZeroValueError& e) {
        rep.zero_free = false;
        rep.zero_locations = e.offenders;
    }
    WeightsValidationReport wrep = validate_weights(w, w.standardized ? 1.0 + 1e-9 : 1e6);
    rep.weights_bounded = wrep.passed();

    StabilityReport srep = check_stability(result.params, w);
    rep.s_invertible = srep.s_invertible;
    rep.stable = srep.stable;
    rep.spectral_radius = srep.spectral_radius;

    rep.t1_mode_ok =
        panel.dims.t_len > 1 || result.a_mode == AMode::ConstantAcrossSpace;

    if (rep.zero_free) {
        LikelihoodWorkspace ws(panel, w);
        auto r = residuals(result.theta, ws, result.a_mode);
        double ss = 0.0;
        long count = 0;
        for (const auto& rt : r) {
            ss += rt.squaredNorm();
            count += rt.size();
        }
        const double var = ss / static_cast<double>(count);
        rep.residual_var_rel_dev = std::abs(var / result.params.sigma2_u - 1.0);
    }
    return rep;
}

}  // namespace sparch
