#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "sparch/likelihood.hpp"
#include "sparch/simulate.hpp"

using namespace sparch;

namespace {

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// literal dense evaluation of the likelihood: explicit S_np, explicit
// Kronecker products, LU log-determinant
double brute_force_log_likelihood(const Eigen::VectorXd& theta, const Panel& panel,
                                  const Eigen::MatrixXd& w, double sigma2_u, AMode a_mode) {
    const Dimensions& d = panel.dims;
    ParamSet ps = unpack_params(theta, d, a_mode, sigma2_u);
    const int np = d.np();
    Eigen::MatrixXd s =
        Eigen::MatrixXd::Identity(np, np) - kron(ps.psi.transpose(), w);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(s);
    double ldet = 0.0;
    for (int i = 0; i < np; ++i) ldet += std::log(std::abs(lu.matrixLU()(i, i)));
    Eigen::MatrixXd pi_kron =
        kron(ps.pi.transpose(), Eigen::MatrixXd::Identity(d.n, d.n));
    Eigen::MatrixXd a_mat = (a_mode == AMode::ConstantAcrossSpace)
                                ? Eigen::MatrixXd(ps.a_tilde.transpose().replicate(d.n, 1))
                                : ps.a_tilde;
    Eigen::VectorXd a_vec = Eigen::Map<Eigen::VectorXd>(a_mat.data(), np);
    double quad = 0.0;
    for (int t = 1; t <= d.t_len; ++t) {
        Eigen::MatrixXd xt = panel.slices[t].array().square().log();
        Eigen::MatrixXd xtm = panel.slices[t - 1].array().square().log();
        Eigen::VectorXd yt = Eigen::Map<Eigen::VectorXd>(xt.data(), np);
        Eigen::VectorXd ytm = Eigen::Map<Eigen::VectorXd>(xtm.data(), np);
        Eigen::VectorXd r = s * yt - a_vec - pi_kron * ytm;
        quad += r.squaredNorm();
    }
    const double T = d.t_len;
    return -0.5 * T * np * std::log(2.0 * std::numbers::pi * sigma2_u) + T * ldet -
           quad / (2.0 * sigma2_u);
}

Panel random_panel(const Dimensions& d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<Eigen::MatrixXd> slices(d.t_len + 1, Eigen::MatrixXd(d.n, d.p));
    for (auto& s : slices)
        for (int j = 0; j < s.size(); ++j) s.data()[j] = dist(rng);
    return Panel(d, slices);
}

Eigen::VectorXd random_stable_theta(const Dimensions& d, AMode mode, std::mt19937_64& rng) {
    std::normal_distribution<double> small(0.0, 0.15);
    std::normal_distribution<double> any(0.0, 1.0);
    Eigen::VectorXd theta(packed_size(d, mode));
    const int a_len = theta.size() - 2 * d.p * d.p;
    for (int j = 0; j < a_len; ++j) theta[j] = any(rng);
    for (int j = a_len; j < theta.size(); ++j) theta[j] = small(rng);
    return theta;
}

}  // namespace

TEST_CASE("log_det_s") {
    SpatialWeights w2(2, {{0, 1, 1.0}, {1, 0, 1.0}});

    SUBCASE("Psi = 0 gives 0") {
        CHECK(log_det_s(Eigen::MatrixXd::Zero(2, 2),
                        row_standardize(grid_contiguity(3, 3, ContiguityScheme::Queen))
                            .eigenvalues()) == doctest::Approx(0.0));
    }
    SUBCASE("n=2, p=1 hand example: ln 0.75") {
        Eigen::MatrixXd psi = Eigen::MatrixXd::Constant(1, 1, 0.5);
        CHECK(log_det_s(psi, w2.eigenvalues()) ==
              doctest::Approx(std::log(0.75)).epsilon(1e-10));
    }
    SUBCASE("random Psi on a 5x5 Queen grid matches dense LU") {
        std::mt19937_64 rng(3);
        std::normal_distribution<double> dist(0.0, 0.2);
        SpatialWeights w = row_standardize(grid_contiguity(5, 5, ContiguityScheme::Queen));
        for (int trial = 0; trial < 20; ++trial) {
            Eigen::MatrixXd psi = Eigen::MatrixXd::NullaryExpr(2, 2, [&] { return dist(rng); });
            Eigen::MatrixXd s = Eigen::MatrixXd::Identity(50, 50) -
                                kron(psi.transpose(), w.to_dense());
            Eigen::PartialPivLU<Eigen::MatrixXd> lu(s);
            double oracle = 0.0;
            for (int i = 0; i < 50; ++i) oracle += std::log(std::abs(lu.matrixLU()(i, i)));
            CHECK(log_det_s(psi, w.eigenvalues()) == doctest::Approx(oracle).epsilon(1e-8));
        }
    }
    SUBCASE("singular S throws") {
        Eigen::MatrixXd psi = Eigen::MatrixXd::Constant(1, 1, 1.0);  // 1 - 1*1 = 0
        CHECK_THROWS_AS(log_det_s(psi, w2.eigenvalues()), SingularJacobian);
    }
}

TEST_CASE("residuals vanish on noise-free data at the generating parameters") {
    SpatialWeights w = row_standardize(grid_contiguity(3, 3, ContiguityScheme::Queen));
    Eigen::MatrixXd psi(2, 2), pi(2, 2);
    psi << 0.5, 0.1, 0.1, 0.5;
    pi << 0.3, 0.0, 0.0, 0.3;
    ParamSet ps;
    ps.a_tilde = (Eigen::MatrixXd(2, 1) << -0.3, 0.4).finished();
    ps.psi = psi;
    ps.pi = pi;
    ps.sigma2_u = 1.0;
    const Dimensions d(9, 2, 6);

    // construct X_t by the deterministic recursion (u = 0), then Y = exp(X/2)
    Eigen::SparseMatrix<double> s = build_s_matrix(psi, w);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(s);
    Eigen::MatrixXd a_mat = ps.a_tilde.transpose().replicate(9, 1);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(9, 2);
    std::vector<Eigen::MatrixXd> slices;
    slices.push_back((x.array() / 2.0).exp().matrix());
    for (int t = 1; t <= d.t_len; ++t) {
        Eigen::MatrixXd rhs = a_mat + x * pi;
        Eigen::VectorXd xv = lu.solve(Eigen::Map<const Eigen::VectorXd>(rhs.data(), 18));
        x = Eigen::Map<const Eigen::MatrixXd>(xv.data(), 9, 2);
        slices.push_back((x.array() / 2.0).exp().matrix());
    }
    Panel panel(d, slices);
    LikelihoodWorkspace ws(panel, w);
    auto r = residuals(pack_params(ps, AMode::ConstantAcrossSpace), ws,
                       AMode::ConstantAcrossSpace);
    for (const auto& rt : r) CHECK(rt.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("residuals at the truth have mean 0 and variance sigma2_u") {
    SpatialWeights w = row_standardize(grid_contiguity(5, 5, ContiguityScheme::Queen));
    ErrorDist dist = ErrorDist::standard_normal();
    Eigen::MatrixXd psi(2, 2), pi(2, 2);
    psi << 0.5, 0.1, 0.1, 0.5;
    pi << 0.3, 0.0, 0.0, 0.3;
    ParamSet ps;
    ps.a_tilde = Eigen::MatrixXd::Constant(2, 1, 1.0 + dist.mean_log_sq);
    ps.psi = psi;
    ps.pi = pi;
    ps.sigma2_u = dist.var_log_sq;
    Simulator sim(w, dist, ps, AMode::ConstantAcrossSpace, 25);
    const int T = 2000;
    SimOutput out = sim.run(21, T, 50);
    LikelihoodWorkspace ws(out.panel, w);
    auto r = residuals(pack_params(ps, AMode::ConstantAcrossSpace), ws,
                       AMode::ConstantAcrossSpace);
    double sum = 0.0, sum_sq = 0.0;
    long count = 0;
    for (const auto& rt : r) {
        sum += rt.sum();
        sum_sq += rt.squaredNorm();
        count += rt.size();
    }
    const double mean = sum / count;
    const double var = sum_sq / count - mean * mean;
    const double se_mean = 3.0 * std::sqrt(dist.var_log_sq / count);
    CHECK(std::abs(mean) < se_mean);
    CHECK(std::abs(var / dist.var_log_sq - 1.0) < 0.1);
}

TEST_CASE("residuals hand example, n=2, p=1, T=1") {
    SpatialWeights w(2, {{0, 1, 1.0}, {1, 0, 1.0}});
    std::vector<Eigen::MatrixXd> slices(2, Eigen::MatrixXd(2, 1));
    slices[0] << 2.0, 3.0;
    slices[1] << 1.5, 0.5;
    Panel panel(Dimensions(2, 1, 1), slices);
    LikelihoodWorkspace ws(panel, w);
    Eigen::VectorXd theta(3);
    theta << 0.2, 0.5, 0.3;  // a~, psi, pi
    auto r = residuals(theta, ws, AMode::ConstantAcrossSpace);
    // x0 = (ln 4, ln 9), x1 = (ln 2.25, ln 0.25)
    const double x00 = std::log(4.0), x01 = std::log(9.0);
    const double x10 = std::log(2.25), x11 = std::log(0.25);
    CHECK(r[0](0, 0) == doctest::Approx(x10 - 0.5 * x11 - 0.3 * x00 - 0.2).epsilon(1e-12));
    CHECK(r[0](1, 0) == doctest::Approx(x11 - 0.5 * x10 - 0.3 * x01 - 0.2).epsilon(1e-12));
}

TEST_CASE("log_likelihood closed form at Psi = Pi = 0, A~ = 0") {
    SpatialWeights w = row_standardize(grid_contiguity(3, 3, ContiguityScheme::Rook));
    const Dimensions d(9, 2, 4);
    Panel panel = random_panel(d, 17);
    LikelihoodWorkspace ws(panel, w);
    const double sigma2 = 4.9348;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(10);
    double quad = 0.0;
    for (int t = 1; t <= d.t_len; ++t)
        quad += panel.slices[t].array().square().log().matrix().squaredNorm();
    const double expect = -0.5 * d.t_len * d.np() * std::log(2.0 * std::numbers::pi * sigma2) -
                          quad / (2.0 * sigma2);
    CHECK(log_likelihood(theta, ws, sigma2, AMode::ConstantAcrossSpace) ==
          doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("structured likelihood equals literal dense-Kronecker evaluation") {
    SpatialWeights w = row_standardize(grid_contiguity(3, 3, ContiguityScheme::Queen));
    const Dimensions d(9, 2, 5);
    Panel panel = random_panel(d, 29);
    LikelihoodWorkspace ws(panel, w);
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd theta = random_stable_theta(d, AMode::ConstantAcrossSpace, rng);
        const double structured =
            log_likelihood(theta, ws, 4.9348, AMode::ConstantAcrossSpace);
        const double brute =
            brute_force_log_likelihood(theta, panel, w.to_dense(), 4.9348,
                                       AMode::ConstantAcrossSpace);
        CHECK(structured == doctest::Approx(brute).epsilon(1e-8));
    }
}

TEST_CASE("analytic gradient matches central finite differences") {
    SpatialWeights w = row_standardize(grid_contiguity(5, 5, ContiguityScheme::Queen));
    const Dimensions d(25, 2, 10);
    Panel panel = random_panel(d, 41);
    LikelihoodWorkspace ws(panel, w);
    std::mt19937_64 rng(43);
    const double sigma2 = 4.9348;
    for (int trial = 0; trial < 15; ++trial) {
        Eigen::VectorXd theta = random_stable_theta(d, AMode::ConstantAcrossSpace, rng);
        Eigen::VectorXd g =
            log_likelihood_gradient(theta, ws, sigma2, AMode::ConstantAcrossSpace);
        for (int j = 0; j < theta.size(); ++j) {
            Eigen::VectorXd tp = theta, tm = theta;
            tp[j] += 1e-6;
            tm[j] -= 1e-6;
            const double fd =
                (log_likelihood(tp, ws, sigma2, AMode::ConstantAcrossSpace) -
                 log_likelihood(tm, ws, sigma2, AMode::ConstantAcrossSpace)) /
                2e-6;
            if (std::abs(fd) > 1e-4)
                CHECK(g[j] == doctest::Approx(fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("gradient in free-per-location mode matches finite differences") {
    SpatialWeights w = row_standardize(grid_contiguity(3, 3, ContiguityScheme::Rook));
    const Dimensions d(9, 2, 6);
    Panel panel = random_panel(d, 53);
    LikelihoodWorkspace ws(panel, w);
    std::mt19937_64 rng(59);
    Eigen::VectorXd theta = random_stable_theta(d, AMode::FreePerLocation, rng);
    Eigen::VectorXd g = log_likelihood_gradient(theta, ws, 4.9348, AMode::FreePerLocation);
    for (int j = 0; j < theta.size(); ++j) {
        Eigen::VectorXd tp = theta, tm = theta;
        tp[j] += 1e-6;
        tm[j] -= 1e-6;
        const double fd = (log_likelihood(tp, ws, 4.9348, AMode::FreePerLocation) -
                           log_likelihood(tm, ws, 4.9348, AMode::FreePerLocation)) /
                          2e-6;
        if (std::abs(fd) > 1e-4) CHECK(g[j] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("likelihood is invariant under joint relabeling of locations") {
    SpatialWeights w = row_standardize(grid_contiguity(3, 3, ContiguityScheme::Queen));
    const Dimensions d(9, 2, 5);
    Panel panel = random_panel(d, 61);
    std::mt19937_64 rng(67);
    Eigen::VectorXd theta = random_stable_theta(d, AMode::ConstantAcrossSpace, rng);

    std::vector<int> perm(9);
    for (int i = 0; i < 9; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);

    Eigen::MatrixXd wd = w.to_dense();
    Eigen::MatrixXd wp(9, 9);
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 9; ++j) wp(perm[i], perm[j]) = wd(i, j);
    std::vector<WeightEntry> entries;
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 9; ++j)
            if (wp(i, j) != 0.0) entries.push_back({i, j, wp(i, j)});
    SpatialWeights w_perm(9, entries, true);

    std::vector<Eigen::MatrixXd> slices_perm(d.t_len + 1, Eigen::MatrixXd(9, 2));
    for (int t = 0; t <= d.t_len; ++t)
        for (int i = 0; i < 9; ++i) slices_perm[t].row(perm[i]) = panel.slices[t].row(i);
    Panel panel_perm(d, slices_perm);

    LikelihoodWorkspace ws1(panel, w);
    LikelihoodWorkspace ws2(panel_perm, w_perm);
    CHECK(log_likelihood(theta, ws1, 4.9348, AMode::ConstantAcrossSpace) ==
          doctest::Approx(log_likelihood(theta, ws2, 4.9348, AMode::ConstantAcrossSpace))
              .epsilon(1e-10));
}

TEST_CASE("per-observation scaling") {
    SpatialWeights w = row_standardize(grid_contiguity(3, 3, ContiguityScheme::Rook));
    const Dimensions d(9, 1, 4);
    Panel panel = random_panel(d, 71);
    LikelihoodWorkspace ws(panel, w);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(3);
    CHECK(log_likelihood_per_obs(theta, ws, 4.9348, AMode::ConstantAcrossSpace) ==
          doctest::Approx(log_likelihood(theta, ws, 4.9348, AMode::ConstantAcrossSpace) /
                          36.0));
}
