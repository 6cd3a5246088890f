#include "sparch/monte_carlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <functional>
#include <iomanip>
#include <sstream>
#include <thread>

#include "sparch/simulate.hpp"

namespace sparch {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t hash_string(std::uint64_t h, const std::string& s) {
    for (unsigned char c : s) h = splitmix64(h ^ c);
    return h;
}

}  // namespace

std::uint64_t replication_seed(std::uint64_t base_seed, const McCellKey& cell,
                               int replication) {
    std::uint64_t h = splitmix64(base_seed);
    h = hash_string(h, cell.model_id);
    h = hash_string(h, cell.error_dist);
    h = splitmix64(h ^ static_cast<std::uint64_t>(cell.n));
    h = splitmix64(h ^ static_cast<std::uint64_t>(cell.t_len));
    h = splitmix64(h ^ static_cast<std::uint64_t>(replication));
    return h;
}

McDesign builtin_design(BuiltinModel model) {
    McDesign d;
    d.a0 = Eigen::VectorXd::Ones(2);
    d.params0.sigma2_u = 1.0;  // replaced per cell by the error-dist value
    switch (model) {
        case BuiltinModel::A:
            d.model_id = "A";
            d.params0.psi = (Eigen::MatrixXd(2, 2) << 0.5, 0.1, 0.1, 0.5).finished();
            d.params0.pi = (Eigen::MatrixXd(2, 2) << 0.3, 0.0, 0.0, 0.3).finished();
            break;
        case BuiltinModel::B:
            d.model_id = "B";
            d.params0.psi = (Eigen::MatrixXd(2, 2) << 0.5, 0.1, 0.1, 0.5).finished();
            d.params0.pi = Eigen::MatrixXd::Zero(2, 2);
            break;
        case BuiltinModel::C:
            d.model_id = "C";
            d.params0.psi = (Eigen::MatrixXd(2, 2) << 0.2, 0.4, 0.4, 0.2).finished();
            d.params0.pi = (Eigen::MatrixXd(2, 2) << 0.3, 0.0, 0.0, 0.3).finished();
            break;
    }
    d.params0.a_tilde = Eigen::MatrixXd::Zero(2, 1);
    d.scheme = ContiguityScheme::Queen;
    d.sizes = {{5, 5, 30}, {7, 7, 100}, {10, 10, 200}};
    d.error_dists = {ErrorDist::standard_normal(), ErrorDist::student_t(3.0)};
    d.replications = 200;
    d.seed = 1;
    d.burn_in = 50;
    return d;
}

namespace {

std::string dist_label(const ErrorDist& d) {
    if (d.kind == ErrorKind::StandardNormal) return "normal";
    std::ostringstream os;
    os << "t" << d.df;
    return os.str();
}

std::vector<std::string> param_names_for(int p) {
    std::vector<std::string> names{"a"};
    for (int l = 0; l < p; ++l)
        for (int k = 0; k < p; ++k)
            names.push_back("psi" + std::to_string(k + 1) + std::to_string(l + 1));
    for (int l = 0; l < p; ++l)
        for (int k = 0; k < p; ++k)
            names.push_back("pi" + std::to_string(k + 1) + std::to_string(l + 1));
    return names;
}

// Collapse the p a-tilde entries into one averaged "a" column; psi/pi pass
// through in vec order.
Eigen::VectorXd report_vector(const Eigen::VectorXd& theta, int p) {
    const int pp = p * p;
    Eigen::VectorXd out(1 + 2 * pp);
    out[0] = theta.head(p).mean();
    out.segment(1, pp) = theta.segment(p, pp);
    out.tail(pp) = theta.tail(pp);
    return out;
}

}  // namespace

McReport run_design(const McDesign& design, int workers, bool keep_estimates) {
    if (design.replications < 1)
        throw std::invalid_argument("run_design: replications must be positive");
    const int p = static_cast<int>(design.params0.psi.rows());
    McReport report;
    report.param_names = param_names_for(p);

    for (const auto& dist : design.error_dists) {
        for (const auto& size : design.sizes) {
            SpatialWeights w =
                row_standardize(grid_contiguity(size.grid_rows, size.grid_cols, design.scheme));

            ParamSet params0 = design.params0;
            params0.a_tilde = (design.a0.array() + dist.mean_log_sq).matrix();
            params0.sigma2_u = dist.var_log_sq;

            StabilityReport stab = check_stability(params0, w);
            if (!stab.stable)
                throw std::invalid_argument(
                    "run_design: data-generating parameters are unstable (spectral radius " +
                    std::to_string(stab.spectral_radius) + ")");

            Simulator sim(w, dist, params0, AMode::ConstantAcrossSpace, size.n());
            const Eigen::VectorXd theta0 = pack_params(params0, AMode::ConstantAcrossSpace);

            McCellKey key{design.model_id, dist_label(dist), size.n(), size.t_len};
            const int reps = design.replications;
            std::vector<Eigen::VectorXd> estimates(reps);
            std::vector<char> ok(reps, 0);

            auto run_one = [&](int r) {
                const std::uint64_t seed = replication_seed(design.seed, key, r);
                try {
                    SimOutput out = sim.run(seed, size.t_len, design.burn_in);
                    LikelihoodWorkspace ws(out.panel, w);
                    FitOptions opt;
                    opt.compute_std_errors = false;
                    FitResult fr = fit(ws, dist, AMode::ConstantAcrossSpace, opt);
                    if (fr.converged) {
                        estimates[r] = fr.theta;
                        ok[r] = 1;
                    }
                } catch (const std::exception&) {
                    // counted as a failure
                }
            };

            if (workers <= 1) {
                for (int r = 0; r < reps; ++r) run_one(r);
            } else {
                std::atomic<int> next{0};
                std::vector<std::thread> pool;
                for (int t = 0; t < workers; ++t)
                    pool.emplace_back([&] {
                        for (int r = next.fetch_add(1); r < reps; r = next.fetch_add(1))
                            run_one(r);
                    });
                for (auto& th : pool) th.join();
            }

            McCell cell;
            cell.replications = reps;
            const int dim = 1 + 2 * p * p;
            Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
            Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(dim);
            const Eigen::VectorXd truth = report_vector(theta0, p);
            int successes = 0;
            for (int r = 0; r < reps; ++r) {
                if (!ok[r]) {
                    ++cell.failures;
                    continue;
                }
                Eigen::VectorXd dev = report_vector(estimates[r], p) - truth;
                sum += dev;
                sum_sq += dev.array().square().matrix();
                ++successes;
                if (keep_estimates) cell.estimates.push_back(report_vector(estimates[r], p));
            }
            cell.truth = truth;
            cell.truth[0] = design.a0.mean();  // report the untransformed level
            if (successes > 0) {
                cell.bias = sum / successes;
                cell.rmse = (sum_sq / successes).array().sqrt().matrix();
            } else {
                cell.bias = Eigen::VectorXd::Constant(dim, std::numeric_limits<double>::quiet_NaN());
                cell.rmse = cell.bias;
            }
            cell.convergence_rate = static_cast<double>(successes) / reps;
            cell.flagged = cell.failures > reps / 5;
            report.cells[key] = std::move(cell);
        }
    }
    return report;
}

namespace {

void emit_one_table(std::ostream& os, const McReport& report, const std::string& model,
                    const std::string& dist, bool rmse, TableFormat format) {
    const char sep = format == TableFormat::Csv ? ',' : ' ';
    const int width = format == TableFormat::Csv ? 0 : 12;
    auto put = [&](const std::string& s, bool first) {
        if (format == TableFormat::Csv) {
            if (!first) os << sep;
            os << s;
        } else {
            os << std::setw(first ? 14 : width) << s;
        }
    };
    os << (rmse ? "RMSE" : "Average bias") << " | model " << model << ", " << dist
       << " errors\n";
    put("n/T", true);
    for (const auto& name : report.param_names) put(name, false);
    os << "\n";
    for (const auto& [key, cell] : report.cells) {
        if (key.model_id != model || key.error_dist != dist) continue;
        std::ostringstream lab;
        lab << "n=" << key.n << "/T=" << key.t_len;
        put(lab.str(), true);
        const Eigen::VectorXd& v = rmse ? cell.rmse : cell.bias;
        for (int j = 0; j < v.size(); ++j) {
            std::ostringstream num;
            if (format == TableFormat::Csv)
                num << std::setprecision(17) << v[j];
            else
                num << std::fixed << std::setprecision(4) << v[j];
            put(num.str(), false);
        }
        os << "\n";
        if (cell.flagged)
            os << "  [flagged: " << cell.failures << "/" << cell.replications
               << " replications failed]\n";
    }
    os << "\n";
}

}  // namespace

std::string emit_tables(const McReport& report, TableFormat format) {
    // collect (model, dist) pairs in key order
    std::vector<std::pair<std::string, std::string>> groups;
    for (const auto& [key, cell] : report.cells) {
        std::pair<std::string, std::string> g{key.model_id, key.error_dist};
        if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
    }
    std::ostringstream os;
    for (const auto& [model, dist] : groups) emit_one_table(os, report, model, dist, false, format);
    for (const auto& [model, dist] : groups) emit_one_table(os, report, model, dist, true, format);
    return os.str();
}

}  // namespace sparch
