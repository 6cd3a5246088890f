#include "sparch/types.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

namespace sparch {

namespace {

std::string format_offenders(const std::vector<std::array<int, 3>>& where) {
    std::ostringstream os;
    os << "panel contains exact zeros at (location,variable,time):";
    std::size_t shown = 0;
    for (const auto& w : where) {
        if (shown++ == 10) {
            os << " ... (" << where.size() << " total)";
            break;
        }
        os << " (" << w[0] << "," << w[1] << "," << w[2] << ")";
    }
    return os.str();
}

}  // namespace

ZeroValueError::ZeroValueError(std::vector<std::array<int, 3>> where)
    : std::runtime_error(format_offenders(where)), offenders(std::move(where)) {}

Dimensions::Dimensions(int n_, int p_, int t_len_) : n(n_), p(p_), t_len(t_len_) {
    if (n < 1 || p < 1 || t_len < 1)
        throw std::invalid_argument("Dimensions: n, p, t_len must all be >= 1");
}

Panel::Panel(Dimensions d, std::vector<Eigen::MatrixXd> values)
    : dims(d), slices(std::move(values)) {
    if (static_cast<int>(slices.size()) != dims.t_len + 1)
        throw std::invalid_argument("Panel: expected T+1 time slices");
    for (const auto& s : slices) {
        if (s.rows() != dims.n || s.cols() != dims.p)
            throw std::invalid_argument("Panel: slice shape mismatch");
        if (!s.allFinite()) throw std::invalid_argument("Panel: non-finite value");
    }
    default_labels();
}

void Panel::default_labels() {
    if (static_cast<int>(location_ids.size()) != dims.n) {
        location_ids.resize(dims.n);
        for (int i = 0; i < dims.n; ++i) location_ids[i] = "loc" + std::to_string(i);
    }
    if (static_cast<int>(variable_names.size()) != dims.p) {
        variable_names.resize(dims.p);
        for (int j = 0; j < dims.p; ++j) variable_names[j] = "var" + std::to_string(j);
    }
    if (static_cast<int>(time_labels.size()) != dims.t_len + 1) {
        time_labels.resize(dims.t_len + 1);
        for (int t = 0; t <= dims.t_len; ++t) time_labels[t] = "t" + std::to_string(t);
    }
}

void Panel::require_zero_free() const {
    std::vector<std::array<int, 3>> offenders;
    for (int t = 0; t < static_cast<int>(slices.size()); ++t)
        for (int j = 0; j < dims.p; ++j)
            for (int i = 0; i < dims.n; ++i)
                if (slices[t](i, j) == 0.0) offenders.push_back({i, j, t});
    if (!offenders.empty()) throw ZeroValueError(std::move(offenders));
}

Eigen::MatrixXd ParamSet::a_untransformed(double mean_log_sq) const {
    return a_tilde.array() - mean_log_sq;
}

void ParamSet::validate(const Dimensions& dims, AMode mode) const {
    const int p = dims.p;
    if (psi.rows() != p || psi.cols() != p) throw std::invalid_argument("ParamSet: psi must be p x p");
    if (pi.rows() != p || pi.cols() != p) throw std::invalid_argument("ParamSet: pi must be p x p");
    if (mode == AMode::ConstantAcrossSpace) {
        if (a_tilde.rows() != p || a_tilde.cols() != 1)
            throw std::invalid_argument("ParamSet: a_tilde must be a p-vector in constant mode");
    } else {
        if (a_tilde.rows() != dims.n || a_tilde.cols() != p)
            throw std::invalid_argument("ParamSet: a_tilde must be n x p in free mode");
    }
    if (!(sigma2_u > 0.0)) throw std::invalid_argument("ParamSet: sigma2_u must be positive");
    if (!a_tilde.allFinite() || !psi.allFinite() || !pi.allFinite())
        throw std::invalid_argument("ParamSet: non-finite entry");
}

int packed_size(const Dimensions& dims, AMode mode) {
    const int a_len = (mode == AMode::ConstantAcrossSpace) ? dims.p : dims.n * dims.p;
    return a_len + 2 * dims.p * dims.p;
}

Eigen::VectorXd pack_params(const ParamSet& params, AMode mode) {
    const int p = params.var_count();
    const int a_len = static_cast<int>(params.a_tilde.size());
    if (mode == AMode::ConstantAcrossSpace && (params.a_tilde.cols() != 1 || params.a_tilde.rows() != p))
        throw std::invalid_argument("pack_params: a_tilde shape does not match constant mode");
    if (mode == AMode::FreePerLocation && params.a_tilde.cols() != p)
        throw std::invalid_argument("pack_params: a_tilde shape does not match free mode");
    Eigen::VectorXd theta(a_len + 2 * p * p);
    theta.head(a_len) = Eigen::Map<const Eigen::VectorXd>(params.a_tilde.data(), a_len);
    theta.segment(a_len, p * p) = Eigen::Map<const Eigen::VectorXd>(params.psi.data(), p * p);
    theta.tail(p * p) = Eigen::Map<const Eigen::VectorXd>(params.pi.data(), p * p);
    return theta;
}

ParamSet unpack_params(const Eigen::VectorXd& theta, const Dimensions& dims,
                       AMode mode, double sigma2_u) {
    const int p = dims.p;
    const int a_rows = (mode == AMode::ConstantAcrossSpace) ? p : dims.n;
    const int a_cols = (mode == AMode::ConstantAcrossSpace) ? 1 : p;
    const int a_len = a_rows * a_cols;
    if (theta.size() != a_len + 2 * p * p)
        throw std::invalid_argument("unpack_params: theta length mismatch");
    ParamSet out;
    out.a_tilde = Eigen::Map<const Eigen::MatrixXd>(theta.data(), a_rows, a_cols);
    out.psi = Eigen::Map<const Eigen::MatrixXd>(theta.data() + a_len, p, p);
    out.pi = Eigen::Map<const Eigen::MatrixXd>(theta.data() + a_len + p * p, p, p);
    out.sigma2_u = sigma2_u;
    return out;
}

ErrorDist ErrorDist::standard_normal() {
    ErrorDist d;
    d.kind = ErrorKind::StandardNormal;
    std::tie(d.mean_log_sq, d.var_log_sq) = error_dist_moments(d.kind);
    return d;
}

ErrorDist ErrorDist::student_t(double df) {
    ErrorDist d;
    d.kind = ErrorKind::StudentT;
    d.df = df;
    std::tie(d.mean_log_sq, d.var_log_sq) = error_dist_moments(d.kind, df);
    return d;
}

std::pair<double, double> error_dist_moments(ErrorKind kind, double df) {
    const double half = 0.5;
    if (kind == ErrorKind::StandardNormal) {
        const double mean = -(std::numbers::egamma + std::numbers::ln2);
        const double var = boost::math::trigamma(half);
        return {mean, var};
    }
    if (df <= 2.0)
        throw std::invalid_argument("error_dist_moments: StudentT requires df > 2");
    // eps = c * t_nu with c = sqrt((nu-2)/nu), so ln eps^2 = ln c^2 + ln t^2.
    const double c2 = (df - 2.0) / df;
    const double mean = boost::math::digamma(half) - boost::math::digamma(df / 2.0) +
                        std::log(df) + std::log(c2);
    const double var = boost::math::trigamma(half) + boost::math::trigamma(df / 2.0);
    return {mean, var};
}

std::vector<Eigen::MatrixXd> log_sq_transform(const Panel& panel) {
    panel.require_zero_free();
    std::vector<Eigen::MatrixXd> out;
    out.reserve(panel.slices.size());
    for (const auto& s : panel.slices) out.push_back(s.array().square().log().matrix());
    return out;
}

}  // namespace sparch
