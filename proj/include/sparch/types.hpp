#ifndef SPARCH_TYPES_HPP
#define SPARCH_TYPES_HPP

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sparch {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct ZeroValueError : std::runtime_error {
    // offending (location, variable, time) triples
    std::vector<std::array<int, 3>> offenders;
    explicit ZeroValueError(std::vector<std::array<int, 3>> where);
};

struct SingularJacobian : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateData : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Dimensions
// ---------------------------------------------------------------------------

struct Dimensions {
    int n = 0;      // location count
    int p = 0;      // variable count
    int t_len = 0;  // time-series length T (conditioning slice not counted)

    Dimensions() = default;
    Dimensions(int n_, int p_, int t_len_);

    int np() const { return n * p; }
};

// ---------------------------------------------------------------------------
// Panel: n x p x (T+1) observations, slice 0 is the conditioning slice Y0.
// ---------------------------------------------------------------------------

struct Panel {
    Dimensions dims;
    std::vector<Eigen::MatrixXd> slices;  // T+1 matrices, each n x p
    std::vector<std::string> location_ids;
    std::vector<std::string> variable_names;
    std::vector<std::string> time_labels;

    Panel() = default;
    Panel(Dimensions d, std::vector<Eigen::MatrixXd> values);

    // Fills location/variable/time labels with generic names where empty.
    void default_labels();

    const Eigen::MatrixXd& slice(int t) const { return slices.at(t); }

    // Throws ZeroValueError listing every exactly-zero entry.
    void require_zero_free() const;
};

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

enum class AMode { ConstantAcrossSpace, FreePerLocation };

struct ParamSet {
    // p x 1 in ConstantAcrossSpace mode, n x p in FreePerLocation mode;
    // stored on the centered (a-tilde) scale.
    Eigen::MatrixXd a_tilde;
    Eigen::MatrixXd psi;  // p x p
    Eigen::MatrixXd pi;   // p x p
    double sigma2_u = 0.0;

    int var_count() const { return static_cast<int>(psi.rows()); }

    // User-facing intercept A of the untransformed model.
    Eigen::MatrixXd a_untransformed(double mean_log_sq) const;

    void validate(const Dimensions& dims, AMode mode) const;
};

// Packed layout: a_tilde (column-major), vec(psi), vec(pi).
Eigen::VectorXd pack_params(const ParamSet& params, AMode mode);
ParamSet unpack_params(const Eigen::VectorXd& theta, const Dimensions& dims,
                       AMode mode, double sigma2_u);
int packed_size(const Dimensions& dims, AMode mode);

// ---------------------------------------------------------------------------
// Error distribution
// ---------------------------------------------------------------------------

enum class ErrorKind { StandardNormal, StudentT };

struct ErrorDist {
    ErrorKind kind = ErrorKind::StandardNormal;
    double df = 0.0;           // StudentT only, must be > 2
    double mean_log_sq = 0.0;  // E(ln eps^2)
    double var_log_sq = 0.0;   // Var(ln eps^2)

    static ErrorDist standard_normal();
    static ErrorDist student_t(double df);
};

// Analytic moments of ln(eps^2) for the unit-variance innovation.
// Normal: (-(gamma + ln 2), trigamma(1/2)).
// StudentT(nu): mean = digamma(1/2) - digamma(nu/2) + ln nu + ln c^2 with
// c = sqrt((nu-2)/nu); var = trigamma(1/2) + trigamma(nu/2).
std::pair<double, double> error_dist_moments(ErrorKind kind, double df = 0.0);

// ---------------------------------------------------------------------------
// Model configuration
// ---------------------------------------------------------------------------

struct SpatialWeights;  // spatial_weights module

struct ModelConfig {
    Dimensions dims;
    const SpatialWeights* weights = nullptr;
    ErrorDist error_dist;
    AMode a_mode = AMode::ConstantAcrossSpace;
    std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Transforms
// ---------------------------------------------------------------------------

// Elementwise ln(y^2) over all T+1 slices; throws ZeroValueError on exact
// zeros (Assumption-1 precondition of the transform).
std::vector<Eigen::MatrixXd> log_sq_transform(const Panel& panel);

}  // namespace sparch

#endif  // SPARCH_TYPES_HPP
