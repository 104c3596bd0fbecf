#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace calib {

/// Outcome of a damped least-squares fit.
struct FitResult {
    std::map<std::string, double> parameters;
    std::map<std::string, double> standard_errors;
    Eigen::MatrixXd covariance;
    std::vector<std::string> parameter_order;
    double residual_norm = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<std::string> warnings;

    double value(const std::string& name) const { return parameters.at(name); }
    double sigma(const std::string& name) const { return standard_errors.at(name); }
    std::string to_json() const;
};

/// y(x; p). The model is evaluated pointwise; the Jacobian is numerical.
using Model = std::function<double(double x, const Eigen::VectorXd& p)>;

struct FitData {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> weights;  // empty = unweighted
};

struct Bounds {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
};

/// Levenberg-Marquardt least squares with central-difference Jacobian
/// (relative step 1e-6), terminating on relative cost change < 1e-10 or 200
/// iterations. Standard errors come from the residual-scaled covariance
/// (J^T W J)^{-1}. Singular normal equations are reported as non-convergence
/// with a diagnostic warning rather than thrown.
FitResult levenberg_marquardt(const Model& model, const FitData& data,
                              const Eigen::VectorXd& init,
                              const std::vector<std::string>& names,
                              const std::optional<Bounds>& bounds = std::nullopt);

/// Parity-aware unwanted-population estimator: the wanted state is |11> for
/// even n and |02> for odd n; shots outside the two-excitation subspace are
/// excluded.
struct UnwantedPopulation {
    long n = 0;
    double value = 0.0;
    long in_subspace_shots = 0;
    bool defined = true;  // false when no in-subspace shots remain
};

UnwantedPopulation unwanted_population(long counts_11, long counts_02, long n);

/// One point of an unwanted-population decay series.
struct UpPoint {
    long n = 0;
    double value = 0.0;
    double sigma = 0.0;
};

/// Fits UP_n = offset + amplitude * UP_model(theta, n) where UP_model is the
/// regularized PALEA signal. Reports |theta| (the sign is unidentifiable).
/// Weights are binomial-variance based, w = 1/max(sigma^2, sigma_floor^2).
FitResult fit_palea_theta(const std::vector<UpPoint>& series);

/// Joint 2-D PALEA fit across a (amplitude a, n) map assuming theta depends
/// polynomially on a. Returns the polynomial coefficients, the zero crossing
/// a0 nearest the minimum of the n-averaged signal (absent when theta(a) has
/// no sign change over the range), and per-amplitude theta estimates.
struct Palea2dResult {
    FitResult fit;
    std::vector<double> theta_poly;           // c0 + c1 a + ...
    std::optional<double> zero_crossing;      // a0
    std::vector<double> amplitudes;           // sweep axis
    std::vector<double> theta_per_amplitude;  // theta(a_i) from the joint fit
};

struct UpMap {
    std::vector<double> amplitudes;
    std::vector<long> cycles;
    // values[i][j] = UP at amplitudes[i], cycles[j]
    std::vector<std::vector<double>> values;
    std::vector<std::vector<double>> sigmas;
};

Palea2dResult fit_palea_2d(const UpMap& map, int poly_degree);

/// y = offset + amplitude / (1 + ((x - x0) / (fwhm/2))^2).
FitResult fit_lorentzian(const std::vector<double>& x, const std::vector<double>& y,
                         const std::vector<double>& weights = {});

/// y = offset + amplitude * cos(2mu * n + phase), frequency initialized from
/// the discrete Fourier peak. The frequency parameter is named "frequency".
FitResult fit_sinusoid(const std::vector<double>& n, const std::vector<double>& y,
                       const std::vector<double>& weights = {});

enum class ExponentialModel { Single, Double };

/// Single: y = c + A r^n. Double: y = c + A1 r1^n + A2 r2^n with r1 >= r2.
FitResult fit_exponential(const std::vector<double>& n, const std::vector<double>& y,
                          ExponentialModel model,
                          const std::vector<double>& weights = {});

/// Bayesian information criterion k ln(N) + N ln(RSS/N); the minimum wins and
/// ties go to fewer parameters. Candidates must be fits of identical data.
std::size_t select_by_bic(const std::vector<FitResult>& fits, long n_points);

double bic_score(const FitResult& fit, long n_points);

}  // namespace calib
