#include "calib/amp_models.hpp"

#include <cmath>
#include <stdexcept>

#include "calib/rotations.hpp"

namespace calib {

namespace {

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) {
        throw std::invalid_argument(std::string("non-finite input: ") + name);
    }
}

}  // namespace

double legendre_unit_sum(double x, long n) {
    if (n <= 0) return 0.0;
    // Clenshaw for sum_{k=0}^{N} c_k P_k(x) with c_k = 1, N = n - 1, using
    // P_{k+1} = ((2k+1) x P_k - k P_{k-1}) / (k+1).
    double b1 = 0.0;  // b_{k+1}
    double b2 = 0.0;  // b_{k+2}
    for (long k = n - 1; k >= 1; --k) {
        const double ak = (2.0 * k + 1.0) / (k + 1.0) * x;
        const double bk1 = -(k + 1.0) / (k + 2.0);  // beta_{k+1}
        const double b = 1.0 + ak * b1 + bk1 * b2;
        b2 = b1;
        b1 = b;
    }
    // S = (c_0 + beta_1 b_2) P_0 + b_1 P_1,  beta_1 = -1/2.
    return (1.0 - 0.5 * b2) + b1 * x;
}

double mu_angle(double theta, double phi) {
    require_finite(theta, "theta");
    require_finite(phi, "phi");
    const double t = std::abs(wrap_angle(theta));
    const double p = std::abs(wrap_angle(phi));
    double c = std::cos(p / 2.0) * std::cos(t / 2.0);
    if (c > 1.0) c = 1.0;
    if (c < -1.0) c = -1.0;
    return std::acos(c);
}

double standard_ea_signal(double theta, double phi, long n) {
    if (n < 0) throw std::invalid_argument("standard_ea_signal: n must be >= 0");
    const double mu = mu_angle(theta, phi);
    const double s2 = std::sin(mu) * std::sin(mu);
    if (s2 < 1e-24) return 1.0;  // theta = phi = 0: no dynamics
    const double t = std::abs(wrap_angle(theta));
    const double c2 = std::cos(t / 2.0) * std::cos(t / 2.0);
    const double v =
        (c2 - std::cos(2.0 * mu) + (1.0 - c2) * std::cos(2.0 * n * mu)) / (2.0 * s2);
    return std::min(1.0, std::max(0.0, v));
}

double standard_ea_amplitude(double theta, double phi) {
    require_finite(theta, "theta");
    require_finite(phi, "phi");
    const double t = std::abs(wrap_angle(theta));
    const double p = std::abs(wrap_angle(phi));
    const double st = std::sin(t / 2.0);
    const double sp = std::sin(p / 2.0);
    const double ct = std::cos(t / 2.0);
    const double denom = st * st + sp * sp * ct * ct;
    if (denom < 1e-300) return 1.0;  // theta = phi = 0 limit
    return st * st / denom;
}

double floquet_effective_phase(FloquetMode mode, double value, double delta_omega) {
    require_finite(value, "value");
    require_finite(delta_omega, "delta_omega");
    switch (mode) {
        case FloquetMode::Delay:
            return wrap_angle(value * delta_omega);
        case FloquetMode::ZRotation:
            return wrap_angle(value);
    }
    return 0.0;
}

double palea_signal(double theta, long n) {
    if (n < 0 || n > 1000000) {
        throw std::invalid_argument("palea_signal: n must be in [0, 1e6]");
    }
    if (n == 0) return 1.0;
    const double t = std::abs(wrap_angle(theta));
    const double c2 = std::cos(t / 2.0) * std::cos(t / 2.0);
    // sum_m (-1)^m P_m(cos t) = sum_m P_m(-cos t)
    const double v = 1.0 - c2 * legendre_unit_sum(-std::cos(t), n);
    return std::min(1.0, std::max(0.0, v));
}

PaleaCurve palea_curve(double theta, long n_max) {
    PaleaCurve curve;
    curve.theta = theta;
    curve.n_max = n_max;
    curve.values.reserve(n_max + 1);
    // Forward Legendre recurrence keeps the whole curve O(n_max).
    const double t = std::abs(wrap_angle(theta));
    const double x = -std::cos(t);
    const double c2 = std::cos(t / 2.0) * std::cos(t / 2.0);
    double pm1 = 1.0;  // P_0
    double pm2 = 0.0;
    double sum = 0.0;
    curve.values.push_back(1.0);
    for (long n = 1; n <= n_max; ++n) {
        sum += pm1;
        const long m = n - 1;
        const double pnext = m == 0 ? x : ((2.0 * m + 1.0) * x * pm1 - m * pm2) / (m + 1.0);
        pm2 = pm1;
        pm1 = pnext;
        curve.values.push_back(std::min(1.0, std::max(0.0, 1.0 - c2 * sum)));
    }
    return curve;
}

double palea_signal_regularized(double theta, long n) {
    const double in = palea_signal(theta, n);
    const double sign = (n % 2 == 0) ? 1.0 : -1.0;
    return 0.5 - sign * (in - 0.5);
}

double palea_bessel_approx(double theta, long n) {
    return 0.5 - 0.5 * std::cyl_bessel_j(0.0, std::abs(static_cast<double>(n) * theta));
}

double palea_sensitivity(double theta, long n) {
    const double x = static_cast<double>(n) * theta;
    return 0.5 * static_cast<double>(n) * std::cyl_bessel_j(1.0, std::abs(x)) *
           (x < 0 ? -1.0 : 1.0);
}

QuadratureResult phase_average_oracle(double theta, long n, long grid_points) {
    if (n < 0) throw std::invalid_argument("phase_average_oracle: n must be >= 0");
    if (grid_points < 1) throw std::invalid_argument("phase_average_oracle: empty grid");
    QuadratureResult res;
    res.exact = grid_points >= 2 * n + 2;
    if (n == 0) {
        res.value = 1.0;
        return res;
    }
    const Matrix2cd rx = rotation_matrix(Axis::X, kPi - theta);
    double acc = 0.0;
    for (long k = 0; k < grid_points; ++k) {
        const double phi = kTwoPi * static_cast<double>(k) / static_cast<double>(grid_points);
        const Matrix2cd cycle = rotation_matrix(Axis::Z, phi) * rx;
        acc += population_after_cycles(cycle, n);
    }
    res.value = acc / static_cast<double>(grid_points);
    return res;
}

}  // namespace calib
