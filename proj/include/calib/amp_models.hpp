#pragma once

#include <vector>

namespace calib {

/// Parameters of a standard error-amplification cycle: theta is the X
/// component (over-rotation), phi = alpha + beta the net per-cycle Z rotation.
/// phi is interpreted modulo 2 pi.
struct StandardEaParams {
    double theta = 0.0;
    double phi = 0.0;
};

/// Tabulated phase-averaged signal I_n(pi - theta) for n = 0..n_max.
struct PaleaCurve {
    double theta = 0.0;
    long n_max = 0;
    std::vector<double> values;  // values[n], values[0] == 1
};

/// Half oscillation angle of the cycle Rz(phi) Ry(theta):
/// cos(mu) = cos(phi/2) cos(theta/2), with phi and theta folded to their
/// canonical ranges so that mu lies in [0, pi/2] and theta <= 2 mu <= pi.
double mu_angle(double theta, double phi);

/// |<0| (Rz(phi) Ry(theta))^n |0>|^2 in closed form,
///   [cos^2(t/2) - cos(2 mu) + sin^2(t/2) cos(2 n mu)] / (2 sin^2 mu),
/// with the removable singularity at theta = phi = 0 taken by limit (-> 1).
double standard_ea_signal(double theta, double phi, long n);

/// Peak-to-peak oscillation amplitude 2B = 1 / (1 + (sin(phi/2)/tan(theta/2))^2).
/// A Lorentzian dip in sin(phi/2) centered at phi = 0; limit conventions:
/// theta = 0 gives 1 at phi = 0 and 0 otherwise.
double standard_ea_amplitude(double theta, double phi);

enum class FloquetMode { Delay, ZRotation };

/// Per-cycle compensation phase added to phi: tau * delta_omega for delay
/// mode (value in seconds, delta_omega in rad/s), or the supplied angle for
/// Z-rotation mode. Wrapped to (-pi, pi].
double floquet_effective_phase(FloquetMode mode, double value, double delta_omega);

/// Phase-averaged PALEA signal, Legendre closed form evaluated by Clenshaw
/// recursion in O(n):
///   I_n(pi - theta) = 1 - cos^2(theta/2) sum_{m=0}^{n-1} (-1)^m P_m(cos theta).
double palea_signal(double theta, long n);

/// PALEA signal for n = 0..n_max as a curve (O(n_max^2) total).
PaleaCurve palea_curve(double theta, long n_max);

/// Regularized (parity-unfolded) signal: the unwanted population
///   UP_n = 1/2 - (-1)^n [I_n(pi - theta) - 1/2],
/// which is 0 at theta = 0 for every n and has the large-n limit
/// 1/2 - J0(n theta)/2.
double palea_signal_regularized(double theta, long n);

/// Bessel limiting form 1/2 - J0(n theta)/2 of the regularized signal.
double palea_bessel_approx(double theta, long n);

/// Approximate sensitivity d UP_n / d theta = (n/2) J1(n theta) of the
/// regularized signal.
double palea_sensitivity(double theta, long n);

/// Brute-force phase average of |<0| (Rz(phi) Rx(pi-theta))^n |0>|^2 over an
/// equidistant phi grid (trapezoid rule on the full period). Exact whenever
/// grid_points >= 2n + 2 (the integrand is a trigonometric polynomial of
/// degree < n, so this threshold is conservative); below the threshold the
/// result carries exact = false.
struct QuadratureResult {
    double value = 0.0;
    bool exact = true;
};

QuadratureResult phase_average_oracle(double theta, long n, long grid_points);

/// Sum of the first n Legendre polynomials at x, sum_{m=0}^{n-1} P_m(x),
/// by Clenshaw backward recursion.
double legendre_unit_sum(double x, long n);

}  // namespace calib
