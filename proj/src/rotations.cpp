#include "calib/rotations.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace calib {

namespace {

using cd = std::complex<double>;
constexpr cd kI{0.0, 1.0};

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) {
        throw std::invalid_argument(std::string("non-finite angle: ") + name);
    }
}

}  // namespace

double wrap_angle(double a) {
    a = std::fmod(a, kTwoPi);
    if (a <= -kPi) a += kTwoPi;
    if (a > kPi) a -= kTwoPi;
    return a;
}

Matrix2cd rotation_matrix(Axis axis, double phi) {
    const double c = std::cos(phi / 2.0);
    const double s = std::sin(phi / 2.0);
    Matrix2cd m;
    switch (axis) {
        case Axis::X:
            m << cd(c, 0), cd(0, -s), cd(0, -s), cd(c, 0);
            break;
        case Axis::Y:
            m << cd(c, 0), cd(-s, 0), cd(s, 0), cd(c, 0);
            break;
        case Axis::Z:
            m << std::exp(-kI * (phi / 2.0)), cd(0, 0), cd(0, 0), std::exp(kI * (phi / 2.0));
            break;
    }
    return m;
}

Matrix2cd matrix_from_zxz(double alpha, double theta, double beta) {
    require_finite(alpha, "alpha");
    require_finite(theta, "theta");
    require_finite(beta, "beta");
    return rotation_matrix(Axis::Z, alpha) * rotation_matrix(Axis::X, theta) *
           rotation_matrix(Axis::Z, beta);
}

Matrix2cd TwoLevelUnitary::matrix() const {
    return std::exp(kI * global_phase) * matrix_from_zxz(alpha, theta, beta);
}

TwoLevelUnitary decompose_zxz(const Matrix2cd& u) {
    const double dev = (u.adjoint() * u - Matrix2cd::Identity()).norm();
    if (!(dev < 1e-9)) {
        std::ostringstream msg;
        msg << "decompose_zxz: input not unitary, |U'U - I| = " << dev;
        throw std::invalid_argument(msg.str());
    }

    // Extract the SU(2) part: U = e^{i g} V with det V = 1.
    const cd det = u.determinant();
    const double g = 0.5 * std::arg(det);
    const Matrix2cd v = std::exp(-kI * g) * u;

    // V = Rz(a) Rx(t) Rz(b):
    //   V00 = e^{-i(a+b)/2} cos(t/2),  V10 = -i e^{i(a-b)/2} sin(t/2).
    const double theta = 2.0 * std::atan2(std::abs(v(1, 0)), std::abs(v(0, 0)));

    double alpha = 0.0;
    double beta = 0.0;
    // The alpha/beta split is degenerate only when an off/on-diagonal entry
    // vanishes identically; convention beta = 0 there.
    const double mag_tol = 1e-14;
    if (std::abs(v(1, 0)) < mag_tol) {
        alpha = wrap_angle(-2.0 * std::arg(v(0, 0)));
    } else if (std::abs(v(0, 0)) < mag_tol) {
        // V = Rz(a) Rx(pi) Rz(b); arg V10 = (a-b)/2 - pi/2, so a-b = 2 arg V10 + pi.
        alpha = wrap_angle(2.0 * std::arg(v(1, 0)) + kPi);
    } else {
        const double arg00 = std::arg(v(0, 0));
        const double arg10 = std::arg(v(1, 0));
        // arg V00 = -(a+b)/2,  arg V10 = (a-b)/2 - pi/2
        alpha = wrap_angle(-arg00 + arg10 + kPi / 2.0);
        beta = wrap_angle(-arg00 - arg10 - kPi / 2.0);
    }

    TwoLevelUnitary out{alpha, theta, beta, g};
    // Re-fit the global phase so the reconstruction is exact even after the
    // canonicalization branches above.
    const Matrix2cd recon = matrix_from_zxz(out.alpha, out.theta, out.beta);
    int r = std::abs(recon(0, 0)) > std::abs(recon(1, 0)) ? 0 : 1;
    out.global_phase = std::arg(u(r, 0) / recon(r, 0));
    return out;
}

AbsorbedCycle absorb_z_rotations(double alpha, double theta, double beta, long n) {
    require_finite(alpha, "alpha");
    require_finite(theta, "theta");
    require_finite(beta, "beta");
    if (n < 0) throw std::invalid_argument("absorb_z_rotations: n must be >= 0");
    return AbsorbedCycle{-beta - kPi / 2.0, alpha + beta, theta, beta + kPi / 2.0};
}

TwoLevelUnitary compose_palea_cycle(const TwoLevelUnitary& gate, double phi0, double phi1) {
    require_finite(phi0, "phi0");
    require_finite(phi1, "phi1");
    const Matrix2cd dd = matrix_from_zxz(phi0 - phi1, kPi, phi1 - phi0);
    const Matrix2cd cycle = dd * gate.matrix();
    return decompose_zxz(cycle);
}

double population_after_cycles(const Matrix2cd& u, long n) {
    Eigen::Vector2cd psi(1.0, 0.0);
    for (long k = 0; k < n; ++k) psi = u * psi;
    return std::norm(psi(0));
}

}  // namespace calib
