#pragma once

#include <Eigen/Dense>
#include <complex>

namespace calib {

using Matrix2cd = Eigen::Matrix2cd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Wraps an angle to the canonical interval (-pi, pi].
double wrap_angle(double a);

/// ZXZ-decomposed SU(2) element: Rz(alpha) Rx(theta) Rz(beta), times a
/// tracked global phase. Canonical ranges: theta in [0, pi], alpha and beta
/// in (-pi, pi]; when sin(theta) = 0 the alpha/beta split is degenerate and
/// the convention beta = 0 applies.
struct TwoLevelUnitary {
    double alpha = 0.0;
    double theta = 0.0;
    double beta = 0.0;
    double global_phase = 0.0;

    Matrix2cd matrix() const;
};

enum class Axis { X, Y, Z };

struct RotationAxis {
    Axis axis = Axis::Z;
    double angle = 0.0;
};

/// exp(-i phi sigma_j / 2) for j in {X, Y, Z}.
Matrix2cd rotation_matrix(Axis axis, double phi);

/// Rz(alpha) Rx(theta) Rz(beta). Throws std::invalid_argument on non-finite
/// input. Determinant is 1 by construction.
Matrix2cd matrix_from_zxz(double alpha, double theta, double beta);

/// Canonical-range ZXZ decomposition with global phase. The input must be
/// unitary within 1e-9; otherwise throws std::invalid_argument carrying the
/// deviation norm. Round-trips with matrix_from_zxz to 1e-12.
TwoLevelUnitary decompose_zxz(const Matrix2cd& u);

/// Parameters of the absorption identity
///   (Rz(a) Rx(t) Rz(b))^n = Rz(-b - pi/2) (Rz(a+b) Ry(t))^n Rz(b + pi/2).
/// The leading and trailing Z rotations do not affect Z-basis populations;
/// the core per-cycle Z angle is phi = a + b.
struct AbsorbedCycle {
    double leading_z = 0.0;
    double core_phi = 0.0;
    double core_theta = 0.0;
    double trailing_z = 0.0;
};

AbsorbedCycle absorb_z_rotations(double alpha, double theta, double beta, long n);

/// Combines a dynamical-decoupling layer D = Rz(p0-p1) Rx(pi) Rz(p1-p0) with
/// a gate Rz(alpha) Rx(theta) Rz(beta) into the single cycle unitary
///   Rz(2 p0 - 2 p1 - alpha - pi) Rx(pi - theta) Rz(beta + pi),
/// returned in canonical form. The absorbed core phase obeys
/// core_phi = 2 p0 - 2 p1 - alpha + beta.
TwoLevelUnitary compose_palea_cycle(const TwoLevelUnitary& gate, double phi0, double phi1);

/// |<0| U^n |0>|^2 evaluated by repeated matrix multiplication.
double population_after_cycles(const Matrix2cd& u, long n);

}  // namespace calib
