#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>

#include "calib/rng.hpp"
#include "calib/rotations.hpp"

using namespace calib;
using cd = std::complex<double>;

namespace {

Matrix2cd haar_su2(Rng& rng) {
    // Ginibre + QR with phase fixing gives the Haar measure on U(2)
    Matrix2cd g;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) g(i, j) = cd(rng.normal(), rng.normal());
    }
    Eigen::HouseholderQR<Matrix2cd> qr(g);
    Matrix2cd q = qr.householderQ();
    Matrix2cd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < 2; ++i) q.col(i) *= r(i, i) / std::abs(r(i, i));
    return q;
}

Matrix2cd matrix_power(const Matrix2cd& u, long n) {
    Matrix2cd out = Matrix2cd::Identity();
    for (long k = 0; k < n; ++k) out = u * out;
    return out;
}

}  // namespace

TEST_CASE("matrix_from_zxz basic values") {
    CHECK((matrix_from_zxz(0, 0, 0) - Matrix2cd::Identity()).norm() < 1e-15);

    // Rx(pi) = -i sigma_x
    Matrix2cd expect;
    expect << cd(0, 0), cd(0, -1), cd(0, -1), cd(0, 0);
    CHECK((matrix_from_zxz(0, kPi, 0) - expect).norm() < 1e-15);

    // |M01|^2 = sin^2(theta/2): the per-gate population transfer
    const Matrix2cd m = matrix_from_zxz(0.2, 0.383, -0.1);
    CHECK(std::norm(m(0, 1)) == doctest::Approx(std::pow(std::sin(0.383 / 2.0), 2)).epsilon(1e-12));
    CHECK(std::norm(m(0, 1)) == doctest::Approx(0.0364).epsilon(2e-2));

    CHECK(std::abs(m.determinant() - cd(1.0, 0.0)) < 1e-12);
    CHECK_THROWS_AS(matrix_from_zxz(std::nan(""), 0, 0), std::invalid_argument);
}

TEST_CASE("decompose_zxz canonical values") {
    const auto id = decompose_zxz(Matrix2cd::Identity());
    CHECK(id.alpha == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(id.theta == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(id.beta == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::abs(id.global_phase) < 1e-12);

    Matrix2cd mix;
    mix << cd(0, 0), cd(0, -1), cd(0, -1), cd(0, 0);
    const auto x = decompose_zxz(mix);
    CHECK(x.theta == doctest::Approx(kPi).epsilon(1e-12));
    CHECK(x.beta == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::abs(wrap_angle(x.alpha)) < 1e-12);
    CHECK(std::abs(x.global_phase) < 1e-12);
}

TEST_CASE("decompose_zxz round-trips 1000 Haar samples") {
    Rng rng(42);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const Matrix2cd u = haar_su2(rng);
        const auto d = decompose_zxz(u);
        CHECK(d.theta >= 0.0);
        CHECK(d.theta <= kPi);
        CHECK(d.alpha > -kPi - 1e-12);
        CHECK(d.alpha <= kPi + 1e-12);
        const Matrix2cd rec = d.matrix();
        worst = std::max(worst, (rec - u).norm());
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("decompose_zxz rejects non-unitary input") {
    Matrix2cd bad;
    bad << 1.0, 0.0, 0.0, 1.5;
    CHECK_THROWS_WITH_AS(decompose_zxz(bad), doctest::Contains("not unitary"),
                         std::invalid_argument);
}

TEST_CASE("absorb_z_rotations identity holds as a matrix product") {
    SUBCASE("core phase cancels when alpha = -beta") {
        const auto a = absorb_z_rotations(0.3, 0.5, -0.3, 5);
        CHECK(a.core_phi == doctest::Approx(0.0).epsilon(1e-15));
    }
    SUBCASE("matrix-power oracle") {
        const double alpha = 0.2, theta = 0.1, beta = 0.15;
        const long n = 3;
        const auto a = absorb_z_rotations(alpha, theta, beta, n);
        const Matrix2cd lhs = matrix_power(matrix_from_zxz(alpha, theta, beta), n);
        const Matrix2cd core =
            rotation_matrix(Axis::Z, a.core_phi) * rotation_matrix(Axis::Y, a.core_theta);
        const Matrix2cd rhs = rotation_matrix(Axis::Z, a.leading_z) * matrix_power(core, n) *
                              rotation_matrix(Axis::Z, a.trailing_z);
        CHECK((lhs - rhs).norm() < 1e-12);
    }
    SUBCASE("double pi flip returns the population") {
        const auto a = absorb_z_rotations(0.0, kPi, 0.0, 2);
        const Matrix2cd core =
            rotation_matrix(Axis::Z, a.core_phi) * rotation_matrix(Axis::Y, a.core_theta);
        CHECK(population_after_cycles(core, 2) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("compose_palea_cycle") {
    SUBCASE("identity gate: D alone is a pi rotation") {
        const auto cyc = compose_palea_cycle(TwoLevelUnitary{}, 0.0, 0.0);
        CHECK(cyc.theta == doctest::Approx(kPi).epsilon(1e-12));
    }
    SUBCASE("delta-phi relation against the matrix oracle") {
        TwoLevelUnitary gate{0.0, 0.383, 0.0, 0.0};
        const double phi0 = 0.6, phi1 = 0.25;  // phi0 - phi1 = 0.35... scaled below
        const auto cyc = compose_palea_cycle(gate, phi0, phi1);
        // absorbed core phase must be 2 phi0 - 2 phi1 - alpha + beta
        const double dphi = wrap_angle(cyc.alpha + cyc.beta);
        CHECK(dphi == doctest::Approx(wrap_angle(2 * phi0 - 2 * phi1)).epsilon(1e-12));
        // direct product oracle
        const Matrix2cd dd = matrix_from_zxz(phi0 - phi1, kPi, phi1 - phi0);
        const Matrix2cd prod = dd * gate.matrix();
        CHECK((cyc.matrix() - prod).norm() < 1e-12);
        CHECK(cyc.theta == doctest::Approx(kPi - 0.383).epsilon(1e-12));
    }
    SUBCASE("gate with phi0 - phi1 = 0.7 gives delta-phi 1.4") {
        TwoLevelUnitary gate{0.0, 0.383, 0.0, 0.0};
        const auto cyc = compose_palea_cycle(gate, 0.7, 0.0);
        CHECK(wrap_angle(cyc.alpha + cyc.beta) == doctest::Approx(1.4).epsilon(1e-12));
    }
    SUBCASE("a pi gate cancels the DD flip") {
        TwoLevelUnitary gate{0.1, kPi, 0.0, 0.0};
        const auto cyc = compose_palea_cycle(gate, 0.0, 0.0);
        CHECK(cyc.theta == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("unitarity preserved under composition") {
    Rng rng(7);
    for (int k = 0; k < 50; ++k) {
        const Matrix2cd u = haar_su2(rng);
        const Matrix2cd v = haar_su2(rng);
        const Matrix2cd w = u * v;
        CHECK((w.adjoint() * w - Matrix2cd::Identity()).norm() < 1e-12);
        const auto d = decompose_zxz(w);
        const Matrix2cd r = d.matrix();
        CHECK((r.adjoint() * r - Matrix2cd::Identity()).norm() < 1e-12);
    }
}

TEST_CASE("populations from ZXZ parameters match matrix powers up to n = 1e4") {
    Rng rng(99);
    for (int k = 0; k < 10; ++k) {
        const double theta = rng.uniform(0.0, kPi);
        const double phi = rng.uniform(-kPi, kPi);
        const long n = k == 0 ? 10000 : static_cast<long>(rng.uniform(1.0, 500.0));
        // closed form via eigenangle mu
        const double cmu = std::cos(phi / 2.0) * std::cos(theta / 2.0);
        const double mu = std::acos(std::min(1.0, std::max(-1.0, cmu)));
        const double s2 = std::sin(mu) * std::sin(mu);
        const Matrix2cd cyc =
            rotation_matrix(Axis::Z, phi) * rotation_matrix(Axis::Y, theta);
        const double direct = population_after_cycles(cyc, n);
        if (s2 > 1e-12) {
            const double c2 = std::cos(theta / 2.0) * std::cos(theta / 2.0);
            const double closed =
                (c2 - std::cos(2.0 * mu) + (1.0 - c2) * std::cos(2.0 * n * mu)) / (2.0 * s2);
            CHECK(direct == doctest::Approx(closed).epsilon(1e-9));
        }
    }
}

TEST_CASE("leading and trailing Z rotations do not change populations") {
    Rng rng(123);
    for (int k = 0; k < 20; ++k) {
        const Matrix2cd u = haar_su2(rng);
        const Matrix2cd z1 = rotation_matrix(Axis::Z, rng.uniform(-kPi, kPi));
        const Matrix2cd z2 = rotation_matrix(Axis::Z, rng.uniform(-kPi, kPi));
        const Matrix2cd v = z1 * u * z2;
        for (long n : {1L, 5L, 17L}) {
            const Matrix2cd un = matrix_power(u, 1);
            (void)un;
            const double p_u = std::norm(matrix_power(u, n)(0, 0));
            const double p_zu = std::norm((z1 * matrix_power(u, n) * z2)(0, 0));
            CHECK(p_u == doctest::Approx(p_zu).epsilon(1e-12));
            (void)v;
        }
    }
}
