#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <complex>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace calib {

using SparseMatrixcd = Eigen::SparseMatrix<std::complex<double>>;
using MatrixXcd = Eigen::MatrixXcd;
using VectorXcd = Eigen::VectorXcd;

/// Two three-level transmons coupled through a three-level tunable coupler.
/// Mode order is (Q1, TC, Q2); the Hilbert space is 27-dimensional.
struct DuffingSystem {
    std::array<double, 3> omega{};    // rad/s at idle
    std::array<double, 3> anharm{};   // rad/s, negative
    double g_1c = 0.0, g_2c = 0.0, g_12 = 0.0;  // rad/s
    std::array<double, 3> t1{};    // seconds; 0 = no decay
    std::array<double, 3> tphi{};  // seconds; 0 = no dephasing

    static constexpr int kModes = 3;
    static constexpr int kLevels = 3;
    static constexpr int kDim = 27;

    /// Device-like defaults: qubits at 4.799 / 4.910 GHz, coupler idling at
    /// 3.672 GHz, anharmonicities -191/-216/-191 MHz, couplings per the
    /// symmetric g_qc convention.
    static DuffingSystem device_defaults(double g_qc_over_2pi = 66e6, double t1_qubit = 100e-6);
};

int duffing_index(int q1, int tc, int q2);

/// Pulse envelope shapes.
enum class EnvelopeShape { Cosine, CosineDrag, FlattopCosine, Slepian };

struct EnvelopeParams {
    double amplitude = 0.0;
    double duration = 0.0;
    double dt = 0.05e-9;
    double drag_coefficient = 0.0;  // quadrature = coeff * dI/dt / |anharm|
    double drag_anharm = -2.0 * 3.14159265358979323846 * 191e6;
    double edge_time = 1e-9;        // flattop-cosine rising/falling edge
    double time_bandwidth = 4.0;    // Slepian NW
};

struct SampledEnvelope {
    std::vector<double> in_phase;
    std::vector<double> quadrature;  // empty unless DRAG
    double dt = 0.0;
};

SampledEnvelope make_envelope(EnvelopeShape shape, const EnvelopeParams& params);

/// Zeroth-order discrete prolate spheroidal sequence of length n with
/// half-bandwidth w = NW/n, normalized to unit peak, plus its spectral
/// concentration eigenvalue.
struct DpssWindow {
    std::vector<double> window;
    double concentration = 0.0;
};
DpssWindow dpss_window(int n, double time_bandwidth);

/// Collapse operator with rate (the operator is applied as D[sqrt(rate) c]).
struct CollapseOp {
    SparseMatrixcd op;
    double rate = 0.0;
};

/// Lindblad evolution of a 27x27 density matrix under a time-dependent
/// Hamiltonian, fixed-step RK4 with step-doubling error control (target
/// relative error 1e-8). Preserves trace to 1e-8 and Hermiticity to 1e-9.
MatrixXcd lindblad_evolve(const std::function<MatrixXcd(double)>& hamiltonian,
                          const std::vector<CollapseOp>& collapse, const MatrixXcd& rho0,
                          double duration, double dt, double tol = 1e-8);

/// g_XY = g_12 - (g_1c g_2c / 2)(1/D_1c + 1/D_2c - 1/S_1c - 1/S_2c).
double g_xy(const DuffingSystem& system);

/// ZZ interaction from labeled eigenfrequencies, zeta = (w11 - w01) - (w10 - w00).
/// The coupler frequency may be overridden to probe the ZZ landscape.
struct ZetaResult {
    double zeta = 0.0;
    bool ambiguous = false;  // max eigenstate overlap < 0.5
};
ZetaResult zeta(const DuffingSystem& system, std::optional<double> omega_c = std::nullopt);

/// Solves g_12 such that zeta = 0 at the given coupler idle frequency.
double solve_g12_for_zero_zeta(DuffingSystem system, double omega_c_idle);

struct GateReport {
    double average_error = 0.0;
    std::map<std::string, double> leakage;  // "02", "20", "coupler"
    double duration = 0.0;
};

struct SqrtXPulse {
    double duration = 26e-9;
    double drag_coefficient = 1.0;
    double dt = 0.05e-9;
};

/// Simultaneous sqrt(X) on both qubits; per-qubit average gate error via the
/// reduced process over the computational subspace, with the optimal virtual
/// Z fitted out. Drive amplitudes and frequencies are calibrated internally
/// on the closed system.
std::array<GateReport, 2> simulate_sqrt_x(const DuffingSystem& system, const SqrtXPulse& pulse,
                                          bool simultaneous = true);

struct CzPulse {
    double duration = 33e-9;          // total gate window
    double coupler_duration = 22e-9;  // Slepian width
    double qubit_duration = 27e-9;    // flattop-cosine width
    double edge_time = 1e-9;
    double dt = 0.05e-9;
    EnvelopeShape coupler_shape = EnvelopeShape::Slepian;
    /// starting guesses for the calibration loop (rad/s excursions)
    double coupler_delta_init = 2.0 * 3.14159265358979323846 * 0.8e9;
    double qubit_delta_init = -2.0 * 3.14159265358979323846 * 80e6;
};

struct CalibratedCz {
    double coupler_delta = 0.0;
    double qubit_delta = 0.0;
    double conditional_phase = 0.0;  // after calibration, within 1e-3 of pi
    double residual_leak_amp = 0.0;  // |<02|U|11>| at the calibrated point
    bool converged = false;
};

/// Closed-system calibration of the CZ pulse excursions: zeroes the
/// |11>-|02> exchange at the gate end and sets the conditional phase to pi.
CalibratedCz calibrate_cz(const DuffingSystem& system, const CzPulse& pulse);

GateReport simulate_cz(const DuffingSystem& system, const CzPulse& pulse,
                       const CalibratedCz* calibration = nullptr);

struct SweepPoint {
    double g_qc = 0.0;
    double t1 = 0.0;
    double sqrt_x_error = 0.0;  // averaged over both qubits and detunings
    double cz_error = 0.0;
    double clifford_error = 0.0;
    double sqrt_x_duration = 0.0;
    double cz_duration = 0.0;
    bool failed = false;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    /// argmin g per T1, with a +-5% error band on the Clifford error
    std::map<double, double> optimal_g;
    std::map<double, std::pair<double, double>> optimal_band;
};

/// Fig.-1(b/c) style trade-off sweep: for each (g_qc, T1) the gate durations
/// are coarsely optimized, the Clifford error is 4.65 eps_sx + 1.5 eps_cz,
/// and g_12 is re-solved at each g so the zeta = 0 coupler idle stays fixed.
/// The coupler T1 and Tphi are held at a quarter of the qubit values.
SweepResult sweep_coupling(const std::vector<double>& g_qc_grid,
                           const std::vector<double>& t1_grid,
                           const std::vector<double>& detuning_list, int workers = 0);

}  // namespace calib
