#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "calib/estimators.hpp"

namespace calib {

/// Error extracted from iterative interleaved RB at interleave count n.
struct IrbRecord {
    long n = 0;
    double epsilon = 0.0;
    double sigma = 0.0;
};

/// eps_quad(n) = a n^2 + b n + c; the CZ error is the slope at n = 1,
/// eps_CZ = 2a + b.
struct QuadraticErrorModel {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
};

struct EpsilonCz {
    double value = 0.0;
    double sigma = 0.0;
};

EpsilonCz epsilon_cz_from_quadratic(const QuadraticErrorModel& model);

/// 1 - (1 - eps_CZ)^1.5 (1 - eps_sqrtX)^4.65: the two-qubit Clifford error
/// from its average generator content.
double clifford_error_estimate(double eps_cz, double eps_sx);

/// Channel parameters injected per gate in the RB simulations. Depolarizing
/// parameters are the channel mixing probabilities q (average infidelity
/// (d-1)/d * q); leakage rates are per CZ per qubit.
struct RbChannelParams {
    double depol_1q = 0.0;           // per single-qubit Clifford layer, per qubit
    double depol_2q = 0.0;           // per CZ
    double leak_per_cz_q1 = 0.0;
    double leak_per_cz_q2 = 0.0;
    double seepage = 0.0;            // per CZ, per leaked qubit
    double coherent_residual = 0.0;  // rad of |11>-|02> rotation per CZ
};

struct LeakageCurve {
    long n = 0;        // interleave count
    int qubit = 0;     // 0 or 1
    std::vector<long> lengths;
    std::vector<double> population;  // mean |2> population at sequence end
    std::vector<double> sigma;
};

struct IterativeIrbResult {
    std::vector<IrbRecord> records;      // one per interleave count (n >= 1)
    double reference_rate = 0.0;         // plain RB decay per Clifford
    double reference_rate_sigma = 0.0;
    std::vector<long> n_list;
    std::vector<LeakageCurve> leakage;   // per (n, qubit)
    /// survival[k][j] = mean ground-state return at n_list[k], lengths[j]
    std::vector<long> lengths;
    std::vector<std::vector<double>> survival;
};

/// Simulates two-qubit Clifford sequences with n interleaved CZ gates under
/// the channel model (uniform over the 11520-element group via the canonical
/// C1xC1 x {I, CZ-class, iSWAP-class, SWAP} decomposition), with three-level
/// leakage tracking. n = 0 entries serve as the reference decay.
IterativeIrbResult simulate_iterative_irb(const RbChannelParams& channels,
                                          const std::vector<long>& n_list,
                                          const std::vector<long>& sequence_lengths,
                                          long sequences_per_length, long shots,
                                          std::uint64_t seed);

/// Weighted quadratic fit of the extracted errors.
QuadraticErrorModel fit_iterative_irb(const std::vector<IrbRecord>& records);

/// Leakage per CZ per qubit: LRB rate-model fit per interleave count, then a
/// linear fit across n.
struct LeakagePerGate {
    double value = 0.0;  // L per CZ for this qubit
    double sigma = 0.0;
    double clifford_offset = 0.0;  // leakage per Clifford layer
    bool converged = true;
};

LeakagePerGate leakage_per_gate(const std::vector<LeakageCurve>& curves, int qubit);

/// Single-qubit purity RB synthesis (three-level, for the sqrt(X) budget).
struct PurityRbData {
    std::vector<long> lengths;
    std::vector<double> z_signal;      // <sigma_Z> analogue (ground return, rescaled)
    std::vector<double> sqrt_purity;   // sqrt of shifted purity
    std::vector<double> leak_pop;
    std::vector<double> z_sigma, p_sigma, leak_sigma;
};

struct OneQubitChannel {
    double depol = 0.0;              // per-Clifford depolarizing q
    double coherent_residual = 0.0;  // rad of extra X rotation per Clifford
    double leak = 0.0;               // per Clifford
    double seep = 0.0;
};

PurityRbData simulate_purity_rb(const OneQubitChannel& channel,
                                const std::vector<long>& lengths, long sequences_per_length,
                                long shots, std::uint64_t seed);

/// Purity decomposition (single qubit, d = 2): total from the sigma-Z decay,
/// incoherent from the sqrt-purity decay, coherent as the floored remainder;
/// all converted per sqrt(X) by the 1.875 generators-per-Clifford convention.
struct PurityDecomposition {
    double eps_total = 0.0;
    double eps_incoherent = 0.0;
    double eps_coherent = 0.0;
    double eps_leakage = 0.0;
    double total_sigma = 0.0;
    double incoherent_sigma = 0.0;
    bool coherent_floored = false;
    bool flagged_inconsistent = false;  // negative coherent beyond 2 sigma
};

inline constexpr double kSqrtXPerClifford1q = 1.875;
inline constexpr double kSqrtXPerClifford2q = 4.65;
inline constexpr double kCzPerClifford2q = 1.5;

PurityDecomposition decompose_purity_rb(const FitResult& z_fit, const FitResult& purity_fit,
                                        double leakage_per_clifford, double leakage_sigma);

/// The 24 single-qubit Clifford unitaries (2x2, global-phase canonical).
const std::vector<Eigen::Matrix2cd>& single_qubit_cliffords();

/// A uniformly sampled two-qubit Clifford as a 4x4 unitary.
Eigen::Matrix4cd sample_two_qubit_clifford(class Rng& rng);

/// Enumerates all 11520 two-qubit Cliffords via the coset decomposition
/// (test support; phase-canonical fingerprints are distinct).
std::size_t count_two_qubit_cliffords();

}  // namespace calib
