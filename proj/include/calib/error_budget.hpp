#pragma once

#include <string>
#include <vector>

namespace calib {

/// Coherence triple: energy relaxation, exponential pure dephasing, Gaussian
/// pure dephasing. Non-positive or infinite entries mean "no decay".
struct CoherenceBudget {
    double t1 = 0.0;
    double tphi1 = 0.0;
    double tphi2 = 0.0;
};

/// Average-gate-infidelity contribution of a coherent two-level exchange of
/// angle theta in a d = 4 space: 4/5 - 4/5 cos^4(theta/4). Used both for the
/// SWAP angle and the coupler-leakage angle.
double swap_like_error(double theta);

/// Six-term incoherent CZ error from the effective coherence times,
///   3/10 t/T1 + 3/8 t/Tp1 + 3/8 (t/Tp2)^2   (Q1)
/// + 1/2  t/T1 + 31/40 t/Tp1 + 31/40 (t/Tp2)^2 (Q2),
/// with the Gaussian channels entering quadratically.
double incoherent_cz_error(double tau, const CoherenceBudget& q1, const CoherenceBudget& q2);

/// Coherence-versus-bias profile with local-quadratic (Savitzky-Golay style)
/// smoothing; consumed by effective_coherence.
struct CoherenceProfile {
    std::vector<double> axis;  // monotone sample axis (e.g. coupler frequency)
    std::vector<CoherenceBudget> samples;
    int smoothing_window = 5;  // odd window length; 1 disables smoothing

    /// Smoothed, linearly interpolated budget at an axis value. Throws when
    /// outside the sampled range.
    CoherenceBudget at(double x) const;

    static CoherenceProfile from_csv(const std::string& csv, int smoothing_window = 5);
    std::string to_csv() const;
};

/// Effective coherence along a trajectory f(t), sampled uniformly over the
/// pulse duration: 1/T_eff = mean(1/T(f)) for exponential channels and
/// (1/T_eff)^2 = mean(1/T(f)^2) for the Gaussian channel (trapezoid rule).
CoherenceBudget effective_coherence(const CoherenceProfile& profile,
                                    const std::vector<double>& trajectory, double duration);

/// Ramsey decay model a(t) exp(-t/2T1 - t/Tphi1 - (t/Tphi2)^2).
double ramsey_model(double t, const CoherenceBudget& budget, double envelope);

/// Fits (Tphi1, Tphi2, amplitude) to a Ramsey trace with T1 held fixed.
struct RamseyFit {
    double tphi1 = 0.0;
    double tphi2 = 0.0;
    double tphi1_sigma = 0.0;
    double tphi2_sigma = 0.0;
    double amplitude = 0.0;
    bool converged = false;
};

RamseyFit fit_ramsey(const std::vector<double>& t, const std::vector<double>& y, double t1_fixed);

/// Total system-level error: sum over qubits of (sqrt-X + readout errors)
/// plus the CZ error.
double total_system_error(const std::vector<double>& eps_sx, const std::vector<double>& eps_ro,
                          double eps_cz);

/// Named contributions sorted descending, for budget reports.
struct BudgetEntry {
    std::string name;
    double value = 0.0;
};
std::vector<BudgetEntry> budget_ranking(const std::vector<double>& eps_sx,
                                        const std::vector<double>& eps_ro, double eps_cz);

}  // namespace calib
