#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "calib/rotations.hpp"

namespace calib {

/// Multi-level product system; dims are listed as (Q1, [TC,] Q2) and basis
/// states are labeled |Q1, (TC,) Q2>.
struct LevelSystem {
    std::vector<int> dims;

    int dim() const;
    bool has_coupler() const { return dims.size() == 3; }
    int index(const std::vector<int>& levels) const;
    std::string label(int idx) const;
    std::vector<int> levels_of(int idx) const;
};

/// Makes a two-qutrit system (no coupler level).
LevelSystem two_transmons();
/// Makes a qutrit-coupler-qutrit system with `coupler_levels` coupler levels.
LevelSystem with_coupler(int coupler_levels = 2);

/// One calibration cycle. Embedded unitaries act in the named two-state
/// subspaces; anything optional defaults to absent.
struct CycleSpec {
    LevelSystem system = two_transmons();
    TwoLevelUnitary gate_11_02;
    std::optional<TwoLevelUnitary> gate_10_01;
    std::optional<TwoLevelUnitary> coupler_leak;  // span{|101>, |011>}
    /// DD layer base phases (phi0 on Q1's 01, phi1 on Q2's 12).
    std::optional<std::pair<double, double>> dd_layer;
    double inter_cycle_delay = 0.0;  // seconds of free evolution per cycle
    /// Dressed mode frequencies (rad/s), one per subsystem, used for free
    /// evolution phases and for phase tracking.
    std::vector<double> frame_frequencies;
    std::vector<double> anharmonicities;  // rad/s, per subsystem
    double cycle_duration = 33e-9;        // tau of one gate+DD cycle
    /// Appendix-D.2 phase tracking: regress the drive phases by tau*omega_1
    /// (Q1) and tau*(omega_2 + alpha_2) (Q2) each cycle. Off lets the DD
    /// phases drift between cycles.
    bool phase_tracking = true;
    /// Interleaved Z compensation angle added to the per-cycle {11,02} phase
    /// (Floquet calibration knob).
    double compensation_z = 0.0;
};

struct NoiseSpec {
    enum class Mode { TerminalFlips, Trajectory };
    std::vector<double> t1;    // per subsystem; empty or <=0 entries = no decay
    std::vector<double> tphi;  // per subsystem
    double readout_assignment_error = 0.0;  // per-qutrit symmetric flip prob
    double state_prep_error = 0.0;          // per-qubit preparation flip prob
    Mode mode = Mode::TerminalFlips;
};

/// Discriminated shot counts on a (sweep value, cycle count) grid.
struct ShotTable {
    std::vector<double> sweep_values;
    std::vector<long> cycles;
    std::vector<std::string> outcome_labels;
    /// counts[sweep][cycle][outcome]
    std::vector<std::vector<std::vector<long>>> counts;
    std::uint64_t seed = 0;
    long shots_per_point = 0;

    std::string to_csv() const;
    std::string to_json() const;
    long count_of(std::size_t sweep, std::size_t cycle, const std::string& label) const;
    /// Assignment-error-corrected outcome frequencies (inverse confusion
    /// matrix applied per qutrit).
    std::vector<double> corrected_frequencies(std::size_t sweep, std::size_t cycle,
                                              double eps) const;
};

/// Repeated application of the imperfect CZ cycle to |11> (no DD layer).
ShotTable run_standard_ea(const CycleSpec& cycle, long n_max, long shots,
                          const NoiseSpec& noise, std::uint64_t seed);

/// PALEA: cycle + DD layer, averaged over `phase_samples` random DD phase
/// draws (the sweep axis of the returned table).
ShotTable run_palea(const CycleSpec& cycle, long n_max, long shots, long phase_samples,
                    const NoiseSpec& noise, std::uint64_t seed);

/// Standard EA with an interleaved Z compensation swept over `compensations`.
ShotTable run_floquet(const CycleSpec& cycle, const std::vector<double>& compensations,
                      long n_max, long shots, const NoiseSpec& noise, std::uint64_t seed);

/// Landau-Zener propagator for the {|101>, |011>} subspace:
/// H(t) = [(omega_c(t) - omega_1) sigma_z + 2 g1c sigma_x] / 2,
/// integrated with one midpoint-rule Magnus step per waveform sample.
/// detuning_waveform holds omega_c(t_k) - omega_1 in rad/s.
TwoLevelUnitary coupler_leak_unitary(double g1c, const std::vector<double>& detuning_waveform,
                                     double dt);

/// Coupler-leakage amplification: CZ cycles with coupler_leak enabled and a
/// swept inter-cycle delay; returns the |01> (and full) outcome map.
ShotTable run_coupler_leak_amplification(const CycleSpec& cycle,
                                         const std::vector<double>& delays, long n_max,
                                         long shots, const NoiseSpec& noise,
                                         std::uint64_t seed);

/// Unwanted-population series extracted from a ShotTable column, using the
/// parity rule (wanted = `even_label` for even n).
struct UpPoint;
std::vector<double> up_values(const ShotTable& table, std::size_t sweep,
                              const std::string& even_label, const std::string& odd_label);

/// Figure-S4-style estimator comparison campaign.
struct EstimatorComparison {
    double mse_palea = 0.0;
    double mse_meadd = 0.0;
    double mse_floquet = 0.0;
    double bias_palea = 0.0;
    double bias_meadd = 0.0;
    double bias_floquet = 0.0;
    long repetitions = 0;
};

EstimatorComparison run_estimator_comparison(double theta_true, long total_shots,
                                             double readout_eps, long repetitions,
                                             std::uint64_t seed);

/// Single-method estimates (used by the campaign and by tests).
double estimate_theta_palea(double theta_true, long total_shots, double eps, class Rng& rng);
double estimate_theta_meadd(double theta_true, long total_shots, double eps, class Rng& rng);
double estimate_theta_floquet(double theta_true, long total_shots, double eps, class Rng& rng);

}  // namespace calib
