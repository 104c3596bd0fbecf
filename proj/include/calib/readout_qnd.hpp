#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace calib {

class Rng;

/// Hidden-Markov readout model in the wanted/unwanted/leak-state basis.
/// Column-stochastic transition matrices; k leakage states.
struct MarkovReadoutModel {
    double p_g = 0.0;  // g -> e switching
    double p_e = 0.0;  // e -> g switching
    std::vector<double> leak_g;           // L_{g,i}
    std::vector<double> leak_e;           // L_{e,i}
    std::vector<double> seep_g;           // S_{g,i}
    std::vector<double> seep_e;           // S_{e,i}
    Eigen::MatrixXd inter_leak;           // leak i -> leak j rates (k x k, off-diagonal)
    double e0 = 0.0;                      // P(0|e)
    double e1 = 0.0;                      // P(1|g)
    std::vector<double> w;                // P(0|l_i)
    double h = 0.0;                       // preparation error
    double lambda = 0.0;                  // single-X depolarizing error
    int leak_states() const { return static_cast<int>(leak_g.size()); }

    double p() const { return 0.5 * (p_g + p_e); }
    double total_leak() const;
    /// Single-leak convenience constructor with symmetric rates.
    static MarkovReadoutModel single_leak(double p, double L, double S, double e0, double e1,
                                          double h);
};

struct TransitionMatrices {
    Eigen::MatrixXd t0;  // no flip
    Eigen::MatrixXd t1;  // flip
    Eigen::MatrixXd t;   // (t0 + t1)/2
};

/// Assembles the (k+2)x(k+2) column-stochastic transition matrices. Throws
/// std::invalid_argument when any diagonal entry would go negative.
TransitionMatrices build_transition_matrices(const MarkovReadoutModel& model);

/// <C_global>_n = (1/2 - e)(1 - 2h)(1 - 2p - L)^n + 1/2.
double global_correlation_model(long n, double p, double L, double e, double h);

/// <C_local>_n = (L (A - 1/2)(1 - L - S)^n + A S + L/2) / (L + S);
/// the L = S = 0 limit is constant A.
double local_correlation_model(long n, double L, double S, double A);

/// Forward evaluation b^T T^n v0 of the correlation expectations.
double global_correlation_forward(const MarkovReadoutModel& model, long n);
double local_correlation_forward(const MarkovReadoutModel& model, long n, double A);

/// One simulated RILB sequence: flips i_n and assigned outcomes r_n.
struct RilbSequence {
    std::vector<int> flips;
    std::vector<int> outcomes;
};

enum class FlipMode { Bernoulli, None };

std::vector<RilbSequence> simulate_rilb(const MarkovReadoutModel& model, long rounds,
                                        long sequences, std::uint64_t seed,
                                        FlipMode flip_mode = FlipMode::Bernoulli);

struct CorrelationSeries {
    std::vector<long> n;
    std::vector<double> global;
    std::vector<double> local;
    std::vector<double> global_sigma;
    std::vector<double> local_sigma;
    long sequence_count = 0;
    std::string to_csv() const;
};

CorrelationSeries compute_correlations(const std::vector<RilbSequence>& sequences);

/// QNDness extraction: global fit for the 1-2p-L rate, local fit (single vs
/// double exponential by BIC) for L and S. A double-exponential local decay
/// yields only bounds on Q. The lambda correction widens the Q uncertainty by
/// lambda/2.
struct QndnessResult {
    double q = 0.0;
    double q_sigma = 0.0;
    double q_lower = 0.0;  // bound 1 - 2p - L
    double q_upper = 0.0;  // bound 1 - p - L/2
    bool point_estimate = true;
    double p = 0.0;
    double L = 0.0;
    double L_sigma = 0.0;
    double S = 0.0;
    std::string chosen_model;  // "single" or "double"
    bool flagged = false;
    std::string flag_reason;
};

QndnessResult fit_qndness(const CorrelationSeries& series, double lambda);

/// Dispersive single-shot readout cloud model. States are latent readout
/// manifold labels; in-measurement decay mixes the integrated signal
/// linearly between state means.
struct IqCloudModel {
    std::vector<std::complex<double>> means;      // per latent state
    std::vector<double> sigmas;                   // isotropic cloud widths
    double decay_prob_excited = 0.0;              // jump prob during window (prep e)
    double excitation_prob_ground = 0.0;          // mixing jump prob (prep g)
    double threshold = 0.0;                       // in-phase discriminator
};

struct IqShots {
    std::vector<std::complex<double>> samples;
    std::vector<int> prepared;  // 0 = g, 1 = e
};

IqShots simulate_iq_clouds(const IqCloudModel& model, const std::vector<int>& preparations,
                           long shots_per_prep, std::uint64_t seed);

struct ReadoutErrorDecomposition {
    double decay = 0.0;
    double mixing = 0.0;
    double overlap = 0.0;
    double total = 0.0;
    double decay_sigma = 0.0;
    double mixing_sigma = 0.0;
    double overlap_sigma = 0.0;
    double total_sigma = 0.0;
    bool converged = true;
};

/// Histogram decomposition of the in-phase signal into two Gaussians plus
/// uniform decay/mixing bridges; components integrated beyond the threshold
/// yield the named errors. Bootstrap errors over `bootstrap` resamples.
ReadoutErrorDecomposition decompose_readout_error(const IqShots& shots, double threshold,
                                                  long bootstrap = 200,
                                                  std::uint64_t seed = 12345);

}  // namespace calib
