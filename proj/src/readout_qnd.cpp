#include "calib/readout_qnd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "calib/estimators.hpp"
#include "calib/rng.hpp"

namespace calib {

double MarkovReadoutModel::total_leak() const {
    double lg = 0.0, le = 0.0;
    for (double v : leak_g) lg += v;
    for (double v : leak_e) le += v;
    return 0.5 * (lg + le);
}

MarkovReadoutModel MarkovReadoutModel::single_leak(double p, double L, double S, double e0,
                                                   double e1, double h) {
    MarkovReadoutModel m;
    m.p_g = p;
    m.p_e = p;
    m.leak_g = {L};
    m.leak_e = {L};
    m.seep_g = {S / 2.0};
    m.seep_e = {S / 2.0};
    m.inter_leak = Eigen::MatrixXd::Zero(1, 1);
    m.e0 = e0;
    m.e1 = e1;
    m.w = {0.5};
    m.h = h;
    return m;
}

TransitionMatrices build_transition_matrices(const MarkovReadoutModel& model) {
    const int k = model.leak_states();
    if (static_cast<int>(model.leak_e.size()) != k ||
        static_cast<int>(model.seep_g.size()) != k ||
        static_cast<int>(model.seep_e.size()) != k) {
        throw std::invalid_argument("build_transition_matrices: rate vector sizes differ");
    }
    const int d = k + 2;
    Eigen::MatrixXd t0 = Eigen::MatrixXd::Zero(d, d);

    double lg = 0.0, le = 0.0;
    for (double v : model.leak_g) lg += v;
    for (double v : model.leak_e) le += v;
    t0(0, 0) = 1.0 - model.p_g - lg;
    t0(1, 1) = 1.0 - model.p_e - le;
    t0(1, 0) = model.p_g;
    t0(0, 1) = model.p_e;
    for (int i = 0; i < k; ++i) {
        t0(i + 2, 0) = model.leak_g[i];
        t0(i + 2, 1) = model.leak_e[i];
        t0(0, i + 2) = model.seep_g[i];
        t0(1, i + 2) = model.seep_e[i];
        double row_out = model.seep_g[i] + model.seep_e[i];
        for (int j = 0; j < k; ++j) {
            if (j != i) {
                const double r = model.inter_leak.size() ? model.inter_leak(i, j) : 0.0;
                t0(j + 2, i + 2) = r;
                row_out += r;
            }
        }
        t0(i + 2, i + 2) = 1.0 - row_out;
    }
    for (int j = 0; j < d; ++j) {
        if (t0(j, j) < -1e-12) {
            throw std::invalid_argument("build_transition_matrices: rates exceed 1 in column " +
                                        std::to_string(j));
        }
    }

    // A flip permutes the first two rows and columns.
    Eigen::MatrixXd perm = Eigen::MatrixXd::Identity(d, d);
    perm(0, 0) = perm(1, 1) = 0.0;
    perm(0, 1) = perm(1, 0) = 1.0;
    TransitionMatrices out;
    out.t0 = t0;
    out.t1 = perm * t0 * perm;
    out.t = 0.5 * (out.t0 + out.t1);
    return out;
}

double global_correlation_model(long n, double p, double L, double e, double h) {
    return (0.5 - e) * (1.0 - 2.0 * h) * std::pow(1.0 - 2.0 * p - L, n) + 0.5;
}

double local_correlation_model(long n, double L, double S, double A) {
    if (L + S <= 0.0) return A;
    return (L * (A - 0.5) * std::pow(1.0 - L - S, n) + A * S + 0.5 * L) / (L + S);
}

double global_correlation_forward(const MarkovReadoutModel& model, long n) {
    const auto tm = build_transition_matrices(model);
    const int d = model.leak_states() + 2;
    Eigen::VectorXd v0 = Eigen::VectorXd::Zero(d);
    v0(0) = 1.0 - model.h;
    v0(1) = model.h;
    Eigen::RowVectorXd bg(d);
    const double e = 0.5 * (model.e0 + model.e1);
    bg(0) = 1.0 - e;
    bg(1) = e;
    for (int i = 2; i < d; ++i) bg(i) = 0.5;
    Eigen::VectorXd v = v0;
    for (long i = 0; i < n; ++i) v = tm.t * v;
    return bg * v;
}

double local_correlation_forward(const MarkovReadoutModel& model, long n, double A) {
    const auto tm = build_transition_matrices(model);
    const int d = model.leak_states() + 2;
    Eigen::VectorXd v0 = Eigen::VectorXd::Zero(d);
    v0(0) = 1.0 - model.h;
    v0(1) = model.h;
    Eigen::RowVectorXd bl(d);
    bl(0) = A;
    bl(1) = A;
    for (int i = 2; i < d; ++i) bl(i) = 0.5;
    Eigen::VectorXd v = v0;
    for (long i = 0; i < n; ++i) v = tm.t * v;
    return bl * v;
}

std::vector<RilbSequence> simulate_rilb(const MarkovReadoutModel& model, long rounds,
                                        long sequences, std::uint64_t seed, FlipMode flip_mode) {
    if (rounds < 2) throw std::invalid_argument("simulate_rilb: rounds must be >= 2");
    if (sequences < 1) throw std::invalid_argument("simulate_rilb: sequences must be >= 1");
    const int k = model.leak_states();

    Rng master(seed);
    std::vector<RilbSequence> out(sequences);
    for (long s = 0; s < sequences; ++s) {
        Rng rng = master.fork(s);
        RilbSequence seq;
        seq.flips.reserve(rounds);
        seq.outcomes.reserve(rounds);
        // physical state: 0 = g, 1 = e, 2.. = leak states
        int state = rng.bernoulli(model.h) ? 1 : 0;
        for (long r = 0; r < rounds; ++r) {
            const int flip = flip_mode == FlipMode::Bernoulli ? (rng.bernoulli(0.5) ? 1 : 0) : 0;
            seq.flips.push_back(flip);
            if (flip && state <= 1) {
                state = 1 - state;
                // imperfect X: depolarizing lambda acts as a classical flip
                if (model.lambda > 0.0 && rng.bernoulli(model.lambda)) state = 1 - state;
            }
            // readout-induced transition (the measurement itself)
            const double u = rng.uniform();
            double acc = 0.0;
            int next = state;
            if (state == 0) {
                acc += model.p_g;
                if (u < acc) {
                    next = 1;
                } else {
                    for (int i = 0; i < k; ++i) {
                        acc += model.leak_g[i];
                        if (u < acc) {
                            next = i + 2;
                            break;
                        }
                    }
                }
            } else if (state == 1) {
                acc += model.p_e;
                if (u < acc) {
                    next = 0;
                } else {
                    for (int i = 0; i < k; ++i) {
                        acc += model.leak_e[i];
                        if (u < acc) {
                            next = i + 2;
                            break;
                        }
                    }
                }
            } else {
                const int li = state - 2;
                acc += model.seep_g[li];
                if (u < acc) {
                    next = 0;
                } else {
                    acc += model.seep_e[li];
                    if (u < acc) {
                        next = 1;
                    } else if (model.inter_leak.size()) {
                        for (int j = 0; j < k; ++j) {
                            if (j == li) continue;
                            acc += model.inter_leak(li, j);
                            if (u < acc) {
                                next = j + 2;
                                break;
                            }
                        }
                    }
                }
            }
            state = next;
            // assignment
            int bit;
            if (state == 0) {
                bit = rng.bernoulli(model.e1) ? 1 : 0;
            } else if (state == 1) {
                bit = rng.bernoulli(model.e0) ? 0 : 1;
            } else {
                const double w = model.w.empty() ? 0.5 : model.w[state - 2];
                bit = rng.bernoulli(w) ? 0 : 1;
            }
            seq.outcomes.push_back(bit);
        }
        out[s] = std::move(seq);
    }
    return out;
}

CorrelationSeries compute_correlations(const std::vector<RilbSequence>& sequences) {
    if (sequences.empty()) throw std::invalid_argument("compute_correlations: no sequences");
    const std::size_t rounds = sequences[0].outcomes.size();
    for (const auto& s : sequences) {
        if (s.outcomes.size() != rounds || s.flips.size() != rounds) {
            throw std::invalid_argument("compute_correlations: sequence length mismatch");
        }
    }
    CorrelationSeries out;
    out.sequence_count = static_cast<long>(sequences.size());
    const double m = static_cast<double>(sequences.size());
    for (std::size_t n = 0; n < rounds; ++n) {
        double g = 0.0, l = 0.0;
        for (const auto& s : sequences) {
            int h = 0;
            for (std::size_t i = 0; i <= n; ++i) h ^= s.flips[i];
            g += 1 - (s.outcomes[n] ^ h);
            if (n >= 1) {
                const int o = s.outcomes[n] ^ s.outcomes[n - 1];
                l += 1 - (o ^ s.flips[n]);
            }
        }
        out.n.push_back(static_cast<long>(n));
        const double gm = g / m;
        out.global.push_back(gm);
        out.global_sigma.push_back(std::sqrt(std::max(gm * (1.0 - gm), 0.25 / m) / m));
        if (n >= 1) {
            const double lm = l / m;
            out.local.push_back(lm);
            out.local_sigma.push_back(std::sqrt(std::max(lm * (1.0 - lm), 0.25 / m) / m));
        } else {
            out.local.push_back(1.0);
            out.local_sigma.push_back(0.0);
        }
    }
    return out;
}

std::string CorrelationSeries::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "n,global,global_sigma,local,local_sigma\n";
    for (std::size_t i = 0; i < n.size(); ++i) {
        os << n[i] << "," << global[i] << "," << global_sigma[i] << "," << local[i] << ","
           << local_sigma[i] << "\n";
    }
    return os.str();
}

QndnessResult fit_qndness(const CorrelationSeries& series, double lambda) {
    if (series.n.size() < 8) throw std::invalid_argument("fit_qndness: need >= 8 rounds");
    QndnessResult res;

    std::vector<double> ns, g, l, wg, wl;
    for (std::size_t i = 0; i < series.n.size(); ++i) {
        ns.push_back(static_cast<double>(series.n[i]));
        g.push_back(series.global[i]);
        const double sg = std::max(series.global_sigma[i], 1e-6);
        wg.push_back(1.0 / (sg * sg));
        if (series.n[i] >= 1) {
            l.push_back(series.local[i]);
            const double sl = std::max(series.local_sigma[i], 1e-6);
            wl.push_back(1.0 / (sl * sl));
        }
    }
    std::vector<double> ns_l(ns.begin() + 1, ns.end());

    // global: single exponential decay toward the 1/2 offset
    auto gfit = fit_exponential(ns, g, ExponentialModel::Single, wg);
    const double rate_g = gfit.value("rate");          // 1 - 2p - L
    const double rate_g_sigma = gfit.sigma("rate");

    // local: single vs double exponential chosen by BIC
    auto l_single = fit_exponential(ns_l, l, ExponentialModel::Single, wl);
    FitResult l_double;
    bool have_double = true;
    try {
        l_double = fit_exponential(ns_l, l, ExponentialModel::Double, wl);
    } catch (const std::exception&) {
        have_double = false;
    }
    std::size_t chosen = 0;
    if (have_double && l_double.converged) {
        chosen = select_by_bic({l_single, l_double}, static_cast<long>(ns_l.size()));
    }
    res.chosen_model = chosen == 0 ? "single" : "double";

    if (chosen == 0) {
        // single-exponential local: rate = 1 - L - S, amplitude = L(A-1/2)/(L+S),
        // offset = (A S + L/2)/(L + S). Solve for L, S, A.
        const double r = l_single.value("rate");
        const double amp = l_single.value("amplitude");
        const double off = l_single.value("offset");
        const double lps = 1.0 - r;                     // L + S
        // off + amp = A (at n = 0 extrapolation), and
        // L = 2 (off + amp ... ) -- derive: A = off + amp*(L+S)/L ... solve directly:
        // amp = L (A - 1/2) / (L + S); off = (A S + L/2) / (L + S)
        // => off - 1/2 = (A - 1/2) S / (L + S)   [using S+L cancellation]
        // => amp / (off - 1/2) = L / S  when off != 1/2
        double L = 0.0, S = lps, A = off;
        const double denom = off - 0.5;
        if (std::abs(denom) > 1e-12 && lps > 0.0) {
            const double ratio = amp / denom;  // L / S
            S = lps / (1.0 + ratio);
            L = lps - S;
            A = 0.5 + amp * (lps) / std::max(L, 1e-300);
            if (L < 0.0) {
                L = 0.0;
                S = lps;
                A = off;
            }
        } else if (lps > 0.0 && std::abs(amp) < 1e-9) {
            // flat local curve: negligible leakage
            L = 0.0;
            S = lps;
            A = off;
        }
        res.L = L;
        res.S = S;
        // sigma via the dominant amplitude uncertainty (L ~ amp-driven)
        const double amp_sigma = l_single.sigma("amplitude");
        const double rate_sigma = l_single.sigma("rate");
        res.L_sigma = std::abs(denom) > 1e-12
                          ? std::hypot(amp_sigma * S / std::max(std::abs(denom), 1e-12),
                                       rate_sigma * (L / std::max(lps, 1e-12)))
                          : rate_sigma;
        res.point_estimate = true;
        const double p = 0.5 * (1.0 - rate_g - res.L);
        res.p = p;
        res.q = 1.0 - p - res.L;
        res.q_sigma = std::hypot(0.5 * rate_g_sigma, 0.5 * res.L_sigma) + 0.5 * lambda;
        res.q_lower = rate_g;                  // 1 - 2p - L
        res.q_upper = 0.5 * (1.0 + rate_g);    // 1 - p - L/2
        if (res.L > (1.0 - rate_g) + 3.0 * (res.L_sigma + rate_g_sigma)) {
            res.flagged = true;
            res.flag_reason = "local leakage exceeds global decay rate";
        }
    } else {
        // non-identifiable: report bounds only
        res.point_estimate = false;
        res.q_lower = rate_g;
        res.q_upper = 0.5 * (1.0 + rate_g);
        res.q = 0.5 * (res.q_lower + res.q_upper);
        res.q_sigma = 0.5 * (res.q_upper - res.q_lower) + 0.5 * lambda;
    }
    return res;
}

IqShots simulate_iq_clouds(const IqCloudModel& model, const std::vector<int>& preparations,
                           long shots_per_prep, std::uint64_t seed) {
    if (shots_per_prep < 1) throw std::invalid_argument("simulate_iq_clouds: shots >= 1");
    if (model.means.size() < 2) throw std::invalid_argument("simulate_iq_clouds: need 2 states");
    IqShots out;
    out.samples.reserve(preparations.size() * shots_per_prep);
    out.prepared.reserve(preparations.size() * shots_per_prep);
    Rng rng(seed);
    for (int prep : preparations) {
        for (long s = 0; s < shots_per_prep; ++s) {
            std::complex<double> mean;
            double sigma;
            if (prep == 0) {
                if (model.excitation_prob_ground > 0.0 &&
                    rng.bernoulli(model.excitation_prob_ground)) {
                    // measurement-induced excitation at a uniform time mixes
                    // the integrated signal between the state means
                    const double f = rng.uniform();
                    mean = model.means[0] * f + model.means[1] * (1.0 - f);
                } else {
                    mean = model.means[0];
                }
                sigma = model.sigmas[0];
            } else {
                if (model.decay_prob_excited > 0.0 && rng.bernoulli(model.decay_prob_excited)) {
                    const double f = rng.uniform();
                    mean = model.means[1] * f + model.means[0] * (1.0 - f);
                } else {
                    mean = model.means[1];
                }
                sigma = model.sigmas[1];
            }
            out.samples.push_back({rng.normal(mean.real(), sigma), rng.normal(mean.imag(), sigma)});
            out.prepared.push_back(prep);
        }
    }
    return out;
}

namespace {

struct HistogramFit {
    double mu0 = 0.0, mu1 = 0.0, s0 = 1.0, s1 = 1.0;
    double w_mix = 0.0;   // uniform-bridge weight on the g side
    double w_dec = 0.0;   // uniform-bridge weight on the e side
    bool converged = true;
};

double gauss_cdf(double x, double mu, double s) {
    return 0.5 * std::erfc(-(x - mu) / (s * std::sqrt(2.0)));
}

// Per-preparation fit: Gaussian + uniform bridge between the two means.
HistogramFit fit_histograms(const std::vector<double>& in_g, const std::vector<double>& in_e) {
    HistogramFit h;
    auto moments = [](const std::vector<double>& v, double& mu, double& s) {
        double m = 0.0;
        for (double x : v) m += x;
        mu = m / v.size();
        double var = 0.0;
        for (double x : v) var += (x - mu) * (x - mu);
        s = std::sqrt(var / v.size());
    };
    // robust core moments: use the median-centered core to avoid bridge bias
    auto core_moments = [&](std::vector<double> v, double& mu, double& s) {
        std::sort(v.begin(), v.end());
        const std::size_t lo = v.size() / 20, hi = v.size() - v.size() / 20;
        std::vector<double> core(v.begin() + lo, v.begin() + hi);
        moments(core, mu, s);
    };
    core_moments(in_g, h.mu0, h.s0);
    core_moments(in_e, h.mu1, h.s1);

    // bridge weight: excess density between the clouds beyond the Gaussians
    auto bridge_weight = [&](const std::vector<double>& v, double mu_own, double s_own) {
        // count shots in the middle half of the bridge, far from both cores
        const double a = std::min(h.mu0, h.mu1), b = std::max(h.mu0, h.mu1);
        const double span = b - a;
        const double lo = a + 0.25 * span, hi = b - 0.25 * span;
        long cnt = 0;
        for (double x : v) {
            if (x > lo && x < hi) ++cnt;
        }
        double gauss_expect = static_cast<double>(v.size()) *
                              (gauss_cdf(hi, mu_own, s_own) - gauss_cdf(lo, mu_own, s_own));
        const double excess = std::max(0.0, static_cast<double>(cnt) - gauss_expect);
        // the window covers half of the uniform bridge
        return 2.0 * excess / static_cast<double>(v.size());
    };
    h.w_mix = bridge_weight(in_g, h.mu0, h.s0);
    h.w_dec = bridge_weight(in_e, h.mu1, h.s1);
    return h;
}

ReadoutErrorDecomposition decompose_once(const std::vector<double>& in_g,
                                         const std::vector<double>& in_e, double threshold) {
    const HistogramFit h = fit_histograms(in_g, in_e);
    ReadoutErrorDecomposition d;
    const bool g_below = h.mu0 < h.mu1;

    // overlap: Gaussian tails across the threshold, averaged over preparations
    const double tail_g = g_below ? 1.0 - gauss_cdf(threshold, h.mu0, h.s0)
                                  : gauss_cdf(threshold, h.mu0, h.s0);
    const double tail_e = g_below ? gauss_cdf(threshold, h.mu1, h.s1)
                                  : 1.0 - gauss_cdf(threshold, h.mu1, h.s1);
    d.overlap = 0.5 * ((1.0 - h.w_mix) * tail_g + (1.0 - h.w_dec) * tail_e);

    // bridge fraction beyond the threshold (uniform in the mean interpolation)
    const double a = std::min(h.mu0, h.mu1), b = std::max(h.mu0, h.mu1);
    const double t = std::min(std::max(threshold, a), b);
    const double frac_to_e_side = (b - t) / std::max(b - a, 1e-300);
    const double frac_to_g_side = (t - a) / std::max(b - a, 1e-300);
    d.mixing = 0.5 * h.w_mix * (g_below ? frac_to_e_side : frac_to_g_side);
    d.decay = 0.5 * h.w_dec * (g_below ? frac_to_g_side : frac_to_e_side);
    d.total = d.decay + d.mixing + d.overlap;
    d.converged = std::isfinite(d.total);
    return d;
}

}  // namespace

ReadoutErrorDecomposition decompose_readout_error(const IqShots& shots, double threshold,
                                                  long bootstrap, std::uint64_t seed) {
    std::vector<double> in_g, in_e;
    for (std::size_t i = 0; i < shots.samples.size(); ++i) {
        (shots.prepared[i] == 0 ? in_g : in_e).push_back(shots.samples[i].real());
    }
    if (in_g.size() < 10000 || in_e.size() < 10000) {
        throw std::invalid_argument("decompose_readout_error: need >= 1e4 shots per preparation");
    }
    ReadoutErrorDecomposition d = decompose_once(in_g, in_e, threshold);

    // bootstrap over shots
    Rng rng(seed);
    std::vector<double> bd, bm, bo, bt;
    for (long b = 0; b < bootstrap; ++b) {
        std::vector<double> rg(in_g.size()), re(in_e.size());
        for (auto& v : rg) v = in_g[rng.uniform_index(in_g.size())];
        for (auto& v : re) v = in_e[rng.uniform_index(in_e.size())];
        const auto r = decompose_once(rg, re, threshold);
        bd.push_back(r.decay);
        bm.push_back(r.mixing);
        bo.push_back(r.overlap);
        bt.push_back(r.total);
    }
    auto sd = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m += x;
        m /= v.size();
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return std::sqrt(s / std::max<std::size_t>(v.size() - 1, 1));
    };
    d.decay_sigma = sd(bd);
    d.mixing_sigma = sd(bm);
    d.overlap_sigma = sd(bo);
    d.total_sigma = sd(bt);
    return d;
}

}  // namespace calib
