#include "calib/error_budget.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "calib/estimators.hpp"

namespace calib {

namespace {

bool finite_time(double t) { return t > 0.0 && std::isfinite(t); }

double rate(double t) { return finite_time(t) ? 1.0 / t : 0.0; }

}  // namespace

double swap_like_error(double theta) {
    if (!std::isfinite(theta)) throw std::invalid_argument("swap_like_error: non-finite theta");
    const double c = std::cos(theta / 4.0);
    return 0.8 - 0.8 * c * c * c * c;
}

double incoherent_cz_error(double tau, const CoherenceBudget& q1, const CoherenceBudget& q2) {
    if (!(tau > 0.0)) throw std::invalid_argument("incoherent_cz_error: tau must be positive");
    const double g1 = tau * rate(q1.tphi2);
    const double g2 = tau * rate(q2.tphi2);
    return 3.0 / 10.0 * tau * rate(q1.t1) + 3.0 / 8.0 * tau * rate(q1.tphi1) +
           3.0 / 8.0 * g1 * g1 + 1.0 / 2.0 * tau * rate(q2.t1) +
           31.0 / 40.0 * tau * rate(q2.tphi1) + 31.0 / 40.0 * g2 * g2;
}

namespace {

// Local quadratic smoothing (Savitzky-Golay with uniform weights on an
// index window); falls back to smaller symmetric windows near the edges.
std::vector<double> smooth_quadratic(const std::vector<double>& y, int window) {
    const int n = static_cast<int>(y.size());
    if (window <= 1 || n < 3) return y;
    std::vector<double> out(y.size());
    const int half = window / 2;
    for (int i = 0; i < n; ++i) {
        const int h = std::min({half, i, n - 1 - i});
        if (h == 0) {
            out[i] = y[i];
            continue;
        }
        const int m = 2 * h + 1;
        Eigen::MatrixXd a(m, 3);
        Eigen::VectorXd b(m);
        for (int k = -h; k <= h; ++k) {
            a(k + h, 0) = 1.0;
            a(k + h, 1) = k;
            a(k + h, 2) = k * k;
            b(k + h) = y[i + k];
        }
        const Eigen::VectorXd coef = (a.transpose() * a).ldlt().solve(a.transpose() * b);
        out[i] = coef(0);
    }
    return out;
}

}  // namespace

CoherenceBudget CoherenceProfile::at(double x) const {
    if (axis.size() != samples.size() || axis.empty()) {
        throw std::invalid_argument("CoherenceProfile: empty or inconsistent profile");
    }
    if (x < axis.front() - 1e-12 || x > axis.back() + 1e-12) {
        std::ostringstream os;
        os << "CoherenceProfile: value " << x << " outside sampled range [" << axis.front()
           << ", " << axis.back() << "]";
        throw std::invalid_argument(os.str());
    }
    std::vector<double> t1(samples.size()), p1(samples.size()), p2(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        t1[i] = samples[i].t1;
        p1[i] = samples[i].tphi1;
        p2[i] = samples[i].tphi2;
    }
    const auto st1 = smooth_quadratic(t1, smoothing_window);
    const auto sp1 = smooth_quadratic(p1, smoothing_window);
    const auto sp2 = smooth_quadratic(p2, smoothing_window);

    auto interp = [&](const std::vector<double>& v) {
        if (x <= axis.front()) return v.front();
        if (x >= axis.back()) return v.back();
        std::size_t i = 1;
        while (i < axis.size() && axis[i] < x) ++i;
        const double f = (x - axis[i - 1]) / (axis[i] - axis[i - 1]);
        return v[i - 1] * (1.0 - f) + v[i] * f;
    };
    return CoherenceBudget{interp(st1), interp(sp1), interp(sp2)};
}

CoherenceProfile CoherenceProfile::from_csv(const std::string& csv, int smoothing_window) {
    CoherenceProfile p;
    p.smoothing_window = smoothing_window;
    std::istringstream in(csv);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        std::istringstream ls(line);
        std::string tok;
        std::vector<double> vals;
        while (std::getline(ls, tok, ',')) vals.push_back(std::stod(tok));
        if (vals.size() != 4) {
            throw std::invalid_argument("CoherenceProfile: expected 4 columns");
        }
        p.axis.push_back(vals[0]);
        p.samples.push_back({vals[1], vals[2], vals[3]});
    }
    for (std::size_t i = 1; i < p.axis.size(); ++i) {
        if (p.axis[i] <= p.axis[i - 1]) {
            throw std::invalid_argument("CoherenceProfile: axis must be strictly increasing");
        }
    }
    return p;
}

std::string CoherenceProfile::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "axis,t1,tphi1,tphi2\n";
    for (std::size_t i = 0; i < axis.size(); ++i) {
        os << axis[i] << "," << samples[i].t1 << "," << samples[i].tphi1 << ","
           << samples[i].tphi2 << "\n";
    }
    return os.str();
}

CoherenceBudget effective_coherence(const CoherenceProfile& profile,
                                    const std::vector<double>& trajectory, double duration) {
    if (trajectory.size() < 2) throw std::invalid_argument("effective_coherence: need >= 2 samples");
    if (!(duration > 0.0)) throw std::invalid_argument("effective_coherence: duration > 0");
    const std::size_t n = trajectory.size();
    double r1 = 0.0, rp1 = 0.0, rp2sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        CoherenceBudget b;
        try {
            b = profile.at(trajectory[i]);
        } catch (const std::invalid_argument&) {
            std::ostringstream os;
            os << "effective_coherence: trajectory leaves profile range at t = "
               << duration * static_cast<double>(i) / static_cast<double>(n - 1);
            throw std::invalid_argument(os.str());
        }
        const double w = (i == 0 || i + 1 == n) ? 0.5 : 1.0;  // trapezoid
        r1 += w * rate(b.t1);
        rp1 += w * rate(b.tphi1);
        rp2sq += w * rate(b.tphi2) * rate(b.tphi2);
    }
    const double norm = static_cast<double>(n - 1);
    r1 /= norm;
    rp1 /= norm;
    rp2sq /= norm;
    auto inv = [](double r) { return r > 0.0 ? 1.0 / r : std::numeric_limits<double>::infinity(); };
    return CoherenceBudget{inv(r1), inv(rp1), inv(std::sqrt(rp2sq))};
}

double ramsey_model(double t, const CoherenceBudget& budget, double envelope) {
    if (t < 0.0) throw std::invalid_argument("ramsey_model: t must be >= 0");
    const double g2 = t * rate(budget.tphi2);
    return envelope *
           std::exp(-0.5 * t * rate(budget.t1) - t * rate(budget.tphi1) - g2 * g2);
}

RamseyFit fit_ramsey(const std::vector<double>& t, const std::vector<double>& y,
                     double t1_fixed) {
    const Model model = [t1_fixed](double tv, const Eigen::VectorXd& p) {
        const CoherenceBudget b{t1_fixed, p(0), p(1)};
        return ramsey_model(tv, b, p(2));
    };
    FitData data{t, y, {}};
    double tmax = 0.0;
    for (double v : t) tmax = std::max(tmax, v);
    Eigen::VectorXd init(3);
    init << tmax, tmax, y.empty() ? 1.0 : y.front();
    Bounds b;
    b.lower = Eigen::VectorXd(3);
    b.upper = Eigen::VectorXd(3);
    b.lower << tmax * 1e-3, tmax * 1e-3, 0.0;
    b.upper << tmax * 1e5, tmax * 1e5, 2.0;
    const auto fit = levenberg_marquardt(model, data, init, {"tphi1", "tphi2", "amplitude"}, b);
    RamseyFit out;
    out.tphi1 = fit.value("tphi1");
    out.tphi2 = fit.value("tphi2");
    out.tphi1_sigma = fit.sigma("tphi1");
    out.tphi2_sigma = fit.sigma("tphi2");
    out.amplitude = fit.value("amplitude");
    out.converged = fit.converged;
    return out;
}

double total_system_error(const std::vector<double>& eps_sx, const std::vector<double>& eps_ro,
                          double eps_cz) {
    double total = eps_cz;
    for (double v : eps_sx) {
        if (v < 0.0 || v > 1.0) throw std::invalid_argument("total_system_error: eps out of range");
        total += v;
    }
    for (double v : eps_ro) {
        if (v < 0.0 || v > 1.0) throw std::invalid_argument("total_system_error: eps out of range");
        total += v;
    }
    if (eps_cz < 0.0 || eps_cz > 1.0) {
        throw std::invalid_argument("total_system_error: eps_cz out of range");
    }
    return total;
}

std::vector<BudgetEntry> budget_ranking(const std::vector<double>& eps_sx,
                                        const std::vector<double>& eps_ro, double eps_cz) {
    std::vector<BudgetEntry> entries;
    double sx = 0.0, ro = 0.0;
    for (double v : eps_sx) sx += v;
    for (double v : eps_ro) ro += v;
    entries.push_back({"readout", ro});
    entries.push_back({"cz", eps_cz});
    entries.push_back({"single_qubit", sx});
    std::sort(entries.begin(), entries.end(),
              [](const BudgetEntry& a, const BudgetEntry& b) { return a.value > b.value; });
    return entries;
}

}  // namespace calib
