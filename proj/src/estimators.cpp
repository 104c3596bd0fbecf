#include "calib/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "calib/amp_models.hpp"
#include "calib/rotations.hpp"

namespace calib {

namespace {

Eigen::VectorXd clamp_to_bounds(Eigen::VectorXd p, const std::optional<Bounds>& bounds) {
    if (!bounds) return p;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        p(i) = std::min(bounds->upper(i), std::max(bounds->lower(i), p(i)));
    }
    return p;
}

double cost_of(const Model& model, const FitData& data, const Eigen::VectorXd& p) {
    double c = 0.0;
    for (std::size_t i = 0; i < data.x.size(); ++i) {
        const double r = data.y[i] - model(data.x[i], p);
        const double w = data.weights.empty() ? 1.0 : data.weights[i];
        c += w * r * r;
    }
    return c;
}

}  // namespace

std::string FitResult::to_json() const {
    std::ostringstream os;
    os.precision(17);
    os << "{\"parameters\":{";
    bool first = true;
    for (const auto& name : parameter_order) {
        if (!first) os << ",";
        first = false;
        os << "\"" << name << "\":" << parameters.at(name);
    }
    os << "},\"standard_errors\":{";
    first = true;
    for (const auto& name : parameter_order) {
        if (!first) os << ",";
        first = false;
        os << "\"" << name << "\":" << standard_errors.at(name);
    }
    os << "},\"covariance\":[";
    for (Eigen::Index i = 0; i < covariance.rows(); ++i) {
        if (i) os << ",";
        os << "[";
        for (Eigen::Index j = 0; j < covariance.cols(); ++j) {
            if (j) os << ",";
            os << covariance(i, j);
        }
        os << "]";
    }
    os << "],\"residual_norm\":" << residual_norm << ",\"converged\":"
       << (converged ? "true" : "false") << ",\"iterations\":" << iterations << "}";
    return os.str();
}

FitResult levenberg_marquardt(const Model& model, const FitData& data,
                              const Eigen::VectorXd& init,
                              const std::vector<std::string>& names,
                              const std::optional<Bounds>& bounds) {
    const std::size_t m = data.x.size();
    const Eigen::Index k = init.size();
    if (static_cast<Eigen::Index>(names.size()) != k) {
        throw std::invalid_argument("levenberg_marquardt: names/init size mismatch");
    }
    if (m < static_cast<std::size_t>(k)) {
        throw std::invalid_argument("levenberg_marquardt: fewer points than parameters");
    }
    if (!init.allFinite()) {
        throw std::invalid_argument("levenberg_marquardt: non-finite initial parameters");
    }
    if (data.y.size() != m || (!data.weights.empty() && data.weights.size() != m)) {
        throw std::invalid_argument("levenberg_marquardt: data size mismatch");
    }

    Eigen::VectorXd p = clamp_to_bounds(init, bounds);
    double cost = cost_of(model, data, p);
    double lambda = 1e-3;

    FitResult out;
    out.parameter_order = names;

    Eigen::MatrixXd jac(m, k);
    Eigen::VectorXd resid(m);
    Eigen::VectorXd wvec = Eigen::VectorXd::Ones(m);
    if (!data.weights.empty()) {
        for (std::size_t i = 0; i < m; ++i) wvec(i) = data.weights[i];
    }

    int iter = 0;
    bool converged = false;
    bool singular = false;
    for (; iter < 200; ++iter) {
        for (std::size_t i = 0; i < m; ++i) {
            resid(i) = data.y[i] - model(data.x[i], p);
        }
        for (Eigen::Index j = 0; j < k; ++j) {
            const double step = 1e-6 * std::max(1.0, std::abs(p(j)));
            Eigen::VectorXd pp = p, pm = p;
            pp(j) += step;
            pm(j) -= step;
            for (std::size_t i = 0; i < m; ++i) {
                jac(i, j) = (model(data.x[i], pp) - model(data.x[i], pm)) / (2.0 * step);
            }
        }

        const Eigen::MatrixXd jtw = jac.transpose() * wvec.asDiagonal();
        const Eigen::MatrixXd jtj = jtw * jac;
        const Eigen::VectorXd g = jtw * resid;

        bool accepted = false;
        for (int attempt = 0; attempt < 30; ++attempt) {
            Eigen::MatrixXd a = jtj;
            a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
            Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
            if (ldlt.info() != Eigen::Success) {
                lambda *= 10.0;
                continue;
            }
            const Eigen::VectorXd delta = ldlt.solve(g);
            if (!delta.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            const Eigen::VectorXd cand = clamp_to_bounds(p + delta, bounds);
            const double cand_cost = cost_of(model, data, cand);
            if (cand_cost <= cost) {
                const double rel = (cost - cand_cost) / std::max(cost, 1e-300);
                p = cand;
                cost = cand_cost;
                lambda = std::max(lambda * 0.3, 1e-12);
                accepted = true;
                if (rel < 1e-10) converged = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!accepted) {
            // no downhill step found: either converged at a minimum or stuck
            converged = cost < std::numeric_limits<double>::infinity();
            if (lambda > 1e12 && cost > 0 && jtj.norm() < 1e-300) singular = true;
            break;
        }
        if (converged) break;
    }

    out.converged = converged && !singular;
    out.iterations = iter + 1;
    out.residual_norm = std::sqrt(cost);

    // Covariance from the final Jacobian, scaled by the reduced chi-square
    // when the fit is unweighted (or weighted with relative weights).
    for (std::size_t i = 0; i < m; ++i) resid(i) = data.y[i] - model(data.x[i], p);
    for (Eigen::Index j = 0; j < k; ++j) {
        const double step = 1e-6 * std::max(1.0, std::abs(p(j)));
        Eigen::VectorXd pp = p, pm = p;
        pp(j) += step;
        pm(j) -= step;
        for (std::size_t i = 0; i < m; ++i) {
            jac(i, j) = (model(data.x[i], pp) - model(data.x[i], pm)) / (2.0 * step);
        }
    }
    const Eigen::MatrixXd jtj = jac.transpose() * wvec.asDiagonal() * jac;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(k, k);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
    if (lu.isInvertible()) {
        cov = lu.inverse();
        const double dof = static_cast<double>(m) - static_cast<double>(k);
        if (dof > 0) {
            const double chi2 = cost;
            cov *= std::max(chi2 / dof, std::numeric_limits<double>::min());
        }
        // symmetrize against numerical drift
        cov = 0.5 * (cov + cov.transpose()).eval();
    } else {
        out.converged = false;
        out.warnings.push_back("singular normal equations");
    }

    out.covariance = cov;
    for (Eigen::Index j = 0; j < k; ++j) {
        out.parameters[names[j]] = p(j);
        out.standard_errors[names[j]] = std::sqrt(std::max(0.0, cov(j, j)));
    }
    return out;
}

UnwantedPopulation unwanted_population(long counts_11, long counts_02, long n) {
    if (counts_11 < 0 || counts_02 < 0) {
        throw std::invalid_argument("unwanted_population: negative counts");
    }
    UnwantedPopulation up;
    up.n = n;
    up.in_subspace_shots = counts_11 + counts_02;
    if (up.in_subspace_shots == 0) {
        up.defined = false;
        return up;
    }
    const long wanted = (n % 2 == 0) ? counts_11 : counts_02;
    up.value = 1.0 - static_cast<double>(wanted) / static_cast<double>(up.in_subspace_shots);
    return up;
}

namespace {

// Coarse grid init for theta from the UP series; the regularized signal is
// monotone-ish in n*theta up to the first Bessel lobe, so scan candidates.
double init_palea_theta(const std::vector<UpPoint>& series) {
    long n_max = 1;
    for (const auto& p : series) n_max = std::max(n_max, p.n);
    double best_theta = 0.05;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= 120; ++i) {
        const double theta = kPi * i / 120.0 * 0.5;
        double cost = 0.0;
        for (const auto& pt : series) {
            const double r = pt.value - palea_signal_regularized(theta, pt.n);
            cost += r * r;
        }
        if (cost < best_cost) {
            best_cost = cost;
            best_theta = theta;
        }
    }
    return best_theta;
}

std::vector<double> binomial_weights(const std::vector<UpPoint>& series) {
    std::vector<double> w;
    w.reserve(series.size());
    for (const auto& pt : series) {
        const double floor2 = 1e-8;  // guards zero-sigma (noiseless) points
        const double s2 = std::max(pt.sigma * pt.sigma, floor2 * floor2);
        w.push_back(1.0 / s2);
    }
    // normalize so the reduced-chi2 covariance scaling stays meaningful
    double mean = 0.0;
    for (double v : w) mean += v;
    mean /= static_cast<double>(w.size());
    for (double& v : w) v /= mean;
    return w;
}

}  // namespace

FitResult fit_palea_theta(const std::vector<UpPoint>& series) {
    if (series.size() < 4) {
        throw std::invalid_argument("fit_palea_theta: need at least 4 points");
    }
    FitData data;
    for (const auto& pt : series) {
        data.x.push_back(static_cast<double>(pt.n));
        data.y.push_back(pt.value);
    }
    data.weights = binomial_weights(series);

    const Model model = [](double x, const Eigen::VectorXd& p) {
        return p(2) + p(1) * palea_signal_regularized(p(0), std::lround(x));
    };
    Eigen::VectorXd init(3);
    init << init_palea_theta(series), 1.0, 0.0;
    Bounds b;
    b.lower = Eigen::VectorXd(3);
    b.upper = Eigen::VectorXd(3);
    b.lower << 0.0, 0.0, -0.5;
    b.upper << kPi, 2.0, 0.5;
    auto fit = levenberg_marquardt(model, data, init, {"theta", "amplitude", "offset"}, b);
    fit.parameters["theta"] = std::abs(fit.parameters["theta"]);
    return fit;
}

Palea2dResult fit_palea_2d(const UpMap& map, int poly_degree) {
    if (poly_degree < 1 || poly_degree > 5) {
        throw std::invalid_argument("fit_palea_2d: poly_degree must be in [1, 5]");
    }
    const std::size_t na = map.amplitudes.size();
    const std::size_t nn = map.cycles.size();
    if (na == 0 || nn == 0) throw std::invalid_argument("fit_palea_2d: empty map");

    // Flatten (a, n) onto a single index passed through x.
    FitData data;
    std::vector<std::pair<double, long>> points;
    for (std::size_t i = 0; i < na; ++i) {
        for (std::size_t j = 0; j < nn; ++j) {
            points.emplace_back(map.amplitudes[i], map.cycles[j]);
            data.x.push_back(static_cast<double>(points.size() - 1));
            data.y.push_back(map.values[i][j]);
            const double s = map.sigmas.empty() ? 0.0 : map.sigmas[i][j];
            const double floor2 = 1e-8;
            data.weights.push_back(1.0 / std::max(s * s, floor2 * floor2));
        }
    }
    double wmean = 0.0;
    for (double v : data.weights) wmean += v;
    wmean /= static_cast<double>(data.weights.size());
    for (double& v : data.weights) v /= wmean;

    const int k = poly_degree + 1;
    const Model model = [&points, k](double x, const Eigen::VectorXd& p) {
        const auto& [a, n] = points[static_cast<std::size_t>(std::lround(x))];
        double theta = 0.0;
        double apow = 1.0;
        for (int c = 0; c < k; ++c) {
            theta += p(c) * apow;
            apow *= a;
        }
        return p(k + 1) + p(k) * palea_signal_regularized(theta, n);
    };

    // Initialize the polynomial from per-column 1-D fits with signs resolved
    // by continuity (theta magnitude is what a single column determines).
    std::vector<double> theta_abs(na, 0.0);
    std::size_t min_col = 0;
    double min_avg = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < na; ++i) {
        std::vector<UpPoint> col;
        double avg = 0.0;
        for (std::size_t j = 0; j < nn; ++j) {
            col.push_back({map.cycles[j], map.values[i][j],
                           map.sigmas.empty() ? 0.0 : map.sigmas[i][j]});
            avg += map.values[i][j];
        }
        avg /= static_cast<double>(nn);
        if (avg < min_avg) {
            min_avg = avg;
            min_col = i;
        }
        theta_abs[i] = fit_palea_theta(col).value("theta");
    }
    // Signed branch: flip sign on one side of the minimum column.
    Eigen::MatrixXd vand(na, k);
    Eigen::VectorXd rhs(na);
    for (std::size_t i = 0; i < na; ++i) {
        const double sgn = (i < min_col) ? -1.0 : 1.0;
        rhs(i) = sgn * theta_abs[i];
        double apow = 1.0;
        for (int c = 0; c < k; ++c) {
            vand(i, c) = apow;
            apow *= map.amplitudes[i];
        }
    }
    Eigen::VectorXd poly_init = vand.colPivHouseholderQr().solve(rhs);

    Eigen::VectorXd init(k + 2);
    for (int c = 0; c < k; ++c) init(c) = poly_init(c);
    init(k) = 1.0;   // amplitude
    init(k + 1) = 0.0;  // offset

    std::vector<std::string> names;
    for (int c = 0; c < k; ++c) names.push_back("c" + std::to_string(c));
    names.push_back("amplitude");
    names.push_back("offset");

    Palea2dResult result;
    result.fit = levenberg_marquardt(model, data, init, names);
    result.amplitudes = map.amplitudes;
    for (int c = 0; c < k; ++c) result.theta_poly.push_back(result.fit.value(names[c]));
    for (std::size_t i = 0; i < na; ++i) {
        double theta = 0.0;
        double apow = 1.0;
        for (int c = 0; c < k; ++c) {
            theta += result.theta_poly[c] * apow;
            apow *= map.amplitudes[i];
        }
        result.theta_per_amplitude.push_back(theta);
    }

    // Zero crossing nearest the minimum of the n-averaged signal.
    const double a_ref = map.amplitudes[min_col];
    std::optional<double> best;
    const double a_lo = map.amplitudes.front();
    const double a_hi = map.amplitudes.back();
    const int scan = 2000;
    double prev_a = a_lo;
    auto poly_at = [&](double a) {
        double t = 0.0, ap = 1.0;
        for (int c = 0; c < k; ++c) {
            t += result.theta_poly[c] * ap;
            ap *= a;
        }
        return t;
    };
    double prev_v = poly_at(a_lo);
    for (int s = 1; s <= scan; ++s) {
        const double a = a_lo + (a_hi - a_lo) * s / scan;
        const double v = poly_at(a);
        if (prev_v == 0.0 || prev_v * v < 0.0) {
            // bisect
            double lo = prev_a, hi = a, flo = prev_v;
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double fm = poly_at(mid);
                if (flo * fm <= 0.0) {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            const double root = 0.5 * (lo + hi);
            if (!best || std::abs(root - a_ref) < std::abs(*best - a_ref)) best = root;
        }
        prev_a = a;
        prev_v = v;
    }
    result.zero_crossing = best;
    if (!best) result.fit.warnings.push_back("no sign change in theta(a) over the range");
    return result;
}

FitResult fit_lorentzian(const std::vector<double>& x, const std::vector<double>& y,
                         const std::vector<double>& weights) {
    if (x.size() < 5) throw std::invalid_argument("fit_lorentzian: need at least 5 points");
    FitData data{x, y, weights};
    const Model model = [](double xv, const Eigen::VectorXd& p) {
        const double u = (xv - p(0)) / (p(1) / 2.0);
        return p(3) + p(2) / (1.0 + u * u);
    };
    // init: extremum against the median as the peak, quartile span as width
    std::vector<double> sorted = y;
    std::sort(sorted.begin(), sorted.end());
    const double med = sorted[sorted.size() / 2];
    std::size_t ext = 0;
    for (std::size_t i = 1; i < y.size(); ++i) {
        if (std::abs(y[i] - med) > std::abs(y[ext] - med)) ext = i;
    }
    const double span = std::abs(x.back() - x.front());
    Eigen::VectorXd init(4);
    init << x[ext], std::max(span / 6.0, 1e-12), y[ext] - med, med;
    auto fit = levenberg_marquardt(model, data, init, {"center", "fwhm", "amplitude", "offset"});
    fit.parameters["fwhm"] = std::abs(fit.parameters["fwhm"]);
    const double flat_scale = std::abs(sorted.back() - sorted.front());
    if (flat_scale < 1e-14 || std::abs(fit.value("amplitude")) < 1e-12 * std::max(1.0, flat_scale)) {
        fit.converged = false;
        fit.warnings.push_back("flat data");
    }
    return fit;
}

FitResult fit_sinusoid(const std::vector<double>& n, const std::vector<double>& y,
                       const std::vector<double>& weights) {
    if (n.size() < 6) throw std::invalid_argument("fit_sinusoid: need at least 6 points");
    FitData data{n, y, weights};
    const Model model = [](double xv, const Eigen::VectorXd& p) {
        return p(3) + p(1) * std::cos(p(0) * xv + p(2));
    };

    // frequency init from the discrete Fourier peak over a dense grid
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    const double step = std::abs(n[1] - n[0]);
    double best_w = 0.1, best_pow = -1.0;
    const int grid = 512;
    for (int k = 1; k <= grid; ++k) {
        const double w = kPi * k / (grid + 1.0) / step;
        double re = 0.0, im = 0.0;
        for (std::size_t i = 0; i < n.size(); ++i) {
            re += (y[i] - mean) * std::cos(w * n[i]);
            im += (y[i] - mean) * std::sin(w * n[i]);
        }
        const double pw = re * re + im * im;
        if (pw > best_pow) {
            best_pow = pw;
            best_w = w;
        }
    }
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < n.size(); ++i) {
        re += (y[i] - mean) * std::cos(best_w * n[i]);
        im += (y[i] - mean) * std::sin(best_w * n[i]);
    }
    const double amp0 = 2.0 * std::sqrt(best_pow) / static_cast<double>(n.size());
    Eigen::VectorXd init(4);
    init << best_w, amp0, std::atan2(-im, re), mean;
    auto fit = levenberg_marquardt(model, data, init, {"frequency", "amplitude", "phase", "offset"});
    fit.parameters["frequency"] = std::abs(fit.parameters["frequency"]);

    // flag amplitudes indistinguishable from the residual noise floor
    const double dof = static_cast<double>(n.size()) - 4.0;
    const double noise = fit.residual_norm / std::sqrt(std::max(dof, 1.0));
    if (std::abs(fit.value("amplitude")) < 2.0 * noise / std::sqrt(static_cast<double>(n.size())) ||
        std::abs(fit.value("amplitude")) < 1e-12) {
        fit.warnings.push_back("amplitude below noise");
        fit.converged = false;
    }
    return fit;
}

FitResult fit_exponential(const std::vector<double>& n, const std::vector<double>& y,
                          ExponentialModel model_kind, const std::vector<double>& weights) {
    const std::size_t min_pts = model_kind == ExponentialModel::Single ? 5 : 8;
    if (n.size() < min_pts) {
        throw std::invalid_argument("fit_exponential: too few points");
    }
    FitData data{n, y, weights};
    if (model_kind == ExponentialModel::Single) {
        const Model model = [](double xv, const Eigen::VectorXd& p) {
            return p(0) + p(1) * std::pow(p(2), xv);
        };
        // log-linear init on the detrended data
        const double c0 = *std::min_element(y.begin(), y.end()) - 1e-6;
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        long cnt = 0;
        for (std::size_t i = 0; i < n.size(); ++i) {
            const double v = y[i] - c0;
            if (v > 1e-12) {
                const double ly = std::log(v);
                sx += n[i];
                sy += ly;
                sxx += n[i] * n[i];
                sxy += n[i] * ly;
                ++cnt;
            }
        }
        double r0 = 0.95, a0 = y.front() - c0;
        if (cnt >= 2) {
            const double slope = (cnt * sxy - sx * sy) / std::max(cnt * sxx - sx * sx, 1e-12);
            r0 = std::exp(std::min(0.0, slope));
            a0 = std::exp((sy - slope * sx) / cnt);
        }
        Eigen::VectorXd init(3);
        init << c0, a0, std::min(1.0, std::max(1e-6, r0));
        Bounds b;
        b.lower = Eigen::VectorXd(3);
        b.upper = Eigen::VectorXd(3);
        b.lower << -2.0, -2.0, 1e-9;
        b.upper << 2.0, 2.0, 1.0;
        return levenberg_marquardt(model, data, init, {"offset", "amplitude", "rate"}, b);
    }

    const Model model = [](double xv, const Eigen::VectorXd& p) {
        return p(0) + p(1) * std::pow(p(3), xv) + p(2) * std::pow(p(4), xv);
    };
    auto single = fit_exponential(n, y, ExponentialModel::Single, weights);
    const double r = single.value("rate");
    const double a = single.value("amplitude");
    Eigen::VectorXd init(5);
    init << single.value("offset"), 0.7 * a, 0.3 * a, std::min(1.0, r * 1.02),
        std::max(1e-6, r * 0.6);
    Bounds b;
    b.lower = Eigen::VectorXd(5);
    b.upper = Eigen::VectorXd(5);
    b.lower << -2.0, -2.0, -2.0, 1e-9, 1e-9;
    b.upper << 2.0, 2.0, 2.0, 1.0, 1.0;
    auto fit = levenberg_marquardt(model, data, init, {"offset", "a1", "a2", "r1", "r2"}, b);
    // canonical ordering r1 >= r2
    if (fit.value("r1") < fit.value("r2")) {
        std::swap(fit.parameters["r1"], fit.parameters["r2"]);
        std::swap(fit.parameters["a1"], fit.parameters["a2"]);
        std::swap(fit.standard_errors["r1"], fit.standard_errors["r2"]);
        std::swap(fit.standard_errors["a1"], fit.standard_errors["a2"]);
    }
    return fit;
}

double bic_score(const FitResult& fit, long n_points) {
    const double k = static_cast<double>(fit.parameters.size());
    const double rss = std::max(fit.residual_norm * fit.residual_norm, 1e-300);
    return k * std::log(static_cast<double>(n_points)) +
           static_cast<double>(n_points) * std::log(rss / static_cast<double>(n_points));
}

std::size_t select_by_bic(const std::vector<FitResult>& fits, long n_points) {
    if (fits.size() < 2) throw std::invalid_argument("select_by_bic: need >= 2 candidates");
    std::size_t best = 0;
    double best_bic = bic_score(fits[0], n_points);
    for (std::size_t i = 1; i < fits.size(); ++i) {
        const double b = bic_score(fits[i], n_points);
        const bool better =
            b < best_bic - 1e-12 ||
            (std::abs(b - best_bic) <= 1e-12 && fits[i].parameters.size() < fits[best].parameters.size());
        if (better) {
            best = i;
            best_bic = b;
        }
    }
    return best;
}

}  // namespace calib
