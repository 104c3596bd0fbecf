#include "calib/device_sim.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <stdexcept>
#include <thread>

#include "calib/rotations.hpp"

namespace calib {

namespace {

using cd = std::complex<double>;
constexpr cd kIm{0.0, 1.0};
constexpr int kD = DuffingSystem::kDim;

}  // namespace

int duffing_index(int q1, int tc, int q2) { return (q1 * 3 + tc) * 3 + q2; }

DuffingSystem DuffingSystem::device_defaults(double g_qc_over_2pi, double t1_qubit) {
    DuffingSystem s;
    s.omega = {kTwoPi * 4.799e9, kTwoPi * 3.672e9, kTwoPi * 4.910e9};
    s.anharm = {-kTwoPi * 191e6, -kTwoPi * 216e6, -kTwoPi * 191e6};
    s.g_1c = kTwoPi * g_qc_over_2pi;
    s.g_2c = kTwoPi * g_qc_over_2pi;
    s.g_12 = kTwoPi * 5e6;  // placeholder; solve_g12_for_zero_zeta pins it
    s.t1 = {t1_qubit, t1_qubit / 4.0, t1_qubit};
    s.tphi = {t1_qubit, t1_qubit / 4.0, t1_qubit};
    return s;
}

// --- operators ---------------------------------------------------------------

namespace {

struct ModeOps {
    SparseMatrixcd a[3];       // annihilation per mode
    SparseMatrixcd n[3];       // number per mode
    SparseMatrixcd hop[3];     // a1'ac + h.c., a2'ac + h.c., a1'a2 + h.c.
    Eigen::VectorXd nvec[3];   // diagonal of n
    Eigen::VectorXd anh[3];    // diagonal of n(n-1)/2
};

const ModeOps& mode_ops() {
    static const ModeOps ops = [] {
        ModeOps o;
        auto level = [](int idx, int mode) {
            const int q2 = idx % 3;
            const int tc = (idx / 3) % 3;
            const int q1 = idx / 9;
            return mode == 0 ? q1 : (mode == 1 ? tc : q2);
        };
        auto lower = [&](int idx, int mode, int& out) {
            const int lv = level(idx, mode);
            if (lv == 0) return false;
            const int stride = mode == 0 ? 9 : (mode == 1 ? 3 : 1);
            out = idx - stride;
            return true;
        };
        for (int m = 0; m < 3; ++m) {
            std::vector<Eigen::Triplet<cd>> ta, tn;
            o.nvec[m] = Eigen::VectorXd::Zero(kD);
            o.anh[m] = Eigen::VectorXd::Zero(kD);
            for (int i = 0; i < kD; ++i) {
                const int lv = level(i, m);
                o.nvec[m](i) = lv;
                o.anh[m](i) = 0.5 * lv * (lv - 1);
                if (lv > 0) tn.emplace_back(i, i, cd(lv, 0));
                int j;
                if (lower(i, m, j)) ta.emplace_back(j, i, cd(std::sqrt(double(lv)), 0));
            }
            o.a[m].resize(kD, kD);
            o.a[m].setFromTriplets(ta.begin(), ta.end());
            o.n[m].resize(kD, kD);
            o.n[m].setFromTriplets(tn.begin(), tn.end());
        }
        auto hop_of = [&](int m1, int m2) {
            SparseMatrixcd h = o.a[m1].adjoint() * o.a[m2];
            SparseMatrixcd ha = h.adjoint();
            return SparseMatrixcd(h + ha);
        };
        o.hop[0] = hop_of(0, 1);  // Q1 - TC
        o.hop[1] = hop_of(2, 1);  // Q2 - TC
        o.hop[2] = hop_of(0, 2);  // Q1 - Q2
        return o;
    }();
    return ops;
}

// Static Hamiltonian in a frame rotating at omega_ref on every mode.
SparseMatrixcd static_hamiltonian(const DuffingSystem& s, double omega_ref) {
    const auto& o = mode_ops();
    SparseMatrixcd h(kD, kD);
    std::vector<Eigen::Triplet<cd>> diag;
    for (int i = 0; i < kD; ++i) {
        double e = 0.0;
        for (int m = 0; m < 3; ++m) {
            e += (s.omega[m] - omega_ref) * o.nvec[m](i) + s.anharm[m] * o.anh[m](i);
        }
        if (e != 0.0) diag.emplace_back(i, i, cd(e, 0));
    }
    h.setFromTriplets(diag.begin(), diag.end());
    h = h + s.g_1c * o.hop[0] + s.g_2c * o.hop[1] + s.g_12 * o.hop[2];
    return h;
}

// --- generic adaptive RK4 (step doubling) ------------------------------------

template <class State, class LFunc>
State rk4_step(const LFunc& lfunc, const State& y, double t, double h) {
    const State k1 = lfunc(t, y);
    const State k2 = lfunc(t + 0.5 * h, State(y + 0.5 * h * k1));
    const State k3 = lfunc(t + 0.5 * h, State(y + 0.5 * h * k2));
    const State k4 = lfunc(t + h, State(y + h * k3));
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

template <class State, class LFunc>
State integrate_adaptive(const LFunc& lfunc, State y, double duration, double h0, double tol) {
    if (duration <= 0.0) return y;
    double t = 0.0;
    double h = std::min(h0, duration);
    int rejects_in_a_row = 0;
    while (t < duration - 1e-18 * duration) {
        h = std::min(h, duration - t);
        const State full = rk4_step(lfunc, y, t, h);
        const State half = rk4_step(lfunc, y, t, 0.5 * h);
        const State two = rk4_step(lfunc, half, t + 0.5 * h, 0.5 * h);
        const double scale = std::max(1.0, y.norm());
        const double err = (two - full).norm() / (15.0 * scale);
        if (err <= tol || h <= 1e-18) {
            y = two + (two - full) / 15.0;  // Richardson extrapolation
            t += h;
            const double grow = err > 0 ? 0.9 * std::pow(tol / err, 0.2) : 2.0;
            h *= std::min(2.0, std::max(0.5, grow));
            rejects_in_a_row = 0;
        } else {
            h *= std::max(0.1, 0.9 * std::pow(tol / err, 0.25));
            if (++rejects_in_a_row > 60) {
                throw std::runtime_error("integrator step control failed; local error " +
                                         std::to_string(err));
            }
        }
    }
    return y;
}

}  // namespace

MatrixXcd lindblad_evolve(const std::function<MatrixXcd(double)>& hamiltonian,
                          const std::vector<CollapseOp>& collapse, const MatrixXcd& rho0,
                          double duration, double dt, double tol) {
    if (dt <= 0.0) throw std::invalid_argument("lindblad_evolve: dt must be positive");
    {
        const MatrixXcd h0 = hamiltonian(0.0);
        if ((h0 - h0.adjoint()).norm() > 1e-10 * std::max(1.0, h0.norm())) {
            throw std::invalid_argument("lindblad_evolve: Hamiltonian not Hermitian");
        }
    }
    std::vector<MatrixXcd> cs, cdc;  // sqrt(rate) c and c'c precomputed
    for (const auto& c : collapse) {
        if (c.rate <= 0.0) continue;
        const MatrixXcd m = std::sqrt(c.rate) * MatrixXcd(c.op);
        cs.push_back(m);
        cdc.push_back(m.adjoint() * m);
    }
    auto lfunc = [&](double t, const MatrixXcd& rho) -> MatrixXcd {
        const MatrixXcd h = hamiltonian(t);
        MatrixXcd drho = -kIm * (h * rho - rho * h);
        for (std::size_t k = 0; k < cs.size(); ++k) {
            drho += cs[k] * rho * cs[k].adjoint() -
                    0.5 * (cdc[k] * rho + rho * cdc[k]);
        }
        return drho;
    };
    MatrixXcd rho = integrate_adaptive(lfunc, MatrixXcd(rho0), duration, dt, tol);
    return rho;
}

// --- envelopes ----------------------------------------------------------------

DpssWindow dpss_window(int n, double time_bandwidth) {
    if (n < 8) throw std::invalid_argument("dpss_window: n too small");
    const double w = time_bandwidth / n;
    // zeroth-order DPSS as the top eigenvector of the classic tridiagonal
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        const double d = 0.5 * (n - 1 - 2.0 * k);
        t(k, k) = d * d * std::cos(2.0 * kPi * w);
        if (k + 1 < n) {
            const double e = 0.5 * (k + 1.0) * (n - 1.0 - k);
            t(k, k + 1) = e;
            t(k + 1, k) = e;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    Eigen::VectorXd v = es.eigenvectors().col(n - 1);
    if (v.sum() < 0) v = -v;
    DpssWindow out;
    const double peak = v.maxCoeff();
    out.window.resize(n);
    for (int k = 0; k < n; ++k) out.window[k] = v(k) / peak;
    // spectral concentration: Rayleigh quotient with the sinc kernel
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i) {
        den += v(i) * v(i);
        for (int j = 0; j < n; ++j) {
            const int d = i - j;
            const double kern = d == 0 ? 2.0 * w : std::sin(2.0 * kPi * w * d) / (kPi * d);
            num += v(i) * kern * v(j);
        }
    }
    out.concentration = num / den;
    return out;
}

SampledEnvelope make_envelope(EnvelopeShape shape, const EnvelopeParams& p) {
    if (p.duration < 2.0 * p.dt) {
        throw std::invalid_argument("make_envelope: duration must be >= 2 dt");
    }
    const int n = static_cast<int>(std::round(p.duration / p.dt)) + 1;
    SampledEnvelope env;
    env.dt = p.dt;
    env.in_phase.resize(n);
    const double T = p.duration;
    switch (shape) {
        case EnvelopeShape::Cosine:
        case EnvelopeShape::CosineDrag:
            for (int k = 0; k < n; ++k) {
                const double t = k * p.dt;
                env.in_phase[k] = p.amplitude * 0.5 * (1.0 - std::cos(kTwoPi * t / T));
            }
            break;
        case EnvelopeShape::FlattopCosine:
            for (int k = 0; k < n; ++k) {
                const double t = k * p.dt;
                double v;
                if (t < p.edge_time) {
                    v = 0.5 * (1.0 - std::cos(kPi * t / p.edge_time));
                } else if (t > T - p.edge_time) {
                    v = 0.5 * (1.0 - std::cos(kPi * (T - t) / p.edge_time));
                } else {
                    v = 1.0;
                }
                env.in_phase[k] = p.amplitude * v;
            }
            break;
        case EnvelopeShape::Slepian: {
            const auto dpss = dpss_window(std::max(n, 32), p.time_bandwidth);
            for (int k = 0; k < n; ++k) {
                const double x = static_cast<double>(k) / (n - 1) *
                                 (static_cast<double>(dpss.window.size()) - 1.0);
                const int i0 = std::min<int>(static_cast<int>(x), dpss.window.size() - 2);
                const double f = x - i0;
                env.in_phase[k] =
                    p.amplitude * ((1.0 - f) * dpss.window[i0] + f * dpss.window[i0 + 1]);
            }
            break;
        }
    }
    if (shape == EnvelopeShape::CosineDrag) {
        env.quadrature.resize(n);
        for (int k = 0; k < n; ++k) {
            const int km = std::max(0, k - 1), kp = std::min(n - 1, k + 1);
            const double deriv = (env.in_phase[kp] - env.in_phase[km]) / ((kp - km) * p.dt);
            env.quadrature[k] = -p.drag_coefficient * deriv / p.drag_anharm;
        }
    }
    return env;
}

// --- eigenstructure -----------------------------------------------------------

namespace {

struct DressedBasis {
    Eigen::MatrixXcd states;  // column b = dressed state with bare label b
    Eigen::VectorXd energies;
    bool ambiguous = false;
};

DressedBasis dressed_basis(const DuffingSystem& s, double omega_ref) {
    const MatrixXcd h = MatrixXcd(static_hamiltonian(s, omega_ref));
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h);
    DressedBasis out;
    out.states = Eigen::MatrixXcd::Zero(kD, kD);
    out.energies = Eigen::VectorXd::Zero(kD);
    std::vector<bool> used(kD, false);
    for (int b = 0; b < kD; ++b) {
        int best = -1;
        double best_ov = 0.0;
        for (int e = 0; e < kD; ++e) {
            if (used[e]) continue;
            const double ov = std::norm(es.eigenvectors()(b, e));
            if (ov > best_ov) {
                best_ov = ov;
                best = e;
            }
        }
        used[best] = true;
        if (best_ov < 0.5) out.ambiguous = true;
        VectorXcd v = es.eigenvectors().col(best);
        // fix the phase: largest component real positive
        Eigen::Index imax;
        v.cwiseAbs().maxCoeff(&imax);
        v *= std::conj(v(imax)) / std::abs(v(imax));
        out.states.col(b) = v;
        out.energies(b) = es.eigenvalues()(best);
    }
    return out;
}

}  // namespace

double g_xy(const DuffingSystem& s) {
    for (int q : {0, 2}) {
        if (std::abs(s.omega[q] - s.omega[1]) < 1e-6) {
            throw std::invalid_argument("g_xy: qubit-coupler resonance");
        }
    }
    const double d1 = s.omega[0] - s.omega[1];
    const double d2 = s.omega[2] - s.omega[1];
    const double s1 = s.omega[0] + s.omega[1];
    const double s2 = s.omega[2] + s.omega[1];
    return s.g_12 - 0.5 * s.g_1c * s.g_2c * (1.0 / d1 + 1.0 / d2 - 1.0 / s1 - 1.0 / s2);
}

ZetaResult zeta(const DuffingSystem& system, std::optional<double> omega_c) {
    DuffingSystem s = system;
    if (omega_c) s.omega[1] = *omega_c;
    const auto basis = dressed_basis(s, 0.0);
    ZetaResult out;
    out.ambiguous = basis.ambiguous;
    const double e00 = basis.energies(duffing_index(0, 0, 0));
    const double e01 = basis.energies(duffing_index(0, 0, 1));
    const double e10 = basis.energies(duffing_index(1, 0, 0));
    const double e11 = basis.energies(duffing_index(1, 0, 1));
    out.zeta = (e11 - e01) - (e10 - e00);
    return out;
}

double solve_g12_for_zero_zeta(DuffingSystem system, double omega_c_idle) {
    system.omega[1] = omega_c_idle;
    auto f = [&](double g12) {
        DuffingSystem s = system;
        s.g_12 = g12;
        return zeta(s).zeta;
    };
    // bracket: zeta(g12) is monotone increasing over the physical range
    double lo = 0.0, hi = kTwoPi * 40e6;
    double flo = f(lo), fhi = f(hi);
    int expand = 0;
    while (flo * fhi > 0.0 && expand++ < 8) {
        if (std::abs(flo) < std::abs(fhi)) {
            lo -= kTwoPi * 10e6;
            flo = f(lo);
        } else {
            hi += kTwoPi * 40e6;
            fhi = f(hi);
        }
    }
    if (flo * fhi > 0.0) {
        throw std::runtime_error("solve_g12_for_zero_zeta: could not bracket the root");
    }
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (std::abs(fm) < kTwoPi * 1e3 * 1e-3) {  // 1 Hz-scale residual
            return mid;
        }
        if (flo * fm <= 0.0) {
            hi = mid;
            fhi = fm;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    return 0.5 * (lo + hi);
}

// --- drive/flux channel assembly ----------------------------------------------

namespace {

struct LiouvilleEngine {
    SparseMatrixcd h0;
    // time-dependent diagonal channels (flux): coefficient(t) * n_mode
    std::vector<std::pair<const SparseMatrixcd*, std::function<double(double)>>> flux;
    // drive channels: c(t) a' + conj(c(t)) a
    struct Drive {
        const SparseMatrixcd* a;
        SparseMatrixcd adag;
        std::function<cd(double)> coeff;
    };
    std::vector<Drive> drives;
    // collapse operators
    std::vector<SparseMatrixcd> jump;      // sqrt(rate) a_m
    Eigen::MatrixXd elementwise_damp;      // dephasing + anticommutator part

    explicit LiouvilleEngine(const DuffingSystem& s, double omega_ref, bool with_noise) {
        h0 = static_hamiltonian(s, omega_ref);
        elementwise_damp = Eigen::MatrixXd::Zero(kD, kD);
        const auto& o = mode_ops();
        for (int m = 0; m < 3; ++m) {
            const double g1 = (with_noise && s.t1[m] > 0.0) ? 1.0 / s.t1[m] : 0.0;
            const double gphi = (with_noise && s.tphi[m] > 0.0) ? 2.0 / s.tphi[m] : 0.0;
            if (g1 > 0.0) {
                jump.push_back(SparseMatrixcd(std::sqrt(g1) * o.a[m]));
                for (int i = 0; i < kD; ++i) {
                    for (int j = 0; j < kD; ++j) {
                        elementwise_damp(i, j) -= 0.5 * g1 * (o.nvec[m](i) + o.nvec[m](j));
                    }
                }
            }
            if (gphi > 0.0) {
                for (int i = 0; i < kD; ++i) {
                    for (int j = 0; j < kD; ++j) {
                        const double dn = o.nvec[m](i) - o.nvec[m](j);
                        elementwise_damp(i, j) -= 0.5 * gphi * dn * dn;
                    }
                }
            }
        }
    }

    void add_flux(int mode, std::function<double(double)> coeff) {
        flux.emplace_back(&mode_ops().n[mode], std::move(coeff));
    }

    void add_drive(int mode, std::function<cd(double)> coeff) {
        Drive d;
        d.a = &mode_ops().a[mode];
        d.adag = mode_ops().a[mode].adjoint();
        d.coeff = std::move(coeff);
        drives.push_back(std::move(d));
    }

    MatrixXcd apply_h(double t, const MatrixXcd& rho, bool right) const {
        MatrixXcd out = right ? MatrixXcd(rho * h0) : MatrixXcd(h0 * rho);
        for (const auto& [op, fn] : flux) {
            const double c = fn(t);
            if (c != 0.0) out += right ? MatrixXcd(c * (rho * *op)) : MatrixXcd(c * (*op * rho));
        }
        for (const auto& d : drives) {
            const cd c = d.coeff(t);
            if (c != cd(0.0, 0.0)) {
                if (right) {
                    out += rho * (c * d.adag) + rho * (std::conj(c) * *d.a);
                } else {
                    out += (c * d.adag) * rho + (std::conj(c) * *d.a) * rho;
                }
            }
        }
        return out;
    }

    VectorXcd apply_h_vec(double t, const VectorXcd& psi) const {
        VectorXcd out = h0 * psi;
        for (const auto& [op, fn] : flux) {
            const double c = fn(t);
            if (c != 0.0) out += c * (*op * psi);
        }
        for (const auto& d : drives) {
            const cd c = d.coeff(t);
            if (c != cd(0.0, 0.0)) out += c * (d.adag * psi) + std::conj(c) * (*d.a * psi);
        }
        return out;
    }

    // full Lindblad right-hand side
    MatrixXcd lindblad_rhs(double t, const MatrixXcd& rho) const {
        MatrixXcd drho = -kIm * (apply_h(t, rho, false) - apply_h(t, rho, true));
        for (const auto& j : jump) drho += j * rho * MatrixXcd(j.adjoint());
        drho += elementwise_damp.cwiseProduct(rho.real()).cast<cd>() +
                kIm * elementwise_damp.cwiseProduct(rho.imag()).cast<cd>();
        return drho;
    }

    MatrixXcd evolve_rho(MatrixXcd rho, double duration, double dt, double tol) const {
        auto rhs = [this](double t, const MatrixXcd& r) { return lindblad_rhs(t, r); };
        return integrate_adaptive(rhs, std::move(rho), duration, dt, tol);
    }

    VectorXcd evolve_psi(VectorXcd psi, double duration, double dt, double tol) const {
        auto rhs = [this](double t, const VectorXcd& p) {
            return VectorXcd(-kIm * apply_h_vec(t, p));
        };
        return integrate_adaptive(rhs, std::move(psi), duration, dt, tol);
    }
};

// Linear interpolation into sampled envelope values (clamped).
double env_at(const std::vector<double>& v, double dt, double t) {
    if (v.size() < 2) return v.empty() ? 0.0 : v.front();
    double x = t / dt;
    if (x <= 0.0) return v.front();
    if (x >= static_cast<double>(v.size() - 1)) return v.back();
    const int i = static_cast<int>(x);
    const double f = x - i;
    return v[i] * (1.0 - f) + v[i + 1] * f;
}

}  // namespace

// --- sqrt(X) simulation ---------------------------------------------------------

namespace {

// rotation angle of qubit q extracted from closed-system evolution
double simulated_rotation_angle(const LiouvilleEngine& eng, const DressedBasis& basis, int qubit,
                                double duration, double dt) {
    const int lo = duffing_index(0, 0, 0);
    const int hi = qubit == 0 ? duffing_index(1, 0, 0) : duffing_index(0, 0, 1);
    VectorXcd psi = basis.states.col(lo);
    psi = eng.evolve_psi(psi, duration, dt, 1e-9);
    const cd a0 = basis.states.col(lo).dot(psi);
    const cd a1 = basis.states.col(hi).dot(psi);
    return 2.0 * std::atan2(std::abs(a1), std::abs(a0));
}

std::function<cd(double)> drive_coeff(const SampledEnvelope& env, double delta) {
    return [env, delta](double t) {
        const double vi = env_at(env.in_phase, env.dt, t);
        const double vq = env.quadrature.empty() ? 0.0 : env_at(env.quadrature, env.dt, t);
        return 0.5 * cd(vi, vq) * std::exp(-kIm * (delta * t));
    };
}

// Entanglement fidelity of a channel (given on matrix units) against an
// ideal unitary, maximized over per-qubit virtual Z phases.
template <int D>
double best_virtual_z_fidelity(const Eigen::Matrix<cd, D, D> chan[D][D],
                               const Eigen::Matrix<cd, D, D>& ideal, int n_phases) {
    using Mat = Eigen::Matrix<cd, D, D>;
    auto fe_at = [&](double p1, double p2) {
        Mat z = Mat::Identity();
        if constexpr (D == 2) {
            z(1, 1) = std::exp(kIm * p1);
        } else {
            // basis |00>,|01>,|10>,|11>: phases q2 -> p2, q1 -> p1
            z(1, 1) = std::exp(kIm * p2);
            z(2, 2) = std::exp(kIm * p1);
            z(3, 3) = std::exp(kIm * (p1 + p2));
        }
        cd fe = 0.0;
        for (int i = 0; i < D; ++i) {
            for (int j = 0; j < D; ++j) {
                const Mat mapped = z * chan[i][j] * z.adjoint();
                fe += (ideal.adjoint() * mapped * ideal)(i, j);
            }
        }
        return fe.real() / (D * D);
    };
    double best = -1.0, bp1 = 0.0, bp2 = 0.0;
    const int grid = 72;
    for (int k1 = 0; k1 < grid; ++k1) {
        const double p1 = -kPi + kTwoPi * k1 / grid;
        if (n_phases == 1) {
            const double f = fe_at(p1, 0.0);
            if (f > best) {
                best = f;
                bp1 = p1;
            }
        } else {
            for (int k2 = 0; k2 < grid; ++k2) {
                const double p2 = -kPi + kTwoPi * k2 / grid;
                const double f = fe_at(p1, p2);
                if (f > best) {
                    best = f;
                    bp1 = p1;
                    bp2 = p2;
                }
            }
        }
    }
    // local parabolic refinement, coordinate-wise
    double step = kTwoPi / grid;
    for (int round = 0; round < 24; ++round) {
        bool improved = false;
        for (int axis = 0; axis < n_phases; ++axis) {
            double& v = axis == 0 ? bp1 : bp2;
            for (const double d : {-step, step}) {
                const double f = axis == 0 ? fe_at(bp1 + d, bp2) : fe_at(bp1, bp2 + d);
                if (f > best) {
                    best = f;
                    v += d;
                    improved = true;
                }
            }
        }
        if (!improved) step *= 0.5;
        if (step < 1e-7) break;
    }
    return best;
}

}  // namespace

std::array<GateReport, 2> simulate_sqrt_x(const DuffingSystem& system, const SqrtXPulse& pulse,
                                          bool simultaneous) {
    const auto basis = dressed_basis(system, 0.0);
    const double e0 = basis.energies(duffing_index(0, 0, 0));
    const double w1 = basis.energies(duffing_index(1, 0, 0)) - e0;
    const double w2 = basis.energies(duffing_index(0, 0, 1)) - e0;
    const double omega_ref = 0.5 * (w1 + w2);
    const int qmode[2] = {0, 2};
    const double wq[2] = {w1, w2};

    // amplitude calibration per qubit on the closed system (other drive off)
    double amps[2];
    for (int q = 0; q < 2; ++q) {
        double amp = kPi / pulse.duration;  // cosine envelope area = pi/2
        for (int iter = 0; iter < 5; ++iter) {
            EnvelopeParams ep;
            ep.amplitude = amp;
            ep.duration = pulse.duration;
            ep.dt = pulse.dt;
            ep.drag_coefficient = pulse.drag_coefficient;
            ep.drag_anharm = system.anharm[qmode[q]];
            LiouvilleEngine eng(system, omega_ref, false);
            eng.add_drive(qmode[q],
                          drive_coeff(make_envelope(EnvelopeShape::CosineDrag, ep), wq[q] - omega_ref));
            const double angle = simulated_rotation_angle(eng, basis, q, pulse.duration, pulse.dt);
            if (std::abs(angle - kPi / 2.0) < 1e-7) break;
            amp *= (kPi / 2.0) / std::max(angle, 1e-3);
        }
        amps[q] = amp;
    }

    LiouvilleEngine eng(system, omega_ref, true);
    for (int q = 0; q < 2; ++q) {
        if (!simultaneous && q == 1) break;
        EnvelopeParams ep;
        ep.amplitude = amps[q];
        ep.duration = pulse.duration;
        ep.dt = pulse.dt;
        ep.drag_coefficient = pulse.drag_coefficient;
        ep.drag_anharm = system.anharm[qmode[q]];
        eng.add_drive(qmode[q],
                      drive_coeff(make_envelope(EnvelopeShape::CosineDrag, ep), wq[q] - omega_ref));
    }

    std::array<GateReport, 2> reports;
    for (int q = 0; q < 2; ++q) {
        auto dressed_idx = [&](int level) {
            return q == 0 ? duffing_index(level, 0, 0) : duffing_index(0, 0, level);
        };
        Eigen::Matrix2cd chan[2][2];
        double leak02 = 0.0, leak20 = 0.0, leakc = 0.0;
        for (int i = 0; i < 2; ++i) {
            for (int j = i; j < 2; ++j) {
                const MatrixXcd rho0 = basis.states.col(dressed_idx(i)) *
                                       basis.states.col(dressed_idx(j)).adjoint();
                const MatrixXcd rho = eng.evolve_rho(rho0, pulse.duration, pulse.dt, 1e-9);
                const MatrixXcd rd = basis.states.adjoint() * rho * basis.states;
                Eigen::Matrix2cd red = Eigen::Matrix2cd::Zero();
                for (int k = 0; k < 2; ++k) {
                    for (int l = 0; l < 2; ++l) {
                        cd acc = 0.0;
                        for (int r1 = 0; r1 < 3; ++r1) {
                            for (int r2 = 0; r2 < 3; ++r2) {
                                const int ik = q == 0 ? duffing_index(k, r1, r2)
                                                      : duffing_index(r2, r1, k);
                                const int il = q == 0 ? duffing_index(l, r1, r2)
                                                      : duffing_index(r2, r1, l);
                                acc += rd(ik, il);
                            }
                        }
                        red(k, l) = acc;
                    }
                }
                chan[i][j] = red;
                if (i != j) chan[j][i] = red.adjoint();
                if (i == 1 && j == 1) {
                    for (int r1 = 0; r1 < 3; ++r1) {
                        for (int r2 = 0; r2 < 3; ++r2) {
                            const int idx =
                                q == 0 ? duffing_index(2, r1, r2) : duffing_index(r2, r1, 2);
                            const double pop = rd(idx, idx).real();
                            if (r1 > 0) {
                                leakc += pop;
                            } else {
                                (q == 0 ? leak20 : leak02) += pop;
                            }
                        }
                    }
                }
            }
        }
        Eigen::Matrix2cd ideal = rotation_matrix(Axis::X, kPi / 2.0);
        const double fe = best_virtual_z_fidelity<2>(chan, ideal, 1);
        reports[q].average_error = 1.0 - (2.0 * fe + 1.0) / 3.0;
        reports[q].duration = pulse.duration;
        reports[q].leakage["02"] = leak02;
        reports[q].leakage["20"] = leak20;
        reports[q].leakage["coupler"] = leakc;
    }
    return reports;
}

// --- CZ simulation ----------------------------------------------------------------

namespace {

struct CzWaveforms {
    SampledEnvelope qubit;    // delta omega_1(t)
    SampledEnvelope coupler;  // delta omega_c(t)
    double qubit_offset = 0.0;
    double coupler_offset = 0.0;
};

CzWaveforms cz_waveforms(const CzPulse& pulse, double qubit_delta, double coupler_delta) {
    CzWaveforms w;
    EnvelopeParams pq;
    pq.amplitude = qubit_delta;
    pq.duration = pulse.qubit_duration;
    pq.dt = pulse.dt;
    pq.edge_time = pulse.edge_time;
    w.qubit = make_envelope(EnvelopeShape::FlattopCosine, pq);
    EnvelopeParams pc;
    pc.amplitude = coupler_delta;
    pc.duration = pulse.coupler_duration;
    pc.dt = pulse.dt;
    pc.edge_time = pulse.edge_time;
    w.coupler = make_envelope(pulse.coupler_shape, pc);
    w.qubit_offset = 0.5 * (pulse.duration - pulse.qubit_duration);
    w.coupler_offset = 0.5 * (pulse.duration - pulse.coupler_duration);
    return w;
}

void add_cz_flux(LiouvilleEngine& eng, const CzWaveforms& w) {
    eng.add_flux(0, [env = w.qubit, off = w.qubit_offset](double t) {
        return t < off ? 0.0 : env_at(env.in_phase, env.dt, t - off);
    });
    eng.add_flux(1, [env = w.coupler, off = w.coupler_offset](double t) {
        return t < off ? 0.0 : env_at(env.in_phase, env.dt, t - off);
    });
}

struct CzClosedResult {
    cd amp_00, amp_01, amp_10, amp_11;  // diagonal amplitudes in the dressed basis
    double leak_amp = 0.0;              // |<02|U|11>|
    double cond_phase = 0.0;
};

CzClosedResult cz_closed_run(const DuffingSystem& s, const CzPulse& pulse, double qubit_delta,
                             double coupler_delta, double omega_ref, const DressedBasis& basis) {
    const auto w = cz_waveforms(pulse, qubit_delta, coupler_delta);
    CzClosedResult out;
    const int lbl[4] = {duffing_index(0, 0, 0), duffing_index(0, 0, 1), duffing_index(1, 0, 0),
                        duffing_index(1, 0, 1)};
    cd amps[4];
    for (int k = 0; k < 4; ++k) {
        LiouvilleEngine eng(s, omega_ref, false);
        add_cz_flux(eng, w);
        VectorXcd psi = basis.states.col(lbl[k]);
        psi = eng.evolve_psi(psi, pulse.duration, pulse.dt, 1e-9);
        amps[k] = basis.states.col(lbl[k]).dot(psi);
        if (k == 3) {
            out.leak_amp = std::abs(basis.states.col(duffing_index(0, 0, 2)).dot(psi));
        }
    }
    out.amp_00 = amps[0];
    out.amp_01 = amps[1];
    out.amp_10 = amps[2];
    out.amp_11 = amps[3];
    out.cond_phase = wrap_angle(std::arg(amps[3]) - std::arg(amps[2]) - std::arg(amps[1]) +
                                std::arg(amps[0]));
    return out;
}

}  // namespace

CalibratedCz calibrate_cz(const DuffingSystem& system, const CzPulse& pulse) {
    const double omega_ref = 0.5 * (system.omega[0] + system.omega[2]);
    const auto basis = dressed_basis(system, omega_ref);

    CalibratedCz cal;
    cal.qubit_delta = pulse.qubit_delta_init;
    cal.coupler_delta = pulse.coupler_delta_init;

    // bring |11> and |02> to resonance to first order: w1 + d = w2 + a2
    const double resonance_delta = (system.omega[2] + system.anharm[2]) - system.omega[0];
    cal.qubit_delta = resonance_delta;

    auto leak2 = [&](double cdelta) {
        const auto r = cz_closed_run(system, pulse, cal.qubit_delta, cdelta, omega_ref, basis);
        return r.leak_amp * r.leak_amp;
    };

    // coarse scan of the coupler excursion around the initial guess
    double best_c = cal.coupler_delta, best_l = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 15; ++k) {
        const double f = 0.55 + 0.9 * k / 14.0;
        const double cdelta = pulse.coupler_delta_init * f;
        const double l = leak2(cdelta);
        if (l < best_l) {
            best_l = l;
            best_c = cdelta;
        }
    }
    cal.coupler_delta = best_c;

    for (int round = 0; round < 3; ++round) {
        // parabolic refinement of the leak minimum in coupler_delta
        double h = cal.coupler_delta * (round == 0 ? 0.03 : 0.01);
        for (int it = 0; it < 8; ++it) {
            const double f0 = leak2(cal.coupler_delta - h);
            const double f1 = leak2(cal.coupler_delta);
            const double f2 = leak2(cal.coupler_delta + h);
            const double denom = f0 - 2.0 * f1 + f2;
            if (std::abs(denom) < 1e-300) break;
            const double shift = 0.5 * h * (f0 - f2) / denom;
            cal.coupler_delta += std::min(std::max(shift, -2.0 * h), 2.0 * h);
            if (std::abs(shift) < 0.05 * h) break;
            h = std::max(h * 0.5, cal.coupler_delta * 1e-4);
        }

        // secant on the conditional phase via the qubit excursion
        double x0 = cal.qubit_delta;
        double x1 = cal.qubit_delta + kTwoPi * 2e6;
        auto phase_err = [&](double qdelta) {
            const auto r =
                cz_closed_run(system, pulse, qdelta, cal.coupler_delta, omega_ref, basis);
            return wrap_angle(r.cond_phase - kPi);
        };
        double f0 = phase_err(x0);
        for (int it = 0; it < 10; ++it) {
            const double f1 = phase_err(x1);
            if (std::abs(f1 - f0) < 1e-12) break;
            const double x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
            x0 = x1;
            f0 = f1;
            x1 = x2;
            if (std::abs(f1) < 5e-4) break;
        }
        cal.qubit_delta = x1;
    }

    const auto final_run =
        cz_closed_run(system, pulse, cal.qubit_delta, cal.coupler_delta, omega_ref, basis);
    cal.conditional_phase = final_run.cond_phase;
    cal.residual_leak_amp = final_run.leak_amp;
    cal.converged = std::abs(wrap_angle(final_run.cond_phase - kPi)) < 2e-3;
    return cal;
}

GateReport simulate_cz(const DuffingSystem& system, const CzPulse& pulse,
                       const CalibratedCz* calibration) {
    CalibratedCz cal;
    if (calibration) {
        cal = *calibration;
    } else {
        cal = calibrate_cz(system, pulse);
    }
    const double omega_ref = 0.5 * (system.omega[0] + system.omega[2]);
    const auto basis = dressed_basis(system, omega_ref);
    const auto w = cz_waveforms(pulse, cal.qubit_delta, cal.coupler_delta);

    LiouvilleEngine eng(system, omega_ref, true);
    add_cz_flux(eng, w);

    const int lbl[4] = {duffing_index(0, 0, 0), duffing_index(0, 0, 1), duffing_index(1, 0, 0),
                        duffing_index(1, 0, 1)};
    Eigen::Matrix4cd chan[4][4];
    double leak02 = 0.0, leak20 = 0.0, leakc = 0.0;
    for (int i = 0; i < 4; ++i) {
        for (int j = i; j < 4; ++j) {
            const MatrixXcd rho0 =
                basis.states.col(lbl[i]) * basis.states.col(lbl[j]).adjoint();
            const MatrixXcd rho = eng.evolve_rho(rho0, pulse.duration, pulse.dt, 1e-9);
            const MatrixXcd rd = basis.states.adjoint() * rho * basis.states;
            Eigen::Matrix4cd red = Eigen::Matrix4cd::Zero();
            for (int k = 0; k < 4; ++k) {
                for (int l = 0; l < 4; ++l) {
                    red(k, l) = rd(lbl[k], lbl[l]);
                }
            }
            chan[i][j] = red;
            if (i != j) chan[j][i] = red.adjoint();
            if (i == j) {
                leak02 += 0.25 * rd(duffing_index(0, 0, 2), duffing_index(0, 0, 2)).real();
                leak20 += 0.25 * rd(duffing_index(2, 0, 0), duffing_index(2, 0, 0)).real();
                for (int q1 = 0; q1 < 3; ++q1) {
                    for (int tc = 1; tc < 3; ++tc) {
                        for (int q2 = 0; q2 < 3; ++q2) {
                            leakc += 0.25 * rd(duffing_index(q1, tc, q2),
                                               duffing_index(q1, tc, q2)).real();
                        }
                    }
                }
            }
        }
    }
    Eigen::Matrix4cd ideal = Eigen::Matrix4cd::Identity();
    ideal(3, 3) = -1.0;
    const double fe = best_virtual_z_fidelity<4>(chan, ideal, 2);
    GateReport rep;
    rep.average_error = 1.0 - (4.0 * fe + 1.0) / 5.0;
    rep.duration = pulse.duration;
    rep.leakage["02"] = leak02;
    rep.leakage["20"] = leak20;
    rep.leakage["coupler"] = leakc;
    return rep;
}

// --- coupling sweep ----------------------------------------------------------------

namespace {

DuffingSystem sweep_system(double g_qc, double t1, double detuning) {
    DuffingSystem s = DuffingSystem::device_defaults();
    s.g_1c = g_qc;
    s.g_2c = g_qc;
    s.omega[2] = s.omega[0] + detuning;
    s.t1 = {t1, t1 / 4.0, t1};
    s.tphi = {t1, t1 / 4.0, t1};
    s.g_12 = solve_g12_for_zero_zeta(s, s.omega[1]);
    return s;
}

}  // namespace

SweepResult sweep_coupling(const std::vector<double>& g_qc_grid,
                           const std::vector<double>& t1_grid,
                           const std::vector<double>& detuning_list, int workers) {
    if (g_qc_grid.empty() || t1_grid.empty() || detuning_list.empty()) {
        throw std::invalid_argument("sweep_coupling: empty grid");
    }
    SweepResult result;
    std::vector<std::pair<double, double>> tasks;
    for (double t1 : t1_grid) {
        for (double g : g_qc_grid) tasks.emplace_back(t1, g);
    }
    result.points.resize(tasks.size());

    const int nworkers = workers > 0 ? workers
                                     : std::max(1u, std::thread::hardware_concurrency());
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= tasks.size()) return;
            const auto [t1, g] = tasks[k];
            SweepPoint pt;
            pt.g_qc = g;
            pt.t1 = t1;
            try {
                // sqrt-X: optimize the duration coarsely per detuning
                double sx_total = 0.0;
                double sx_dur = 0.0;
                for (double det : detuning_list) {
                    const DuffingSystem s = sweep_system(g, t1, det);
                    double best = std::numeric_limits<double>::infinity();
                    double best_dur = 0.0;
                    for (double dur : {14e-9, 18e-9, 24e-9, 30e-9, 38e-9}) {
                        SqrtXPulse p;
                        p.duration = dur;
                        const auto reps = simulate_sqrt_x(s, p, true);
                        const double err =
                            0.5 * (reps[0].average_error + reps[1].average_error);
                        if (err < best) {
                            best = err;
                            best_dur = dur;
                        }
                    }
                    sx_total += best;
                    sx_dur = std::max(sx_dur, best_dur);
                }
                pt.sqrt_x_error = sx_total / static_cast<double>(detuning_list.size());
                pt.sqrt_x_duration = sx_dur;

                // CZ: default detuning system, coarse duration ladder
                const DuffingSystem s = sweep_system(g, t1, kTwoPi * 111e6);
                double best = std::numeric_limits<double>::infinity();
                double best_dur = 0.0;
                for (double dur : {26e-9, 33e-9, 42e-9, 54e-9}) {
                    CzPulse p;
                    p.duration = dur;
                    p.coupler_duration = dur * 22.0 / 33.0;
                    p.qubit_duration = dur * 27.0 / 33.0;
                    const auto cal = calibrate_cz(s, p);
                    if (!cal.converged) continue;
                    const auto rep = simulate_cz(s, p, &cal);
                    if (rep.average_error < best) {
                        best = rep.average_error;
                        best_dur = dur;
                    }
                }
                if (!std::isfinite(best)) throw std::runtime_error("no CZ duration converged");
                pt.cz_error = best;
                pt.cz_duration = best_dur;
                pt.clifford_error = 4.65 * pt.sqrt_x_error + 1.5 * pt.cz_error;
            } catch (const std::exception&) {
                pt.failed = true;
            }
            result.points[k] = pt;
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < nworkers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();

    for (double t1 : t1_grid) {
        double best = std::numeric_limits<double>::infinity();
        double best_g = 0.0;
        for (const auto& pt : result.points) {
            if (pt.t1 == t1 && !pt.failed && pt.clifford_error < best) {
                best = pt.clifford_error;
                best_g = pt.g_qc;
            }
        }
        result.optimal_g[t1] = best_g;
        double lo = best_g, hi = best_g;
        for (const auto& pt : result.points) {
            if (pt.t1 == t1 && !pt.failed && pt.clifford_error <= 1.05 * best) {
                lo = std::min(lo, pt.g_qc);
                hi = std::max(hi, pt.g_qc);
            }
        }
        result.optimal_band[t1] = {lo, hi};
    }
    return result;
}

}  // namespace calib
