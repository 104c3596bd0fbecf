#include "calib/benchmarking.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>

#include "calib/rng.hpp"
#include "calib/rotations.hpp"

namespace calib {

namespace {

using cd = std::complex<double>;
using Matrix2cd = Eigen::Matrix2cd;
using Matrix4cd = Eigen::Matrix4cd;
using MatrixXcd = Eigen::MatrixXcd;
constexpr cd kI{0.0, 1.0};

// --- single-qubit Clifford group -------------------------------------------

std::uint64_t phase_canonical_fingerprint(const MatrixXcd& u) {
    // canonicalize global phase by the first entry of largest magnitude
    Eigen::Index bi = 0, bj = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
        for (Eigen::Index j = 0; j < u.cols(); ++j) {
            if (std::abs(u(i, j)) > best + 1e-9) {
                best = std::abs(u(i, j));
                bi = i;
                bj = j;
            }
        }
    }
    const cd ph = u(bi, bj) / std::abs(u(bi, bj));
    std::uint64_t hash = 1469598103934665603ULL;
    auto mix = [&hash](long v) {
        hash ^= static_cast<std::uint64_t>(v);
        hash *= 1099511628211ULL;
    };
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
        for (Eigen::Index j = 0; j < u.cols(); ++j) {
            const cd z = u(i, j) / ph;
            mix(std::lround(z.real() * 4096.0));
            mix(std::lround(z.imag() * 4096.0));
        }
    }
    return hash;
}

std::vector<Matrix2cd> build_c1() {
    const Matrix2cd x90 = rotation_matrix(Axis::X, kPi / 2.0);
    const Matrix2cd y90 = rotation_matrix(Axis::Y, kPi / 2.0);
    std::vector<Matrix2cd> group{Matrix2cd::Identity()};
    std::map<std::uint64_t, bool> seen;
    seen[phase_canonical_fingerprint(Matrix2cd::Identity())] = true;
    bool grew = true;
    while (grew) {
        grew = false;
        const auto snapshot = group;
        for (const auto& g : snapshot) {
            for (const auto& gen : {x90, y90}) {
                const Matrix2cd cand = gen * g;
                const auto fp = phase_canonical_fingerprint(cand);
                if (!seen.count(fp)) {
                    seen[fp] = true;
                    group.push_back(cand);
                    grew = true;
                }
            }
        }
    }
    if (group.size() != 24) throw std::logic_error("single-qubit Clifford closure != 24");
    return group;
}

Matrix4cd kron2(const Matrix2cd& a, const Matrix2cd& b) {
    Matrix4cd out;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
        }
    }
    return out;
}

// Axis-cycling Clifford V (X -> Y -> Z -> X), a 2pi/3 rotation about (1,1,1).
Matrix2cd axis_cycle() {
    Matrix2cd v;
    const double s = 0.5;
    v << cd(s, -s), cd(-s, -s), cd(s, -s), cd(s, s);
    return v;
}

struct TwoQubitCosets {
    std::vector<Matrix4cd> reps;  // 20 coset representatives
};

const TwoQubitCosets& cosets() {
    static const TwoQubitCosets c = [] {
        TwoQubitCosets out;
        Matrix4cd cz = Matrix4cd::Identity();
        cz(3, 3) = -1.0;
        Matrix4cd iswap = Matrix4cd::Zero();
        iswap(0, 0) = 1.0;
        iswap(3, 3) = 1.0;
        iswap(1, 2) = kI;
        iswap(2, 1) = kI;
        Matrix4cd swap = Matrix4cd::Zero();
        swap(0, 0) = swap(3, 3) = 1.0;
        swap(1, 2) = swap(2, 1) = 1.0;

        const Matrix2cd v = axis_cycle();
        const Matrix2cd id = Matrix2cd::Identity();
        const std::vector<Matrix2cd> vset{id, v, (v * v).eval()};

        out.reps.push_back(Matrix4cd::Identity());
        for (const auto& va : vset) {
            for (const auto& vb : vset) {
                out.reps.push_back(kron2(va, vb) * cz);
            }
        }
        for (const auto& va : vset) {
            for (const auto& vb : vset) {
                out.reps.push_back(kron2(va, vb) * iswap);
            }
        }
        out.reps.push_back(swap);
        return out;
    }();
    return c;
}

}  // namespace

const std::vector<Matrix2cd>& single_qubit_cliffords() {
    static const std::vector<Matrix2cd> group = build_c1();
    return group;
}

Matrix4cd sample_two_qubit_clifford(Rng& rng) {
    const auto& c1 = single_qubit_cliffords();
    const auto& cs = cosets();
    const auto& a = c1[rng.uniform_index(c1.size())];
    const auto& b = c1[rng.uniform_index(c1.size())];
    const auto& rep = cs.reps[rng.uniform_index(cs.reps.size())];
    return kron2(a, b) * rep;
}

std::size_t count_two_qubit_cliffords() {
    const auto& c1 = single_qubit_cliffords();
    const auto& cs = cosets();
    std::map<std::uint64_t, bool> seen;
    for (const auto& a : c1) {
        for (const auto& b : c1) {
            const Matrix4cd ab = kron2(a, b);
            for (const auto& rep : cs.reps) {
                seen[phase_canonical_fingerprint((ab * rep).eval())] = true;
            }
        }
    }
    return seen.size();
}

EpsilonCz epsilon_cz_from_quadratic(const QuadraticErrorModel& model) {
    EpsilonCz out;
    out.value = 2.0 * model.a + model.b;
    out.sigma = std::sqrt(std::max(
        0.0, 4.0 * model.covariance(0, 0) + model.covariance(1, 1) +
                 4.0 * model.covariance(0, 1)));
    return out;
}

double clifford_error_estimate(double eps_cz, double eps_sx) {
    if (eps_cz < 0.0 || eps_cz >= 1.0 || eps_sx < 0.0 || eps_sx >= 1.0) {
        throw std::invalid_argument("clifford_error_estimate: inputs must be in [0,1)");
    }
    return 1.0 - std::pow(1.0 - eps_cz, kCzPerClifford2q) *
                     std::pow(1.0 - eps_sx, kSqrtXPerClifford2q);
}

// --- two-qutrit channel simulation ------------------------------------------

namespace {

// Basis: |q1 q2> with q in {0,1,2}; index = 3*q1 + q2.
constexpr int kDim = 9;
using Matrix9cd = Eigen::Matrix<cd, kDim, kDim>;

Matrix9cd embed_two_qubit(const Matrix4cd& u) {
    Matrix9cd out = Matrix9cd::Identity();
    const int map[4] = {0, 1, 3, 4};  // |00>,|01>,|10>,|11>
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            out(map[i], map[j]) = u(i, j);
        }
    }
    return out;
}

struct PauliSet {
    std::vector<Matrix9cd> q1;  // 4 embedded Paulis on qubit 1
    std::vector<Matrix9cd> q2;
    std::vector<Matrix9cd> two;  // 16 products
};

const PauliSet& paulis() {
    static const PauliSet ps = [] {
        PauliSet out;
        Matrix2cd p[4];
        p[0] = Matrix2cd::Identity();
        p[1] << 0, 1, 1, 0;
        p[2] << 0, cd(0, -1), cd(0, 1), 0;
        p[3] << 1, 0, 0, -1;
        auto embed = [](const Matrix2cd& m, int qubit) {
            Matrix9cd out = Matrix9cd::Zero();
            // level 2 of the addressed qutrit is untouched
            for (int k = 0; k < 3; ++k) {
                const int i2 = qubit == 0 ? 3 * 2 + k : 3 * k + 2;
                out(i2, i2) = 1.0;
            }
            for (int i = 0; i < 2; ++i) {
                for (int j = 0; j < 2; ++j) {
                    for (int k = 0; k < 3; ++k) {
                        const int r = qubit == 0 ? 3 * i + k : 3 * k + i;
                        const int c = qubit == 0 ? 3 * j + k : 3 * k + j;
                        out(r, c) = m(i, j);
                    }
                }
            }
            return out;
        };
        for (int i = 0; i < 4; ++i) {
            out.q1.push_back(embed(p[i], 0));
            out.q2.push_back(embed(p[i], 1));
        }
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) {
                out.two.push_back(out.q1[i] * out.q2[j]);
            }
        }
        return out;
    }();
    return ps;
}

void apply_unitary(Matrix9cd& rho, const Matrix9cd& u) { rho = u * rho * u.adjoint(); }

// Full computational-subspace twirl: (1/16) sum_P P rho P.
Matrix9cd pauli_twirl(const Matrix9cd& rho) {
    const auto& ps = paulis();
    Matrix9cd acc = Matrix9cd::Zero();
    for (const auto& p : ps.two) acc += p * rho * p.adjoint();
    return acc / 16.0;
}

void depolarize_2q(Matrix9cd& rho, double q) {
    if (q <= 0.0) return;
    rho = (1.0 - q) * rho + q * pauli_twirl(rho);
}

void depolarize_1q(Matrix9cd& rho, int qubit, double q) {
    if (q <= 0.0) return;
    const auto& ps = paulis();
    const auto& set = qubit == 0 ? ps.q1 : ps.q2;
    Matrix9cd acc = Matrix9cd::Zero();
    for (const auto& p : set) acc += p * rho * p.adjoint();
    rho = (1.0 - q) * rho + (q / 4.0) * acc;
}

// Leakage/seepage Kraus channel on one qutrit: computational population
// leaks to |2> at rate L, |2> seeps back at total rate s.
void leak_channel(Matrix9cd& rho, int qubit, double L, double s) {
    if (L <= 0.0 && s <= 0.0) return;
    auto idx = [qubit](int level, int other) {
        return qubit == 0 ? 3 * level + other : 3 * other + level;
    };
    std::vector<Matrix9cd> kraus;
    Matrix9cd k0 = Matrix9cd::Zero();
    for (int lvl = 0; lvl < 3; ++lvl) {
        const double keep = lvl == 2 ? std::sqrt(1.0 - s) : std::sqrt(1.0 - L);
        for (int o = 0; o < 3; ++o) k0(idx(lvl, o), idx(lvl, o)) = keep;
    }
    kraus.push_back(k0);
    for (int x = 0; x < 2; ++x) {
        Matrix9cd k = Matrix9cd::Zero();
        for (int o = 0; o < 3; ++o) k(idx(2, o), idx(x, o)) = std::sqrt(L);
        kraus.push_back(k);
    }
    for (int x = 0; x < 2; ++x) {
        Matrix9cd k = Matrix9cd::Zero();
        for (int o = 0; o < 3; ++o) k(idx(x, o), idx(2, o)) = std::sqrt(s / 2.0);
        kraus.push_back(k);
    }
    Matrix9cd out = Matrix9cd::Zero();
    for (const auto& k : kraus) out += k * rho * k.adjoint();
    rho = out;
}

Matrix9cd coherent_residual_unitary(double theta) {
    // rotation in span{|11>, |02>} = indices {4, 2}
    Matrix9cd u = Matrix9cd::Identity();
    const double c = std::cos(theta / 2.0), s = std::sin(theta / 2.0);
    u(4, 4) = c;
    u(2, 2) = c;
    u(4, 2) = cd(0.0, -s);
    u(2, 4) = cd(0.0, -s);
    return u;
}

struct SequenceOutcome {
    double survival = 0.0;  // P(|00>)
    double leak_q1 = 0.0;
    double leak_q2 = 0.0;
};

SequenceOutcome run_sequence(const RbChannelParams& ch, long m, long n_interleave, Rng& rng) {
    Matrix9cd rho = Matrix9cd::Zero();
    rho(0, 0) = 1.0;
    Matrix4cd cz4 = Matrix4cd::Identity();
    cz4(3, 3) = -1.0;
    const Matrix9cd cz9 = embed_two_qubit(cz4);
    const Matrix9cd residual = coherent_residual_unitary(ch.coherent_residual);

    Matrix4cd total = Matrix4cd::Identity();
    for (long step = 0; step < m; ++step) {
        const Matrix4cd c = sample_two_qubit_clifford(rng);
        apply_unitary(rho, embed_two_qubit(c));
        depolarize_1q(rho, 0, ch.depol_1q);
        depolarize_1q(rho, 1, ch.depol_1q);
        total = c * total;
        for (long g = 0; g < n_interleave; ++g) {
            apply_unitary(rho, cz9);
            apply_unitary(rho, residual);
            leak_channel(rho, 0, ch.leak_per_cz_q1, ch.seepage);
            leak_channel(rho, 1, ch.leak_per_cz_q2, ch.seepage);
            depolarize_2q(rho, ch.depol_2q);
            total = cz4 * total;
        }
    }
    // recovery Clifford (the exact inverse is itself a Clifford)
    const Matrix4cd rec = total.adjoint();
    apply_unitary(rho, embed_two_qubit(rec));
    depolarize_1q(rho, 0, ch.depol_1q);
    depolarize_1q(rho, 1, ch.depol_1q);

    SequenceOutcome out;
    out.survival = rho(0, 0).real();
    for (int o = 0; o < 3; ++o) {
        out.leak_q1 += rho(3 * 2 + o, 3 * 2 + o).real();
        out.leak_q2 += rho(3 * o + 2, 3 * o + 2).real();
    }
    return out;
}

}  // namespace

IterativeIrbResult simulate_iterative_irb(const RbChannelParams& channels,
                                          const std::vector<long>& n_list,
                                          const std::vector<long>& sequence_lengths,
                                          long sequences_per_length, long shots,
                                          std::uint64_t seed) {
    if (n_list.empty()) throw std::invalid_argument("simulate_iterative_irb: empty n_list");
    if (sequence_lengths.empty() || sequences_per_length < 1) {
        throw std::invalid_argument("simulate_iterative_irb: invalid sequence config");
    }

    IterativeIrbResult result;
    result.lengths = sequence_lengths;

    // reference (n = 0) plus each interleave count
    std::vector<long> all_n{0};
    for (long n : n_list) {
        if (n < 0) throw std::invalid_argument("simulate_iterative_irb: negative n");
        if (n > 0) all_n.push_back(n);
    }
    result.n_list = std::vector<long>(all_n.begin() + 1, all_n.end());

    Rng master(seed);
    std::vector<double> rates(all_n.size()), rate_sigmas(all_n.size());
    result.survival.resize(all_n.size());

    for (std::size_t ni = 0; ni < all_n.size(); ++ni) {
        const long n = all_n[ni];
        std::vector<double> xs, ys, ws;
        LeakageCurve lc1, lc2;
        lc1.n = n;
        lc1.qubit = 0;
        lc2.n = n;
        lc2.qubit = 1;
        for (std::size_t li = 0; li < sequence_lengths.size(); ++li) {
            const long m = sequence_lengths[li];
            double surv = 0.0, l1 = 0.0, l2 = 0.0;
            for (long s = 0; s < sequences_per_length; ++s) {
                Rng rng = master.fork(ni * 1000003ULL + li * 1009ULL + s);
                const auto o = run_sequence(channels, m, n, rng);
                double p = o.survival;
                if (shots > 0) {
                    p = static_cast<double>(rng.binomial(shots, std::min(1.0, std::max(0.0, p)))) /
                        static_cast<double>(shots);
                }
                surv += p;
                l1 += o.leak_q1;
                l2 += o.leak_q2;
            }
            surv /= sequences_per_length;
            l1 /= sequences_per_length;
            l2 /= sequences_per_length;
            xs.push_back(static_cast<double>(m));
            ys.push_back(surv);
            const double var = std::max(surv * (1.0 - surv), 1e-6) /
                               static_cast<double>(sequences_per_length * std::max<long>(shots, 1));
            ws.push_back(1.0 / var);
            result.survival[ni].push_back(surv);
            lc1.lengths.push_back(m);
            lc2.lengths.push_back(m);
            lc1.population.push_back(l1);
            lc2.population.push_back(l2);
            lc1.sigma.push_back(std::sqrt(var));
            lc2.sigma.push_back(std::sqrt(var));
        }
        auto fit = fit_exponential(xs, ys, ExponentialModel::Single, ws);
        rates[ni] = fit.value("rate");
        rate_sigmas[ni] = fit.sigma("rate");
        if (n > 0) {
            result.leakage.push_back(lc1);
            result.leakage.push_back(lc2);
        }
    }

    result.reference_rate = rates[0];
    result.reference_rate_sigma = rate_sigmas[0];
    for (std::size_t ni = 1; ni < all_n.size(); ++ni) {
        IrbRecord rec;
        rec.n = all_n[ni];
        const double ratio = rates[ni] / rates[0];
        rec.epsilon = (1.0 - ratio) * 3.0 / 4.0;
        const double rel = std::sqrt(std::pow(rate_sigmas[ni] / rates[ni], 2) +
                                     std::pow(rate_sigmas[0] / rates[0], 2));
        rec.sigma = 0.75 * std::abs(ratio) * rel;
        result.records.push_back(rec);
    }
    return result;
}

QuadraticErrorModel fit_iterative_irb(const std::vector<IrbRecord>& records) {
    std::vector<long> distinct;
    for (const auto& r : records) {
        if (std::find(distinct.begin(), distinct.end(), r.n) == distinct.end()) {
            distinct.push_back(r.n);
        }
    }
    if (distinct.size() < 3) {
        throw std::invalid_argument("fit_iterative_irb: need >= 3 distinct n");
    }
    const std::size_t m = records.size();
    Eigen::MatrixXd a(m, 3);
    Eigen::VectorXd y(m);
    Eigen::VectorXd w(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double n = static_cast<double>(records[i].n);
        a(i, 0) = n * n;
        a(i, 1) = n;
        a(i, 2) = 1.0;
        y(i) = records[i].epsilon;
        const double s = records[i].sigma > 0 ? records[i].sigma : 1.0;
        w(i) = 1.0 / (s * s);
    }
    const Eigen::MatrixXd atw = a.transpose() * w.asDiagonal();
    const Eigen::Matrix3d ata = atw * a;
    const Eigen::Vector3d coef = ata.ldlt().solve(atw * y);
    QuadraticErrorModel model;
    model.a = coef(0);
    model.b = coef(1);
    model.c = coef(2);
    Eigen::Matrix3d cov = ata.inverse();
    // scale by reduced chi-square when there are spare degrees of freedom
    if (m > 3) {
        const Eigen::VectorXd r = y - a * coef;
        const double chi2 = (w.asDiagonal() * r).dot(r);
        cov *= chi2 / static_cast<double>(m - 3);
    }
    model.covariance = cov;
    return model;
}

LeakagePerGate leakage_per_gate(const std::vector<LeakageCurve>& curves, int qubit) {
    std::vector<double> ns, lblk, lsig;
    for (const auto& c : curves) {
        if (c.qubit != qubit || c.n <= 0) continue;
        std::vector<double> xs(c.lengths.begin(), c.lengths.end());
        std::vector<double> ws;
        for (double s : c.sigma) ws.push_back(1.0 / std::max(s * s, 1e-12));
        auto fit = fit_exponential(xs, c.population, ExponentialModel::Single, ws);
        // p_f(m) = A (1 - lambda^m) + p0 lambda^m  ->  offset = A = L/(L+s),
        // rate lambda = 1 - L_blk - s_blk, per-block leak L_blk = A (1 - lambda)
        const double lambda = fit.value("rate");
        const double a = fit.value("offset");
        const double l_block = a * (1.0 - lambda);
        ns.push_back(static_cast<double>(c.n));
        lblk.push_back(l_block);
        const double da = fit.sigma("offset");
        const double dl = fit.sigma("rate");
        lsig.push_back(std::hypot(da * (1.0 - lambda), dl * a));
    }
    LeakagePerGate out;
    if (ns.size() < 2) {
        out.converged = false;
        return out;
    }
    // weighted linear fit L_blk(n) = offset + slope n
    double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
    for (std::size_t i = 0; i < ns.size(); ++i) {
        const double w = 1.0 / std::max(lsig[i] * lsig[i], 1e-18);
        sw += w;
        swx += w * ns[i];
        swy += w * lblk[i];
        swxx += w * ns[i] * ns[i];
        swxy += w * ns[i] * lblk[i];
    }
    const double det = sw * swxx - swx * swx;
    out.value = (sw * swxy - swx * swy) / det;
    out.clifford_offset = (swxx * swy - swx * swxy) / det;
    out.sigma = std::sqrt(std::max(sw / det, 0.0));
    return out;
}

// --- single-qubit purity RB --------------------------------------------------

namespace {

using Matrix3cd = Eigen::Matrix3cd;

Matrix3cd embed_1q(const Matrix2cd& u) {
    Matrix3cd out = Matrix3cd::Identity();
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) out(i, j) = u(i, j);
    }
    return out;
}

void leak_channel_1q(Matrix3cd& rho, double L, double s) {
    if (L <= 0.0 && s <= 0.0) return;
    std::vector<Matrix3cd> kraus;
    Matrix3cd k0 = Matrix3cd::Zero();
    k0(0, 0) = std::sqrt(1.0 - L);
    k0(1, 1) = std::sqrt(1.0 - L);
    k0(2, 2) = std::sqrt(1.0 - s);
    kraus.push_back(k0);
    for (int x = 0; x < 2; ++x) {
        Matrix3cd k = Matrix3cd::Zero();
        k(2, x) = std::sqrt(L);
        kraus.push_back(k);
        Matrix3cd k2 = Matrix3cd::Zero();
        k2(x, 2) = std::sqrt(s / 2.0);
        kraus.push_back(k2);
    }
    Matrix3cd out = Matrix3cd::Zero();
    for (const auto& k : kraus) out += k * rho * k.adjoint();
    rho = out;
}

void depolarize_1q3(Matrix3cd& rho, double q) {
    if (q <= 0.0) return;
    Matrix2cd p[4];
    p[0] = Matrix2cd::Identity();
    p[1] << 0, 1, 1, 0;
    p[2] << 0, cd(0, -1), cd(0, 1), 0;
    p[3] << 1, 0, 0, -1;
    Matrix3cd acc = Matrix3cd::Zero();
    for (const auto& pm : p) {
        const Matrix3cd e = embed_1q(pm);
        acc += e * rho * e.adjoint();
    }
    rho = (1.0 - q) * rho + (q / 4.0) * acc;
}

}  // namespace

PurityRbData simulate_purity_rb(const OneQubitChannel& channel, const std::vector<long>& lengths,
                                long sequences_per_length, long shots, std::uint64_t seed) {
    PurityRbData out;
    out.lengths = lengths;
    const auto& c1 = single_qubit_cliffords();
    const Matrix3cd extra = embed_1q(rotation_matrix(Axis::X, channel.coherent_residual));
    Rng master(seed);
    for (std::size_t li = 0; li < lengths.size(); ++li) {
        const long m = lengths[li];
        double zacc = 0.0, pacc = 0.0, lacc = 0.0;
        for (long s = 0; s < sequences_per_length; ++s) {
            Rng rng = master.fork(li * 100003ULL + s);
            Matrix3cd rho = Matrix3cd::Zero();
            rho(0, 0) = 1.0;
            Matrix2cd total = Matrix2cd::Identity();
            for (long step = 0; step < m; ++step) {
                const auto& c = c1[rng.uniform_index(c1.size())];
                const Matrix3cd c3 = embed_1q(c);
                rho = c3 * rho * c3.adjoint();
                rho = extra * rho * extra.adjoint();
                depolarize_1q3(rho, channel.depol);
                leak_channel_1q(rho, channel.leak, channel.seep);
                total = c * total;
            }
            const Matrix3cd rec = embed_1q(Matrix2cd(total.adjoint()));
            rho = rec * rho * rec.adjoint();
            // three-state discrimination of the final state
            double p0 = rho(0, 0).real();
            double p1 = rho(1, 1).real();
            double p2 = rho(2, 2).real();
            const Matrix2cd comp = rho.topLeftCorner<2, 2>();
            const double purity = (comp * comp).trace().real();
            double sqrtp = std::sqrt(std::max(0.0, 2.0 * purity - 1.0));
            if (shots > 0) {
                const double tot = static_cast<double>(shots);
                long c0 = 0, c1 = 0, c2 = 0;
                for (long sh = 0; sh < shots; ++sh) {
                    const double u = rng.uniform();
                    if (u < p0) {
                        ++c0;
                    } else if (u < p0 + p1) {
                        ++c1;
                    } else {
                        ++c2;
                    }
                }
                p0 = c0 / tot;
                p1 = c1 / tot;
                p2 = c2 / tot;
                sqrtp += rng.normal(0.0, 0.5 / std::sqrt(tot));
            }
            zacc += p0 - p1;
            pacc += sqrtp;
            lacc += p2;
        }
        const double inv = 1.0 / static_cast<double>(sequences_per_length);
        out.z_signal.push_back(zacc * inv);
        out.sqrt_purity.push_back(pacc * inv);
        out.leak_pop.push_back(lacc * inv);
        const double sig = std::sqrt(0.25 / static_cast<double>(
                                                sequences_per_length * std::max<long>(shots, 1)));
        out.z_sigma.push_back(sig);
        out.p_sigma.push_back(sig);
        out.leak_sigma.push_back(sig);
    }
    return out;
}

PurityDecomposition decompose_purity_rb(const FitResult& z_fit, const FitResult& purity_fit,
                                        double leakage_per_clifford, double leakage_sigma) {
    if (!z_fit.converged || !purity_fit.converged) {
        throw std::invalid_argument("decompose_purity_rb: fits must be converged");
    }
    PurityDecomposition out;
    const double rz = z_fit.value("rate");
    const double ru = purity_fit.value("rate");
    const double per_cliff_total = 0.5 * (1.0 - rz);
    const double per_cliff_incoh = 0.5 * (1.0 - ru);
    const double per_cliff_leak = leakage_per_clifford;
    double per_cliff_coh = per_cliff_total - per_cliff_incoh - per_cliff_leak;
    const double sig_total = 0.5 * z_fit.sigma("rate");
    const double sig_incoh = 0.5 * purity_fit.sigma("rate");
    const double sig_coh = std::sqrt(sig_total * sig_total + sig_incoh * sig_incoh +
                                     leakage_sigma * leakage_sigma);
    if (per_cliff_coh < 0.0) {
        out.coherent_floored = true;
        if (per_cliff_coh < -2.0 * sig_coh) out.flagged_inconsistent = true;
        per_cliff_coh = 0.0;
    }
    out.eps_total = per_cliff_total / kSqrtXPerClifford1q;
    out.eps_incoherent = per_cliff_incoh / kSqrtXPerClifford1q;
    out.eps_coherent = per_cliff_coh / kSqrtXPerClifford1q;
    out.eps_leakage = per_cliff_leak / kSqrtXPerClifford1q;
    out.total_sigma = sig_total / kSqrtXPerClifford1q;
    out.incoherent_sigma = sig_incoh / kSqrtXPerClifford1q;
    return out;
}

}  // namespace calib
