#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <set>
#include <string>

#include "calib/amp_models.hpp"
#include "calib/benchmarking.hpp"
#include "calib/circuit_sim.hpp"
#include "calib/device_sim.hpp"
#include "calib/error_budget.hpp"
#include "calib/estimators.hpp"
#include "calib/readout_qnd.hpp"
#include "calib/rng.hpp"
#include "calib/rotations.hpp"
#include "report_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace calib;
using calib::tools::CsvWriter;
using calib::tools::SvgPlot;
using calib::tools::write_file;

namespace {

int log_level() {
    const char* env = std::getenv("CALIB_LOG");
    if (!env) return 1;
    const std::string v = env;
    if (v == "debug") return 2;
    if (v == "quiet") return 0;
    return 1;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[calib] " << msg << "\n";
}

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& pointer, const std::string& what)
        : std::runtime_error(what + " (at " + pointer + ")") {}
};

// Schema field spec: name -> (type, required)
struct Field {
    std::string name;
    json::value_t type;
    bool required = false;
};

void validate_object(const json& j, const std::vector<Field>& fields, const std::string& prefix,
                     std::vector<std::string>* defaulted) {
    if (!j.is_object()) throw ConfigError(prefix.empty() ? "/" : prefix, "expected an object");
    std::set<std::string> known;
    for (const auto& f : fields) known.insert(f.name);
    for (const auto& [key, val] : j.items()) {
        if (!known.count(key)) throw ConfigError(prefix + "/" + key, "unknown key");
    }
    for (const auto& f : fields) {
        if (!j.contains(f.name)) {
            if (f.required) throw ConfigError(prefix + "/" + f.name, "missing required field");
            if (defaulted) defaulted->push_back(prefix + "/" + f.name);
            continue;
        }
        const auto& v = j.at(f.name);
        const bool num_ok = f.type == json::value_t::number_float &&
                            (v.is_number_float() || v.is_number_integer());
        const bool int_ok = f.type == json::value_t::number_integer && v.is_number_integer();
        const bool arr_ok = f.type == json::value_t::array && v.is_array();
        const bool str_ok = f.type == json::value_t::string && v.is_string();
        const bool obj_ok = f.type == json::value_t::object && v.is_object();
        if (!(num_ok || int_ok || arr_ok || str_ok || obj_ok)) {
            throw ConfigError(prefix + "/" + f.name, "wrong type");
        }
    }
}

void require_positive(const json& j, const std::string& key, const std::string& prefix) {
    if (j.contains(key) && j.at(key).get<double>() <= 0) {
        throw ConfigError(prefix + "/" + key, "must be positive");
    }
}

constexpr json::value_t kNum = json::value_t::number_float;
constexpr json::value_t kInt = json::value_t::number_integer;
constexpr json::value_t kArr = json::value_t::array;
constexpr json::value_t kStr = json::value_t::string;
constexpr json::value_t kObj = json::value_t::object;

const std::vector<std::string> kCampaignKinds = {
    "palea",      "standard-ea", "floquet", "estimator-compare", "irb",
    "purity-rb",  "rilb",        "readout", "budget",            "device-sweep"};

struct RunContext {
    fs::path out_dir;
    std::uint64_t seed = 1;
    int workers = 0;
    std::set<std::string> formats{"csv", "json", "svg"};

    bool want(const std::string& f) const { return formats.count(f) > 0; }
};

// ---------------------------------------------------------------------------
// campaign: palea
// ---------------------------------------------------------------------------

void validate_palea(const json& j, std::vector<std::string>* defaulted) {
    validate_object(j,
                    {{"kind", kStr, true},
                     {"theta", kNum, true},
                     {"alpha", kNum, false},
                     {"beta", kNum, false},
                     {"n_max", kInt, false},
                     {"shots", kInt, false},
                     {"phase_samples", kInt, false},
                     {"readout_error", kNum, false},
                     {"seed", kInt, false}},
                    "", defaulted);
    require_positive(j, "shots", "");
    require_positive(j, "n_max", "");
    require_positive(j, "phase_samples", "");
}

void run_palea_campaign(const json& j, const RunContext& ctx) {
    CycleSpec spec;
    spec.gate_11_02 = TwoLevelUnitary{j.value("alpha", 0.3), j.value("theta", 0.0),
                                      j.value("beta", -0.1), 0.0};
    spec.dd_layer = std::make_pair(0.0, 0.0);
    const long n_max = j.value("n_max", 30L);
    const long shots = j.value("shots", 200L);
    const long phases = j.value("phase_samples", 40L);
    NoiseSpec noise;
    noise.readout_assignment_error = j.value("readout_error", 0.0);

    const auto table = run_palea(spec, n_max, shots, phases, noise, ctx.seed);

    // aggregate the unwanted population over the phase draws
    std::vector<UpPoint> series;
    CsvWriter csv({"n", "up", "sigma"});
    std::vector<std::vector<double>> heat(phases);
    for (std::size_t c = 0; c < table.cycles.size(); ++c) {
        long wanted = 0, total = 0;
        for (std::size_t s = 0; s < table.sweep_values.size(); ++s) {
            const long c11 = table.count_of(s, c, "11");
            const long c02 = table.count_of(s, c, "02");
            wanted += table.cycles[c] % 2 == 0 ? c11 : c02;
            total += c11 + c02;
        }
        const double up = total > 0 ? 1.0 - static_cast<double>(wanted) / total : 0.5;
        const double sigma = total > 0 ? std::sqrt(std::max(up * (1 - up), 0.25 / total) / total)
                                       : 0.5;
        series.push_back({table.cycles[c], up, sigma});
        csv.row({static_cast<double>(table.cycles[c]), up, sigma});
    }
    for (long s = 0; s < phases; ++s) {
        const auto ups = up_values(table, s, "11", "02");
        heat[s] = ups;
    }

    const auto fit = fit_palea_theta(series);
    json out{{"theta", fit.value("theta")},
             {"theta_sigma", fit.sigma("theta")},
             {"amplitude", fit.value("amplitude")},
             {"offset", fit.value("offset")},
             {"converged", fit.converged}};
    if (ctx.want("json")) write_file(ctx.out_dir / "theta_fit.json", out.dump(2) + "\n");
    if (ctx.want("csv")) write_file(ctx.out_dir / "up_map.csv", csv.str());
    if (ctx.want("svg")) {
        SvgPlot plot(640, 420);
        std::vector<double> xs, ys, fy;
        for (const auto& pt : series) {
            xs.push_back(static_cast<double>(pt.n));
            ys.push_back(pt.value);
            fy.push_back(fit.value("offset") +
                         fit.value("amplitude") *
                             palea_signal_regularized(fit.value("theta"), pt.n));
        }
        plot.add_points(xs, ys, "#1f77b4");
        plot.add_line(xs, fy, "#d62728");
        plot.set_labels("cycles n", "unwanted population", "phase-averaged amplification");
        write_file(ctx.out_dir / "up_map.svg", plot.str());
    }
}

// ---------------------------------------------------------------------------
// campaign: standard-ea
// ---------------------------------------------------------------------------

void validate_standard_ea(const json& j, std::vector<std::string>* defaulted) {
    validate_object(j,
                    {{"kind", kStr, true},
                     {"theta", kNum, true},
                     {"phi", kNum, false},
                     {"n_max", kInt, false},
                     {"shots", kInt, false},
                     {"readout_error", kNum, false},
                     {"seed", kInt, false}},
                    "", defaulted);
    require_positive(j, "shots", "");
}

void run_standard_ea_campaign(const json& j, const RunContext& ctx) {
    const double theta = j.at("theta").get<double>();
    const double phi = j.value("phi", 0.0);
    CycleSpec spec;
    spec.gate_11_02 = TwoLevelUnitary{phi / 2.0, theta, phi / 2.0, 0.0};
    const long n_max = j.value("n_max", 60L);
    const long shots = j.value("shots", 500L);
    NoiseSpec noise;
    noise.readout_assignment_error = j.value("readout_error", 0.0);
    const auto table = run_standard_ea(spec, n_max, shots, noise, ctx.seed);

    CsvWriter csv({"n", "pop_02", "model"});
    std::vector<double> xs, ys, fy;
    for (std::size_t c = 0; c < table.cycles.size(); ++c) {
        const long n = table.cycles[c];
        const double p02 = static_cast<double>(table.count_of(0, c, "02")) / shots;
        const double model = 1.0 - standard_ea_signal(theta, phi, n);
        csv.row({static_cast<double>(n), p02, model});
        xs.push_back(static_cast<double>(n));
        ys.push_back(p02);
        fy.push_back(model);
    }
    if (ctx.want("csv")) write_file(ctx.out_dir / "signal.csv", csv.str());
    if (ctx.want("json")) {
        json out{{"theta", theta},
                 {"phi", phi},
                 {"mu", mu_angle(theta, phi)},
                 {"amplitude_2b", standard_ea_amplitude(theta, phi)}};
        write_file(ctx.out_dir / "summary.json", out.dump(2) + "\n");
    }
    if (ctx.want("svg")) {
        SvgPlot plot(640, 420);
        plot.add_points(xs, ys, "#1f77b4");
        plot.add_line(xs, fy, "#d62728");
        plot.set_labels("cycles n", "|02> population", "standard error amplification");
        write_file(ctx.out_dir / "signal.svg", plot.str());
    }
}

// ---------------------------------------------------------------------------
// campaign: floquet
// ---------------------------------------------------------------------------

void validate_floquet(const json& j, std::vector<std::string>* defaulted) {
    validate_object(j,
                    {{"kind", kStr, true},
                     {"theta", kNum, true},
                     {"phi", kNum, false},
                     {"n_max", kInt, false},
                     {"shots", kInt, false},
                     {"compensation_points", kInt, false},
                     {"readout_error", kNum, false},
                     {"seed", kInt, false}},
                    "", defaulted);
    require_positive(j, "shots", "");
}

void run_floquet_campaign(const json& j, const RunContext& ctx) {
    const double theta = j.at("theta").get<double>();
    const double phi = j.value("phi", 1.2);
    const long n_max = j.value("n_max", 40L);
    const long shots = j.value("shots", 400L);
    const long n_comp = j.value("compensation_points", 41L);
    CycleSpec spec;
    spec.gate_11_02 = TwoLevelUnitary{phi / 2.0, theta, phi / 2.0, 0.0};
    NoiseSpec noise;
    noise.readout_assignment_error = j.value("readout_error", 0.0);
    std::vector<double> comps;
    for (long k = 0; k < n_comp; ++k) comps.push_back(-kPi + kTwoPi * k / (n_comp - 1.0));
    const auto table = run_floquet(spec, comps, n_max, shots, noise, ctx.seed);

    CsvWriter csv({"compensation", "fitted_amplitude", "model_amplitude"});
    std::vector<double> xs, ys, fy;
    for (std::size_t s = 0; s < comps.size(); ++s) {
        std::vector<double> ns, pops;
        for (std::size_t c = 0; c < table.cycles.size(); ++c) {
            ns.push_back(static_cast<double>(table.cycles[c]));
            pops.push_back(static_cast<double>(table.count_of(s, c, "11")) / shots);
        }
        double amp = 0.0;
        try {
            auto fit = fit_sinusoid(ns, pops);
            amp = 2.0 * std::abs(fit.value("amplitude"));
        } catch (const std::exception&) {
            amp = 0.0;
        }
        const double model = standard_ea_amplitude(theta, phi + comps[s]);
        csv.row({comps[s], amp, model});
        xs.push_back(comps[s]);
        ys.push_back(amp);
        fy.push_back(model);
    }
    if (ctx.want("csv")) write_file(ctx.out_dir / "amplitude_vs_compensation.csv", csv.str());
    if (ctx.want("json")) {
        json out{{"theta", theta}, {"phi", phi}, {"fwhm_model", 2.0 * std::tan(theta / 2.0)}};
        write_file(ctx.out_dir / "summary.json", out.dump(2) + "\n");
    }
    if (ctx.want("svg")) {
        SvgPlot plot(640, 420);
        plot.add_points(xs, ys, "#1f77b4");
        plot.add_line(xs, fy, "#d62728");
        plot.set_labels("compensation (rad)", "oscillation amplitude 2B", "Floquet compensation");
        write_file(ctx.out_dir / "amplitude_vs_compensation.svg", plot.str());
    }
}

// ---------------------------------------------------------------------------
// campaign: estimator-compare
// ---------------------------------------------------------------------------

void validate_estimator_compare(const json& j, std::vector<std::string>* defaulted) {
    validate_object(j,
                    {{"kind", kStr, true},
                     {"theta", kNum, false},
                     {"budget", kInt, false},
                     {"budgets", kArr, false},
                     {"readout_error", kNum, false},
                     {"repetitions", kInt, false},
                     {"seed", kInt, false}},
                    "", defaulted);
    require_positive(j, "budget", "");
    require_positive(j, "repetitions", "");
}

void run_estimator_compare_campaign(const json& j, const RunContext& ctx) {
    const double theta = j.value("theta", 0.15);
    const long budget = j.value("budget", 4000L);
    const double eps = j.value("readout_error", 0.05);
    const long reps = j.value("repetitions", 200L);

    const auto cmp = run_estimator_comparison(theta, budget, eps, reps, ctx.seed);
    json out{{"theta", theta},
             {"budget", budget},
             {"repetitions", reps},
             {"mse", {{"palea", cmp.mse_palea}, {"meadd", cmp.mse_meadd},
                      {"floquet", cmp.mse_floquet}}},
             {"bias", {{"palea", cmp.bias_palea}, {"meadd", cmp.bias_meadd},
                       {"floquet", cmp.bias_floquet}}}};

    if (j.contains("budgets")) {
        CsvWriter csv({"budget", "mse_palea", "mse_meadd", "mse_floquet"});
        std::vector<double> lx, ly;
        for (const auto& b : j.at("budgets")) {
            const long nb = b.get<long>();
            const auto c = run_estimator_comparison(theta, nb, eps, reps, ctx.seed + nb);
            csv.row({static_cast<double>(nb), c.mse_palea, c.mse_meadd, c.mse_floquet});
            lx.push_back(std::log10(static_cast<double>(nb)));
            ly.push_back(std::log10(c.mse_palea));
        }
        // log-log slope of the PALEA MSE
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            sx += lx[i];
            sy += ly[i];
            sxx += lx[i] * lx[i];
            sxy += lx[i] * ly[i];
        }
        const double n = static_cast<double>(lx.size());
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        out["palea_mse_slope"] = slope;
        if (ctx.want("csv")) write_file(ctx.out_dir / "mse_vs_budget.csv", csv.str());
    }
    if (ctx.want("json")) write_file(ctx.out_dir / "mse.json", out.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// campaign: irb
// ---------------------------------------------------------------------------

void validate_irb(const json& j, std::vector<std::string>* defaulted) {
    validate_object(j,
                    {{"kind", kStr, true},
                     {"channels", kObj, false},
                     {"n_list", kArr, false},
                     {"lengths", kArr, false},
                     {"sequences", kInt, false},
                     {"shots", kInt, false},
                     {"seed", kInt, false}},
                    "", defaulted);
    if (j.contains("channels")) {
        validate_object(j.at("channels"),
                        {{"depol_1q", kNum, false},
                         {"depol_2q", kNum, false},
                         {"leak_q1", kNum, false},
                         {"leak_q2", kNum, false},
                         {"seepage", kNum, false},
                         {"coherent_residual", kNum, false}},
                        "/channels", defaulted);
    }
    require_positive(j, "sequences", "");
}

void run_irb_campaign(const json& j, const RunContext& ctx) {
    RbChannelParams ch;
    if (j.contains("channels")) {
        const auto& c = j.at("channels");
        ch.depol_1q = c.value("depol_1q", 0.0);
        ch.depol_2q = c.value("depol_2q", 5e-4);
        ch.leak_per_cz_q1 = c.value("leak_q1", 0.0);
        ch.leak_per_cz_q2 = c.value("leak_q2", 0.0);
        ch.seepage = c.value("seepage", 0.0);
        ch.coherent_residual = c.value("coherent_residual", 0.0);
    } else {
        ch.depol_2q = 5e-4;
    }
    std::vector<long> n_list = j.contains("n_list")
                                   ? j.at("n_list").get<std::vector<long>>()
                                   : std::vector<long>{1, 3, 5, 7, 9};
    std::vector<long> lengths = j.contains("lengths")
                                    ? j.at("lengths").get<std::vector<long>>()
                                    : std::vector<long>{1, 2, 4, 8, 16, 32, 64, 128};
    const long seqs = j.value("sequences", 30L);
    const long shots = j.value("shots", 400L);

    const auto res = simulate_iterative_irb(ch, n_list, lengths, seqs, shots, ctx.seed);
    const auto model = fit_iterative_irb(res.records);
    const auto eps = epsilon_cz_from_quadratic(model);

    CsvWriter decays({"n", "length", "survival"});
    for (std::size_t ni = 0; ni < res.survival.size(); ++ni) {
        for (std::size_t li = 0; li < res.lengths.size(); ++li) {
            const long n = ni == 0 ? 0 : res.n_list[ni - 1];
            decays.row({static_cast<double>(n), static_cast<double>(res.lengths[li]),
                        res.survival[ni][li]});
        }
    }
    CsvWriter records({"n", "epsilon", "sigma"});
    std::vector<double> xs, ys;
    for (const auto& r : res.records) {
        records.row({static_cast<double>(r.n), r.epsilon, r.sigma});
        xs.push_back(static_cast<double>(r.n));
        ys.push_back(r.epsilon);
    }
    json out{{"a", model.a},
             {"b", model.b},
             {"c", model.c},
             {"eps_cz", eps.value},
             {"eps_cz_sigma", eps.sigma},
             {"one_minus_eps_cz", 1.0 - eps.value},
             {"reference_rate", res.reference_rate}};
    if (ctx.want("csv")) {
        write_file(ctx.out_dir / "decays.csv", decays.str());
        write_file(ctx.out_dir / "records.csv", records.str());
    }
    if (ctx.want("json")) write_file(ctx.out_dir / "irb_fit.json", out.dump(2) + "\n");
    if (ctx.want("svg")) {
        SvgPlot plot(640, 420);
        plot.add_points(xs, ys, "#1f77b4");
        std::vector<double> fx, fy;
        for (double n = 0; n <= xs.back() + 0.5; n += 0.25) {
            fx.push_back(n);
            fy.push_back(model.a * n * n + model.b * n + model.c);
        }
        plot.add_line(fx, fy, "#d62728");
        plot.set_labels("interleaved CZ count n", "error per n-CZ block", "iterative IRB");
        write_file(ctx.out_dir / "records.svg", plot.str());
    }
}

// ---------------------------------------------------------------------------
// campaign: purity-rb
// ---------------------------------------------------------------------------

void validate_purity_rb(const json& j, std::vector<std::string>* defaulted) {
    validate_object(j,
                    {{"kind", kStr, true},
                     {"channel", kObj, false},
                     {"lengths", kArr, false},
                     {"sequences", kInt, false},
                     {"shots", kInt, false},
                     {"seed", kInt, false}},
                    "", defaulted);
    if (j.contains("channel")) {
        validate_object(j.at("channel"),
                        {{"depol", kNum, false},
                         {"coherent_residual", kNum, false},
                         {"leak", kNum, false},
                         {"seep", kNum, false}},
                        "/channel", defaulted);
    }
}

void run_purity_rb_campaign(const json& j, const RunContext& ctx) {
    OneQubitChannel ch;
    if (j.contains("channel")) {
        const auto& c = j.at("channel");
        ch.depol = c.value("depol", 4e-4);
        ch.coherent_residual = c.value("coherent_residual", 0.0);
        ch.leak = c.value("leak", 0.0);
        ch.seep = c.value("seep", 0.0);
    } else {
        ch.depol = 4e-4;
    }
    std::vector<long> lengths = j.contains("lengths")
                                    ? j.at("lengths").get<std::vector<long>>()
                                    : std::vector<long>{1, 2, 4, 8, 16, 32, 64, 128, 256, 512};
    const long seqs = j.value("sequences", 40L);
    const long shots = j.value("shots", 400L);

    const auto data = simulate_purity_rb(ch, lengths, seqs, shots, ctx.seed);
    std::vector<double> xs(lengths.begin(), lengths.end());
    std::vector<double> wz, wp;
    for (double s : data.z_sigma) wz.push_back(1.0 / (s * s));
    for (double s : data.p_sigma) wp.push_back(1.0 / (s * s));
    const auto zfit = fit_exponential(xs, data.z_signal, ExponentialModel::Single, wz);
    const auto pfit = fit_exponential(xs, data.sqrt_purity, ExponentialModel::Single, wp);

    // per-Clifford leakage from the LRB rate model
    LeakageCurve lc;
    lc.n = 1;
    lc.qubit = 0;
    lc.lengths = lengths;
    lc.population = data.leak_pop;
    lc.sigma = data.leak_sigma;
    const auto lpg = leakage_per_gate({lc}, 0);
    double leak_per_cliff = 0.0, leak_sigma = 0.0;
    if (ch.leak > 0.0) {
        std::vector<double> ws;
        for (double s : data.leak_sigma) ws.push_back(1.0 / (s * s));
        auto lfit = fit_exponential(xs, data.leak_pop, ExponentialModel::Single, ws);
        leak_per_cliff = lfit.value("offset") * (1.0 - lfit.value("rate"));
        leak_sigma = lfit.sigma("offset") * (1.0 - lfit.value("rate"));
    }
    (void)lpg;
    const auto decomp = decompose_purity_rb(zfit, pfit, leak_per_cliff, leak_sigma);

    CsvWriter csv({"length", "z_signal", "sqrt_purity", "leak_pop"});
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        csv.row({static_cast<double>(lengths[i]), data.z_signal[i], data.sqrt_purity[i],
                 data.leak_pop[i]});
    }
    json out{{"eps_total", decomp.eps_total},
             {"eps_incoherent", decomp.eps_incoherent},
             {"eps_coherent", decomp.eps_coherent},
             {"eps_leakage", decomp.eps_leakage},
             {"total_sigma", decomp.total_sigma},
             {"coherent_floored", decomp.coherent_floored}};
    if (ctx.want("csv")) write_file(ctx.out_dir / "decays.csv", csv.str());
    if (ctx.want("json")) write_file(ctx.out_dir / "decomposition.json", out.dump(2) + "\n");
    if (ctx.want("svg")) {
        SvgPlot plot(640, 420);
        plot.add_points(xs, data.z_signal, "#1f77b4");
        plot.add_points(xs, data.sqrt_purity, "#2ca02c");
        plot.set_labels("Clifford count", "signal", "purity RB");
        write_file(ctx.out_dir / "decays.svg", plot.str());
    }
}

// ---------------------------------------------------------------------------
// campaign: rilb
// ---------------------------------------------------------------------------

void validate_rilb(const json& j, std::vector<std::string>* defaulted) {
    validate_object(j,
                    {{"kind", kStr, true},
                     {"p", kNum, false},
                     {"L", kNum, false},
                     {"S", kNum, false},
                     {"e0", kNum, false},
                     {"e1", kNum, false},
                     {"h", kNum, false},
                     {"lambda", kNum, false},
                     {"rounds", kInt, false},
                     {"sequences", kInt, false},
                     {"seed", kInt, false}},
                    "", defaulted);
    require_positive(j, "rounds", "");
    require_positive(j, "sequences", "");
}

void run_rilb_campaign(const json& j, const RunContext& ctx) {
    auto model = MarkovReadoutModel::single_leak(j.value("p", 3e-3), j.value("L", 1e-2),
                                                 j.value("S", 0.2), j.value("e0", 0.01),
                                                 j.value("e1", 0.01), j.value("h", 0.005));
    model.lambda = j.value("lambda", 0.0);
    const long rounds = j.value("rounds", 120L);
    const long sequences = j.value("sequences", 500L);

    const auto seqs = simulate_rilb(model, rounds, sequences, ctx.seed);
    const auto corr = compute_correlations(seqs);
    const auto qnd = fit_qndness(corr, model.lambda);

    json out{{"Q", qnd.q},
             {"Q_sigma", qnd.q_sigma},
             {"one_minus_Q", 1.0 - qnd.q},
             {"p", qnd.p},
             {"L", qnd.L},
             {"L_sigma", qnd.L_sigma},
             {"S", qnd.S},
             {"chosen_model", qnd.chosen_model},
             {"point_estimate", qnd.point_estimate},
             {"Q_lower", qnd.q_lower},
             {"Q_upper", qnd.q_upper}};
    if (ctx.want("csv")) write_file(ctx.out_dir / "correlations.csv", corr.to_csv());
    if (ctx.want("json")) write_file(ctx.out_dir / "qndness.json", out.dump(2) + "\n");
    if (ctx.want("svg")) {
        SvgPlot plot(640, 420);
        std::vector<double> xs(corr.n.begin(), corr.n.end());
        plot.add_points(xs, corr.global, "#1f77b4");
        plot.add_points(xs, corr.local, "#2ca02c");
        plot.set_labels("round n", "correlation", "RILB correlations");
        write_file(ctx.out_dir / "correlations.svg", plot.str());
    }
}

// ---------------------------------------------------------------------------
// campaign: readout
// ---------------------------------------------------------------------------

void validate_readout(const json& j, std::vector<std::string>* defaulted) {
    validate_object(j,
                    {{"kind", kStr, true},
                     {"mean_g", kArr, false},
                     {"mean_e", kArr, false},
                     {"sigma", kNum, false},
                     {"decay_prob", kNum, false},
                     {"excitation_prob", kNum, false},
                     {"threshold", kNum, false},
                     {"shots", kInt, false},
                     {"bootstrap", kInt, false},
                     {"seed", kInt, false}},
                    "", defaulted);
    require_positive(j, "shots", "");
}

void run_readout_campaign(const json& j, const RunContext& ctx) {
    IqCloudModel model;
    const auto mg = j.value("mean_g", std::vector<double>{-1.0, 0.0});
    const auto me = j.value("mean_e", std::vector<double>{1.0, 0.0});
    model.means = {{mg[0], mg[1]}, {me[0], me[1]}};
    const double sigma = j.value("sigma", 0.22);
    model.sigmas = {sigma, sigma};
    model.decay_prob_excited = j.value("decay_prob", 1.5e-3);
    model.excitation_prob_ground = j.value("excitation_prob", 6e-4);
    model.threshold = j.value("threshold", 0.0);
    const long shots = j.value("shots", 200000L);
    const long bootstrap = j.value("bootstrap", 200L);

    const auto iq = simulate_iq_clouds(model, {0, 1}, shots, ctx.seed);
    const auto d = decompose_readout_error(iq, model.threshold, bootstrap, ctx.seed + 1);

    json out{{"decay", d.decay},       {"decay_sigma", d.decay_sigma},
             {"mixing", d.mixing},     {"mixing_sigma", d.mixing_sigma},
             {"overlap", d.overlap},   {"overlap_sigma", d.overlap_sigma},
             {"total", d.total},       {"total_sigma", d.total_sigma}};
    if (ctx.want("json")) write_file(ctx.out_dir / "readout_decomposition.json", out.dump(2) + "\n");
    if (ctx.want("csv") || ctx.want("svg")) {
        // in-phase histograms per preparation
        const int bins = 160;
        double lo = 1e300, hi = -1e300;
        for (const auto& s : iq.samples) {
            lo = std::min(lo, s.real());
            hi = std::max(hi, s.real());
        }
        std::vector<double> hg(bins, 0.0), he(bins, 0.0), centers(bins);
        for (std::size_t i = 0; i < iq.samples.size(); ++i) {
            int b = static_cast<int>((iq.samples[i].real() - lo) / (hi - lo) * bins);
            b = std::min(bins - 1, std::max(0, b));
            (iq.prepared[i] == 0 ? hg : he)[b] += 1.0;
        }
        for (int b = 0; b < bins; ++b) centers[b] = lo + (b + 0.5) * (hi - lo) / bins;
        CsvWriter csv({"in_phase", "count_g", "count_e"});
        for (int b = 0; b < bins; ++b) csv.row({centers[b], hg[b], he[b]});
        if (ctx.want("csv")) write_file(ctx.out_dir / "histogram.csv", csv.str());
        if (ctx.want("svg")) {
            SvgPlot plot(640, 420);
            std::vector<double> lg, le;
            for (int b = 0; b < bins; ++b) {
                lg.push_back(std::log10(1.0 + hg[b]));
                le.push_back(std::log10(1.0 + he[b]));
            }
            plot.add_line(centers, lg, "#1f77b4");
            plot.add_line(centers, le, "#d62728");
            plot.set_labels("in-phase signal", "log10(1+count)", "single-shot histograms");
            write_file(ctx.out_dir / "histogram.svg", plot.str());
        }
    }
}

// ---------------------------------------------------------------------------
// campaign: budget
// ---------------------------------------------------------------------------

void validate_budget(const json& j, std::vector<std::string>* defaulted) {
    validate_object(j,
                    {{"kind", kStr, true},
                     {"eps_sx", kArr, false},
                     {"eps_ro", kArr, false},
                     {"eps_cz", kNum, false},
                     {"swap_theta", kNum, false},
                     {"coupler_theta", kNum, false},
                     {"tau", kNum, false},
                     {"q1_coherence", kArr, false},
                     {"q2_coherence", kArr, false},
                     {"seed", kInt, false}},
                    "", defaulted);
}

void run_budget_campaign(const json& j, const RunContext& ctx) {
    const auto eps_sx = j.value("eps_sx", std::vector<double>{1.59e-4, 1.68e-4});
    const auto eps_ro = j.value("eps_ro", std::vector<double>{5.7e-4, 5.4e-4});
    const double eps_cz = j.value("eps_cz", 6.5e-4);
    json out{{"eps_sx", eps_sx},
             {"eps_ro", eps_ro},
             {"eps_cz", eps_cz},
             {"total", total_system_error(eps_sx, eps_ro, eps_cz)}};
    if (j.contains("swap_theta")) {
        out["swap_error"] = swap_like_error(j.at("swap_theta").get<double>());
    }
    if (j.contains("coupler_theta")) {
        out["coupler_leak_error"] = swap_like_error(j.at("coupler_theta").get<double>());
    }
    if (j.contains("q1_coherence") && j.contains("q2_coherence")) {
        const auto c1 = j.at("q1_coherence").get<std::vector<double>>();
        const auto c2 = j.at("q2_coherence").get<std::vector<double>>();
        const double tau = j.value("tau", 33e-9);
        out["incoherent_cz"] = incoherent_cz_error(tau, {c1[0], c1[1], c1[2]},
                                                   {c2[0], c2[1], c2[2]});
    }
    json ranking = json::array();
    for (const auto& e : budget_ranking(eps_sx, eps_ro, eps_cz)) {
        ranking.push_back({{"name", e.name}, {"value", e.value}});
    }
    out["ranking"] = ranking;
    if (ctx.want("json")) write_file(ctx.out_dir / "budget.json", out.dump(2) + "\n");
    if (ctx.want("csv")) {
        CsvWriter csv({"component", "value"});
        csv.raw_row("eps_sx_q1," + std::to_string(eps_sx[0]));
        csv.raw_row("eps_sx_q2," + std::to_string(eps_sx[1]));
        csv.raw_row("eps_ro_q1," + std::to_string(eps_ro[0]));
        csv.raw_row("eps_ro_q2," + std::to_string(eps_ro[1]));
        csv.raw_row("eps_cz," + std::to_string(eps_cz));
        write_file(ctx.out_dir / "budget.csv", csv.str());
    }
}

// ---------------------------------------------------------------------------
// campaign: device-sweep
// ---------------------------------------------------------------------------

void validate_device_sweep(const json& j, std::vector<std::string>* defaulted) {
    validate_object(j,
                    {{"kind", kStr, true},
                     {"g_qc_mhz", kArr, false},
                     {"t1_us", kArr, false},
                     {"detunings_mhz", kArr, false},
                     {"seed", kInt, false}},
                    "", defaulted);
}

void run_device_sweep_campaign(const json& j, const RunContext& ctx) {
    const auto g_mhz = j.value("g_qc_mhz", std::vector<double>{30, 50, 70, 90, 110, 130, 150});
    const auto t1_us = j.value("t1_us", std::vector<double>{100});
    const auto det_mhz = j.value("detunings_mhz", std::vector<double>{111});
    std::vector<double> g_grid, t1_grid, det_grid;
    for (double g : g_mhz) g_grid.push_back(kTwoPi * g * 1e6);
    for (double t : t1_us) t1_grid.push_back(t * 1e-6);
    for (double d : det_mhz) det_grid.push_back(kTwoPi * d * 1e6);

    const auto sweep = sweep_coupling(g_grid, t1_grid, det_grid, ctx.workers);

    CsvWriter csv({"g_qc_mhz", "t1_us", "sqrt_x_error", "cz_error", "clifford_error",
                   "sqrt_x_duration_ns", "cz_duration_ns", "failed"});
    std::vector<double> xs, y_sx, y_cz, y_cl;
    for (const auto& pt : sweep.points) {
        csv.row({pt.g_qc / kTwoPi / 1e6, pt.t1 * 1e6, pt.sqrt_x_error, pt.cz_error,
                 pt.clifford_error, pt.sqrt_x_duration * 1e9, pt.cz_duration * 1e9,
                 pt.failed ? 1.0 : 0.0});
        if (pt.t1 == t1_grid.front() && !pt.failed) {
            xs.push_back(pt.g_qc / kTwoPi / 1e6);
            y_sx.push_back(pt.sqrt_x_error);
            y_cz.push_back(pt.cz_error);
            y_cl.push_back(pt.clifford_error);
        }
    }
    json optima = json::array();
    for (const auto& [t1, g] : sweep.optimal_g) {
        const auto band = sweep.optimal_band.at(t1);
        optima.push_back({{"t1_us", t1 * 1e6},
                          {"optimal_g_mhz", g / kTwoPi / 1e6},
                          {"band_lo_mhz", band.first / kTwoPi / 1e6},
                          {"band_hi_mhz", band.second / kTwoPi / 1e6}});
    }
    json out{{"optima", optima}};
    if (ctx.want("csv")) write_file(ctx.out_dir / "sweep.csv", csv.str());
    if (ctx.want("json")) write_file(ctx.out_dir / "optimum.json", out.dump(2) + "\n");
    if (ctx.want("svg") && !xs.empty()) {
        SvgPlot plot(640, 420);
        std::vector<double> lsx, lcz, lcl;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            lsx.push_back(std::log10(std::max(y_sx[i], 1e-8)));
            lcz.push_back(std::log10(std::max(y_cz[i], 1e-8)));
            lcl.push_back(std::log10(std::max(y_cl[i], 1e-8)));
        }
        plot.add_line(xs, lsx, "#1f77b4");
        plot.add_line(xs, lcz, "#d62728");
        plot.add_line(xs, lcl, "#2ca02c");
        plot.set_labels("g_qc/2pi (MHz)", "log10 error", "coupling trade-off");
        write_file(ctx.out_dir / "clifford_error.svg", plot.str());
    }
}

// ---------------------------------------------------------------------------

using Validator = void (*)(const json&, std::vector<std::string>*);
using Runner = void (*)(const json&, const RunContext&);

struct Campaign {
    Validator validate;
    Runner run;
};

const std::map<std::string, Campaign> kCampaigns = {
    {"palea", {validate_palea, run_palea_campaign}},
    {"standard-ea", {validate_standard_ea, run_standard_ea_campaign}},
    {"floquet", {validate_floquet, run_floquet_campaign}},
    {"estimator-compare", {validate_estimator_compare, run_estimator_compare_campaign}},
    {"irb", {validate_irb, run_irb_campaign}},
    {"purity-rb", {validate_purity_rb, run_purity_rb_campaign}},
    {"rilb", {validate_rilb, run_rilb_campaign}},
    {"readout", {validate_readout, run_readout_campaign}},
    {"budget", {validate_budget, run_budget_campaign}},
    {"device-sweep", {validate_device_sweep, run_device_sweep_campaign}},
};

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("/", "cannot read config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("/", std::string("JSON parse error: ") + e.what());
    }
    return j;
}

std::string kind_of(const json& j) {
    if (!j.contains("kind") || !j.at("kind").is_string()) {
        throw ConfigError("/kind", "missing campaign kind");
    }
    const std::string k = j.at("kind").get<std::string>();
    if (!kCampaigns.count(k)) {
        std::string allowed;
        for (const auto& kk : kCampaignKinds) allowed += kk + " ";
        throw ConfigError("/kind", "unknown campaign kind '" + k + "'; expected one of: " + allowed);
    }
    return k;
}

int run_main(json config, const RunContext& ctx_in, bool validate_only) {
    RunContext ctx = ctx_in;
    try {
        const std::string kind = kind_of(config);
        std::vector<std::string> defaulted;
        kCampaigns.at(kind).validate(config, &defaulted);
        if (config.contains("seed") && ctx.seed == 1) {
            ctx.seed = config.at("seed").get<std::uint64_t>();
        }
        if (validate_only) {
            std::cout << "OK: " << kind << "\n";
            for (const auto& d : defaulted) std::cout << "defaulted: " << d << "\n";
            return 0;
        }
        fs::create_directories(ctx.out_dir);

        const auto t0 = std::chrono::steady_clock::now();
        kCampaigns.at(kind).run(config, ctx);
        const auto t1 = std::chrono::steady_clock::now();

        json manifest{{"kind", kind},
                      {"config_hash",
                       calib::tools::fnv1a_hash(config.dump())},
                      {"seed", ctx.seed},
                      {"version", "0.1.0"},
                      {"wall_time_s",
                       std::chrono::duration<double>(t1 - t0).count()}};
        write_file(ctx.out_dir / "manifest.json", manifest.dump(2) + "\n");
        log_info("campaign " + kind + " done");
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-qubit gate calibration and benchmarking toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    int workers = 0;
    std::string formats = "csv,json,svg";

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "campaign config JSON")->required();
        sub->add_option("--seed", seed, "RNG seed override");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--workers", workers, "worker threads for sweeps (0 = cores)");
        sub->add_option("--format", formats, "comma list of output formats");
    };

    std::vector<CLI::App*> subs;
    for (const auto& kind : kCampaignKinds) {
        auto* sub = app.add_subcommand(kind, kind + " campaign");
        add_common(sub);
        subs.push_back(sub);
    }
    auto* validate = app.add_subcommand("validate", "schema-check a config without running");
    validate->add_option("--config", config_path, "campaign config JSON")->required();

    CLI11_PARSE(app, argc, argv);

    RunContext ctx;
    ctx.out_dir = out_dir;
    ctx.seed = seed;
    ctx.workers = workers;
    ctx.formats.clear();
    std::istringstream fs_in(formats);
    std::string tok;
    while (std::getline(fs_in, tok, ',')) ctx.formats.insert(tok);

    const bool validate_only = validate->parsed();
    json config;
    try {
        config = load_config(config_path);
        for (std::size_t i = 0; i < kCampaignKinds.size(); ++i) {
            if (!subs[i]->parsed()) continue;
            if (!config.contains("kind")) {
                config["kind"] = kCampaignKinds[i];
            } else if (config.at("kind") != kCampaignKinds[i]) {
                std::cerr << "config error: config kind does not match subcommand (at /kind)\n";
                return 2;
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    return run_main(std::move(config), ctx, validate_only);
}
