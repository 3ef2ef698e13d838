#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "siv1/config.hpp"
#include "siv1/errors.hpp"
#include "siv1/fitting.hpp"
#include "siv1/io.hpp"
#include "siv1/lindblad.hpp"
#include "siv1/photophys.hpp"
#include "siv1/ratedyn.hpp"

namespace siv1::cli {

namespace {

namespace fs = std::filesystem;
using config::Config;
using Json = nlohmann::ordered_json;

/// Files produced by a run, written together once the command finishes.
struct Bundle {
    std::vector<std::pair<std::string, std::string>> files;

    void add(const std::string& name, std::string content) { files.emplace_back(name, std::move(content)); }
};

std::string fmt(double v) { return io::format_number(v); }

Transition transition_key(const std::string& text, const std::string& key, bool allow_both) {
    Transition t;
    try {
        t = transition_from_string(text);
    } catch (const DomainError& e) {
        throw ConfigError(key + ": " + e.what());
    }
    if (t == Transition::Both && !allow_both) throw ConfigError(key + ": expected A1 or A2");
    return t;
}

std::vector<io::Column> population_columns(std::size_t n) {
    std::vector<io::Column> cols;
    for (const auto& name : level_names(n)) cols.push_back({"population_" + name, ""});
    return cols;
}

void append(std::vector<double>& row, const LevelPopulations& p) {
    for (std::size_t i = 0; i < p.size(); ++i) row.push_back(p[i]);
}

// ---------------------------------------------------------------- simulate

void simulate_lifetime(const Config& c, std::uint64_t seed, Bundle& out) {
    const RateSet rates = c.rates();
    const Transition target = transition_key(c.string("lifetime.transition", "A1"), "lifetime.transition", false);
    const double P_e = c.number("lifetime.P_e", 1.0);
    const double bin = c.number("lifetime.bin_ns", 0.1);
    const double duration = c.number("lifetime.duration_ns", 60.0);
    const double peak = c.number("lifetime.peak_counts", 0.0);
    const std::string noise = c.string("lifetime.noise", "poisson");
    if (!(bin > 0.0) || !(duration >= bin)) throw ConfigError("lifetime: need bin_ns > 0 and duration_ns >= bin_ns");
    if (!(peak >= 0.0)) throw ConfigError("lifetime.peak_counts must be >= 0");
    if (noise != "poisson" && noise != "none") throw ConfigError("lifetime.noise: expected poisson or none");

    const auto bins = static_cast<std::size_t>(std::llround(duration / bin));
    std::vector<double> edges(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) edges[i] = static_cast<double>(i) * bin;
    const FluorescenceTrace trace = ratedyn::lifetime_trace(rates, target, P_e, edges);
    const auto gen = ratedyn::build_generator(rates);
    const LevelPopulations p0 =
        ratedyn::apply_delta_pulse(LevelPopulations::depolarized_ground(), P_e, target);

    io::Table t;
    t.meta = {{"protocol", "lifetime"}, {"transition", to_string(target)}, {"P_e", fmt(P_e)}, {"seed", std::to_string(seed)}};
    t.columns.push_back({"time_ns", "ns"});
    for (auto& col : population_columns(5)) t.columns.push_back(col);
    t.columns.push_back({"emission_rate", "1/ns"});
    const bool with_counts = peak > 0.0;
    const bool sampled = with_counts && noise == "poisson";
    double scale = 0.0;
    std::optional<FluorescenceTrace> noisy;
    if (with_counts) {
        const double top = *std::max_element(trace.rates().begin(), trace.rates().end());
        if (!(top > 0.0)) throw DomainError("lifetime trace carries no emission");
        scale = peak / (top * bin);
        t.columns.push_back({"expected_counts", "counts"});
        if (sampled) {
            t.columns.push_back({"counts", "counts"});
            noisy = trace.with_counts(scale, seed);
        }
    }
    const auto centers = trace.bin_centers();
    for (std::size_t i = 0; i < trace.bins(); ++i) {
        std::vector<double> row{centers[i]};
        append(row, ratedyn::propagate(p0, gen, centers[i]));
        row.push_back(trace.rates()[i]);
        if (with_counts) row.push_back(scale * trace.rates()[i] * bin);
        if (sampled) row.push_back(static_cast<double>((*noisy->counts())[i]));
        t.add_row(std::move(row));
    }
    out.add("lifetime.csv", io::format_csv(t));
}

void simulate_rabi(const Config& c, Bundle& out) {
    const SixLevelParams params = c.six_level();
    const FieldCalibration cal = c.field();
    lindblad::RabiOptions o;
    o.target = transition_key(c.string("rabi.transition", "A1"), "rabi.transition", false);
    o.fwhm_ns = c.number("rabi.fwhm_ns", cal.pulse_fwhm);
    o.gate_delay_ns = c.number("rabi.gate_delay_ns", o.gate_delay_ns);
    o.window_ns = c.number("rabi.window_ns", o.window_ns);
    std::vector<double> default_energies;
    for (int i = 0; i <= 24; ++i) default_energies.push_back(0.5 * i);
    const auto energies = c.numbers("rabi.energies", default_energies);
    const double e_pi = c.number("rabi.pi_energy_fj", cal.pi_pulse_energy);
    const double scale = lindblad::field_scale_for_area(std::numbers::pi, e_pi, o.fwhm_ns);
    const auto curve = lindblad::simulate_rabi(params, energies, scale, o);

    io::Table t;
    t.meta = {{"protocol", "rabi"},
              {"transition", to_string(o.target)},
              {"pi_energy_fj", fmt(e_pi)},
              {"field_scale_mhz_per_sqrt_fj", fmt(scale)}};
    t.columns = {{"energy_fj", "fJ"}, {"sqrt_energy", "sqrt(fJ)"}, {"peak_rabi_mhz", "MHz"}, {"signal", "photons"}};
    for (std::size_t i = 0; i < curve.signal.size(); ++i)
        t.add_row({curve.energies_fj[i], curve.sqrt_energies[i], scale * curve.sqrt_energies[i], curve.signal[i]});
    out.add("rabi.csv", io::format_csv(t));
}

void simulate_pulse_train(const Config& c, Bundle& out) {
    const RateSet rates = c.rates();
    const double P_e = c.number("pulse_train.P_e", 0.608);
    const double t_p = c.number("pulse_train.t_p", 1000.0);
    const int pulses = c.integer("pulse_train.pulses", 100);
    const double trailing = c.number("pulse_train.trailing_wait", 2000.0);
    if (pulses < 1) throw ConfigError("pulse_train.pulses must be >= 1");
    if (!(t_p > 0.0) || !(trailing >= 0.0)) throw ConfigError("pulse_train: need t_p > 0 and trailing_wait >= 0");

    const auto gen = ratedyn::build_generator(rates);
    io::Table t;
    t.meta = {{"protocol", "pulse-train"}, {"P_e", fmt(P_e)}, {"t_p_ns", fmt(t_p)}};
    t.columns = {{"pulse", ""}, {"time_ns", "ns"}};
    for (auto& col : population_columns(5)) t.columns.push_back(col);
    LevelPopulations p = LevelPopulations::depolarized_ground();
    for (int k = 1; k <= pulses; ++k) {
        p = ratedyn::propagate(ratedyn::apply_delta_pulse(p, P_e), gen, t_p);
        std::vector<double> row{static_cast<double>(k), k * t_p};
        append(row, p);
        t.add_row(std::move(row));
    }
    const LevelPopulations final_state = ratedyn::propagate(p, gen, trailing);
    const LevelPopulations periodic = ratedyn::pulse_train_fixed_point(rates, P_e, t_p);
    const auto split = ratedyn::pulse_train_steady_state_analytic(rates);

    Json j;
    const auto pops = [](const LevelPopulations& q) {
        Json m;
        const auto names = level_names(q.size());
        for (std::size_t i = 0; i < q.size(); ++i) m[names[i]] = q[i];
        return m;
    };
    j["simulated"] = pops(final_state);
    j["periodic_before_pulse"] = pops(periodic);
    j["analytic"] = {{"g1", split.n_g1}, {"g2", split.n_g2}, {"regime_ok", split.regime_ok}};
    j["max_ground_deviation"] =
        std::max(std::abs(final_state[level::g1] - split.n_g1), std::abs(final_state[level::g2] - split.n_g2));
    out.add("pulse_train.csv", io::format_csv(t));
    out.add("pulse_train.json", j.dump(2) + "\n");
}

void simulate_two_pulse(const Config& c, std::uint64_t seed, Bundle& out) {
    const RateSet rates = c.rates();
    const auto probabilities = c.numbers("two_pulse.P_e", {0.2, 0.4, 0.6});
    const auto delays = c.numbers("two_pulse.delays", ratedyn::default_delay_grid());
    const std::string mode_text = c.string("two_pulse.mode", "simulated");
    const double noise = c.number("two_pulse.noise_sigma", 0.0);
    ratedyn::Mode mode;
    if (mode_text == "simulated") {
        mode = ratedyn::Mode::Simulated;
    } else if (mode_text == "analytic") {
        mode = ratedyn::Mode::Analytic;
    } else {
        throw ConfigError("two_pulse.mode: expected simulated or analytic");
    }
    if (!(noise >= 0.0)) throw ConfigError("two_pulse.noise_sigma must be >= 0");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t k = 0; k < probabilities.size(); ++k) {
        auto signal = ratedyn::two_pulse_curve(rates, probabilities[k], delays, mode);
        io::Table t;
        t.meta = {{"protocol", "two-pulse"}, {"excitation_probability", fmt(probabilities[k])}, {"mode", mode_text}};
        t.columns = {{"tau_ns", "ns"}, {"signal", ""}};
        if (noise > 0.0) t.columns.push_back({"sigma", ""});
        for (std::size_t i = 0; i < delays.size(); ++i) {
            if (noise > 0.0) {
                t.add_row({delays[i], signal[i] + noise * gauss(rng), noise});
            } else {
                t.add_row({delays[i], signal[i]});
            }
        }
        out.add("two_pulse_" + std::to_string(k + 1) + ".csv", io::format_csv(t));
    }
}

void simulate_depletion(const Config& c, std::uint64_t seed, Bundle& out) {
    const SixLevelParams params = c.six_level();
    auto names = c.strings("depletion.transitions");
    if (names.empty()) names = {"A1", "A2"};
    const auto powers = c.numbers("depletion.powers_uw", {1.0, 16.0});
    const double kappa = c.number("depletion.kappa", 10.0);
    std::vector<double> default_taus;
    for (int i = 0; i <= 28; ++i) default_taus.push_back(50.0 * i);
    const auto taus = c.numbers("depletion.taus", default_taus);
    const double noise = c.number("depletion.noise_relative", 0.0);
    lindblad::DepletionOptions o;
    const std::string mode = c.string("depletion.mode", "literal");
    if (mode == "literal") {
        o.mode = lindblad::QuasiCWMode::Literal;
    } else if (mode == "average-power") {
        o.mode = lindblad::QuasiCWMode::AveragePower;
    } else {
        throw ConfigError("depletion.mode: expected literal or average-power");
    }
    const std::string model = c.string("depletion.model", "six-level");
    if (model == "six-level") {
        o.model = lindblad::Model::SixLevel;
    } else if (model == "five-level") {
        o.model = lindblad::Model::FiveLevelMerged;
    } else {
        throw ConfigError("depletion.model: expected six-level or five-level");
    }
    o.modulation_mhz = c.number("depletion.modulation_mhz", o.modulation_mhz);
    if (!(kappa > 0.0)) throw ConfigError("depletion.kappa must be positive");
    if (!(noise >= 0.0)) throw ConfigError("depletion.noise_relative must be >= 0");
    std::vector<double> amplitudes;
    for (double p : powers) {
        if (!(p >= 0.0)) throw ConfigError("depletion.powers_uw must be >= 0");
        amplitudes.push_back(kappa * std::sqrt(p));
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (const auto& name : names) {
        const Transition target = transition_key(name, "depletion.transitions", false);
        const auto curves = lindblad::simulate_depletion_batch(params, amplitudes, taus, target, o);
        for (std::size_t k = 0; k < curves.size(); ++k) {
            io::Table t;
            t.meta = {{"protocol", "depletion"},
                      {"target", to_string(target)},
                      {"power_uw", fmt(powers[k])},
                      {"kappa", fmt(kappa)},
                      {"drive_amplitude_mhz", fmt(amplitudes[k])},
                      {"mode", mode}};
            t.columns = {{"tau_ns", "ns"}, {"signal", ""}, {"fidelity", ""}};
            if (noise > 0.0) t.columns.push_back({"sigma", ""});
            for (std::size_t i = 0; i < taus.size(); ++i) {
                const double y = curves[k].signal[i];
                if (noise > 0.0) {
                    const double s = noise * std::max(y, 1e-3);
                    t.add_row({taus[i], y + s * gauss(rng), curves[k].fidelity[i], s});
                } else {
                    t.add_row({taus[i], y, curves[k].fidelity[i]});
                }
            }
            out.add("depletion_" + to_string(target) + "_" + std::to_string(k + 1) + ".csv", io::format_csv(t));
        }
    }
}

void simulate_steady_state(const Config& c, Bundle& out) {
    const RateSet rates = c.rates();
    const MaterialParams mat = c.material();
    const double eta = c.number("steady_state.eta_det", 1.0);
    auto pumps = c.strings("steady_state.pumps");
    if (pumps.empty()) pumps = {"0.001", "0.01", "0.1", "1", "saturating"};
    if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("steady_state.eta_det must lie in (0, 1]");

    io::Table t;
    t.meta = {{"protocol", "steady-state"}, {"eta_det", fmt(eta)}, {"dwf", fmt(mat.dwf)}};
    t.columns.push_back({"pump_per_ns", "1/ns"});
    for (auto& col : population_columns(5)) t.columns.push_back(col);
    t.columns.push_back({"psb_rate_mhz", "MHz"});
    std::vector<std::pair<std::string, LevelPopulations>> states;
    for (const auto& text : pumps) {
        ratedyn::PumpRates w;
        std::string label;
        if (text == "saturating") {
            w = ratedyn::saturating_pump(rates);
            label = "saturating";
        } else {
            double v = 0.0;
            try {
                v = config::parse_number(text);
            } catch (const ConfigError& e) {
                throw ConfigError(std::string("steady_state.pumps: ") + e.what());
            }
            if (!(v >= 0.0)) throw ConfigError("steady_state.pumps must be >= 0");
            w = {v, v};
            label = "pump_" + fmt(v);
        }
        const LevelPopulations p = ratedyn::cw_steady_state(rates, w);
        std::vector<double> row{w.w1};
        append(row, p);
        row.push_back(ratedyn::saturation_emission_rate(rates, mat.dwf, eta, w));
        t.add_row(std::move(row));
        states.emplace_back(label, p);
    }
    out.add("steady_state.csv", io::format_csv(t));
    out.add("steady_state.json", io::populations_json(states));
}

void simulate(const std::string& protocol, const Config& c, std::uint64_t seed, Bundle& out) {
    if (protocol == "lifetime") return simulate_lifetime(c, seed, out);
    if (protocol == "rabi") return simulate_rabi(c, out);
    if (protocol == "pulse-train") return simulate_pulse_train(c, out);
    if (protocol == "two-pulse") return simulate_two_pulse(c, seed, out);
    if (protocol == "depletion") return simulate_depletion(c, seed, out);
    if (protocol == "steady-state") return simulate_steady_state(c, out);
    throw ConfigError("unknown protocol '" + protocol +
                      "' (expected lifetime, rabi, pulse-train, two-pulse, depletion or steady-state)");
}

// ---------------------------------------------------------------- fit

struct LoadedData {
    std::vector<inference::Dataset> datasets;
    std::vector<io::CsvData> tables;
};

LoadedData load_datasets(const std::vector<std::string>& paths, const Config& c, io::Manifest& manifest) {
    LoadedData out;
    for (const auto& path : paths) {
        const std::string text = io::read_text(path);
        manifest.inputs.push_back({path, io::checksum_hex(text)});
        io::CsvData csv;
        try {
            csv = io::parse_csv(text);
        } catch (const IoError& e) {
            throw IoError(path + ": " + e.what());
        }
        auto d = io::dataset_from_csv(csv, c.string("fit.x_column", ""), c.string("fit.y_column", ""),
                                      c.string("fit.sigma_column", ""));
        out.datasets.push_back(std::move(d));
        out.tables.push_back(std::move(csv));
    }
    return out;
}

double meta_number(const io::CsvData& csv, const std::string& key, const std::string& path) {
    const auto v = csv.meta(key);
    if (!v) throw ConfigError(path + ": no '" + key + "' in the file header and none in the config");
    try {
        return config::parse_number(*v);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + key + ": " + e.what());
    }
}

io::Table residual_table(const std::vector<inference::Dataset>& data,
                         const std::vector<std::vector<double>>& model) {
    io::Table t;
    t.columns = {{"dataset", ""}, {"x", ""}, {"y", ""}, {"model", ""}, {"residual", ""}, {"normalized_residual", ""}};
    for (std::size_t s = 0; s < data.size(); ++s) {
        const auto sigma = data[s].effective_sigma();
        for (std::size_t i = 0; i < data[s].size(); ++i) {
            const double r = data[s].y[i] - model[s][i];
            t.add_row({static_cast<double>(s + 1), data[s].x[i], data[s].y[i], model[s][i], r, r / sigma[i]});
        }
    }
    return t;
}

void write_fit(const std::string& kind, const FitResult& result, const std::vector<inference::Dataset>& data,
               const std::function<std::vector<std::vector<double>>(const FitResult&)>& model, Bundle& out) {
    out.add("fit_report.json", io::fit_result_json(result, kind));
    auto t = residual_table(data, model(result));
    t.meta = {{"kind", kind}};
    out.add("residuals.csv", io::format_csv(t));
}

void fit(const std::string& kind, const Config& c, const std::vector<std::string>& paths, std::uint64_t seed,
         Bundle& out, io::Manifest& manifest) {
    if (paths.empty()) throw ConfigError("fit needs at least one data file (fit.data or command-line paths)");
    LoadedData loaded = load_datasets(paths, c, manifest);
    auto& data = loaded.datasets;

    const auto single = [&]() -> inference::Dataset& {
        if (data.size() != 1) throw ConfigError(kind + " fit takes exactly one data file");
        return data.front();
    };
    const auto run_fit = [&](const std::function<FitResult()>& f,
                             const std::function<std::vector<std::vector<double>>(const FitResult&)>& model) {
        try {
            FitResult r = f();
            write_fit(kind, r, data, model, out);
        } catch (const ConvergenceError& e) {
            write_fit(kind, e.best(), data, model, out);
            throw;
        }
    };

    if (kind == "exponential") {
        inference::Dataset& d = single();
        const double min_delay = c.number("fit.min_delay_ns", -std::numeric_limits<double>::infinity());
        inference::Dataset kept;
        kept.protocol = d.protocol;
        if (d.sigma) kept.sigma.emplace();
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (d.x[i] < min_delay) continue;
            kept.x.push_back(d.x[i]);
            kept.y.push_back(d.y[i]);
            if (d.sigma) kept.sigma->push_back((*d.sigma)[i]);
        }
        d = std::move(kept);
        const bool offset = c.boolean("fit.with_offset", false);
        run_fit([&] { return inference::fit_exponential(d, offset); },
                [&](const FitResult& r) {
                    const double A = r.value("amplitude"), tau = r.value("tau"), c0 = r.value("offset");
                    std::vector<double> m;
                    for (double x : d.x) m.push_back(std::isfinite(tau) ? A * std::exp(-x / tau) + c0 : c0);
                    return std::vector<std::vector<double>>{m};
                });
        return;
    }
    if (kind == "saturation") {
        const inference::Dataset& d = single();
        run_fit([&] { return inference::fit_saturation(d); },
                [&](const FitResult& r) {
                    std::vector<double> m;
                    for (double x : d.x) m.push_back(r.value("I0") * (1.0 - std::exp(-x / r.value("E_s"))));
                    return std::vector<std::vector<double>>{m};
                });
        return;
    }
    if (kind == "two-pulse") {
        const auto given = c.numbers("fit.excitation_probabilities");
        if (!given.empty() && given.size() != data.size())
            throw ConfigError("fit.excitation_probabilities needs one entry per data file");
        for (std::size_t k = 0; k < data.size(); ++k) {
            data[k].protocol = "two-pulse";
            data[k].excitation_probability =
                given.empty() ? meta_number(loaded.tables[k], "excitation_probability", paths[k]) : given[k];
        }
        inference::TwoPulseFitOptions o;
        o.min_delay_ns = c.number("fit.min_delay_ns", o.min_delay_ns);
        run_fit([&] { return inference::fit_two_pulse(data, o); },
                [&](const FitResult& r) {
                    std::vector<std::vector<double>> m;
                    const double tau = r.value("tau_ms");
                    for (std::size_t k = 0; k < data.size(); ++k) {
                        const double a = r.value("alpha_" + std::to_string(k + 1));
                        std::vector<double> row;
                        for (double x : data[k].x) row.push_back(a * std::exp(-x / tau));
                        m.push_back(std::move(row));
                    }
                    return m;
                });
        return;
    }
    if (kind == "depletion") {
        const auto powers = c.numbers("fit.powers_uw");
        const auto targets = c.strings("fit.targets");
        if (!powers.empty() && powers.size() != data.size())
            throw ConfigError("fit.powers_uw needs one entry per data file");
        if (!targets.empty() && targets.size() != data.size())
            throw ConfigError("fit.targets needs one entry per data file");
        for (std::size_t k = 0; k < data.size(); ++k) {
            data[k].protocol = "depletion";
            data[k].power = powers.empty() ? meta_number(loaded.tables[k], "power_uw", paths[k]) : powers[k];
            std::string target;
            if (!targets.empty()) {
                target = targets[k];
            } else {
                const auto m = loaded.tables[k].meta("target");
                if (!m) throw ConfigError(paths[k] + ": no 'target' in the file header and none in the config");
                target = *m;
            }
            data[k].target = transition_key(target, "fit.targets", false);
        }
        inference::DepletionFitConfig cfg;
        cfg.base = SixLevelParams{c.rates()};
        const SixLevelParams structure = c.six_level();
        cfg.base.lambda_mix = structure.lambda_mix;
        cfg.base.gamma_s = structure.gamma_s;
        cfg.base.D_g = structure.D_g;
        cfg.base.D_e = structure.D_e;
        cfg.de.seed = seed;
        cfg.de.threads = c.integer("threads", 0);
        cfg.de.population = c.integer("fit.de_population", cfg.de.population);
        cfg.de.max_generations = c.integer("fit.de_generations", cfg.de.max_generations);
        const auto start = c.numbers("fit.start");
        if (!start.empty()) {
            if (start.size() != 6) throw ConfigError("fit.start needs gamma_r, gamma1..gamma4 and kappa");
            cfg.start = Eigen::Map<const Eigen::VectorXd>(start.data(), 6);
        }
        cfg.global_search = c.boolean("fit.global_search", start.empty());
        run_fit([&] { return inference::fit_depletion_global(data, cfg); },
                [&](const FitResult& r) {
                    const RateSet rates(r.value("gamma_r"), 0.0, r.value("gamma1"), r.value("gamma2"),
                                        r.value("gamma3"), r.value("gamma4"), false);
                    return inference::depletion_model(data, rates, r.value("kappa"), cfg);
                });
        return;
    }
    throw ConfigError("unknown fit kind '" + kind + "' (expected exponential, saturation, two-pulse or depletion)");
}

// ---------------------------------------------------------------- derive and sweep

void derive(const Config& c, Bundle& out) {
    const auto d = photophys::derive_all(c.field(), c.material(), c.rates(), c.derive_options());
    d.validate();
    out.add("derived.json", io::derived_json(d));
}

void sweep(const std::string& protocol, const Config& c, std::uint64_t seed, Bundle& out) {
    const std::string key = c.string("sweep.key", "");
    if (key.empty()) throw ConfigError("sweep.key is required");
    const auto& keys = config::known_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end() || key.rfind("sweep.", 0) == 0)
        throw ConfigError("sweep.key '" + key + "' is not a sweepable key");
    const auto values = c.numbers("sweep.values");
    if (values.empty()) throw ConfigError("sweep.values is required");

    io::Table index;
    index.meta = {{"protocol", protocol}, {"key", key}};
    index.columns = {{"point", ""}, {"value", ""}};
    for (std::size_t i = 0; i < values.size(); ++i) {
        Config point = c;
        point.apply_override(key + "=" + fmt(values[i]));
        point.validate();
        Bundle sub;
        simulate(protocol, point, seed, sub);
        const std::string dir = "point_" + std::to_string(i + 1) + "/";
        for (auto& [name, content] : sub.files) out.add(dir + name, std::move(content));
        index.add_row({static_cast<double>(i + 1), values[i]});
    }
    out.add("sweep.csv", io::format_csv(index));
}

// ---------------------------------------------------------------- driver

int classify(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return exit_config;
    if (dynamic_cast<const IoError*>(&e)) return exit_io;
    if (dynamic_cast<const ConvergenceError*>(&e) || dynamic_cast<const UnidentifiableError*>(&e) ||
        dynamic_cast<const InconsistentDecayError*>(&e) || dynamic_cast<const InconsistencyError*>(&e) ||
        dynamic_cast<const NoSolutionError*>(&e))
        return exit_fit;
    if (dynamic_cast<const DomainError*>(&e) || dynamic_cast<const StepSizeError*>(&e) ||
        dynamic_cast<const DivisionByZeroError*>(&e))
        return exit_config;
    return exit_failure;
}

const char* error_kind(int code) {
    switch (code) {
        case exit_config: return "config error";
        case exit_fit: return "fit error";
        case exit_io: return "I/O error";
        default: return "error";
    }
}

std::string resolve_relative(const std::string& path, const std::string& config_path) {
    const fs::path p(path);
    if (p.is_absolute() || config_path.empty()) return path;
    return (fs::path(config_path).parent_path() / p).lexically_normal().string();
}

}  // namespace

int run(const RunConfig& rc, std::ostream& log) {
    io::Manifest manifest;
    manifest.command = rc.command;
    manifest.mode = rc.mode;
    manifest.overrides = rc.overrides;
    std::string out_dir = rc.output_dir;
    Bundle bundle;
    int code = exit_ok;

    try {
        if (rc.config_path.empty()) throw ConfigError("a config file is required (--config)");
        const std::string config_text = io::read_text(rc.config_path);
        manifest.inputs.push_back({rc.config_path, io::checksum_hex(config_text)});
        Config c = Config::from_string(config_text);
        if (c.empty()) throw ConfigError("empty config");
        const auto configured_output = [&] {
            if (rc.output_dir.empty() && c.has("output")) out_dir = resolve_relative(c.string("output", ""), rc.config_path);
        };
        configured_output();
        for (const auto& o : rc.overrides) c.apply_override(o);
        configured_output();
        manifest.config_text = c.dump();
        c.validate();

        const std::uint64_t seed = rc.seed ? *rc.seed : c.unsigned_integer("seed", default_seed);
        manifest.seed = seed;
        std::string mode = rc.mode;
        if (rc.command == "simulate" || rc.command == "sweep") {
            if (mode.empty()) mode = c.string("protocol", "");
            if (mode.empty()) throw ConfigError(rc.command + " needs a protocol (argument or 'protocol' key)");
        } else if (rc.command == "fit") {
            if (mode.empty()) mode = c.string("kind", "");
            if (mode.empty()) throw ConfigError("fit needs a kind (argument or 'kind' key)");
        }
        manifest.mode = mode;

        if (rc.command == "simulate") {
            simulate(mode, c, seed, bundle);
        } else if (rc.command == "fit") {
            std::vector<std::string> paths = rc.data_paths;
            if (paths.empty())
                for (const auto& p : c.strings("fit.data")) paths.push_back(resolve_relative(p, rc.config_path));
            fit(mode, c, paths, seed, bundle, manifest);
        } else if (rc.command == "derive") {
            derive(c, bundle);
        } else if (rc.command == "sweep") {
            sweep(mode, c, seed, bundle);
        } else {
            throw ConfigError("unknown command '" + rc.command + "'");
        }
    } catch (const std::exception& e) {
        code = classify(e);
        manifest.status = "failed";
        manifest.error = std::string(error_kind(code)) + ": " + e.what();
        log << "siv1: " << manifest.error << "\n";
    }

    if (out_dir.empty()) out_dir = "siv1_out";
    try {
        for (const auto& [name, content] : bundle.files) {
            const std::string path = (fs::path(out_dir) / name).string();
            io::write_text(path, content);
            manifest.outputs.push_back({name, io::checksum_hex(content)});
        }
    } catch (const std::exception& e) {
        if (code == exit_ok) {
            code = exit_io;
            manifest.status = "failed";
            manifest.error = std::string("I/O error: ") + e.what();
            log << "siv1: " << manifest.error << "\n";
        }
    }
    manifest.exit_code = code;
    try {
        io::write_text((fs::path(out_dir) / "manifest.json").string(), manifest.to_json());
    } catch (const std::exception& e) {
        log << "siv1: cannot write manifest: " << e.what() << "\n";
        if (code == exit_ok) code = exit_io;
    }
    return code;
}

}  // namespace siv1::cli
