#include "siv1/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "siv1/errors.hpp"

namespace siv1::config {

namespace {

// Keys whose value may be a list or a {start, stop, count|step} map.
const std::set<std::string>& list_keys() {
    static const std::set<std::string> keys{
        "rabi.energies",       "two_pulse.P_e",      "two_pulse.delays", "depletion.powers_uw",
        "depletion.taus",      "steady_state.pumps", "fit.data",         "fit.excitation_probabilities",
        "fit.powers_uw",       "fit.targets",        "fit.pulse_energies", "sweep.values",
        "depletion.transitions", "fit.start",
    };
    return keys;
}

const std::set<std::string>& range_subkeys() {
    static const std::set<std::string> keys{"start", "stop", "count", "step"};
    return keys;
}

// Keys that hold free text rather than numbers.
const std::set<std::string>& text_keys() {
    static const std::set<std::string> keys{
        "protocol",          "kind",           "output",          "rates.preset",
        "lifetime.transition", "lifetime.noise", "rabi.transition",
        "two_pulse.mode",    "depletion.mode", "depletion.model", "fit.x_column",
        "fit.y_column",      "fit.sigma_column", "sweep.key",     "depletion.transitions",
        "fit.data",          "fit.targets",    "rates.radiative_split_known", "fit.with_offset",
        "fit.global_search", "steady_state.pumps",
    };
    return keys;
}

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::stringstream ss(path);
    std::string item;
    while (std::getline(ss, item, '.')) parts.push_back(item);
    return parts;
}

YAML::Node lookup(const YAML::Node& root, const std::string& path) {
    YAML::Node node;
    node.reset(root);
    for (const auto& part : split_path(path)) {
        if (!node.IsMap()) return YAML::Node(YAML::NodeType::Undefined);
        const YAML::Node& view = node;
        YAML::Node next = view[part];
        if (!next.IsDefined()) return YAML::Node(YAML::NodeType::Undefined);
        node.reset(next);
    }
    return node;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

double parse_plain(const std::string& text) {
    const std::string t = trim(text);
    if (t.empty()) throw ConfigError("empty number");
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || errno == ERANGE) throw ConfigError("not a number: '" + text + "'");
    return v;
}

double scalar_number(const YAML::Node& node, const std::string& path) {
    if (!node.IsScalar()) throw ConfigError(path + ": expected a number");
    try {
        return parse_number(node.Scalar());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::vector<double> expand_range(const YAML::Node& node, const std::string& path) {
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!range_subkeys().count(key)) throw ConfigError(path + "." + key + ": unknown range key");
    }
    if (!node["start"] || !node["stop"]) throw ConfigError(path + ": range needs start and stop");
    const double a = scalar_number(node["start"], path + ".start");
    const double b = scalar_number(node["stop"], path + ".stop");
    const bool has_count = static_cast<bool>(node["count"]);
    const bool has_step = static_cast<bool>(node["step"]);
    if (has_count == has_step) throw ConfigError(path + ": range needs exactly one of count and step");
    std::vector<double> out;
    if (has_count) {
        const double c = scalar_number(node["count"], path + ".count");
        if (c < 1 || c != std::floor(c) || c > 1e6) throw ConfigError(path + ".count: expected a positive integer");
        const auto n = static_cast<int>(c);
        if (n == 1) return {a};
        for (int i = 0; i < n; ++i) out.push_back(a + (b - a) * i / (n - 1));
        return out;
    }
    const double step = scalar_number(node["step"], path + ".step");
    if (!(step > 0.0) || (b - a) / step > 1e6) throw ConfigError(path + ".step: expected a positive step");
    const auto n = static_cast<int>(std::floor((b - a) / step + 1e-9));
    for (int i = 0; i <= n; ++i) out.push_back(a + step * i);
    return out;
}

void collect_unknown(const YAML::Node& node, const std::string& prefix, const std::set<std::string>& known,
                     std::vector<std::string>& problems) {
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (known.count(path)) continue;
        bool is_section = false;
        for (const auto& k : known) {
            if (k.rfind(path + ".", 0) == 0) {
                is_section = true;
                break;
            }
        }
        if (!is_section) {
            problems.push_back(path + ": unknown key");
            continue;
        }
        if (!kv.second.IsMap()) {
            problems.push_back(path + ": expected a section");
            continue;
        }
        collect_unknown(kv.second, path, known, problems);
    }
}

template <class F>
void record(std::vector<std::string>& problems, F&& f) {
    try {
        f();
    } catch (const std::exception& e) {
        problems.push_back(e.what());
    }
}

}  // namespace

double parse_number(const std::string& text) {
    const auto slash = text.find('/');
    if (slash == std::string::npos) return parse_plain(text);
    const double num = parse_plain(text.substr(0, slash));
    const double den = parse_plain(text.substr(slash + 1));
    if (den == 0.0) throw ConfigError("division by zero in '" + text + "'");
    return num / den;
}

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys{
        "protocol", "kind", "seed", "threads", "output",
        "rates.preset", "rates.gamma_r", "rates.Gamma_nr", "rates.gamma1", "rates.gamma2", "rates.gamma3",
        "rates.gamma4", "rates.radiative_split_known",
        "six_level.lambda_mix", "six_level.gamma_s", "six_level.D_g", "six_level.D_e", "six_level.delta_L",
        "field.E_bulk", "field.P_sat_bulk", "field.P_sat_sil", "field.pi_pulse_energy", "field.pulse_fwhm",
        "field.objective_transmission", "field.E_local",
        "material.refractive_index", "material.epsilon", "material.dwf", "material.rho_M", "material.a",
        "material.N_c", "material.E_f", "material.hbar_omega_op", "material.hbar_omega_0",
        "material.temperature",
        "derive.wavelength_nm", "derive.gamma_deph", "derive.measured_psb_khz", "derive.radiative_tolerance",
        "lifetime.transition", "lifetime.P_e", "lifetime.bin_ns", "lifetime.duration_ns",
        "lifetime.peak_counts", "lifetime.noise",
        "rabi.transition", "rabi.energies", "rabi.pi_energy_fj", "rabi.fwhm_ns", "rabi.gate_delay_ns",
        "rabi.window_ns",
        "pulse_train.P_e", "pulse_train.t_p", "pulse_train.pulses", "pulse_train.trailing_wait",
        "two_pulse.P_e", "two_pulse.delays", "two_pulse.mode", "two_pulse.noise_sigma",
        "depletion.transitions", "depletion.powers_uw", "depletion.kappa", "depletion.taus",
        "depletion.mode", "depletion.model", "depletion.modulation_mhz", "depletion.noise_relative",
        "steady_state.pumps", "steady_state.eta_det",
        "fit.data", "fit.x_column", "fit.y_column", "fit.sigma_column", "fit.with_offset",
        "fit.min_delay_ns", "fit.excitation_probabilities", "fit.pulse_energies", "fit.saturation_energy",
        "fit.powers_uw", "fit.targets", "fit.global_search", "fit.start", "fit.de_population",
        "fit.de_generations",
        "sweep.key", "sweep.values",
    };
    return keys;
}

Config::Config() : root_(std::make_unique<YAML::Node>(YAML::NodeType::Map)) {}
Config::~Config() = default;
Config::Config(const Config& other) : root_(std::make_unique<YAML::Node>(YAML::Clone(*other.root_))) {}
Config& Config::operator=(const Config& other) {
    if (this != &other) root_ = std::make_unique<YAML::Node>(YAML::Clone(*other.root_));
    return *this;
}

Config Config::from_string(const std::string& text) {
    Config c;
    try {
        YAML::Node node = YAML::Load(text);
        if (node.IsNull() || !node.IsDefined()) node = YAML::Node(YAML::NodeType::Map);
        if (!node.IsMap()) throw ConfigError("config root must be a mapping");
        *c.root_ = node;
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    return c;
}

Config Config::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str());
}

void Config::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string key = trim(assignment.substr(0, eq));
    const std::string value = trim(assignment.substr(eq + 1));
    const auto& keys = known_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
        throw ConfigError("override '" + key + "': unknown key");
    YAML::Node parsed;
    try {
        parsed = YAML::Load(value);
    } catch (const YAML::Exception& e) {
        throw ConfigError("override '" + key + "': " + e.what());
    }
    const auto parts = split_path(key);
    YAML::Node node;
    node.reset(*root_);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node[parts[i]].IsMap()) node[parts[i]] = YAML::Node(YAML::NodeType::Map);
        YAML::Node child = node[parts[i]];
        node.reset(child);
    }
    node[parts.back()] = parsed;
}

std::vector<std::string> Config::problems() const {
    std::vector<std::string> out;
    const auto& keys = known_keys();
    const std::set<std::string> known(keys.begin(), keys.end());
    collect_unknown(*root_, "", known, out);

    for (const auto& key : keys) {
        const YAML::Node node = lookup(*root_, key);
        if (!node.IsDefined() || node.IsNull()) continue;
        if (list_keys().count(key)) {
            if (node.IsMap()) {
                record(out, [&] { expand_range(node, key); });
            } else if (node.IsSequence()) {
                if (!text_keys().count(key)) {
                    for (std::size_t i = 0; i < node.size(); ++i)
                        record(out, [&] { scalar_number(node[i], key + "[" + std::to_string(i) + "]"); });
                }
            } else if (!node.IsScalar()) {
                out.push_back(key + ": expected a list");
            } else if (!text_keys().count(key)) {
                record(out, [&] { scalar_number(node, key); });
            }
            continue;
        }
        if (!node.IsScalar()) {
            out.push_back(key + ": expected a scalar value");
            continue;
        }
        if (!text_keys().count(key)) record(out, [&] { scalar_number(node, key); });
    }
    if (!out.empty()) return out;

    const std::size_t before = out.size();
    record(out, [&] { rates(); });
    if (out.size() == before) record(out, [&] { six_level().validate(); });
    record(out, [&] { field().validate(); });
    record(out, [&] { material().validate(); });
    record(out, [&] { derive_options(); });
    return out;
}

void Config::validate() const {
    const auto list = problems();
    if (list.empty()) return;
    std::string msg = "invalid config (" + std::to_string(list.size()) + " problem" + (list.size() > 1 ? "s" : "") + ")";
    for (const auto& p : list) msg += "\n  " + p;
    throw ConfigError(msg);
}

bool Config::has(const std::string& path) const {
    const YAML::Node n = lookup(*root_, path);
    return n.IsDefined() && !n.IsNull();
}

bool Config::empty() const { return root_->size() == 0; }

double Config::number(const std::string& path, double fallback) const {
    const YAML::Node n = lookup(*root_, path);
    if (!n.IsDefined() || n.IsNull()) return fallback;
    return scalar_number(n, path);
}

int Config::integer(const std::string& path, int fallback) const {
    const double v = number(path, fallback);
    if (v != std::floor(v) || std::abs(v) > std::numeric_limits<int>::max())
        throw ConfigError(path + ": expected an integer");
    return static_cast<int>(v);
}

std::uint64_t Config::unsigned_integer(const std::string& path, std::uint64_t fallback) const {
    const YAML::Node n = lookup(*root_, path);
    if (!n.IsDefined() || n.IsNull()) return fallback;
    if (!n.IsScalar()) throw ConfigError(path + ": expected a non-negative integer");
    const std::string t = trim(n.Scalar());
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
    if (t.empty() || t[0] == '-' || end != t.c_str() + t.size() || errno == ERANGE)
        throw ConfigError(path + ": expected a non-negative integer");
    return v;
}

std::string Config::string(const std::string& path, const std::string& fallback) const {
    const YAML::Node n = lookup(*root_, path);
    if (!n.IsDefined() || n.IsNull()) return fallback;
    if (!n.IsScalar()) throw ConfigError(path + ": expected text");
    return n.Scalar();
}

bool Config::boolean(const std::string& path, bool fallback) const {
    const YAML::Node n = lookup(*root_, path);
    if (!n.IsDefined() || n.IsNull()) return fallback;
    try {
        return n.as<bool>();
    } catch (const YAML::Exception&) {
        throw ConfigError(path + ": expected true or false");
    }
}

std::vector<double> Config::numbers(const std::string& path, const std::vector<double>& fallback) const {
    const YAML::Node n = lookup(*root_, path);
    if (!n.IsDefined() || n.IsNull()) return fallback;
    if (n.IsMap()) return expand_range(n, path);
    if (n.IsScalar()) return {scalar_number(n, path)};
    std::vector<double> out;
    for (std::size_t i = 0; i < n.size(); ++i) out.push_back(scalar_number(n[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

std::vector<std::string> Config::strings(const std::string& path) const {
    const YAML::Node n = lookup(*root_, path);
    if (!n.IsDefined() || n.IsNull()) return {};
    if (n.IsScalar()) return {n.Scalar()};
    if (!n.IsSequence()) throw ConfigError(path + ": expected a list of text values");
    std::vector<std::string> out;
    for (const auto& item : n) {
        if (!item.IsScalar()) throw ConfigError(path + ": expected a list of text values");
        out.push_back(item.Scalar());
    }
    return out;
}

std::string Config::dump() const {
    YAML::Emitter em;
    em << *root_;
    return em.c_str();
}

RateSet Config::rates() const {
    const std::string preset = string("rates.preset", "pulse-train");
    RateSet base = pulse_train_reference_rates();
    if (preset == "depletion") {
        base = depletion_reference_rates();
    } else if (preset != "pulse-train") {
        throw ConfigError("rates.preset: expected pulse-train or depletion, got '" + preset + "'");
    }
    return RateSet(number("rates.gamma_r", base.gamma_r()), number("rates.Gamma_nr", base.Gamma_nr()),
                   number("rates.gamma1", base.gamma1()), number("rates.gamma2", base.gamma2()),
                   number("rates.gamma3", base.gamma3()), number("rates.gamma4", base.gamma4()),
                   boolean("rates.radiative_split_known", base.radiative_split_known()));
}

SixLevelParams Config::six_level() const {
    SixLevelParams p{rates()};
    p.lambda_mix = number("six_level.lambda_mix", p.lambda_mix);
    p.gamma_s = number("six_level.gamma_s", p.gamma_s);
    p.D_g = number("six_level.D_g", p.D_g);
    p.D_e = number("six_level.D_e", p.D_e);
    p.delta_L = number("six_level.delta_L", p.delta_L);
    return p;
}

FieldCalibration Config::field() const {
    FieldCalibration f;
    f.E_bulk = number("field.E_bulk", f.E_bulk);
    f.P_sat_bulk = number("field.P_sat_bulk", f.P_sat_bulk);
    f.P_sat_sil = number("field.P_sat_sil", f.P_sat_sil);
    f.pi_pulse_energy = number("field.pi_pulse_energy", f.pi_pulse_energy);
    f.pulse_fwhm = number("field.pulse_fwhm", f.pulse_fwhm);
    f.objective_transmission = number("field.objective_transmission", f.objective_transmission);
    return f;
}

MaterialParams Config::material() const {
    MaterialParams m;
    m.refractive_index = number("material.refractive_index", m.refractive_index);
    m.epsilon = number("material.epsilon", m.epsilon);
    m.dwf = number("material.dwf", m.dwf);
    m.rho_M = number("material.rho_M", m.rho_M);
    m.a = number("material.a", m.a);
    m.N_c = number("material.N_c", m.N_c);
    m.E_f = number("material.E_f", m.E_f);
    m.hbar_omega_op = number("material.hbar_omega_op", m.hbar_omega_op);
    m.hbar_omega_0 = number("material.hbar_omega_0", m.hbar_omega_0);
    m.temperature = number("material.temperature", m.temperature);
    return m;
}

photophys::DeriveOptions Config::derive_options() const {
    photophys::DeriveOptions o;
    o.wavelength_nm = number("derive.wavelength_nm", o.wavelength_nm);
    o.gamma_deph = number("derive.gamma_deph", o.gamma_deph);
    o.measured_psb_khz = number("derive.measured_psb_khz", o.measured_psb_khz);
    o.radiative_tolerance = number("derive.radiative_tolerance", o.radiative_tolerance);
    if (has("field.E_local")) o.E_local_override = number("field.E_local", 0.0);
    if (!(o.wavelength_nm > 0.0)) throw ConfigError("derive.wavelength_nm must be positive");
    if (!(o.gamma_deph >= 0.0)) throw ConfigError("derive.gamma_deph must be non-negative");
    if (!(o.measured_psb_khz > 0.0)) throw ConfigError("derive.measured_psb_khz must be positive");
    if (!(o.radiative_tolerance >= 0.0)) throw ConfigError("derive.radiative_tolerance must be non-negative");
    if (o.E_local_override && !(*o.E_local_override > 0.0)) throw ConfigError("field.E_local must be positive");
    return o;
}

}  // namespace siv1::config
