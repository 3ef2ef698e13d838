#include "siv1/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace siv1 {

namespace {

void require_finite_nonneg(double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) {
        std::ostringstream os;
        os << name << " must be finite and >= 0 (got " << v << ")";
        throw DomainError(os.str());
    }
}

void require_positive(double v, const char* name) {
    if (!std::isfinite(v) || v <= 0.0) {
        std::ostringstream os;
        os << name << " must be finite and > 0 (got " << v << ")";
        throw DomainError(os.str());
    }
}

}  // namespace

std::string to_string(Transition t) {
    switch (t) {
        case Transition::Both: return "both";
        case Transition::A1: return "A1";
        case Transition::A2: return "A2";
    }
    return "both";
}

Transition transition_from_string(const std::string& s) {
    if (s == "A1" || s == "a1") return Transition::A1;
    if (s == "A2" || s == "a2") return Transition::A2;
    if (s == "both" || s == "Both") return Transition::Both;
    throw DomainError("unknown transition '" + s + "' (expected A1, A2 or both)");
}

RateSet::RateSet(double gamma_r, double Gamma_nr, double gamma1, double gamma2, double gamma3,
                 double gamma4, bool radiative_split_known)
    : gamma_r_(gamma_r), Gamma_nr_(Gamma_nr), gamma1_(gamma1), gamma2_(gamma2), gamma3_(gamma3),
      gamma4_(gamma4), split_known_(radiative_split_known) {
    require_positive(gamma_r, "gamma_r");
    require_finite_nonneg(Gamma_nr, "Gamma_nr");
    require_finite_nonneg(gamma1, "gamma1");
    require_finite_nonneg(gamma2, "gamma2");
    require_finite_nonneg(gamma3, "gamma3");
    require_finite_nonneg(gamma4, "gamma4");
}

double RateSet::tau_ms() const {
    const double s = gamma3_ + gamma4_;
    return s > 0.0 ? 2.0 / s : std::numeric_limits<double>::infinity();
}

double RateSet::max_tau_e() const { return std::max(tau_e1(), tau_e2()); }

RateSet RateSet::scaled(double factor) const {
    require_positive(factor, "scale factor");
    return RateSet(gamma_r_ * factor, Gamma_nr_ * factor, gamma1_ * factor, gamma2_ * factor,
                   gamma3_ * factor, gamma4_ * factor, split_known_);
}

RateSet pulse_train_reference_rates() {
    return RateSet(1.0 / 9.0, 0.0, 1.0 / 11.4, 1.0 / 20.5, 1.0 / 240.0, 1.0 / 240.0, false);
}

RateSet depletion_reference_rates() {
    return RateSet(1.0 / 9.1, 0.0, 1.0 / 11.3, 1.0 / 20.6, 1.0 / 270.0, 1.0 / 250.0, false);
}

void SixLevelParams::validate() const {
    require_finite_nonneg(lambda_mix, "lambda_mix");
    require_finite_nonneg(gamma_s, "gamma_s");
    require_finite_nonneg(rabi_peak, "rabi_peak");
    if (!std::isfinite(D_g) || !std::isfinite(D_e) || !std::isfinite(delta_L))
        throw DomainError("D_g, D_e and delta_L must be finite");
}

double SixLevelParams::resonant_detuning(Transition t) const {
    // Zeroes the (g1,e1) term for A1 and the (g2,e2) term for A2.
    switch (t) {
        case Transition::A2: return 2.0 * (D_g - D_e);
        case Transition::A1:
        case Transition::Both: return -2.0 * (D_g - D_e);
    }
    return 0.0;
}

SixLevelParams SixLevelParams::with_detuning(double delta) const {
    SixLevelParams p = *this;
    p.delta_L = delta;
    return p;
}

LevelPopulations::LevelPopulations(const Eigen::VectorXd& values) : values_(values) {
    if (values_.size() != 5 && values_.size() != 6)
        throw DomainError("LevelPopulations needs 5 or 6 entries");
    for (Eigen::Index i = 0; i < values_.size(); ++i) {
        const double v = values_(i);
        if (!std::isfinite(v) || v < -normalization_tolerance || v > 1.0 + normalization_tolerance) {
            std::ostringstream os;
            os << "population " << i << " outside [0,1]: " << v;
            throw DomainError(os.str());
        }
        values_(i) = std::clamp(v, 0.0, 1.0);
    }
    if (std::abs(values_.sum() - 1.0) > normalization_tolerance) {
        std::ostringstream os;
        os.precision(17);
        os << "populations sum to " << values_.sum() << ", expected 1";
        throw DomainError(os.str());
    }
}

LevelPopulations LevelPopulations::depolarized_ground(std::size_t n_levels) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_levels));
    v(level::g1) = 0.5;
    v(level::g2) = 0.5;
    return LevelPopulations(v);
}

LevelPopulations LevelPopulations::pure(std::size_t index, std::size_t n_levels) {
    if (index >= n_levels) throw DomainError("level index out of range");
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_levels));
    v(static_cast<Eigen::Index>(index)) = 1.0;
    return LevelPopulations(v);
}

std::vector<std::string> level_names(std::size_t n_levels) {
    if (n_levels == 5) return {"g1", "g2", "e1", "e2", "d"};
    if (n_levels == 6) return {"g1", "g2", "e1", "e2", "d1", "d2"};
    throw DomainError("level_names: expected 5 or 6 levels");
}

double segment_duration(const Segment& s) {
    return std::visit(
        [](const auto& seg) -> double {
            using T = std::decay_t<decltype(seg)>;
            if constexpr (std::is_same_v<T, DeltaPulse>) return 0.0;
            else return seg.duration_ns;
        },
        s);
}

PulseSequence::PulseSequence(std::vector<Segment> segments) : segments_(std::move(segments)) {
    for (const auto& s : segments_) {
        std::visit(
            [](const auto& seg) {
                using T = std::decay_t<decltype(seg)>;
                if constexpr (std::is_same_v<T, DeltaPulse>) {
                    const double p = seg.excitation_probability;
                    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("DeltaPulse: P_e must lie in [0,1]");
                } else {
                    require_positive(seg.duration_ns, "segment duration");
                    if constexpr (std::is_same_v<T, GaussianPulse>) {
                        require_positive(seg.fwhm_ns, "GaussianPulse fwhm");
                        require_finite_nonneg(seg.peak_rabi_mhz, "GaussianPulse peak");
                    } else if constexpr (std::is_same_v<T, QuasiCW>) {
                        require_finite_nonneg(seg.amplitude_mhz, "QuasiCW amplitude");
                        require_positive(seg.modulation_mhz, "QuasiCW modulation");
                    }
                }
            },
            s);
    }
    if (!std::isfinite(total_duration())) throw DomainError("sequence duration must be finite");
}

double PulseSequence::total_duration() const {
    double t = 0.0;
    for (const auto& s : segments_) t += segment_duration(s);
    return t;
}

bool PulseSequence::has_coherent_drive() const {
    return std::any_of(segments_.begin(), segments_.end(), [](const Segment& s) {
        return std::holds_alternative<GaussianPulse>(s) || std::holds_alternative<QuasiCW>(s);
    });
}

FluorescenceTrace::FluorescenceTrace(std::vector<double> edges, std::vector<double> rates)
    : edges_(std::move(edges)), rates_(std::move(rates)) {
    if (edges_.size() < 2 || rates_.size() + 1 != edges_.size())
        throw DomainError("FluorescenceTrace: need n+1 edges for n rates");
    for (std::size_t i = 1; i < edges_.size(); ++i)
        if (!(edges_[i] > edges_[i - 1])) throw DomainError("FluorescenceTrace: edges must increase");
    for (double& r : rates_) {
        if (!std::isfinite(r) || r < -1e-12) throw DomainError("FluorescenceTrace: negative rate");
        r = std::max(r, 0.0);
    }
}

std::vector<double> FluorescenceTrace::bin_centers() const {
    std::vector<double> c(rates_.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.5 * (edges_[i] + edges_[i + 1]);
    return c;
}

FluorescenceTrace FluorescenceTrace::with_counts(double scale, std::uint64_t seed) const {
    require_finite_nonneg(scale, "count scale");
    FluorescenceTrace out = *this;
    std::mt19937_64 rng(seed);
    std::vector<std::uint64_t> counts(rates_.size());
    for (std::size_t i = 0; i < rates_.size(); ++i) {
        const double mean = scale * rates_[i] * (edges_[i + 1] - edges_[i]);
        if (mean <= 0.0) {
            counts[i] = 0;
            continue;
        }
        std::poisson_distribution<std::uint64_t> dist(mean);
        counts[i] = dist(rng);
    }
    out.counts_ = std::move(counts);
    out.seed_ = seed;
    return out;
}

FluorescenceTrace FluorescenceTrace::scaled(double factor) const {
    require_finite_nonneg(factor, "trace scale");
    std::vector<double> r = rates_;
    for (double& v : r) v *= factor;
    return FluorescenceTrace(edges_, std::move(r));
}

void MaterialParams::validate() const {
    require_positive(refractive_index, "refractive_index");
    require_positive(epsilon, "epsilon");
    require_positive(rho_M, "rho_M");
    require_positive(a, "a");
    require_positive(E_f, "E_f");
    require_positive(hbar_omega_op, "hbar_omega_op");
    require_positive(hbar_omega_0, "hbar_omega_0");
    require_positive(temperature, "temperature");
    if (N_c < 1) throw DomainError("N_c must be >= 1");
    if (!(dwf > 0.0 && dwf <= 1.0)) throw DomainError("dwf must lie in (0,1]");
    if (phonon_order() < 1.0) throw DomainError("hbar_omega_0 / hbar_omega_op must be >= 1");
}

void FieldCalibration::validate() const {
    require_positive(E_bulk, "E_bulk");
    require_positive(P_sat_bulk, "P_sat_bulk");
    require_positive(P_sat_sil, "P_sat_sil");
    require_positive(pi_pulse_energy, "pi_pulse_energy");
    require_positive(pulse_fwhm, "pulse_fwhm");
    if (!(objective_transmission > 0.0 && objective_transmission <= 1.0))
        throw DomainError("objective_transmission must lie in (0,1]");
}

const FitParameter& FitResult::at(const std::string& name) const {
    for (const auto& p : parameters)
        if (p.name == name) return p;
    throw DomainError("FitResult has no parameter '" + name + "'");
}

Eigen::VectorXd FitResult::values() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(parameters.size()));
    for (std::size_t i = 0; i < parameters.size(); ++i) v(static_cast<Eigen::Index>(i)) = parameters[i].value;
    return v;
}

void FitResult::validate() const {
    for (const auto& p : parameters)
        if (!(p.uncertainty >= 0.0)) throw DomainError("negative uncertainty for " + p.name);
    if (converged && !std::isfinite(objective)) throw DomainError("non-finite objective on success");
}

double alpha_slope(const RateSet& r) {
    const double g1 = r.gamma1(), g2 = r.gamma2(), g3 = r.gamma3(), g4 = r.gamma4();
    if (g1 == 0.0 || g2 == 0.0) throw DivisionByZeroError("alpha prefactor needs gamma1, gamma2 > 0");
    const double te1 = r.tau_e1(), te2 = r.tau_e2(), tms = r.tau_ms();
    const double branching = (g3 * te1 + g4 * te2) / (g3 / g1 + g4 / g2);
    const double correction =
        (1.0 - (g3 * te2 + g4 * te1) / 2.0) / ((1.0 - te1 / tms) * (1.0 - te2 / tms));
    return branching * correction;
}

RateSet rate_set_from_lifetimes(double tau_e1, double tau_e2, double tau_ms, double alpha,
                                double gamma34_ratio) {
    require_positive(tau_e1, "tau_e1");
    require_positive(tau_e2, "tau_e2");
    require_positive(tau_ms, "tau_ms");
    require_positive(gamma34_ratio, "gamma34_ratio");
    if (!(tau_ms > tau_e1 && tau_ms > tau_e2))
        throw DomainError("tau_ms must exceed both excited-state lifetimes");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("alpha_slope must be positive");

    const double g4 = 2.0 / (tau_ms * (1.0 + gamma34_ratio));
    const double g3 = gamma34_ratio * g4;
    const double k1 = 1.0 / tau_e1;
    const double shift = 1.0 / tau_e2 - 1.0 / tau_e1;  // gamma2 - gamma1
    const auto make = [&](double g1) {
        const double g2 = g1 + shift;
        return RateSet(k1 - g1, 0.0, g1, g2, g3, g4, false);
    };

    // alpha/P_e grows monotonically with gamma1 on (lo, hi); both ends are open.
    double lo = std::max(0.0, -shift);
    double hi = k1;
    const double span = hi - lo;
    if (!(span > 0.0)) throw NoSolutionError("lifetimes leave no admissible gamma1 range");
    const double eps = span * 1e-14;
    const auto slope_at = [&](double g1) {
        const double g2 = g1 + shift;
        if (g1 <= 0.0 || g2 <= 0.0) return 0.0;
        return alpha_slope(make(g1));
    };
    const double a_max = slope_at(hi - eps);
    if (!(alpha < a_max)) {
        std::ostringstream os;
        os << "alpha_slope " << alpha << " exceeds the attainable maximum " << a_max
           << " for these lifetimes";
        throw NoSolutionError(os.str());
    }
    double a = lo, b = hi - eps;
    for (int it = 0; it < 400 && (b - a) > 1e-17 * k1; ++it) {
        const double mid = 0.5 * (a + b);
        if (slope_at(mid) < alpha) a = mid;
        else b = mid;
    }
    return make(0.5 * (a + b));
}

}  // namespace siv1
