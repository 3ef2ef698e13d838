#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "siv1/errors.hpp"

namespace siv1 {

// Canonical level indices. Five-level vectors use (g1, g2, e1, e2, d);
// six-level vectors split d into (d1, d2).
namespace level {
inline constexpr std::size_t g1 = 0;
inline constexpr std::size_t g2 = 1;
inline constexpr std::size_t e1 = 2;
inline constexpr std::size_t e2 = 3;
inline constexpr std::size_t d = 4;
inline constexpr std::size_t d1 = 4;
inline constexpr std::size_t d2 = 5;
}  // namespace level

/// Optical transition addressed by a drive: A1 couples g1<->e1, A2 couples g2<->e2.
enum class Transition { Both, A1, A2 };

std::string to_string(Transition t);
Transition transition_from_string(const std::string& s);

/**
 * @brief Five-level rates in 1/ns.
 *
 * gamma_r and Gamma_nr act on the same e_i -> g_i channel. When only their sum
 * is known the sum is stored in gamma_r with Gamma_nr = 0 and
 * radiative_split_known() returns false.
 */
class RateSet {
public:
    RateSet(double gamma_r, double Gamma_nr, double gamma1, double gamma2, double gamma3,
            double gamma4, bool radiative_split_known = true);

    double gamma_r() const { return gamma_r_; }
    double Gamma_nr() const { return Gamma_nr_; }
    double gamma1() const { return gamma1_; }
    double gamma2() const { return gamma2_; }
    double gamma3() const { return gamma3_; }
    double gamma4() const { return gamma4_; }
    bool radiative_split_known() const { return split_known_; }

    /// gamma_r + Gamma_nr.
    double direct_decay() const { return gamma_r_ + Gamma_nr_; }
    double tau_e1() const { return 1.0 / (direct_decay() + gamma1_); }
    double tau_e2() const { return 1.0 / (direct_decay() + gamma2_); }
    /// 2 / (gamma3 + gamma4); infinite when both vanish.
    double tau_ms() const;
    double max_tau_e() const;

    /// Every rate multiplied by factor (> 0).
    RateSet scaled(double factor) const;

    bool operator==(const RateSet&) const = default;

private:
    double gamma_r_, Gamma_nr_, gamma1_, gamma2_, gamma3_, gamma4_;
    bool split_known_;
};

/// Reference rates quoted for the pulse-train analysis (gamma3 = gamma4, sum-only radiative).
RateSet pulse_train_reference_rates();
/// Reference rates quoted for the global depletion fit.
RateSet depletion_reference_rates();

/// Six-level coherent model parameters. Splittings and drive in MHz (ordinary),
/// lambda_mix and gamma_s in 1/ns.
struct SixLevelParams {
    RateSet rates;
    double lambda_mix = 1.0;
    double gamma_s = 0.0;
    double D_g = 2.25;
    double D_e = 2.25 + 967.0 / 4.0;
    double delta_L = 0.0;
    double rabi_peak = 0.0;

    void validate() const;
    /// delta_L (MHz) that puts the given transition on resonance.
    double resonant_detuning(Transition t) const;
    SixLevelParams with_detuning(double delta) const;
};

/**
 * @brief Level populations, five or six entries in canonical order.
 *
 * Entries are validated to lie in [0,1] and sum to 1 within 1e-9; round-off
 * excursions below that tolerance are clamped.
 */
class LevelPopulations {
public:
    explicit LevelPopulations(const Eigen::VectorXd& values);

    static LevelPopulations depolarized_ground(std::size_t n_levels = 5);
    static LevelPopulations pure(std::size_t index, std::size_t n_levels = 5);

    std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
    double operator[](std::size_t i) const { return values_(static_cast<Eigen::Index>(i)); }
    const Eigen::VectorXd& values() const { return values_; }
    double sum() const { return values_.sum(); }

    static constexpr double normalization_tolerance = 1e-9;

private:
    Eigen::VectorXd values_;
};

std::vector<std::string> level_names(std::size_t n_levels);

// Pulse sequence segments. Delta pulses are instantaneous; all others carry a duration.
struct DeltaPulse {
    double excitation_probability = 0.0;
    Transition target = Transition::Both;
};

/// Gaussian resonant pulse; center is measured from the segment start.
struct GaussianPulse {
    double peak_rabi_mhz = 0.0;
    double fwhm_ns = 1.5;
    double center_ns = 0.0;
    double duration_ns = 0.0;
    Transition target = Transition::A1;
};

/// Field amplitude modulated as |sin(2 pi f t)|.
struct QuasiCW {
    double amplitude_mhz = 0.0;
    double modulation_mhz = 10.0;
    double duration_ns = 0.0;
    Transition target = Transition::A1;
};

struct Wait {
    double duration_ns = 0.0;
};

using Segment = std::variant<DeltaPulse, GaussianPulse, QuasiCW, Wait>;

double segment_duration(const Segment& s);

class PulseSequence {
public:
    explicit PulseSequence(std::vector<Segment> segments);

    const std::vector<Segment>& segments() const { return segments_; }
    double total_duration() const;
    /// True when any segment needs the coherent model (Gaussian or quasi-cw drive).
    bool has_coherent_drive() const;

private:
    std::vector<Segment> segments_;
};

/**
 * @brief Expected photon emission rate per time bin, optionally with sampled counts.
 *
 * rates[i] is the mean emission rate (1/ns) over [edges[i], edges[i+1]).
 */
class FluorescenceTrace {
public:
    FluorescenceTrace(std::vector<double> edges, std::vector<double> rates);

    const std::vector<double>& edges() const { return edges_; }
    const std::vector<double>& rates() const { return rates_; }
    std::vector<double> bin_centers() const;
    std::size_t bins() const { return rates_.size(); }

    const std::optional<std::vector<std::uint64_t>>& counts() const { return counts_; }
    std::optional<std::uint64_t> seed() const { return seed_; }

    /// Poisson-sampled counts with mean scale * rate * bin width.
    FluorescenceTrace with_counts(double scale, std::uint64_t seed) const;
    /// Same bins with every rate multiplied by factor.
    FluorescenceTrace scaled(double factor) const;

private:
    std::vector<double> edges_;
    std::vector<double> rates_;
    std::optional<std::vector<std::uint64_t>> counts_;
    std::optional<std::uint64_t> seed_;
};

/// Host and emitter constants for the photophysics chain. SI units except energies in eV.
struct MaterialParams {
    double refractive_index = 2.6;
    double epsilon = 6.76;
    double dwf = 0.08;
    double rho_M = 3170.0;
    double a = 3.094e-10;
    int N_c = 4;
    double E_f = 8.96;
    double hbar_omega_op = 0.1183;
    double hbar_omega_0 = 1.438;
    double temperature = 5.0;

    void validate() const;
    /// Number of phonons bridging the gap, hbar_omega_0 / hbar_omega_op.
    double phonon_order() const { return hbar_omega_0 / hbar_omega_op; }
};

/// Optical field calibration inputs. Fields in V/m, powers in uW, energies in fJ.
struct FieldCalibration {
    double E_bulk = 4.9e3;
    double P_sat_bulk = 819.0;
    double P_sat_sil = 254.0;
    double pi_pulse_energy = 2.8;
    double pulse_fwhm = 1.5;
    double objective_transmission = 0.87;

    void validate() const;
};

struct FitParameter {
    std::string name;
    std::string unit;
    double value = 0.0;
    double uncertainty = 0.0;
    /// 95% interval; equal to value when not computed.
    double ci_low = 0.0;
    double ci_high = 0.0;
};

struct FitResult {
    std::vector<FitParameter> parameters;
    double objective = 0.0;
    bool converged = false;
    int iterations = 0;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> warnings;

    const FitParameter& at(const std::string& name) const;
    double value(const std::string& name) const { return at(name).value; }
    Eigen::VectorXd values() const;
    void validate() const;
};

/// Optimizer or fit that stopped before meeting its tolerance; carries the best point found.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, FitResult best)
        : std::runtime_error(what), best_(std::move(best)) {}
    const FitResult& best() const { return best_; }

private:
    FitResult best_;
};

/**
 * @brief Invert measured lifetimes and the two-pulse slope alpha/P_e to a RateSet.
 *
 * gamma3/gamma4 = gamma34_ratio and tau_ms = 2/(gamma3+gamma4). gamma1 is found
 * by bisection with gamma2 - gamma1 fixed by the lifetimes. The returned set has
 * the direct decay sum in gamma_r, Gamma_nr = 0 and the split flagged unknown.
 */
RateSet rate_set_from_lifetimes(double tau_e1, double tau_e2, double tau_ms, double alpha_slope,
                                double gamma34_ratio = 1.0);

/// alpha / P_e for the given rates (delta-pulse two-pulse prefactor per unit excitation).
double alpha_slope(const RateSet& rates);

}  // namespace siv1
