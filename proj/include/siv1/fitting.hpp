#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "siv1/lindblad.hpp"
#include "siv1/model.hpp"
#include "siv1/optimize.hpp"

namespace siv1::inference {

/**
 * @brief One measured or synthetic curve.
 *
 * x is strictly increasing (ns, fJ or uW), y holds counts or a normalized
 * signal. Without sigma the fits weight points with sigma^2 = max(y, 1).
 */
struct Dataset {
    std::vector<double> x;
    std::vector<double> y;
    std::optional<std::vector<double>> sigma;
    std::string protocol;
    std::optional<double> excitation_probability;
    /// Pumping power in uW for depletion curves.
    std::optional<double> power;
    std::optional<Transition> target;

    std::size_t size() const { return x.size(); }
    void validate() const;
    /// Explicit uncertainties, or the counting-statistics default.
    std::vector<double> effective_sigma() const;
};

/**
 * @brief Weighted least-squares fit of A exp(-t/tau) (+ c).
 *
 * Parameters: amplitude, tau, offset (offset fixed at 0 when with_offset is
 * false). Uncertainties come from (J^T W J)^-1, scaled by the reduced
 * chi-square when the data carry no explicit sigma. A curve with no
 * measurable decay returns amplitude 0, tau NaN with infinite uncertainty and
 * a warning.
 */
FitResult fit_exponential(const Dataset& data, bool with_offset = false);

/// Fits I0 (1 - exp(-x/E_s)). Throws UnidentifiableError when x_max/E_s < 0.21.
FitResult fit_saturation(const Dataset& data);

/// 1 - exp(-E_p/E_s).
double excitation_probability(double E_p, double E_s);

struct EnergyCorrection {
    Dataset data;
    /// P_e(mean energy) / P_e(E_i) applied to each point.
    std::vector<double> factors;
    double reference_probability = 0.0;
    std::vector<std::string> warnings;
};

/**
 * @brief Refers every two-pulse point to the excitation probability of the mean pump energy.
 *
 * The signal is linear in P_e, so point i is multiplied by
 * P_e(mean E) / P_e(E_i). Deviations above 1% are accepted with a warning;
 * a zero or negative energy throws DomainError.
 */
EnergyCorrection pulse_energy_correction(const Dataset& raw, const std::vector<double>& pulse_energies_fj,
                                         double E_s_fj);

struct TwoPulseFitOptions {
    /// Points with tau below this are ignored; 10 max(tau_e) keeps the single-exponential regime.
    double min_delay_ns = 0.0;
    /// Pairwise tau_ms disagreement, in combined standard deviations, that raises InconsistentDecayError.
    double consistency_sigmas = 3.0;
    /// Lower bound on each tau_ms uncertainty in that check, relative to tau_ms.
    double consistency_floor = 1e-3;
    /// Slope uncertainty multiplier when only one dataset is available.
    double single_dataset_inflation = 3.0;
};

/**
 * @brief Shared-tau_ms fit of 1 - N2/N1 curves at several excitation probabilities.
 *
 * Every dataset needs excitation_probability and at least 8 points inside the
 * delay domain. Parameters: tau_ms, alpha_1..alpha_n (in input order),
 * alpha_slope (through the origin) and linearity_r2 (uncentered R^2 of that
 * line; zero uncertainty).
 */
FitResult fit_two_pulse(const std::vector<Dataset>& datasets, const TwoPulseFitOptions& options = {});

struct DepletionFitConfig {
    /// Fixed structure: splittings, lambda_mix and gamma_s. Its rates are ignored.
    SixLevelParams base{depletion_reference_rates()};
    lindblad::DepletionOptions simulation{lindblad::QuasiCWMode::AveragePower};
    /// Box for (gamma_r, gamma1, gamma2, gamma3, gamma4) in 1/ns and kappa in MHz/sqrt(uW).
    Eigen::VectorXd lower = (Eigen::VectorXd(6) << 1.0 / 30, 1.0 / 100, 1.0 / 100, 1.0 / 2000, 1.0 / 2000, 0.1)
                                .finished();
    Eigen::VectorXd upper = (Eigen::VectorXd(6) << 1.0 / 3, 1.0 / 3, 1.0 / 3, 1.0 / 50, 1.0 / 50, 1000.0)
                                .finished();
    bool global_search = true;
    DifferentialEvolutionOptions de = [] {
        DifferentialEvolutionOptions o;
        o.population = 40;
        o.max_generations = 200;
        o.x_tolerance = 1e-3;
        return o;
    }();
    NelderMeadOptions nm = [] {
        NelderMeadOptions o;
        o.x_tolerance = 1e-7;
        o.max_iterations = 4000;
        return o;
    }();
    /// Local start when global_search is false, same layout as the bounds.
    std::optional<Eigen::VectorXd> start;
    /// Log-spaced offsets scanned along gamma1 and gamma2 after each refinement.
    std::vector<double> profile_offsets{-0.3, -0.15, -0.05, 0.05, 0.15, 0.3};
    int max_profile_rounds = 3;
    /// Log standard error above which a parameter is reported as poorly constrained.
    double identifiability_threshold = 0.5;
};

/// Simulated depletion signals for every dataset at the given rates and kappa.
std::vector<std::vector<double>> depletion_model(const std::vector<Dataset>& datasets, const RateSet& rates,
                                                 double kappa, const DepletionFitConfig& config);

/**
 * @brief Simultaneous fit of depletion curves at several powers and targets.
 *
 * Each dataset needs power (uW) and target; the drive amplitude is
 * kappa sqrt(power). Differential evolution in log space is followed by
 * Nelder-Mead and a scan along gamma1 and gamma2 that restarts the simplex
 * whenever it finds a lower objective. Intervals are 95% from the curvature in
 * log space. Parameters: gamma_r, gamma1..gamma4, kappa.
 */
FitResult fit_depletion_global(const std::vector<Dataset>& datasets, const DepletionFitConfig& config = {});

}  // namespace siv1::inference
