#pragma once

#include <vector>

#include <Eigen/Dense>

#include "siv1/model.hpp"

namespace siv1::ratedyn {

using Generator = Eigen::Matrix<double, 5, 5>;
using Vec5 = Eigen::Matrix<double, 5, 1>;

/// One-way optical pump rates g1->e1 (w1) and g2->e2 (w2), 1/ns.
struct PumpRates {
    double w1 = 0.0;
    double w2 = 0.0;
};

enum class Mode { Analytic, Simulated };

/// Rate matrix A with dp/dt = A p. Columns sum to zero; d->g_i carries gamma_{i+2}/2.
Generator build_generator(const RateSet& rates, PumpRates pump = {});

/// exp(A t) p0, t >= 0.
LevelPopulations propagate(const LevelPopulations& p0, const Generator& a, double t);

/// Moves fraction P_e of each addressed ground population into its excited partner.
LevelPopulations apply_delta_pulse(const LevelPopulations& p, double P_e,
                                   Transition target = Transition::Both);

struct EmissionWindow {
    /// Integral of gamma_r (n_e1 + n_e2) over the window.
    double photons = 0.0;
    LevelPopulations final_state;
};

/// Propagates through a window while integrating the radiative emission exactly.
EmissionWindow integrated_emission(const LevelPopulations& p0, const Generator& a, double window,
                                   double gamma_r);

/// Emission rate gamma_r (n_e1 + n_e2) in 1/ns.
double emission_rate(const LevelPopulations& p, double gamma_r);

struct GroundSplit {
    double n_g1 = 0.5;
    double n_g2 = 0.5;
    /// False when tau_ms < 10 max(tau_e): the closed form is outside its regime.
    bool regime_ok = true;
};

/// Closed-form ground split reached by a long pulse train.
GroundSplit pulse_train_steady_state_analytic(const RateSet& rates);

/// N_p delta pulses spaced by t_p from the depolarized ground state, then a trailing wait.
LevelPopulations pulse_train_steady_state_simulated(const RateSet& rates, double P_e, double t_p,
                                                    int N_p, double trailing_wait = 2000.0);

/// Exact periodic state of an endless train (pulse, wait t_p), sampled just before a pulse.
LevelPopulations pulse_train_fixed_point(const RateSet& rates, double P_e, double t_p,
                                         Transition target = Transition::Both);

/// Two-pulse prefactor alpha; linear in P_e.
double alpha_prefactor(const RateSet& rates, double P_e);

/// Repeated measurement sequence used to prepare the two-pulse readout.
struct TwoPulseProtocol {
    int init_pulses = 9;
    double init_spacing = 1000.0;
    double init_wait = 2000.0;
    double post_probe_wait = 1000.0;
    /// Fluorescence integration window after each pulse; <= 0 selects 5 max(tau_e).
    double window = 0.0;

    /// Same structure with every interval scaled to the metastable lifetime.
    static TwoPulseProtocol scaled_to(const RateSet& rates);
};

/// 1 - N2/N1 after pump and probe pulses separated by tau.
double two_pulse_signal(const RateSet& rates, double P_e, double tau, Mode mode,
                        const TwoPulseProtocol& protocol = {});

/// Signal on a delay grid, sharing the preparation work across points.
std::vector<double> two_pulse_curve(const RateSet& rates, double P_e, const std::vector<double>& taus,
                                    Mode mode, const TwoPulseProtocol& protocol = {});

/// tau_m = 65 + 30 m ns, m = 0..31.
std::vector<double> default_delay_grid();

/// Null-space population of the pumped generator.
LevelPopulations cw_steady_state(const RateSet& rates, PumpRates pump);

/// (1 - dwf) eta_det gamma_r (n_e1 + n_e2) of the cw steady state, in MHz.
double saturation_emission_rate(const RateSet& rates, double dwf, double eta_det, PumpRates pump);

/// Pump rate far above every internal rate (1e3 x the largest).
PumpRates saturating_pump(const RateSet& rates);

/// Ratio of spin-selective readout fluorescence A1/A2 from the pulse-train steady state.
double resonant_readout_ratio(const RateSet& rates, Mode mode);

/**
 * @brief n_g1 just before each pump pulse of the repeated measurement loop.
 *
 * Each round scans the default delay grid with 9 pulses at 1 us, a 2 us wait,
 * pump, tau_m, probe and 1 us of decay, then waits 100 ns before repeating.
 * Entry [r][m] is the relative deviation from the closed-form split for round r
 * and delay index m.
 */
std::vector<std::vector<double>> measurement_loop_deviation(const RateSet& rates, double P_e,
                                                            int rounds = 3);

/// Fluorescence trace after a delta pulse on the chosen transition, starting depolarized.
FluorescenceTrace lifetime_trace(const RateSet& rates, Transition target, double P_e,
                                 const std::vector<double>& edges);

}  // namespace siv1::ratedyn
