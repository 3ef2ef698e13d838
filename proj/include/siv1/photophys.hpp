#pragma once

#include <optional>
#include <string>
#include <vector>

#include "siv1/model.hpp"

namespace siv1::photophys {

/// E_bulk sqrt(P_sat_bulk / P_sat_sil) in V/m.
double field_in_sil(const FieldCalibration& cal);

/// Lorentz-Lorenz local field E (epsilon + 2) / 3.
double local_field(double E_applied, double epsilon);

/// Peak power (uW) of a Gaussian intensity pulse of energy E_p (fJ) and FWHM (ns), after transmission.
double peak_power(double energy_fj, double fwhm_ns, double transmission = 1.0);

/**
 * @brief On-axis field (V/m) at the waist of a Gaussian beam inside a medium of index n.
 *
 * Ignores the interface and aberrations, so it only bounds the configured
 * E_bulk from above.
 */
double gaussian_focus_field(double power_uw, double waist_m, double n);

/// Transition dipole (e Angstrom) from the area theorem for a pi pulse, sigma_E = FWHM / (2 sqrt(ln 2)).
double dipole_from_pi_pulse(double E_local, double intensity_fwhm_ns);

/// n omega^3 mu^2 / (3 epsilon0 pi c^3 hbar) in 1/ns, with omega = 2 pi c / lambda.
double zpl_rate_from_dipole(double mu_e_angstrom, double n, double wavelength_nm);

struct RadiativeChain {
    double gamma_r_total = 0.0;
    double mu_total = 0.0;
    /// Non-radiative bound 1/tau_combined - gamma_r_total, floored at 0.
    double Gamma_bound = 0.0;
    double qe1 = 0.0;
    double qe2 = 0.0;
    /// gamma_r_total exceeded 1/tau_combined and Gamma_bound was floored.
    bool floored = false;
};

/**
 * @brief Total radiative rate, total dipole, non-radiative bound and quantum efficiencies.
 *
 * Throws InconsistencyError when gamma_r_total exceeds 1/tau_combined by more
 * than the relative tolerance.
 */
RadiativeChain radiative_chain(double gamma_zpl, double mu_zpl, double dwf, double tau_e1, double tau_e2,
                               double tau_combined, double tolerance = 0.05);

/// F gamma_zpl / ((1/tau_e - gamma_zpl) + gamma_deph).
double cooperativity(double F, double gamma_zpl, double tau_e, double gamma_deph = 0.0);

struct PurcellRequirement {
    double F_min = 0.0;
    double tau_shortened = 0.0;
};

/// Purcell factor giving unit cooperativity and the excited-state lifetime at that factor.
PurcellRequirement purcell_requirement(double gamma_zpl, double tau_e, double gamma_deph = 0.0);

/// (1/tau_e + (F - 1) gamma_zpl)^-1.
double shortened_lifetime(double F, double gamma_zpl, double tau_e);

/// 6 pi epsilon0 m c^3 / (n^3 e^2 omega^2 tau_r).
double oscillator_strength(double tau_r_ns, double n, double wavelength_nm);

/// (2^p - 1)^2 p^(p-2) / Gamma(p+1)^2 evaluated through log-Gamma.
double log_B(double p);

/// Energy-gap-law multiphonon rate in 1/s with D = E_f / 2.
double multiphonon_rate(const MaterialParams& mat, double f_osc);

/// Gamma0 [1 + 1/(exp(hbar omega_op / k_B T) - 1)]^p.
double multiphonon_temperature(double Gamma0, double T, double hbar_omega_op_ev, double p);

struct IscRates {
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    double gamma3 = 0.0;
    double gamma4 = 0.0;
};

/// Relative ISC rates from transverse and axial spin-orbit strengths, up to a common factor.
IscRates isc_from_so(double lambda_T, double lambda_Z);

/// lambda_T / lambda_Z reproducing gamma2 / gamma1 = ratio. NoSolutionError outside [0, 3).
double lambda_ratio_from_isc(double gamma2_over_gamma1);

/// measured / predicted.
double collection_efficiency(double measured_khz, double predicted_khz);

struct DerivedEntry {
    std::string name;
    double value = 0.0;
    std::string unit;
    std::string formula;
};

struct DerivedQuantities {
    double E_sil = 0.0;
    double E_local = 0.0;
    double peak_power_uw = 0.0;
    double mu_zpl = 0.0;
    double mu_total = 0.0;
    double gamma_zpl = 0.0;
    double gamma_r_total = 0.0;
    double Gamma_bound = 0.0;
    double qe1 = 0.0;
    double qe2 = 0.0;
    double F_min_A1 = 0.0;
    double F_min_A2 = 0.0;
    double tau_shortened_A1 = 0.0;
    double tau_shortened_A2 = 0.0;
    double f_osc = 0.0;
    double Gamma_multiphonon = 0.0;
    double Gamma_multiphonon_T = 0.0;
    double n_e1_sat = 0.0;
    double n_e2_sat = 0.0;
    double I_psb_sat_mhz = 0.0;
    double eta_det = 0.0;
    std::vector<std::string> flags;
    /// Every quantity above in evaluation order, with unit and formula.
    std::vector<DerivedEntry> entries;

    void validate() const;
};

struct DeriveOptions {
    double wavelength_nm = 862.0;
    double gamma_deph = 0.0;
    /// Measured saturated PSB count rate.
    double measured_psb_khz = 33.0;
    double radiative_tolerance = 0.05;
    /// Replaces the field chain from E_bulk when set (V/m).
    std::optional<double> E_local_override;
};

/**
 * @brief Runs the calibration chain from the pi-pulse energy to the detection efficiency.
 *
 * rates supplies tau_e1, tau_e2 and the combined direct decay; the steady
 * state uses the same rates with the radiative part split off.
 */
DerivedQuantities derive_all(const FieldCalibration& cal, const MaterialParams& mat, const RateSet& rates,
                             const DeriveOptions& options = {});

}  // namespace siv1::photophys
