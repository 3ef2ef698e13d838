#include "siv1/photophys.hpp"

#include <cmath>
#include <sstream>

#include "siv1/constants.hpp"
#include "siv1/ratedyn.hpp"

namespace siv1::photophys {

namespace c = siv1::constants;

namespace {

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(name) + " must be positive");
}

double angular_frequency(double wavelength_nm) { return 2.0 * c::pi * c::c_light / (wavelength_nm * 1e-9); }

}  // namespace

double field_in_sil(const FieldCalibration& cal) {
    cal.validate();
    return cal.E_bulk * std::sqrt(cal.P_sat_bulk / cal.P_sat_sil);
}

double local_field(double E_applied, double epsilon) {
    if (!(E_applied >= 0.0)) throw DomainError("applied field must be >= 0");
    if (!(epsilon >= 1.0)) throw DomainError("epsilon must be >= 1");
    return E_applied * (epsilon + 2.0) / 3.0;
}

double peak_power(double energy_fj, double fwhm_ns, double transmission) {
    require_positive(energy_fj, "pulse energy");
    require_positive(fwhm_ns, "pulse FWHM");
    if (!(transmission > 0.0 && transmission <= 1.0)) throw DomainError("transmission must lie in (0,1]");
    // Integral of exp(-4 ln2 t^2 / FWHM^2) is FWHM sqrt(pi / (4 ln 2)).
    const double width_ns = fwhm_ns * std::sqrt(c::pi / (4.0 * std::log(2.0)));
    return transmission * energy_fj / width_ns;  // fJ/ns = uW
}

double gaussian_focus_field(double power_uw, double waist_m, double n) {
    require_positive(power_uw, "power");
    require_positive(waist_m, "beam waist");
    require_positive(n, "refractive index");
    const double intensity = 2.0 * power_uw * 1e-6 / (c::pi * waist_m * waist_m);
    return std::sqrt(2.0 * intensity / (c::c_light * n * c::epsilon0));
}

double dipole_from_pi_pulse(double E_local, double fwhm_ns) {
    require_positive(E_local, "local field");
    require_positive(fwhm_ns, "pulse FWHM");
    const double sigma = fwhm_ns * 1e-9 / (2.0 * std::sqrt(std::log(2.0)));
    const double mu = c::pi * c::hbar / (E_local * sigma * std::sqrt(2.0 * c::pi));
    return mu / (c::e_charge * c::angstrom);
}

double zpl_rate_from_dipole(double mu, double n, double wavelength_nm) {
    if (!(mu >= 0.0)) throw DomainError("dipole moment must be >= 0");
    require_positive(n, "refractive index");
    require_positive(wavelength_nm, "wavelength");
    const double w = angular_frequency(wavelength_nm);
    const double mu_si = mu * c::e_charge * c::angstrom;
    const double rate =
        n * w * w * w * mu_si * mu_si / (3.0 * c::epsilon0 * c::pi * std::pow(c::c_light, 3) * c::hbar);
    return rate * 1e-9;
}

RadiativeChain radiative_chain(double gamma_zpl, double mu_zpl, double dwf, double tau_e1, double tau_e2,
                               double tau_combined, double tolerance) {
    require_positive(gamma_zpl, "gamma_zpl");
    if (!(mu_zpl >= 0.0)) throw DomainError("mu_zpl must be >= 0");
    if (!(dwf > 0.0 && dwf <= 1.0)) throw DomainError("dwf must lie in (0,1]");
    require_positive(tau_e1, "tau_e1");
    require_positive(tau_e2, "tau_e2");
    require_positive(tau_combined, "tau_combined");
    RadiativeChain out;
    out.gamma_r_total = gamma_zpl / dwf;
    out.mu_total = mu_zpl / std::sqrt(dwf);
    const double total = 1.0 / tau_combined;
    if (out.gamma_r_total > total * (1.0 + tolerance)) {
        std::ostringstream os;
        os << "radiative rate " << out.gamma_r_total << "/ns exceeds the measured decay rate " << total << "/ns";
        throw InconsistencyError(os.str());
    }
    out.Gamma_bound = total - out.gamma_r_total;
    if (out.Gamma_bound < 0.0) {
        out.Gamma_bound = 0.0;
        out.floored = true;
    }
    out.qe1 = out.gamma_r_total * tau_e1;
    out.qe2 = out.gamma_r_total * tau_e2;
    return out;
}

double cooperativity(double F, double gamma_zpl, double tau_e, double gamma_deph) {
    require_positive(gamma_zpl, "gamma_zpl");
    require_positive(tau_e, "tau_e");
    if (!(gamma_deph >= 0.0)) throw DomainError("gamma_deph must be >= 0");
    if (!(F >= 0.0)) throw DomainError("Purcell factor must be >= 0");
    return F * gamma_zpl / ((1.0 / tau_e - gamma_zpl) + gamma_deph);
}

double shortened_lifetime(double F, double gamma_zpl, double tau_e) {
    require_positive(tau_e, "tau_e");
    if (!(F >= 1.0)) throw DomainError("Purcell factor must be >= 1");
    if (!(gamma_zpl >= 0.0)) throw DomainError("gamma_zpl must be >= 0");
    return 1.0 / (1.0 / tau_e + (F - 1.0) * gamma_zpl);
}

PurcellRequirement purcell_requirement(double gamma_zpl, double tau_e, double gamma_deph) {
    require_positive(gamma_zpl, "gamma_zpl");
    require_positive(tau_e, "tau_e");
    if (!(gamma_deph >= 0.0)) throw DomainError("gamma_deph must be >= 0");
    if (!(gamma_zpl < 1.0 / tau_e)) throw DomainError("gamma_zpl must be below the total decay rate");
    PurcellRequirement r;
    r.F_min = ((1.0 / tau_e - gamma_zpl) + gamma_deph) / gamma_zpl;
    r.tau_shortened = shortened_lifetime(std::max(r.F_min, 1.0), gamma_zpl, tau_e);
    return r;
}

double oscillator_strength(double tau_r_ns, double n, double wavelength_nm) {
    require_positive(tau_r_ns, "tau_r");
    require_positive(n, "refractive index");
    require_positive(wavelength_nm, "wavelength");
    const double w = angular_frequency(wavelength_nm);
    return 6.0 * c::pi * c::epsilon0 * c::m_electron * std::pow(c::c_light, 3) /
           (n * n * n * c::e_charge * c::e_charge * w * w * tau_r_ns * 1e-9);
}

double log_B(double p) {
    if (!(p >= 1.0)) throw DomainError("phonon order must be >= 1");
    // log(2^p - 1) = p log 2 + log1p(-2^-p).
    const double log_num = 2.0 * (p * std::log(2.0) + std::log1p(-std::exp2(-p))) + (p - 2.0) * std::log(p);
    return log_num - 2.0 * std::lgamma(p + 1.0);
}

double multiphonon_rate(const MaterialParams& mat, double f_osc) {
    mat.validate();
    require_positive(f_osc, "oscillator strength");
    const double p = mat.phonon_order();
    const double D_ev = mat.E_f / 2.0;
    if (!(D_ev > mat.hbar_omega_op)) throw DomainError("dissociation energy must exceed the phonon energy");
    const double alpha = std::log(D_ev / mat.hbar_omega_op) / mat.hbar_omega_op;  // 1/eV
    const double D = D_ev * c::electron_volt;
    const double log_kappa = std::log(f_osc) + log_B(p) + std::log((mat.N_c - 1.0) / (mat.N_c * mat.N_c)) +
                             std::log(4.0 * c::pi * c::pi * mat.rho_M * std::pow(mat.a, 3) * D /
                                      (3.0 * c::hbar * c::m_electron));
    return std::exp(log_kappa - alpha * mat.hbar_omega_0);
}

double multiphonon_temperature(double Gamma0, double T, double hbar_omega_op_ev, double p) {
    if (!(Gamma0 >= 0.0)) throw DomainError("Gamma0 must be >= 0");
    if (!(T >= 0.0)) throw DomainError("temperature must be >= 0");
    require_positive(hbar_omega_op_ev, "phonon energy");
    if (!(p >= 0.0)) throw DomainError("phonon order must be >= 0");
    if (T == 0.0) return Gamma0;
    const double x = hbar_omega_op_ev * c::electron_volt / (c::k_boltzmann * T);
    return Gamma0 * std::pow(1.0 + 1.0 / std::expm1(x), p);
}

IscRates isc_from_so(double lambda_T, double lambda_Z) {
    if (!(lambda_T >= 0.0) || !(lambda_Z >= 0.0)) throw DomainError("spin-orbit strengths must be >= 0");
    const double t2 = lambda_T * lambda_T, z2 = lambda_Z * lambda_Z;
    return {2.0 * z2 / 3.0 + t2 / 9.0, t2 / 3.0, t2 / 3.0 + 2.0 * z2 / 3.0, t2};
}

double lambda_ratio_from_isc(double q) {
    // q = (r^2/3) / (2/3 + r^2/9)  =>  r^2 = (2q/3) / (1/3 - q/9).
    if (!(q >= 0.0) || !(q < 3.0)) throw NoSolutionError("gamma2/gamma1 must lie in [0, 3)");
    return std::sqrt((2.0 * q / 3.0) / (1.0 / 3.0 - q / 9.0));
}

double collection_efficiency(double measured, double predicted) {
    require_positive(predicted, "predicted rate");
    if (!(measured >= 0.0)) throw DomainError("measured rate must be >= 0");
    return measured / predicted;
}

void DerivedQuantities::validate() const {
    for (double r : {gamma_zpl, gamma_r_total, Gamma_bound, Gamma_multiphonon, Gamma_multiphonon_T})
        if (!(r >= 0.0)) throw DomainError("derived rates must be >= 0");
    for (double q : {qe1, qe2})
        if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantum efficiency outside [0,1]");
    if (!(F_min_A1 >= 1.0) || !(F_min_A2 >= 1.0)) throw DomainError("minimum Purcell factor below 1");
}

DerivedQuantities derive_all(const FieldCalibration& cal, const MaterialParams& mat, const RateSet& rates,
                             const DeriveOptions& o) {
    cal.validate();
    mat.validate();
    DerivedQuantities d;
    const auto add = [&d](const std::string& name, double v, const std::string& unit, const std::string& f) {
        d.entries.push_back({name, v, unit, f});
    };

    d.peak_power_uw = peak_power(cal.pi_pulse_energy, cal.pulse_fwhm, cal.objective_transmission);
    add("peak_power", d.peak_power_uw, "uW", "T E_pi / (FWHM sqrt(pi/(4 ln 2)))");
    add("E_bulk", cal.E_bulk, "V/m", "input");
    d.E_sil = field_in_sil(cal);
    add("E_sil", d.E_sil, "V/m", "E_bulk sqrt(P_sat_bulk/P_sat_sil)");
    if (o.E_local_override) {
        if (!(*o.E_local_override > 0.0)) throw DomainError("E_local override must be positive");
        d.E_local = *o.E_local_override;
        add("E_local", d.E_local, "V/m", "override");
    } else {
        d.E_local = local_field(d.E_sil, mat.epsilon);
        add("E_local", d.E_local, "V/m", "E_sil (epsilon+2)/3");
    }
    d.mu_zpl = dipole_from_pi_pulse(d.E_local, cal.pulse_fwhm);
    add("mu_zpl", d.mu_zpl, "e A", "pi hbar / (E_local sigma_E sqrt(2 pi))");
    d.gamma_zpl = zpl_rate_from_dipole(d.mu_zpl, mat.refractive_index, o.wavelength_nm);
    add("gamma_zpl", d.gamma_zpl, "1/ns", "n omega^3 mu^2 / (3 epsilon0 pi c^3 hbar)");

    const RadiativeChain rc = radiative_chain(d.gamma_zpl, d.mu_zpl, mat.dwf, rates.tau_e1(), rates.tau_e2(),
                                              1.0 / rates.direct_decay(), o.radiative_tolerance);
    d.gamma_r_total = rc.gamma_r_total;
    d.mu_total = rc.mu_total;
    d.Gamma_bound = rc.Gamma_bound;
    d.qe1 = rc.qe1;
    d.qe2 = rc.qe2;
    if (rc.floored) d.flags.push_back("non-radiative bound floored at 0");
    add("gamma_r_total", d.gamma_r_total, "1/ns", "gamma_zpl / DWF");
    add("mu_total", d.mu_total, "e A", "mu_zpl / sqrt(DWF)");
    add("Gamma_bound", d.Gamma_bound, "1/ns", "1/tau_combined - gamma_r_total");
    add("qe1", d.qe1, "", "gamma_r_total tau_e1");
    add("qe2", d.qe2, "", "gamma_r_total tau_e2");

    const PurcellRequirement p1 = purcell_requirement(d.gamma_zpl, rates.tau_e1(), o.gamma_deph);
    const PurcellRequirement p2 = purcell_requirement(d.gamma_zpl, rates.tau_e2(), o.gamma_deph);
    d.F_min_A1 = p1.F_min;
    d.F_min_A2 = p2.F_min;
    d.tau_shortened_A1 = p1.tau_shortened;
    d.tau_shortened_A2 = p2.tau_shortened;
    add("F_min_A1", d.F_min_A1, "", "C(F) = 1");
    add("F_min_A2", d.F_min_A2, "", "C(F) = 1");
    add("tau_shortened_A1", d.tau_shortened_A1, "ns", "(1/tau_e1 + (F_min-1) gamma_zpl)^-1");
    add("tau_shortened_A2", d.tau_shortened_A2, "ns", "(1/tau_e2 + (F_min-1) gamma_zpl)^-1");

    d.f_osc = oscillator_strength(1.0 / d.gamma_r_total, mat.refractive_index, o.wavelength_nm);
    add("f_osc", d.f_osc, "", "6 pi epsilon0 m c^3 / (n^3 e^2 omega^2 tau_r)");
    d.Gamma_multiphonon = multiphonon_rate(mat, d.f_osc);
    add("Gamma_multiphonon", d.Gamma_multiphonon, "1/s", "kappa exp(-alpha hbar omega_0)");
    d.Gamma_multiphonon_T = multiphonon_temperature(d.Gamma_multiphonon, mat.temperature, mat.hbar_omega_op,
                                                    mat.phonon_order());
    add("Gamma_multiphonon_T", d.Gamma_multiphonon_T, "1/s", "Gamma [1 + n_B(T)]^p");

    // Steady state under saturating drive with the radiative rate split from the combined decay.
    const RateSet split(d.gamma_r_total, d.Gamma_bound, rates.gamma1(), rates.gamma2(), rates.gamma3(),
                        rates.gamma4(), true);
    const LevelPopulations ss = ratedyn::cw_steady_state(split, ratedyn::saturating_pump(split));
    d.n_e1_sat = ss[level::e1];
    d.n_e2_sat = ss[level::e2];
    d.I_psb_sat_mhz = ratedyn::saturation_emission_rate(split, mat.dwf, 1.0, ratedyn::saturating_pump(split));
    d.eta_det = collection_efficiency(o.measured_psb_khz, d.I_psb_sat_mhz * 1e3);
    add("n_e1_sat", d.n_e1_sat, "", "cw steady state");
    add("n_e2_sat", d.n_e2_sat, "", "cw steady state");
    add("I_psb_sat", d.I_psb_sat_mhz, "MHz", "(1-DWF) gamma_r (n_e1 + n_e2)");
    add("eta_det", d.eta_det, "", "measured / I_psb_sat");
    d.validate();
    return d;
}

}  // namespace siv1::photophys
