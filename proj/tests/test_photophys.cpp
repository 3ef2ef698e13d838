#include <catch_amalgamated.hpp>

#include <cmath>

#include "siv1/constants.hpp"
#include "siv1/photophys.hpp"

using namespace siv1;
using namespace siv1::photophys;
using Catch::Approx;

TEST_CASE("field in the solid immersion lens", "[photophys]") {
    FieldCalibration cal;
    CHECK(field_in_sil(cal) == Approx(8.8e3).margin(50.0));
    cal.P_sat_sil = cal.P_sat_bulk;
    CHECK(field_in_sil(cal) == cal.E_bulk);
    FieldCalibration scaled;
    scaled.P_sat_bulk *= 10;
    scaled.P_sat_sil *= 10;
    CHECK(field_in_sil(scaled) == Approx(field_in_sil(FieldCalibration{})).epsilon(1e-14));
    cal.P_sat_sil = 0.0;
    CHECK_THROWS_AS(field_in_sil(cal), DomainError);
}

TEST_CASE("local field correction", "[photophys]") {
    CHECK(local_field(8.8e3, 6.76) / 8.8e3 == Approx(2.92).epsilon(1e-12));
    CHECK(local_field(1234.0, 1.0) == 1234.0);
    CHECK(local_field(2.0 * 8.8e3, 6.76) == Approx(2.0 * local_field(8.8e3, 6.76)));
    CHECK_THROWS_AS(local_field(1.0, 0.5), DomainError);
}

TEST_CASE("peak power of the pi pulse", "[photophys]") {
    // Direct quadrature of the intensity profile P0 exp(-4 ln2 t^2 / FWHM^2).
    const double fwhm = 1.5, P0 = 1.0;
    double area = 0.0;
    const double h = 1e-4;
    for (double t = -10.0; t <= 10.0; t += h) area += h * P0 * std::exp(-4.0 * std::log(2.0) * t * t / (fwhm * fwhm));
    CHECK(peak_power(area, fwhm) == Approx(P0).epsilon(1e-8));
    CHECK(peak_power(2.8, 1.5) == Approx(1.75).margin(0.01));
    CHECK(peak_power(2.8, 1.5, 0.87) == Approx(1.52).margin(0.01));
}

TEST_CASE("Gaussian focus field scales as the square root of power", "[photophys]") {
    const double e1 = gaussian_focus_field(1.52, 245e-9, 2.6);
    CHECK(gaussian_focus_field(4 * 1.52, 245e-9, 2.6) == Approx(2.0 * e1));
    CHECK(e1 > 4.9e3);
}

TEST_CASE("dipole from the area theorem", "[photophys]") {
    CHECK(dipole_from_pi_pulse(26e3, 1.5) == Approx(0.36).margin(0.01));
    CHECK(dipole_from_pi_pulse(52e3, 1.5) == Approx(0.5 * dipole_from_pi_pulse(26e3, 1.5)).epsilon(1e-14));

    // Pulse area mu E sigma sqrt(2 pi) / hbar equals pi, with the field integral done by quadrature.
    const double E = 26e3, fwhm = 1.5e-9;
    const double sigma = fwhm / (2.0 * std::sqrt(std::log(2.0)));
    double integral = 0.0;
    const double h = sigma / 2000.0;
    for (double t = -12 * sigma; t <= 12 * sigma; t += h) integral += h * E * std::exp(-t * t / (2 * sigma * sigma));
    CHECK(integral == Approx(E * sigma * std::sqrt(2 * constants::pi)).epsilon(1e-9));
    const double mu = dipole_from_pi_pulse(E, 1.5) * constants::e_charge * constants::angstrom;
    CHECK(mu * integral / constants::hbar == Approx(constants::pi).epsilon(1e-9));
}

TEST_CASE("ZPL emission rate from the dipole", "[photophys]") {
    CHECK(1.0 / zpl_rate_from_dipole(0.36, 2.6, 862.0) == Approx(270.0).epsilon(0.05));
    CHECK(zpl_rate_from_dipole(0.0, 2.6, 862.0) == 0.0);
    CHECK(zpl_rate_from_dipole(0.72, 2.6, 862.0) == Approx(4.0 * zpl_rate_from_dipole(0.36, 2.6, 862.0)));

    // Independent evaluation with literal SI constants.
    const double w = 2 * constants::pi * constants::c_light / 862e-9;
    const double mu = 0.36 * 1.602176634e-29;
    const double rate = 2.6 * std::pow(w, 3) * mu * mu /
                        (3 * 8.8541878128e-12 * constants::pi * std::pow(299792458.0, 3) * 1.054571817e-34);
    CHECK(zpl_rate_from_dipole(0.36, 2.6, 862.0) == Approx(rate * 1e-9).epsilon(1e-12));
}

TEST_CASE("radiative chain", "[photophys]") {
    const double gz = 1.0 / 270.0;
    const RadiativeChain r = radiative_chain(gz, 0.36, 0.08, 5.03, 6.26, 9.0);
    CHECK(1.0 / r.gamma_r_total == Approx(21.6).epsilon(1e-3));
    CHECK(1.0 / r.Gamma_bound == Approx(16.0).epsilon(0.10));
    CHECK(r.qe1 == Approx(5.03 / 21.6).epsilon(1e-3));
    CHECK(r.qe2 == Approx(6.26 / 21.6).epsilon(1e-3));
    CHECK(r.mu_total == Approx(0.36 / std::sqrt(0.08)));
    CHECK_FALSE(r.floored);
    CHECK(radiative_chain(gz, 0.36, 1.0, 5.03, 6.26, 9.0).mu_total == 0.36);

    const RadiativeChain f = radiative_chain(1.0 / 8.8, 0.36, 1.0, 5.03, 6.26, 9.0);
    CHECK(f.Gamma_bound == 0.0);
    CHECK(f.floored);
    CHECK_THROWS_AS(radiative_chain(1.0 / 5.0, 0.36, 1.0, 5.03, 6.26, 9.0), InconsistencyError);
    CHECK_THROWS_AS(radiative_chain(gz, 0.36, 0.0, 5.03, 6.26, 9.0), DomainError);
}

TEST_CASE("Purcell requirement", "[photophys]") {
    const RateSet rates = pulse_train_reference_rates();
    const double gz = 1.0 / 270.0;
    const PurcellRequirement a1 = purcell_requirement(gz, rates.tau_e1());
    const PurcellRequirement a2 = purcell_requirement(gz, rates.tau_e2());
    CHECK(a1.F_min == Approx(54.0).margin(2.0));
    CHECK(a2.F_min == Approx(43.0).margin(2.0));
    CHECK(cooperativity(a1.F_min, gz, rates.tau_e1()) == Approx(1.0).epsilon(1e-9));
    CHECK(cooperativity(a2.F_min, gz, rates.tau_e2()) == Approx(1.0).epsilon(1e-9));
    CHECK(shortened_lifetime(54.0, gz, rates.tau_e1()) == Approx(2.5).margin(0.1));
    CHECK(shortened_lifetime(43.0, gz, rates.tau_e2()) == Approx(3.2).margin(0.1));
    CHECK(shortened_lifetime(1.0, gz, rates.tau_e1()) == Approx(rates.tau_e1()).epsilon(1e-14));
    double prev = rates.tau_e1();
    for (double F = 2.0; F < 200.0; F *= 1.5) {
        const double t = shortened_lifetime(F, gz, rates.tau_e1());
        CHECK(t < prev);
        prev = t;
    }
    CHECK(purcell_requirement(gz, rates.tau_e1(), 0.01).F_min > a1.F_min);
}

TEST_CASE("oscillator strength", "[photophys]") {
    CHECK(oscillator_strength(21.0, 2.6, 862.0) == Approx(0.09).margin(0.01));
    CHECK(oscillator_strength(42.0, 2.6, 862.0) == Approx(0.5 * oscillator_strength(21.0, 2.6, 862.0)));
    CHECK(oscillator_strength(21.0, 5.2, 862.0) == Approx(oscillator_strength(21.0, 2.6, 862.0) / 8.0));
}

TEST_CASE("multiphonon prefactor B(p)", "[photophys]") {
    CHECK(std::exp(log_B(1.0)) == Approx(1.0).epsilon(1e-14));
    // Integer order against exact factorials.
    const double p = 12.0;
    double fact = 1.0;
    for (int i = 2; i <= 12; ++i) fact *= i;
    const double direct = std::pow(std::pow(2.0, p) - 1.0, 2) * std::pow(p, p - 2) / (fact * fact);
    CHECK(std::exp(log_B(p)) == Approx(direct).epsilon(1e-12));
    CHECK(std::isfinite(log_B(200.0)));
}

TEST_CASE("multiphonon rate", "[photophys]") {
    MaterialParams m;
    const double f = oscillator_strength(21.0, m.refractive_index, 862.0);
    const double G = multiphonon_rate(m, f);
    CHECK(G > 1.0 / 21e-3 / 3.0);
    CHECK(G < 3.0 / 21e-3);
    MaterialParams wider = m;
    wider.hbar_omega_0 = 1.6;
    CHECK(multiphonon_rate(wider, f) < G);
    CHECK(multiphonon_rate(m, 2 * f) == Approx(2 * G));
}

TEST_CASE("multiphonon temperature dependence", "[photophys]") {
    const double p = MaterialParams{}.phonon_order();
    CHECK(multiphonon_temperature(10.0, 0.0, 0.1183, p) == 10.0);
    CHECK(multiphonon_temperature(10.0, 1.0, 0.1183, p) == Approx(10.0).epsilon(1e-14));
    CHECK(multiphonon_temperature(1.0, 300.0, 0.1183, 12.0) < 1.15);
    double prev = 1.0;
    for (double T = 10.0; T <= 1000.0; T += 10.0) {
        const double g = multiphonon_temperature(1.0, T, 0.1183, p);
        CHECK(g >= prev);
        prev = g;
    }
}

TEST_CASE("ISC ratios from spin-orbit strengths", "[photophys]") {
    const IscRates iso = isc_from_so(1.0, 1.0);
    CHECK(iso.gamma3 == Approx(iso.gamma4).epsilon(1e-15));
    CHECK(iso.gamma2 / iso.gamma1 == Approx(3.0 / 7.0).epsilon(1e-15));
    const IscRates z = isc_from_so(0.0, 1.0);
    CHECK(z.gamma2 == 0.0);
    CHECK(z.gamma4 == 0.0);
    const IscRates a = isc_from_so(1.3, 0.7), b = isc_from_so(2.6, 1.4);
    CHECK(b.gamma1 / b.gamma3 == Approx(a.gamma1 / a.gamma3));
    CHECK(b.gamma2 / b.gamma4 == Approx(a.gamma2 / a.gamma4));

    for (double r : {0.3, 1.0, 1.13, 2.0}) {
        const IscRates s = isc_from_so(r, 1.0);
        CHECK(lambda_ratio_from_isc(s.gamma2 / s.gamma1) == Approx(r).epsilon(1e-12));
    }
    CHECK_THROWS_AS(lambda_ratio_from_isc(3.0), NoSolutionError);
}

TEST_CASE("collection efficiency", "[photophys]") {
    CHECK(collection_efficiency(33.0, 2.7e3) == Approx(0.012).margin(0.0005));
    CHECK(collection_efficiency(5.0, 5.0) == 1.0);
    CHECK(collection_efficiency(0.0, 5.0) == 0.0);
    CHECK_THROWS_AS(collection_efficiency(1.0, 0.0), DomainError);
}

TEST_CASE("derive_all chains the calibration", "[photophys]") {
    const DerivedQuantities d = derive_all(FieldCalibration{}, MaterialParams{}, pulse_train_reference_rates());
    CHECK_NOTHROW(d.validate());
    CHECK(d.E_local == Approx(local_field(d.E_sil, 6.76)));
    CHECK(d.mu_zpl == Approx(dipole_from_pi_pulse(d.E_local, 1.5)));
    CHECK(d.gamma_r_total == Approx(d.gamma_zpl / 0.08));
    CHECK(d.qe1 < d.qe2);
    CHECK(d.F_min_A1 > d.F_min_A2);
    CHECK(d.n_e1_sat == Approx(0.022).margin(0.003));
    CHECK(d.n_e2_sat == Approx(0.040).margin(0.003));
    CHECK(d.I_psb_sat_mhz == Approx(2.7).margin(0.1));
    CHECK(d.eta_det == Approx(0.012).margin(0.001));
    CHECK(d.entries.size() >= 20);
    for (const auto& e : d.entries) CHECK_FALSE(e.formula.empty());
}
