#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <unsupported/Eigen/MatrixFunctions>

#include "siv1/constants.hpp"
#include "siv1/lindblad.hpp"
#include "siv1/ratedyn.hpp"

using namespace siv1;
using namespace siv1::lindblad;
using Catch::Approx;

namespace {

constexpr double kPi = 3.141592653589793;
const Complex kI(0.0, 1.0);

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

Matrix6c ketbra(int a, int b) {
    Matrix6c m = Matrix6c::Zero();
    m(a, b) = 1.0;
    return m;
}

// Column-major vectorized Liouvillian assembled from Kronecker products.
Eigen::MatrixXcd kron_liouvillian(const Matrix6c& h, const RateSet& r, double gamma_s) {
    const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(6, 6);
    Eigen::MatrixXcd l = -kI * (kron(id, h) - kron(h.transpose(), id));
    const double k = r.gamma_r() + r.Gamma_nr();
    const std::vector<std::pair<double, Matrix6c>> jumps{
        {k, ketbra(level::g1, level::e1)},          {k, ketbra(level::g2, level::e2)},
        {r.gamma1(), ketbra(level::d1, level::e1)}, {r.gamma2(), ketbra(level::d2, level::e2)},
        {r.gamma3(), ketbra(level::g1, level::d1)}, {r.gamma4(), ketbra(level::g2, level::d2)},
        {gamma_s, ketbra(level::d1, level::d1) - ketbra(level::d2, level::d2)}};
    for (const auto& [g, op] : jumps) {
        const Eigen::MatrixXcd ldl = op.adjoint() * op;
        l += g * (kron(op.conjugate(), op) - 0.5 * kron(id, ldl) - 0.5 * kron(ldl.transpose(), id));
    }
    return l;
}

Matrix6c random_density(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix6c a;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) a(i, j) = Complex(n(rng), n(rng));
    Matrix6c rho = a * a.adjoint();
    return rho / rho.trace();
}

double rad(double mhz) { return mhz * constants::mhz_to_rad_per_ns; }

SixLevelParams reference_params() { return SixLevelParams{pulse_train_reference_rates()}; }

std::vector<double> depletion_grid() {
    std::vector<double> t;
    for (int i = 0; i <= 50; ++i) t.push_back(20.0 * i);
    for (int i = 11; i <= 100; ++i) t.push_back(100.0 * i);
    return t;
}

}  // namespace

TEST_CASE("DensityMatrix invariants", "[lindblad]") {
    CHECK_NOTHROW(DensityMatrix::depolarized_ground());
    Matrix6c m = DensityMatrix::depolarized_ground().matrix();
    m(0, 2) = 1e-6;
    CHECK_THROWS_AS(DensityMatrix(m), DomainError);
    m = Matrix6c::Identity() * 0.2;
    CHECK_THROWS_AS(DensityMatrix(m), DomainError);
    m = Matrix6c::Zero();
    m(0, 0) = 1.2;
    m(1, 1) = -0.2;
    CHECK_THROWS_AS(DensityMatrix(m), DomainError);
    Eigen::VectorXd p5(5);
    p5 << 0.2, 0.2, 0.1, 0.1, 0.4;
    const DensityMatrix d = DensityMatrix::from_populations(LevelPopulations(p5));
    CHECK(d.matrix()(level::d1, level::d1).real() == Approx(0.2));
    CHECK(d.matrix()(level::d2, level::d2).real() == Approx(0.2));
}

TEST_CASE("Hamiltonian structure", "[lindblad]") {
    SixLevelParams p = reference_params();
    p.lambda_mix = 0.0;
    const Matrix6c h0 = build_hamiltonian(p, 0.0, 12.0);
    CHECK((h0 - Matrix6c(h0.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-500.0, 500.0);
    for (int i = 0; i < 20; ++i) {
        SixLevelParams q = reference_params();
        q.lambda_mix = std::abs(u(rng)) / 100.0;
        q.D_g = u(rng);
        q.D_e = u(rng);
        const Matrix6c h = build_hamiltonian(q, std::abs(u(rng)), u(rng));
        CHECK((h - h.adjoint()).cwiseAbs().maxCoeff() == 0.0);
    }

    // Entries written straight from the rotating-frame expression.
    const double dl = 30.0, om = 80.0;
    p.lambda_mix = 0.7;
    const Matrix6c h = build_hamiltonian(p, om, dl);
    const double a = rad((2 * p.D_g - 2 * p.D_e + dl) / 2), b = rad((2 * p.D_g - 2 * p.D_e - dl) / 2);
    CHECK(h(level::g1, level::g1).real() == Approx(a));
    CHECK(h(level::e1, level::e1).real() == Approx(-a));
    CHECK(h(level::g2, level::g2).real() == Approx(-b));
    CHECK(h(level::e2, level::e2).real() == Approx(b));
    CHECK(h(level::d1, level::d2).real() == 0.7);
    CHECK(h(level::g1, level::e1).real() == Approx(rad(om) / 2));
    CHECK(h(level::e2, level::g2).real() == Approx(rad(om) / 2));

    const Matrix6c hr = build_hamiltonian(p, 0.0, p.resonant_detuning(Transition::A1));
    CHECK(std::abs(hr(level::g1, level::g1)) < 1e-15);
    CHECK(std::abs(hr(level::e1, level::e1)) < 1e-15);
    CHECK(hr(level::e2, level::e2).real() == Approx(rad(2 * (p.D_g - p.D_e))));
}

TEST_CASE("lindblad_rhs matches the Kronecker superoperator", "[lindblad]") {
    SixLevelParams p = reference_params();
    p.gamma_s = 0.03;
    const Matrix6c h = build_hamiltonian(p, 55.0, 17.0);
    const Eigen::MatrixXcd l = kron_liouvillian(h, p.rates, p.gamma_s);
    std::mt19937_64 rng(11);
    for (int i = 0; i < 100; ++i) {
        const Matrix6c rho = random_density(rng);
        const Matrix6c d = lindblad_rhs(rho, h, p.rates, p.gamma_s);
        CHECK(std::abs(d.trace()) < 1e-12);
        const Eigen::VectorXcd ref = l * Eigen::Map<const Eigen::VectorXcd>(rho.data(), 36);
        CHECK((Eigen::Map<const Eigen::VectorXcd>(d.data(), 36) - ref).cwiseAbs().maxCoeff() < 1e-13);
    }
}

TEST_CASE("lindblad_rhs rate limit for a pure excited state", "[lindblad]") {
    const SixLevelParams p = reference_params();
    const Matrix6c rho = ketbra(level::e1, level::e1);
    const Matrix6c d = lindblad_rhs(rho, Matrix6c::Zero(), p.rates, 0.0);
    const RateSet& r = p.rates;
    CHECK(d(level::e1, level::e1).real() == Approx(-(r.direct_decay() + r.gamma1())));
    CHECK(d(level::g1, level::g1).real() == Approx(r.direct_decay()));
    CHECK(d(level::d1, level::d1).real() == Approx(r.gamma1()));
}

TEST_CASE("undriven six-level populations follow the five-level rates for fast mixing", "[lindblad]") {
    SixLevelParams p = reference_params();
    p.lambda_mix = 10.0;
    const ReducedModel m(p, 0.0);
    const ratedyn::Generator a = ratedyn::build_generator(p.rates);
    Eigen::VectorXd start(5);
    start << 0.1, 0.1, 0.5, 0.3, 0.0;
    const LevelPopulations p5(start);
    const Eigen::VectorXcd v0 = m.reduce_populations(p5);
    double worst = 0.0;
    for (double t : {1.0, 10.0, 50.0, 200.0, 600.0, 2000.0}) {
        const Eigen::VectorXcd v = m.propagator(0.0, t) * v0;
        const LevelPopulations ref = ratedyn::propagate(p5, a, t);
        for (std::size_t lv : {level::g1, level::g2, level::e1, level::e2})
            worst = std::max(worst, std::abs((m.population_row(lv) * v)(0).real() - ref[lv]));
        const double dsum = (m.population_row(level::d1) * v)(0).real() + (m.population_row(level::d2) * v)(0).real();
        worst = std::max(worst, std::abs(dsum - ref[level::d]));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("merged five-level master equation is the rate model without drive", "[lindblad]") {
    const SixLevelParams p = reference_params();
    const ReducedModel m(p, 0.0, Model::FiveLevelMerged);
    CHECK(m.dimension() == 10);
    const ratedyn::Generator a = ratedyn::build_generator(p.rates);
    const LevelPopulations p5 = ratedyn::apply_delta_pulse(LevelPopulations::depolarized_ground(5), 0.6);
    const Eigen::VectorXcd v0 = m.reduce_populations(p5);
    for (double t : {3.0, 30.0, 300.0}) {
        const Eigen::VectorXcd v = m.propagator(0.0, t) * v0;
        const LevelPopulations ref = ratedyn::propagate(p5, a, t);
        for (std::size_t lv : {level::g1, level::g2, level::e1, level::e2})
            CHECK((m.population_row(lv) * v)(0).real() == Approx(ref[lv]).margin(1e-12));
        CHECK((m.population_row(level::d1) * v)(0).real() == Approx(ref[level::d]).margin(1e-12));
    }
}

TEST_CASE("reduced model reproduces the full superoperator", "[lindblad]") {
    SixLevelParams p = reference_params();
    p.gamma_s = 0.02;
    const double dl = p.resonant_detuning(Transition::A2);
    const ReducedModel m(p, dl);
    CHECK(m.dimension() == 12);
    const double om = 140.0, t = 7.5;
    const Eigen::MatrixXcd full = kron_liouvillian(build_hamiltonian(p, om, dl), p.rates, p.gamma_s);
    const Matrix6c rho0 = DensityMatrix::depolarized_ground().matrix();
    const Eigen::VectorXcd ref = (full * t).exp() * Eigen::Map<const Eigen::VectorXcd>(rho0.data(), 36);
    const Matrix6c got = m.expand(m.propagator(om, t) * m.reduce(rho0));
    CHECK((Eigen::Map<const Eigen::VectorXcd>(got.data(), 36) - ref).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("adjoint readout equals the forward emission integral", "[lindblad]") {
    const SixLevelParams p = reference_params();
    const ReducedModel m(p, p.resonant_detuning(Transition::A1));
    const DriveEnvelope env = DriveEnvelope::gaussian(300.0, 1.5, 0.0);
    const ReducedModel::Drive drive = [&env](double t) { return env(t); };
    const double h = max_time_step(p, env, m.delta_L());
    const Eigen::RowVectorXcd terminal = 0.3 * m.population_row(level::e2);
    const Eigen::RowVectorXcd q = m.adjoint_emission(terminal, drive, -5.0, 5.0, 1.0, 4.0, h);

    std::mt19937_64 rng(3);
    for (int i = 0; i < 3; ++i) {
        const Eigen::VectorXcd v0 = m.reduce(random_density(rng));
        double photons = 0.0;
        Eigen::VectorXcd v = m.integrate(v0, drive, -5.0, 1.0, h);
        v = m.integrate(v, drive, 1.0, 4.0, h, &photons);
        v = m.integrate(v, drive, 4.0, 5.0, h);
        const Complex forward = photons + (terminal * v)(0);
        CHECK(std::abs((q * v0)(0) - forward) < 1e-9);
    }
}

TEST_CASE("Kraus delta pulse matches the rate-model pulse", "[lindblad]") {
    const ReducedModel m(reference_params(), 0.0);
    const Eigen::VectorXcd v0 = m.reduce_populations(LevelPopulations::depolarized_ground(6));
    const Eigen::VectorXcd v = m.apply_delta_pulse(v0, 0.4, Transition::A1);
    CHECK((m.population_row(level::e1) * v)(0).real() == Approx(0.2));
    CHECK((m.population_row(level::g1) * v)(0).real() == Approx(0.3));
    CHECK((m.population_row(level::g2) * v)(0).real() == Approx(0.5));
    CHECK_THROWS_AS(m.apply_delta_pulse(v0, 1.5, Transition::Both), DomainError);
}

TEST_CASE("evolve without drive reproduces ratedyn emission", "[lindblad]") {
    const SixLevelParams p = reference_params();
    EvolveOptions opt;
    opt.sample_interval = 5.0;
    const Trajectory tr = evolve(DensityMatrix::from_populations(LevelPopulations::pure(level::e1, 6)), p,
                                 DriveEnvelope::off(), 0.0, 100.0, opt);
    const ratedyn::Generator a = ratedyn::build_generator(p.rates);
    const LevelPopulations start = LevelPopulations::pure(level::e1, 5);
    double worst = 0.0;
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        const double ref = ratedyn::emission_rate(ratedyn::propagate(start, a, tr.times[i]), p.rates.gamma_r());
        worst = std::max(worst, std::abs(tr.emission_rate[i] - ref));
    }
    CHECK(worst < 1e-6);
    // Total emission over the trace equals gamma_r tau_e1 (1 - exp(-T/tau_e1)).
    const double te = p.rates.tau_e1();
    CHECK(tr.emitted.back() == Approx(p.rates.gamma_r() * te * (1 - std::exp(-100.0 / te))).epsilon(1e-8));
    const FluorescenceTrace ft = tr.trace();
    CHECK(ft.bins() == tr.times.size() - 1);
}

TEST_CASE("evolve converges under step halving", "[lindblad]") {
    SixLevelParams p = reference_params();
    p.delta_L = p.resonant_detuning(Transition::A1);
    const DriveEnvelope env = DriveEnvelope::gaussian(400.0, 1.5, 5.0);
    const double dt = max_time_step(p, env, p.delta_L);
    EvolveOptions a, b;
    b.dt = dt / 4;
    const auto rho0 = DensityMatrix::depolarized_ground();
    const Trajectory ta = evolve(rho0, p, env, 0.0, 20.0, a);
    const Trajectory tb = evolve(rho0, p, env, 0.0, 20.0, b);
    const Eigen::VectorXd da = ta.states.back().diagonal().real(), db = tb.states.back().diagonal().real();
    CHECK((da - db).cwiseAbs().maxCoeff() < 1e-8);

    EvolveOptions coarse;
    coarse.dt = 3.0 * dt;
    CHECK_THROWS_AS(evolve(rho0, p, env, 0.0, 20.0, coarse), StepSizeError);

    EvolveOptions adaptive;
    adaptive.integrator = Integrator::DormandPrince45;
    adaptive.sample_interval = 1.0;
    const Trajectory tc = evolve(rho0, p, env, 0.0, 20.0, adaptive);
    const Eigen::VectorXd dc = tc.states.back().diagonal().real();
    CHECK((dc - db).cwiseAbs().maxCoeff() < 1e-7);
    CHECK(tc.emitted.back() == Approx(tb.emitted.back()).epsilon(1e-6));
}

TEST_CASE("constant resonant drive gives two-level Rabi flopping", "[lindblad]") {
    SixLevelParams p{RateSet(1e-9, 0, 1e-9, 1e-9, 1e-9, 1e-9)};
    p.delta_L = p.resonant_detuning(Transition::A1);
    const double om = 40.0;
    EvolveOptions opt;
    opt.sample_interval = 0.5;
    const Trajectory tr = evolve(DensityMatrix::from_populations(LevelPopulations::pure(level::g1, 6)), p,
                                 DriveEnvelope::constant(om), 0.0, 60.0, opt);
    double worst = 0.0;
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        const double s = std::sin(rad(om) * tr.times[i] / 2.0);
        worst = std::max(worst, std::abs(tr.states[i](level::e1, level::e1).real() - s * s));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("trajectory stays physical over 10 us of quasi-cw drive", "[lindblad][slow]") {
    SixLevelParams p{depletion_reference_rates()};
    p.gamma_s = 0.01;
    p.delta_L = p.resonant_detuning(Transition::A1);
    const Trajectory tr = evolve(DensityMatrix::depolarized_ground(), p, DriveEnvelope::quasi_cw(60.0), 0.0,
                                 10000.0);
    double herm = 0.0, trace = 0.0, neg = 0.0;
    for (const auto& s : tr.states) {
        herm = std::max(herm, (s - s.adjoint()).cwiseAbs().maxCoeff());
        trace = std::max(trace, std::abs(s.trace() - 1.0));
        Eigen::SelfAdjointEigenSolver<Matrix6c> es(0.5 * (s + s.adjoint()));
        neg = std::max(neg, -es.eigenvalues().minCoeff());
    }
    CHECK(herm < 1e-7);
    CHECK(trace < 1e-7);
    CHECK(neg < 1e-7);
    CHECK(tr.max_physicality_violation() < 1e-7);
}

TEST_CASE("pulse area against quadrature", "[lindblad]") {
    CHECK(pulse_area(DriveEnvelope::gaussian(0.0, 1.5)) == 0.0);
    CHECK(gaussian_sigma(1.5) == Approx(0.9009).margin(1e-4));
    const DriveEnvelope e = DriveEnvelope::gaussian(150.0, 1.5, 2.0);
    double q = 0.0;
    const double h = 1e-3;
    for (double t = -20.0; t < 24.0; t += h) q += 0.5 * h * (rad(e(t)) + rad(e(t + h)));
    CHECK(pulse_area(e) == Approx(q).epsilon(1e-10));
    CHECK(pulse_area(DriveEnvelope::gaussian(300.0, 1.5, 2.0)) == Approx(2 * q).epsilon(1e-10));
    const double peak = peak_for_area(kPi, 1.5);
    CHECK(rad(peak) == Approx(kPi / (0.90093 * std::sqrt(2 * kPi))).epsilon(1e-4));
    CHECK(pulse_area(DriveEnvelope::gaussian(peak, 1.5)) == Approx(kPi).epsilon(1e-14));
    CHECK_THROWS_AS(pulse_area(DriveEnvelope::quasi_cw(10.0)), DomainError);
    CHECK_THROWS_AS(DriveEnvelope::gaussian(10.0, 0.0), DomainError);
    CHECK_THROWS_AS(DriveEnvelope::constant(-1.0), DomainError);
}

TEST_CASE("Rabi curve basics", "[lindblad]") {
    const SixLevelParams p = reference_params();
    const double fs = field_scale_for_area(kPi, 2.8);
    const RabiCurve c = simulate_rabi(p, {0.0, 2.8, 11.2, 25.2}, fs);
    CHECK(c.signal[0] == Approx(0.0).margin(1e-15));
    CHECK(c.sqrt_energies[2] == Approx(std::sqrt(11.2)));
    // pi, 2 pi and 3 pi areas: bright, dark, bright.
    CHECK(c.signal[1] > 5 * c.signal[2]);
    CHECK(c.signal[3] > 3 * c.signal[2]);
    // Only the product field_scale * sqrt(E) matters.
    const RabiCurve d = simulate_rabi(p, {0.7}, 2 * fs);
    CHECK(d.signal[0] == Approx(c.signal[1]).epsilon(1e-12));
    CHECK_THROWS_AS(simulate_rabi(p, {-1.0}, fs), DomainError);
}

TEST_CASE("Rabi first maximum sits at area pi without decay", "[lindblad]") {
    SixLevelParams p = reference_params();
    p.rates = p.rates.scaled(1e-5);
    RabiOptions opt;
    opt.window_ns = 1e5;
    const double fs = field_scale_for_area(kPi, 2.8);
    CHECK(first_rabi_maximum(p, fs, 2.0, 3.6, opt) == Approx(2.8).epsilon(1e-3));
}

TEST_CASE("A1 and A2 Rabi periods agree", "[lindblad]") {
    const SixLevelParams p = reference_params();
    const double fs = field_scale_for_area(kPi, 2.8);
    RabiOptions a2;
    a2.target = Transition::A2;
    const double m1 = first_rabi_maximum(p, fs, 1.5, 4.5);
    const double m2 = first_rabi_maximum(p, fs, 1.5, 4.5, a2);
    CHECK(std::abs(m1 - m2) / m1 < 0.01);
}

TEST_CASE("depletion readout and fidelity", "[lindblad]") {
    const SixLevelParams p{depletion_reference_rates()};
    const auto taus = depletion_grid();
    DepletionOptions avg;
    avg.mode = QuasiCWMode::AveragePower;
    const DepletionCurve c = simulate_depletion(p, 20.0, taus, Transition::A1, avg);
    CHECK(c.signal.front() == Approx(1.0).epsilon(1e-12));
    CHECK(c.fidelity.back() >= 0.99);
    CHECK(c.signal.back() < 0.01);

    const DepletionCurve a2 = simulate_depletion(p, 20.0, taus, Transition::A2, avg);
    CHECK(a2.fidelity.back() >= 0.99);

    DepletionOptions short_wait;
    short_wait.wait_ns = 100.0;
    CHECK_THROWS_AS(simulate_depletion(p, 20.0, taus, Transition::A1, short_wait), DomainError);
    CHECK_THROWS_AS(simulate_depletion(p, 20.0, taus, Transition::Both), DomainError);
}

TEST_CASE("depletion curves decrease monotonically at three powers", "[lindblad]") {
    const SixLevelParams p{depletion_reference_rates()};
    const auto taus = depletion_grid();
    for (double amp : {10.0, 20.0, 40.0}) {
        for (QuasiCWMode mode : {QuasiCWMode::Literal, QuasiCWMode::AveragePower}) {
            DepletionOptions opt;
            opt.mode = mode;
            const DepletionCurve c = simulate_depletion(p, amp, taus, Transition::A1, opt);
            for (std::size_t i = 1; i < c.signal.size(); ++i) CHECK(c.signal[i] <= c.signal[i - 1] + 1e-12);
        }
    }
}

TEST_CASE("depletion time saturates with drive power", "[lindblad]") {
    const SixLevelParams p{depletion_reference_rates()};
    std::vector<double> taus;
    for (int i = 0; i <= 500; ++i) taus.push_back(2.0 * i);
    for (int i = 11; i <= 100; ++i) taus.push_back(100.0 * i);
    DepletionOptions opt;
    opt.mode = QuasiCWMode::AveragePower;
    const auto t = [&](double amp) { return depletion_time(simulate_depletion(p, amp, taus, Transition::A1, opt)); };
    // Amplitude doubling is a fourfold power step.
    const double weak = t(5.0) / t(10.0), strong = t(40.0) / t(80.0);
    CHECK(weak > 2.0);
    CHECK(strong < 1.3);
}

TEST_CASE("reduced depletion path agrees with full-matrix evolution", "[lindblad][slow]") {
    const SixLevelParams base{depletion_reference_rates()};
    const double amp = 30.0, tau = 130.0;
    DepletionOptions opt;
    opt.wait_ns = 5.0 * base.rates.tau_ms();

    // Full 6x6 path: pump, wait, Gaussian readout, gated photon count.
    const auto full_readout = [&](const DriveEnvelope& pump) {
        SixLevelParams p = base;
        p.delta_L = p.resonant_detuning(Transition::A1);
        DensityMatrix rho = DensityMatrix::depolarized_ground();
        EvolveOptions fixed;
        fixed.sample_interval = 1e9;
        if (pump.shape() != DriveEnvelope::Shape::Off)
            rho = DensityMatrix(evolve(rho, p, pump, 0.0, tau, fixed).states.back());
        EvolveOptions adaptive;
        adaptive.integrator = Integrator::DormandPrince45;
        adaptive.sample_interval = 1e9;
        rho = DensityMatrix(evolve(rho, p, DriveEnvelope::off(), 0.0, opt.wait_ns, adaptive).states.back());
        const double sigma = gaussian_sigma(1.5);
        const DriveEnvelope read = DriveEnvelope::gaussian(peak_for_area(kPi, 1.5), 1.5, 0.0);
        rho = DensityMatrix(evolve(rho, p, read, -6 * sigma, 3.0, fixed).states.back());
        const double window = 5.0 * p.rates.max_tau_e();
        return evolve(rho, p, read, 3.0, 3.0 + window, fixed).emitted.back();
    };
    const double ref0 = full_readout(DriveEnvelope::off());

    for (QuasiCWMode mode : {QuasiCWMode::AveragePower, QuasiCWMode::Literal}) {
        opt.mode = mode;
        const DepletionCurve c = simulate_depletion(base, amp, {0.0, tau}, Transition::A1, opt);
        const DriveEnvelope pump = mode == QuasiCWMode::AveragePower
                                       ? DriveEnvelope::constant(amp / std::sqrt(2.0))
                                       : DriveEnvelope::quasi_cw(amp, 10.0);
        CHECK(c.reference == Approx(ref0).epsilon(1e-6));
        CHECK(c.signal[1] == Approx(full_readout(pump) / ref0).epsilon(1e-6));
    }
}

TEST_CASE("six/five equivalence improves with fast mixing", "[lindblad]") {
    SixLevelParams p = reference_params();
    const double g34 = p.rates.gamma3() + p.rates.gamma4();
    std::vector<Segment> two;
    for (int i = 0; i < 9; ++i) {
        two.push_back(DeltaPulse{0.608});
        two.push_back(Wait{1000.0});
    }
    for (Segment s : {Segment{Wait{2000.0}}, Segment{DeltaPulse{0.608}}, Segment{Wait{300.0}},
                      Segment{DeltaPulse{0.608}}, Segment{Wait{1000.0}}})
        two.push_back(s);
    const PulseSequence two_pulse(two);
    const PulseSequence depletion({QuasiCW{60.0, 10.0, 2000.0, Transition::A1}, Wait{2400.0},
                                   GaussianPulse{peak_for_area(kPi, 1.5), 1.5, 9.0, 18.0, Transition::A1}});

    p.lambda_mix = 100.0 * g34;
    CHECK(six_vs_five_equivalence(p, two_pulse) < 1e-3);
    CHECK(six_vs_five_equivalence(p, depletion) < 1e-3);

    p.lambda_mix = 0.0;
    CHECK(six_vs_five_equivalence(p, depletion) > 0.1);

    double prev = 1.0;
    for (double f : {0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0}) {
        p.lambda_mix = f * g34;
        const double d = six_vs_five_equivalence(p, depletion);
        CHECK(d <= prev * (1.0 + 1e-9));
        prev = d;
    }
}
