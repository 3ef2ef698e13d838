#include "siv1/lindblad.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <type_traits>
#include <unsupported/Eigen/MatrixFunctions>

#include "siv1/constants.hpp"
#include "siv1/ratedyn.hpp"

namespace siv1::lindblad {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
const Complex kI(0.0, 1.0);

double to_rad(double mhz) { return mhz * constants::mhz_to_rad_per_ns; }

struct Channel {
    double rate;
    int to;
    int from;
};

std::vector<Channel> channels(const RateSet& r, Model model) {
    const double k = r.direct_decay();
    constexpr int g1 = level::g1, g2 = level::g2, e1 = level::e1, e2 = level::e2, d1 = level::d1,
                  d2 = level::d2;
    if (model == Model::SixLevel)
        return {{k, g1, e1},           {k, g2, e2},           {r.gamma1(), d1, e1},
                {r.gamma2(), d2, e2},  {r.gamma3(), g1, d1},  {r.gamma4(), g2, d2}};
    return {{k, g1, e1},
            {k, g2, e2},
            {r.gamma1(), d1, e1},
            {r.gamma2(), d1, e2},
            {0.5 * r.gamma3(), g1, d1},
            {0.5 * r.gamma4(), g2, d1}};
}

Matrix6c hamiltonian(const SixLevelParams& p, double omega_mhz, double delta_L, Model model) {
    Matrix6c h = Matrix6c::Zero();
    const double a = to_rad((2.0 * p.D_g - 2.0 * p.D_e + delta_L) / 2.0);
    const double b = to_rad((2.0 * p.D_g - 2.0 * p.D_e - delta_L) / 2.0);
    h(level::g1, level::g1) = a;
    h(level::e1, level::e1) = -a;
    h(level::g2, level::g2) = -b;
    h(level::e2, level::e2) = b;
    if (model == Model::SixLevel) {
        h(level::d1, level::d2) = p.lambda_mix;
        h(level::d2, level::d1) = p.lambda_mix;
    }
    const double c = 0.5 * to_rad(omega_mhz);
    h(level::g1, level::e1) = h(level::e1, level::g1) = c;
    h(level::g2, level::e2) = h(level::e2, level::g2) = c;
    return h;
}

/// Drive part of H per MHz of Omega.
Matrix6c drive_hamiltonian() {
    Matrix6c h = Matrix6c::Zero();
    const double c = 0.5 * to_rad(1.0);
    h(level::g1, level::e1) = h(level::e1, level::g1) = c;
    h(level::g2, level::e2) = h(level::e2, level::g2) = c;
    return h;
}

double static_frequency(const SixLevelParams& p, double delta_L, Model model) {
    const Matrix6c h0 = hamiltonian(p, 0.0, delta_L, model);
    double w = 0.0;
    for (int i = 0; i < 6; ++i) w = std::max(w, std::abs(h0(i, i)));
    if (model == Model::SixLevel) w += p.lambda_mix;
    const RateSet& r = p.rates;
    const double k = r.direct_decay();
    w = std::max({w, k + r.gamma1(), k + r.gamma2(), r.gamma3() + r.gamma4(),
                  model == Model::SixLevel ? 2.0 * p.gamma_s : 0.0});
    return w;
}

/// Half the step limit keeps a further halving below 1e-8 in the populations.
double default_step(double limit) { return 0.5 * limit; }

void check_transition(Transition t) {
    if (t == Transition::Both) throw DomainError("a coherent drive addresses A1 or A2, not both");
}

std::size_t steps_for(double span, double h_max) {
    if (!(h_max > 0.0) || !std::isfinite(h_max)) throw StepSizeError("step limit must be positive");
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(span / h_max - 1e-9)));
}

template <class State>
State rk4_forward(const ReducedModel& m, State y, const ReducedModel::Drive& omega, double t0,
                  double t1, double h_max, double* emitted, const Eigen::RowVectorXcd* emit_row) {
    const double span = t1 - t0;
    if (span < 0.0) throw DomainError("integration interval must run forward");
    if (span == 0.0) return y;
    const std::size_t n = steps_for(span, h_max);
    const double h = span / static_cast<double>(n);
    const Eigen::MatrixXcd& l0 = m.drift();
    const Eigen::MatrixXcd& l1 = m.drive();
    Eigen::MatrixXcd la, lb, lc;
    double acc = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        const double t = t0 + static_cast<double>(s) * h;
        la = l0 + omega(t) * l1;
        lb = l0 + omega(t + 0.5 * h) * l1;
        lc = l0 + omega(t + h) * l1;
        const State k1 = la * y;
        const State y2 = y + (0.5 * h) * k1;
        const State k2 = lb * y2;
        const State y3 = y + (0.5 * h) * k2;
        const State k3 = lb * y3;
        const State y4 = y + h * k3;
        const State k4 = lc * y4;
        if (emitted != nullptr) {
            if constexpr (std::is_same_v<State, Eigen::VectorXcd>) {
                const Eigen::RowVectorXcd& c = *emit_row;
                acc += h / 6.0 *
                       ((c * y)(0).real() + 2.0 * (c * y2)(0).real() + 2.0 * (c * y3)(0).real() +
                        (c * y4)(0).real());
            }
        }
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (emitted != nullptr) *emitted += acc;
    return y;
}

// Kraus pair for one addressed transition: A1 = sqrt(P)|e><g|, A0 = 1 - (1 - sqrt(1-P))|g><g|.
Matrix6c kraus_excite(const Matrix6c& rho, double P_e, int g, int e) {
    const double keep = std::sqrt(1.0 - P_e);
    Matrix6c a0 = Matrix6c::Identity();
    a0(g, g) = keep;
    Matrix6c out = a0 * rho * a0.adjoint();
    out(e, e) += P_e * rho(g, g);
    return out;
}

Matrix6c apply_kraus(const Matrix6c& rho, double P_e, Transition target) {
    if (!(P_e >= 0.0 && P_e <= 1.0)) throw DomainError("P_e must lie in [0,1]");
    Matrix6c out = rho;
    if (target != Transition::A2) out = kraus_excite(out, P_e, level::g1, level::e1);
    if (target != Transition::A1) out = kraus_excite(out, P_e, level::g2, level::e2);
    return out;
}

double resolve_window(const RateSet& r, double window) {
    return window > 0.0 ? window : 5.0 * r.max_tau_e();
}

double emission(const Matrix6c& rho, double gamma_r) {
    return gamma_r * (rho(level::e1, level::e1).real() + rho(level::e2, level::e2).real());
}

/// Row giving the photons emitted on [lo, hi] (absolute) by a state at t_end once the drive is off.
Eigen::RowVectorXcd free_decay_emission(const ReducedModel& m, double t_end, double lo, double hi) {
    Eigen::RowVectorXcd row = Eigen::RowVectorXcd::Zero(m.dimension());
    lo = std::max(lo, t_end);
    if (!(hi > lo)) return row;
    const RateSet& r = m.params().rates;
    const std::array<std::pair<std::size_t, double>, 2> exc{
        {{level::e1, r.tau_e1()}, {level::e2, r.tau_e2()}}};
    for (const auto& [lv, tau] : exc) {
        const double w =
            r.gamma_r() * tau * (std::exp(-(lo - t_end) / tau) - std::exp(-(hi - t_end) / tau));
        row += w * m.population_row(lv);
    }
    return row;
}

}  // namespace

// ---------------------------------------------------------------------------
// DensityMatrix

double physicality_violation(const Matrix6c& rho) {
    const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    const double tr = std::abs(rho.trace() - Complex(1.0, 0.0));
    const Matrix6c sym = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix6c> es(sym, Eigen::EigenvaluesOnly);
    const double neg = std::max(0.0, -es.eigenvalues().minCoeff());
    return std::max({herm, tr, neg});
}

DensityMatrix::DensityMatrix(const Matrix6c& rho) : rho_(rho) {
    if (!rho.allFinite()) throw DomainError("density matrix has non-finite entries");
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > hermiticity_tolerance)
        throw DomainError("density matrix is not Hermitian");
    if (std::abs(rho.trace() - Complex(1.0, 0.0)) > trace_tolerance)
        throw DomainError("density matrix trace differs from 1");
    Eigen::SelfAdjointEigenSolver<Matrix6c> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -positivity_tolerance)
        throw DomainError("density matrix has a negative eigenvalue");
}

DensityMatrix DensityMatrix::from_populations(const LevelPopulations& p) {
    Matrix6c rho = Matrix6c::Zero();
    for (std::size_t i = 0; i < 4; ++i) rho(i, i) = p[i];
    if (p.size() == 6) {
        rho(level::d1, level::d1) = p[level::d1];
        rho(level::d2, level::d2) = p[level::d2];
    } else {
        rho(level::d1, level::d1) = 0.5 * p[level::d];
        rho(level::d2, level::d2) = 0.5 * p[level::d];
    }
    return DensityMatrix(rho);
}

DensityMatrix DensityMatrix::depolarized_ground() {
    return from_populations(LevelPopulations::depolarized_ground(6));
}

LevelPopulations DensityMatrix::populations() const {
    return LevelPopulations(rho_.diagonal().real());
}

// ---------------------------------------------------------------------------
// Drive envelopes

DriveEnvelope::DriveEnvelope(Shape s, double amplitude, double fwhm, double center, double modulation)
    : shape_(s), amplitude_(amplitude), fwhm_(fwhm), center_(center), modulation_(modulation) {
    if (!(amplitude >= 0.0) || !std::isfinite(amplitude))
        throw DomainError("drive amplitude must be finite and >= 0");
    if (s == Shape::Gaussian && !(fwhm > 0.0 && std::isfinite(fwhm)))
        throw DomainError("Gaussian FWHM must be positive");
    if (!std::isfinite(center)) throw DomainError("pulse center must be finite");
    if (s == Shape::QuasiCW && !(modulation > 0.0 && std::isfinite(modulation)))
        throw DomainError("modulation frequency must be positive");
}

DriveEnvelope DriveEnvelope::off() { return {Shape::Off, 0.0, 0.0, 0.0, 0.0}; }
DriveEnvelope DriveEnvelope::constant(double omega) { return {Shape::Constant, omega, 0.0, 0.0, 0.0}; }
DriveEnvelope DriveEnvelope::gaussian(double peak, double fwhm, double center) {
    return {Shape::Gaussian, peak, fwhm, center, 0.0};
}
DriveEnvelope DriveEnvelope::quasi_cw(double amplitude, double f) {
    return {Shape::QuasiCW, amplitude, 0.0, 0.0, f};
}

double DriveEnvelope::operator()(double t) const {
    switch (shape_) {
        case Shape::Off: return 0.0;
        case Shape::Constant: return amplitude_;
        case Shape::Gaussian: {
            const double s = gaussian_sigma(fwhm_);
            const double x = (t - center_) / s;
            return amplitude_ * std::exp(-0.5 * x * x);
        }
        case Shape::QuasiCW: return amplitude_ * std::abs(std::sin(2.0 * kPi * modulation_ * 1e-3 * t));
    }
    return 0.0;
}

double gaussian_sigma(double fwhm) {
    if (!(fwhm > 0.0)) throw DomainError("FWHM must be positive");
    return fwhm / (2.0 * std::sqrt(std::log(2.0)));
}

double pulse_area(const DriveEnvelope& env) {
    switch (env.shape()) {
        case DriveEnvelope::Shape::Off: return 0.0;
        case DriveEnvelope::Shape::Gaussian:
            return to_rad(env.amplitude()) * gaussian_sigma(env.fwhm()) * std::sqrt(2.0 * kPi);
        default: throw DomainError("pulse area is only defined for Gaussian envelopes");
    }
}

double peak_for_area(double area, double fwhm) {
    if (!(area >= 0.0) || !std::isfinite(area)) throw DomainError("pulse area must be >= 0");
    return area / (gaussian_sigma(fwhm) * std::sqrt(2.0 * kPi)) / constants::mhz_to_rad_per_ns;
}

// ---------------------------------------------------------------------------
// Master equation

Matrix6c build_hamiltonian(const SixLevelParams& params, double omega_mhz, double delta_L_mhz) {
    params.validate();
    if (!std::isfinite(omega_mhz) || !std::isfinite(delta_L_mhz))
        throw DomainError("drive and detuning must be finite");
    return hamiltonian(params, omega_mhz, delta_L_mhz, Model::SixLevel);
}

Matrix6c lindblad_rhs(const Matrix6c& rho, const Matrix6c& H, const RateSet& rates, double gamma_s,
                      Model model) {
    Matrix6c out = -kI * (H * rho - rho * H);
    for (const Channel& c : channels(rates, model)) {
        if (c.rate == 0.0) continue;
        out(c.to, c.to) += c.rate * rho(c.from, c.from);
        out.row(c.from) -= 0.5 * c.rate * rho.row(c.from);
        out.col(c.from) -= 0.5 * c.rate * rho.col(c.from);
    }
    if (model == Model::SixLevel && gamma_s > 0.0) {
        // L(s) with s = |d1><d1| - |d2><d2|: only d-block coherences and d-row/column entries move.
        const auto sign = [](int i) { return i == level::d1 ? 1.0 : (i == level::d2 ? -1.0 : 0.0); };
        for (int a = 0; a < 6; ++a)
            for (int b = 0; b < 6; ++b) {
                const double sa = sign(a), sb = sign(b);
                const double coeff = sa * sb - 0.5 * (sa * sa + sb * sb);
                if (coeff != 0.0) out(a, b) += gamma_s * coeff * rho(a, b);
            }
    }
    return out;
}

double max_time_step(const SixLevelParams& params, const DriveEnvelope& env, double delta_L,
                     Model model) {
    double dt = 1.0 / (10.0 * static_frequency(params, delta_L, model));
    const double om = to_rad(env.max_value());
    if (om > 0.0) dt = std::min(dt, 1.0 / (10.0 * om));
    if (env.shape() == DriveEnvelope::Shape::Gaussian) dt = std::min(dt, env.fwhm() / 50.0);
    if (env.shape() == DriveEnvelope::Shape::QuasiCW) dt = std::min(dt, 1e3 / (10.0 * env.modulation()));
    return dt;
}

// ---------------------------------------------------------------------------
// Trajectories

LevelPopulations Trajectory::populations(std::size_t i) const {
    return LevelPopulations(states.at(i).diagonal().real());
}

FluorescenceTrace Trajectory::trace() const {
    if (times.size() < 2) throw DomainError("trajectory needs at least two samples for a trace");
    std::vector<double> rates(times.size() - 1);
    for (std::size_t i = 0; i + 1 < times.size(); ++i)
        rates[i] = std::max(0.0, (emitted[i + 1] - emitted[i]) / (times[i + 1] - times[i]));
    return FluorescenceTrace(times, std::move(rates));
}

double Trajectory::max_physicality_violation() const {
    double v = 0.0;
    for (const auto& s : states) v = std::max(v, physicality_violation(s));
    return v;
}

namespace {

struct FullSystem {
    Matrix6c h0, h1;
    const RateSet* rates;
    double gamma_s;
    Model model;
    const DriveEnvelope* env;

    Matrix6c operator()(double t, const Matrix6c& rho) const {
        const Matrix6c h = h0 + (*env)(t)*h1;
        return lindblad_rhs(rho, h, *rates, gamma_s, model);
    }
};

void record(Trajectory& tr, double t, const Matrix6c& rho, double gamma_r, double emitted) {
    tr.times.push_back(t);
    tr.states.push_back(rho);
    tr.emission_rate.push_back(emission(rho, gamma_r));
    tr.emitted.push_back(emitted);
}

Trajectory evolve_rk4(const Matrix6c& rho0, const FullSystem& f, double t0, double t1, double h_max,
                      double sample_interval, double gamma_r) {
    Trajectory tr;
    const std::size_t n = steps_for(t1 - t0, h_max);
    const double h = (t1 - t0) / static_cast<double>(n);
    const std::size_t every =
        sample_interval > 0.0
            ? std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(sample_interval / h)))
            : std::max<std::size_t>(1, (n + 1999) / 2000);
    Matrix6c y = rho0;
    double acc = 0.0;
    record(tr, t0, y, gamma_r, acc);
    for (std::size_t s = 0; s < n; ++s) {
        const double t = t0 + static_cast<double>(s) * h;
        const Matrix6c k1 = f(t, y);
        const Matrix6c y2 = y + 0.5 * h * k1;
        const Matrix6c k2 = f(t + 0.5 * h, y2);
        const Matrix6c y3 = y + 0.5 * h * k2;
        const Matrix6c k3 = f(t + 0.5 * h, y3);
        const Matrix6c y4 = y + h * k3;
        const Matrix6c k4 = f(t + h, y4);
        acc += h / 6.0 *
               (emission(y, gamma_r) + 2.0 * emission(y2, gamma_r) + 2.0 * emission(y3, gamma_r) +
                emission(y4, gamma_r));
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if ((s + 1) % every == 0 || s + 1 == n)
            record(tr, (s + 1 == n) ? t1 : t + h, y, gamma_r, acc);
    }
    return tr;
}

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

Trajectory evolve_dp45(const Matrix6c& rho0, const FullSystem& f, double t0, double t1, double h0,
                       double sample_interval, double rtol, double atol, double gamma_r) {
    if (!(rtol > 0.0) || !(atol > 0.0)) throw DomainError("tolerances must be positive");
    std::vector<double> marks;
    const double span = t1 - t0;
    const std::size_t nm = sample_interval > 0.0
                               ? std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(span / sample_interval - 1e-9)))
                               : 2000;
    for (std::size_t i = 1; i <= nm; ++i)
        marks.push_back(i == nm ? t1 : t0 + std::min(span, static_cast<double>(i) * span / static_cast<double>(nm)));

    Trajectory tr;
    Matrix6c y = rho0;
    double acc = 0.0, t = t0, h = std::min(h0, span);
    record(tr, t0, y, gamma_r, acc);
    Matrix6c k1 = f(t, y);
    for (double mark : marks) {
        while (t < mark) {
            double hs = h;
            const bool last = t + hs >= mark;
            if (last) hs = mark - t;
            else if (hs < 1e-12 * std::max(1.0, std::abs(span))) throw StepSizeError("adaptive step underflow");
            const Matrix6c y2 = y + hs * (a21 * k1);
            const Matrix6c k2 = f(t + c2 * hs, y2);
            const Matrix6c y3 = y + hs * (a31 * k1 + a32 * k2);
            const Matrix6c k3 = f(t + c3 * hs, y3);
            const Matrix6c y4 = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
            const Matrix6c k4 = f(t + c4 * hs, y4);
            const Matrix6c y5 = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
            const Matrix6c k5 = f(t + c5 * hs, y5);
            const Matrix6c y6 = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
            const Matrix6c k6 = f(t + hs, y6);
            const Matrix6c yn = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            const Matrix6c k7 = f(t + hs, yn);
            const Matrix6c err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            double norm = 0.0;
            for (int i = 0; i < 6; ++i)
                for (int j = 0; j < 6; ++j) {
                    const double scale = atol + rtol * std::max(std::abs(y(i, j)), std::abs(yn(i, j)));
                    norm = std::max(norm, std::abs(err(i, j)) / scale);
                }
            const bool accept = norm <= 1.0;
            if (accept) {
                acc += hs * (b1 * emission(y, gamma_r) + b3 * emission(y3, gamma_r) +
                             b4 * emission(y4, gamma_r) + b5 * emission(y5, gamma_r) +
                             b6 * emission(y6, gamma_r));
                t = last ? mark : t + hs;
                y = yn;
                k1 = k7;
            }
            const double factor = norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
            // A step shortened to hit a sample mark does not shrink the next one.
            h = (last && accept) ? std::max(h, hs * factor) : hs * factor;
        }
        record(tr, mark, y, gamma_r, acc);
    }
    return tr;
}

}  // namespace

Trajectory evolve(const DensityMatrix& rho0, const SixLevelParams& params, const DriveEnvelope& env,
                  double t0, double t1, const EvolveOptions& opt) {
    params.validate();
    if (!(t1 > t0) || !std::isfinite(t0) || !std::isfinite(t1))
        throw DomainError("evolve needs a finite interval with t1 > t0");
    const double limit = max_time_step(params, env, params.delta_L, opt.model);
    double dt = opt.dt > 0.0 ? opt.dt : default_step(limit);
    if (opt.integrator == Integrator::RK4 && dt > limit * (1.0 + 1e-9)) {
        std::ostringstream os;
        os << "dt = " << dt << " ns exceeds the step limit " << limit << " ns";
        throw StepSizeError(os.str());
    }
    FullSystem f{hamiltonian(params, 0.0, params.delta_L, opt.model), drive_hamiltonian(),
                 &params.rates, params.gamma_s, opt.model, &env};
    const double gr = params.rates.gamma_r();
    if (opt.integrator == Integrator::RK4)
        return evolve_rk4(rho0.matrix(), f, t0, t1, dt, opt.sample_interval, gr);
    return evolve_dp45(rho0.matrix(), f, t0, t1, dt, opt.sample_interval, opt.rtol, opt.atol, gr);
}

// ---------------------------------------------------------------------------
// Reduced model

ReducedModel::ReducedModel(const SixLevelParams& params, double delta_L, Model model)
    : params_(params), delta_L_(delta_L), model_(model) {
    params.validate();
    if (!std::isfinite(delta_L)) throw DomainError("delta_L must be finite");
    const Matrix6c h0 = hamiltonian(params, 0.0, delta_L, model);
    const Matrix6c h1 = drive_hamiltonian();
    Eigen::MatrixXcd f0(36, 36), f1(36, 36);
    for (int j = 0; j < 6; ++j)
        for (int i = 0; i < 6; ++i) {
            Matrix6c e = Matrix6c::Zero();
            e(i, j) = 1.0;
            const Matrix6c d0 = lindblad_rhs(e, h0, params.rates, params.gamma_s, model);
            const Matrix6c d1 = -kI * (h1 * e - e * h1);
            f0.col(i + 6 * j) = Eigen::Map<const Eigen::VectorXcd>(d0.data(), 36);
            f1.col(i + 6 * j) = Eigen::Map<const Eigen::VectorXcd>(d1.data(), 36);
        }
    // Closure of the diagonal under the sparsity pattern of L0 + L1.
    std::vector<bool> in(36, false);
    std::vector<int> queue;
    for (int i = 0; i < 6; ++i) {
        in[static_cast<std::size_t>(i + 6 * i)] = true;
        queue.push_back(i + 6 * i);
    }
    for (std::size_t q = 0; q < queue.size(); ++q) {
        const int c = queue[q];
        for (int r = 0; r < 36; ++r)
            if (!in[static_cast<std::size_t>(r)] && (f0(r, c) != Complex(0) || f1(r, c) != Complex(0))) {
                in[static_cast<std::size_t>(r)] = true;
                queue.push_back(r);
            }
    }
    std::vector<int> idx;
    for (int k = 0; k < 36; ++k)
        if (in[static_cast<std::size_t>(k)]) idx.push_back(k);
    for (auto& row : index_)
        for (int& v : row) v = -1;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const int i = idx[k] % 6, j = idx[k] / 6;
        entries_.emplace_back(i, j);
        index_[i][j] = static_cast<int>(k);
    }
    const auto n = static_cast<Eigen::Index>(idx.size());
    l0_.resize(n, n);
    l1_.resize(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b) {
            l0_(a, b) = f0(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
            l1_(a, b) = f1(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
        }
}

Eigen::VectorXcd ReducedModel::reduce(const Matrix6c& rho) const {
    Eigen::VectorXcd v(dimension());
    for (std::size_t k = 0; k < entries_.size(); ++k)
        v(static_cast<Eigen::Index>(k)) = rho(entries_[k].first, entries_[k].second);
    return v;
}

Matrix6c ReducedModel::expand(const Eigen::VectorXcd& v) const {
    if (v.size() != dimension()) throw DomainError("reduced state has the wrong dimension");
    Matrix6c rho = Matrix6c::Zero();
    for (std::size_t k = 0; k < entries_.size(); ++k)
        rho(entries_[k].first, entries_[k].second) = v(static_cast<Eigen::Index>(k));
    return rho;
}

Eigen::VectorXcd ReducedModel::reduce_populations(const LevelPopulations& p) const {
    Matrix6c rho = DensityMatrix::from_populations(p).matrix();
    if (model_ == Model::FiveLevelMerged) {
        rho(level::d1, level::d1) += rho(level::d2, level::d2);
        rho(level::d2, level::d2) = 0.0;
    }
    return reduce(rho);
}

Eigen::MatrixXcd ReducedModel::propagator(double omega, double t) const {
    if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("propagation time must be >= 0");
    return Eigen::MatrixXcd((generator(omega) * t).exp());
}

Eigen::RowVectorXcd ReducedModel::population_row(std::size_t lv) const {
    Eigen::RowVectorXcd r = Eigen::RowVectorXcd::Zero(dimension());
    const int k = index_[lv][lv];
    if (k >= 0) r(k) = 1.0;
    return r;
}

Eigen::RowVectorXcd ReducedModel::emission_row() const {
    return params_.rates.gamma_r() * (population_row(level::e1) + population_row(level::e2));
}

Eigen::VectorXcd ReducedModel::apply_delta_pulse(const Eigen::VectorXcd& v, double P_e,
                                                 Transition target) const {
    return reduce(apply_kraus(expand(v), P_e, target));
}

Eigen::VectorXcd ReducedModel::integrate(Eigen::VectorXcd v, const Drive& omega, double t0, double t1,
                                         double h_max, double* emitted) const {
    const Eigen::RowVectorXcd c = emission_row();
    return rk4_forward(*this, std::move(v), omega, t0, t1, h_max, emitted, &c);
}

Eigen::MatrixXcd ReducedModel::integrate(Eigen::MatrixXcd U, const Drive& omega, double t0, double t1,
                                         double h_max) const {
    return rk4_forward<Eigen::MatrixXcd>(*this, std::move(U), omega, t0, t1, h_max, nullptr, nullptr);
}

Eigen::RowVectorXcd ReducedModel::adjoint_emission(const Eigen::RowVectorXcd& terminal,
                                                   const Drive& omega, double t0, double t1,
                                                   double gate_open, double gate_close,
                                                   double h_max) const {
    if (!(t1 >= t0)) throw DomainError("adjoint interval must run forward");
    if (terminal.size() != dimension()) throw DomainError("terminal row has the wrong dimension");
    const Eigen::RowVectorXcd c = emission_row();
    const Eigen::RowVectorXcd zero = Eigen::RowVectorXcd::Zero(dimension());
    // Breakpoints where the emission source switches on or off.
    std::vector<double> cuts{t1};
    const double hi = std::clamp(gate_close, t0, t1), lo = std::clamp(gate_open, t0, t1);
    if (hi < t1) cuts.push_back(hi);
    if (lo < hi && lo > t0) cuts.push_back(lo);
    cuts.push_back(t0);

    Eigen::RowVectorXcd lam = terminal;
    Eigen::MatrixXcd la, lb, lc;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const double ta = cuts[s], tb = cuts[s + 1];
        if (ta <= tb) continue;
        const double mid = 0.5 * (ta + tb);
        const Eigen::RowVectorXcd& src = (mid > lo && mid < hi) ? c : zero;
        const std::size_t n = steps_for(ta - tb, h_max);
        const double h = (ta - tb) / static_cast<double>(n);
        // d lam/dt = -lam L(t) - src, stepped from ta down to tb.
        for (std::size_t k = 0; k < n; ++k) {
            const double t = ta - static_cast<double>(k) * h;
            la = l0_ + omega(t) * l1_;
            lb = l0_ + omega(t - 0.5 * h) * l1_;
            lc = l0_ + omega(t - h) * l1_;
            const Eigen::RowVectorXcd k1 = -(lam * la) - src;
            const Eigen::RowVectorXcd k2 = -((lam - 0.5 * h * k1) * lb) - src;
            const Eigen::RowVectorXcd k3 = -((lam - 0.5 * h * k2) * lb) - src;
            const Eigen::RowVectorXcd k4 = -((lam - h * k3) * lc) - src;
            lam -= (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
    }
    return lam;
}

// ---------------------------------------------------------------------------
// Optical Rabi oscillations

double gated_fluorescence(const SixLevelParams& params, double peak_mhz, const RabiOptions& opt) {
    check_transition(opt.target);
    if (!(peak_mhz >= 0.0) || !std::isfinite(peak_mhz)) throw DomainError("peak Rabi frequency must be >= 0");
    if (!(opt.gate_delay_ns >= 0.0)) throw DomainError("gate delay must be >= 0");
    const double dl = params.resonant_detuning(opt.target);
    const ReducedModel m(params, dl);
    const double sigma = gaussian_sigma(opt.fwhm_ns);
    const DriveEnvelope env = DriveEnvelope::gaussian(peak_mhz, opt.fwhm_ns, 0.0);
    const double limit = max_time_step(params, env, dl);
    const double h = opt.dt > 0.0 ? opt.dt : default_step(limit);
    if (h > limit * (1.0 + 1e-9)) throw StepSizeError("Rabi step exceeds the step limit");
    const double window = resolve_window(params.rates, opt.window_ns);
    const double start = -6.0 * sigma, stop = 6.0 * sigma;
    const double open = opt.gate_delay_ns, close = opt.gate_delay_ns + window;
    const ReducedModel::Drive drive = [&env](double t) { return env(t); };

    Eigen::VectorXcd v = m.reduce_populations(LevelPopulations::depolarized_ground(6));
    double photons = 0.0;
    const double a = std::clamp(open, start, stop), b = std::clamp(close, start, stop);
    v = m.integrate(v, drive, start, a, h);
    v = m.integrate(v, drive, a, b, h, &photons);
    v = m.integrate(v, drive, b, stop, h);
    photons += (free_decay_emission(m, stop, open, close) * v)(0).real();
    return photons;
}

RabiCurve simulate_rabi(const SixLevelParams& params, const std::vector<double>& energies,
                        double field_scale, const RabiOptions& opt) {
    if (!(field_scale >= 0.0) || !std::isfinite(field_scale)) throw DomainError("field scale must be >= 0");
    RabiCurve out;
    for (double e : energies) {
        if (!(e >= 0.0) || !std::isfinite(e)) throw DomainError("pulse energies must be >= 0");
        out.energies_fj.push_back(e);
        out.sqrt_energies.push_back(std::sqrt(e));
        out.signal.push_back(gated_fluorescence(params, field_scale * std::sqrt(e), opt));
    }
    return out;
}

double field_scale_for_area(double area, double energy, double fwhm) {
    if (!(energy > 0.0)) throw DomainError("calibration energy must be positive");
    return peak_for_area(area, fwhm) / std::sqrt(energy);
}

double first_rabi_maximum(const SixLevelParams& params, double field_scale, double lo, double hi,
                          const RabiOptions& opt) {
    if (!(lo >= 0.0 && hi > lo)) throw DomainError("energy bracket must satisfy 0 <= lo < hi");
    const auto f = [&](double e) { return gated_fluorescence(params, field_scale * std::sqrt(e), opt); };
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double x1 = b - r * (b - a), x2 = a + r * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > 1e-7 * std::max(1.0, hi)) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        }
    }
    return 0.5 * (a + b);
}

// ---------------------------------------------------------------------------
// Resonant depletion

std::vector<DepletionCurve> simulate_depletion_batch(const SixLevelParams& params,
                                                     const std::vector<double>& amplitudes,
                                                     const std::vector<double>& taus, Transition target,
                                                     const DepletionOptions& opt) {
    check_transition(target);
    for (double amplitude : amplitudes)
        if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) throw DomainError("drive amplitude must be >= 0");
    if (taus.empty()) throw DomainError("tau grid is empty");
    for (double t : taus)
        if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("tau values must be finite and >= 0");
    const double tms = params.rates.tau_ms();
    if (!std::isfinite(tms)) throw DomainError("depletion needs a finite metastable lifetime");
    const double wait = opt.wait_ns > 0.0 ? opt.wait_ns : 10.0 * tms;
    if (wait < 5.0 * tms * (1.0 - 1e-12)) throw DomainError("readout wait must be at least 5 tau_ms");

    const double dl = params.resonant_detuning(target);
    const ReducedModel m(params, dl, opt.model);

    // Readout: linear functional of the state at the end of pumping.
    const double sigma = gaussian_sigma(opt.readout_fwhm_ns);
    const DriveEnvelope read = DriveEnvelope::gaussian(peak_for_area(opt.readout_area, opt.readout_fwhm_ns),
                                                       opt.readout_fwhm_ns, 0.0);
    const double read_limit = max_time_step(params, read, dl, opt.model);
    const double hr = opt.dt > 0.0 ? std::min(opt.dt, read_limit) : default_step(read_limit);
    const double window = resolve_window(params.rates, opt.window_ns);
    const double start = -6.0 * sigma, stop = 6.0 * sigma;
    const double open = opt.readout_gate_ns, close = opt.readout_gate_ns + window;
    const Eigen::RowVectorXcd q_pulse =
        m.adjoint_emission(free_decay_emission(m, stop, open, close), [&read](double t) { return read(t); },
                           start, stop, open, close, hr);
    const Eigen::MatrixXcd w = m.propagator(0.0, wait);
    const Eigen::RowVectorXcd q = q_pulse * w;
    const Eigen::RowVectorXcd pg1 = m.population_row(level::g1) * w;
    const Eigen::RowVectorXcd pg2 = m.population_row(level::g2) * w;

    const Eigen::VectorXcd v0 = m.reduce_populations(LevelPopulations::depolarized_ground(6));
    const double reference = (q * v0)(0).real();
    if (!(reference > 0.0)) throw DomainError("readout of the depolarized state vanishes");

    std::vector<std::size_t> order(taus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return taus[a] < taus[b]; });

    std::vector<DepletionCurve> curves;
    for (double amplitude : amplitudes) {
        DepletionCurve out;
        out.reference = reference;
        std::vector<Eigen::VectorXcd> states(taus.size());

        if (opt.mode == QuasiCWMode::AveragePower) {
            const Eigen::MatrixXcd l = m.generator(amplitude / std::sqrt(2.0));
            std::map<double, Eigen::MatrixXcd> cache;
            Eigen::VectorXcd cur = v0;
            double t_cur = 0.0;
            for (std::size_t i : order) {
                const double d = taus[i] - t_cur;
                if (d > 0.0) {
                    auto it = cache.find(d);
                    if (it == cache.end()) it = cache.emplace(d, Eigen::MatrixXcd((l * d).exp())).first;
                    cur = it->second * cur;
                    t_cur = taus[i];
                }
                states[i] = cur;
            }
        } else {
            const DriveEnvelope env = DriveEnvelope::quasi_cw(amplitude, opt.modulation_mhz);
            const double limit = max_time_step(params, env, dl, opt.model);
            const double h = opt.dt > 0.0 ? opt.dt : default_step(limit);
            if (h > limit * (1.0 + 1e-9)) throw StepSizeError("quasi-cw step exceeds the step limit");
            const ReducedModel::Drive drive = [&env](double t) { return env(t); };
            const double period = 1e3 / (2.0 * opt.modulation_mhz);
            // Split each tau into whole periods and a remainder; |sin| repeats every period.
            std::vector<std::pair<long long, double>> split(taus.size());
            std::vector<double> rems;
            for (std::size_t i = 0; i < taus.size(); ++i) {
                long long n = static_cast<long long>(std::floor(taus[i] / period));
                double r = taus[i] - static_cast<double>(n) * period;
                if (r > period * (1.0 - 1e-12)) {
                    ++n;
                    r = 0.0;
                }
                if (r < period * 1e-12) r = 0.0;
                split[i] = {n, r};
                rems.push_back(r);
            }
            std::sort(rems.begin(), rems.end());
            rems.erase(std::unique(rems.begin(), rems.end()), rems.end());
            const auto dim = m.dimension();
            std::map<double, Eigen::MatrixXcd> partial;
            Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(dim, dim);
            double t_cur = 0.0;
            for (double r : rems) {
                u = m.integrate(u, drive, t_cur, r, h);
                t_cur = r;
                partial.emplace(r, u);
            }
            const Eigen::MatrixXcd u_period = m.integrate(u, drive, t_cur, period, h);
            long long n_cur = 0;
            Eigen::VectorXcd base = v0;
            for (std::size_t i : order) {
                const auto [n, r] = split[i];
                for (; n_cur < n; ++n_cur) base = u_period * base;
                states[i] = partial.at(r) * base;
            }
        }

        const bool a1 = target == Transition::A1;
        for (std::size_t i = 0; i < taus.size(); ++i) {
            const Eigen::VectorXcd& v = states[i];
            out.tau_ns.push_back(taus[i]);
            out.signal.push_back((q * v)(0).real() / out.reference);
            const double n1 = (pg1 * v)(0).real(), n2 = (pg2 * v)(0).real();
            out.fidelity.push_back((a1 ? n2 : n1) / (n1 + n2));
        }
        curves.push_back(std::move(out));
    }
    return curves;
}

DepletionCurve simulate_depletion(const SixLevelParams& params, double amplitude,
                                  const std::vector<double>& taus, Transition target,
                                  const DepletionOptions& opt) {
    return simulate_depletion_batch(params, {amplitude}, taus, target, opt).front();
}

double depletion_time(const DepletionCurve& c) {
    if (c.tau_ns.size() < 3) throw DomainError("depletion curve needs at least three points");
    for (std::size_t i = 1; i < c.tau_ns.size(); ++i)
        if (!(c.tau_ns[i] > c.tau_ns[i - 1])) throw DomainError("tau grid must be increasing");
    const double s0 = c.signal.front(), sinf = c.signal.back();
    const double level_ = sinf + (s0 - sinf) / std::exp(1.0);
    for (std::size_t i = 1; i < c.signal.size(); ++i)
        if (c.signal[i] <= level_) {
            const double f = (c.signal[i - 1] - level_) / (c.signal[i - 1] - c.signal[i]);
            return c.tau_ns[i - 1] + f * (c.tau_ns[i] - c.tau_ns[i - 1]);
        }
    throw NoSolutionError("signal never falls to 1/e of its initial excess");
}

// ---------------------------------------------------------------------------
// Six- versus five-level equivalence

namespace {

using Samples = std::vector<std::array<double, 2>>;

struct ChunkPlan {
    std::size_t steps;
    double h;
};

ChunkPlan plan(double span, double h_max) {
    const std::size_t n = steps_for(span, h_max);
    return {n, span / static_cast<double>(n)};
}

/// Protocol on a reduced master equation; one model per addressed transition.
Samples run_reduced(const SixLevelParams& p, Model model, const PulseSequence& seq,
                    const EquivalenceOptions& opt, double h_max) {
    const ReducedModel idle(p, p.delta_L, model);
    std::map<Transition, ReducedModel> driven;
    const auto model_for = [&](Transition t) -> const ReducedModel& {
        check_transition(t);
        auto it = driven.find(t);
        if (it == driven.end()) it = driven.emplace(t, ReducedModel(p, p.resonant_detuning(t), model)).first;
        return it->second;
    };
    Eigen::VectorXcd v = idle.reduce_populations(LevelPopulations::depolarized_ground(6));
    Samples out;
    const auto sample = [&](const ReducedModel& m) {
        out.push_back({(m.population_row(level::g1) * v)(0).real(), (m.population_row(level::g2) * v)(0).real()});
    };
    sample(idle);
    const auto run_drive = [&](const ReducedModel& m, const ReducedModel::Drive& drive, double span) {
        const ChunkPlan pl = plan(span, h_max);
        const auto k = static_cast<std::size_t>(std::max(1, opt.steps_per_sample));
        for (std::size_t s = 0; s < pl.steps; s += k) {
            const std::size_t e = std::min(pl.steps, s + k);
            v = m.integrate(v, drive, static_cast<double>(s) * pl.h, static_cast<double>(e) * pl.h, pl.h * (1.0 + 1e-9));
            sample(m);
        }
    };
    for (const Segment& seg : seq.segments()) {
        if (const auto* d = std::get_if<DeltaPulse>(&seg)) {
            v = idle.apply_delta_pulse(v, d->excitation_probability, d->target);
            sample(idle);
        } else if (const auto* w = std::get_if<Wait>(&seg)) {
            const int n = std::max(1, opt.samples_per_wait);
            const Eigen::MatrixXcd step = idle.propagator(0.0, w->duration_ns / n);
            for (int i = 0; i < n; ++i) {
                v = step * v;
                sample(idle);
            }
        } else if (const auto* g = std::get_if<GaussianPulse>(&seg)) {
            const DriveEnvelope env = DriveEnvelope::gaussian(g->peak_rabi_mhz, g->fwhm_ns, g->center_ns);
            run_drive(model_for(g->target), [env](double t) { return env(t); }, g->duration_ns);
        } else if (const auto* qc = std::get_if<QuasiCW>(&seg)) {
            const DriveEnvelope env = DriveEnvelope::quasi_cw(qc->amplitude_mhz, qc->modulation_mhz);
            run_drive(model_for(qc->target), [env](double t) { return env(t); }, qc->duration_ns);
        }
    }
    return out;
}

Samples run_rates(const SixLevelParams& p, const PulseSequence& seq, const EquivalenceOptions& opt) {
    const ratedyn::Generator a = ratedyn::build_generator(p.rates);
    LevelPopulations pop = LevelPopulations::depolarized_ground(5);
    Samples out;
    const auto sample = [&] { out.push_back({pop[level::g1], pop[level::g2]}); };
    sample();
    for (const Segment& seg : seq.segments()) {
        if (const auto* d = std::get_if<DeltaPulse>(&seg)) {
            pop = ratedyn::apply_delta_pulse(pop, d->excitation_probability, d->target);
            sample();
        } else if (const auto* w = std::get_if<Wait>(&seg)) {
            const int n = std::max(1, opt.samples_per_wait);
            const ratedyn::Generator step = (a * (w->duration_ns / n)).exp();
            for (int i = 0; i < n; ++i) {
                Eigen::VectorXd x = step * pop.values();
                x = x.cwiseMax(0.0);
                pop = LevelPopulations(x / x.sum());
                sample();
            }
        }
    }
    return out;
}

}  // namespace

double six_vs_five_equivalence(const SixLevelParams& params, const PulseSequence& protocol,
                               const EquivalenceOptions& opt) {
    params.validate();
    const bool coherent = protocol.has_coherent_drive();
    double h = opt.dt;
    if (coherent && !(h > 0.0)) {
        h = std::numeric_limits<double>::infinity();
        for (const Segment& seg : protocol.segments()) {
            std::optional<DriveEnvelope> env;
            Transition t = Transition::A1;
            if (const auto* g = std::get_if<GaussianPulse>(&seg)) {
                env = DriveEnvelope::gaussian(g->peak_rabi_mhz, g->fwhm_ns, g->center_ns);
                t = g->target;
            } else if (const auto* q = std::get_if<QuasiCW>(&seg)) {
                env = DriveEnvelope::quasi_cw(q->amplitude_mhz, q->modulation_mhz);
                t = q->target;
            }
            if (!env) continue;
            check_transition(t);
            const double dl = params.resonant_detuning(t);
            h = std::min({h, default_step(max_time_step(params, *env, dl, Model::SixLevel)),
                          default_step(max_time_step(params, *env, dl, Model::FiveLevelMerged))});
        }
    }
    const Samples six = run_reduced(params, Model::SixLevel, protocol, opt, h);
    const Samples five = coherent ? run_reduced(params, Model::FiveLevelMerged, protocol, opt, h)
                                  : run_rates(params, protocol, opt);
    if (six.size() != five.size()) throw InconsistencyError("sample grids of the two models differ");
    double worst = 0.0;
    for (std::size_t i = 0; i < six.size(); ++i)
        worst = std::max({worst, std::abs(six[i][0] - five[i][0]), std::abs(six[i][1] - five[i][1])});
    return worst;
}

}  // namespace siv1::lindblad
