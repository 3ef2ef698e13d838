#include "siv1/ratedyn.hpp"

#include <algorithm>
#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

namespace siv1::ratedyn {

namespace {

using Mat6 = Eigen::Matrix<double, 6, 6>;

void add_channel(Generator& a, std::size_t from, std::size_t to, double rate) {
    const auto f = static_cast<Eigen::Index>(from), t = static_cast<Eigen::Index>(to);
    a(t, f) += rate;
    a(f, f) -= rate;
}

Vec5 as_vec(const LevelPopulations& p) {
    if (p.size() != 5) throw DomainError("five-level populations expected");
    return p.values();
}

LevelPopulations as_pops(const Vec5& v) { return LevelPopulations(Eigen::VectorXd(v)); }

Generator delta_pulse_matrix(double P_e, Transition target) {
    if (!(P_e >= 0.0 && P_e <= 1.0)) throw DomainError("P_e must lie in [0,1]");
    Generator m = Generator::Identity();
    if (target != Transition::A2) {
        m(level::g1, level::g1) = 1.0 - P_e;
        m(level::e1, level::g1) = P_e;
    }
    if (target != Transition::A1) {
        m(level::g2, level::g2) = 1.0 - P_e;
        m(level::e2, level::g2) = P_e;
    }
    return m;
}

Generator expm(const Generator& a, double t) { return Generator((a * t).exp()); }

/// Normalized fixed point of a column-stochastic cycle matrix.
Vec5 fixed_point(const Generator& cycle) {
    Generator sys = cycle - Generator::Identity();
    sys.row(4).setOnes();
    Vec5 rhs = Vec5::Zero();
    rhs(4) = 1.0;
    Vec5 x = sys.fullPivLu().solve(rhs);
    return x / x.sum();
}

struct WindowIntegrator {
    Mat6 propagator;

    WindowIntegrator(const Generator& a, double window, double gamma_r) {
        Mat6 aug = Mat6::Zero();
        aug.topLeftCorner<5, 5>() = a;
        aug(5, level::e1) = gamma_r;
        aug(5, level::e2) = gamma_r;
        propagator = (aug * window).exp();
    }

    double photons(const Vec5& p) const {
        Eigen::Matrix<double, 6, 1> x;
        x << p, 0.0;
        return (propagator * x)(5);
    }
};

double resolve_window(const RateSet& rates, double window) {
    return window > 0.0 ? window : 5.0 * rates.max_tau_e();
}

}  // namespace

Generator build_generator(const RateSet& r, PumpRates pump) {
    if (!(pump.w1 >= 0.0 && pump.w2 >= 0.0) || !std::isfinite(pump.w1) || !std::isfinite(pump.w2))
        throw DomainError("pump rates must be finite and >= 0");
    Generator a = Generator::Zero();
    const double k = r.direct_decay();
    add_channel(a, level::e1, level::g1, k);
    add_channel(a, level::e2, level::g2, k);
    add_channel(a, level::e1, level::d, r.gamma1());
    add_channel(a, level::e2, level::d, r.gamma2());
    add_channel(a, level::d, level::g1, r.gamma3() / 2.0);
    add_channel(a, level::d, level::g2, r.gamma4() / 2.0);
    add_channel(a, level::g1, level::e1, pump.w1);
    add_channel(a, level::g2, level::e2, pump.w2);
    return a;
}

LevelPopulations propagate(const LevelPopulations& p0, const Generator& a, double t) {
    if (!(t >= 0.0)) throw DomainError("propagation time must be >= 0");
    if (t == 0.0) return p0;
    return as_pops(expm(a, t) * as_vec(p0));
}

LevelPopulations apply_delta_pulse(const LevelPopulations& p, double P_e, Transition target) {
    return as_pops(delta_pulse_matrix(P_e, target) * as_vec(p));
}

EmissionWindow integrated_emission(const LevelPopulations& p0, const Generator& a, double window,
                                   double gamma_r) {
    if (!(window >= 0.0)) throw DomainError("emission window must be >= 0");
    Mat6 aug = Mat6::Zero();
    aug.topLeftCorner<5, 5>() = a;
    aug(5, level::e1) = gamma_r;
    aug(5, level::e2) = gamma_r;
    Eigen::Matrix<double, 6, 1> x;
    x << as_vec(p0), 0.0;
    const Eigen::Matrix<double, 6, 1> y = Mat6((aug * window).exp()) * x;
    return {y(5), as_pops(y.head<5>())};
}

double emission_rate(const LevelPopulations& p, double gamma_r) {
    return gamma_r * (p[level::e1] + p[level::e2]);
}

GroundSplit pulse_train_steady_state_analytic(const RateSet& r) {
    if (r.gamma1() == 0.0 || r.gamma2() == 0.0 || r.gamma3() == 0.0 || r.gamma4() == 0.0)
        throw DivisionByZeroError("pulse-train split needs gamma1..gamma4 > 0");
    const double w1 = r.gamma1() * r.tau_e1() / r.gamma3();
    const double w2 = r.gamma2() * r.tau_e2() / r.gamma4();
    GroundSplit s;
    s.n_g1 = w2 / (w1 + w2);
    s.n_g2 = 1.0 - s.n_g1;
    s.regime_ok = r.tau_ms() >= 10.0 * r.max_tau_e();
    return s;
}

LevelPopulations pulse_train_steady_state_simulated(const RateSet& rates, double P_e, double t_p,
                                                    int N_p, double trailing_wait) {
    if (!(t_p > 0.0)) throw DomainError("t_p must be > 0");
    if (N_p < 1) throw DomainError("N_p must be >= 1");
    if (!(trailing_wait >= 0.0)) throw DomainError("trailing wait must be >= 0");
    const Generator a = build_generator(rates);
    const Generator step = expm(a, t_p) * delta_pulse_matrix(P_e, Transition::Both);
    Vec5 p = as_vec(LevelPopulations::depolarized_ground());
    for (int n = 0; n < N_p; ++n) p = step * p;
    if (trailing_wait > 0.0) p = expm(a, trailing_wait) * p;
    return as_pops(p);
}

LevelPopulations pulse_train_fixed_point(const RateSet& rates, double P_e, double t_p,
                                         Transition target) {
    if (!(t_p > 0.0)) throw DomainError("t_p must be > 0");
    const Generator a = build_generator(rates);
    return as_pops(fixed_point(expm(a, t_p) * delta_pulse_matrix(P_e, target)));
}

double alpha_prefactor(const RateSet& rates, double P_e) {
    if (!(P_e >= 0.0 && P_e <= 1.0)) throw DomainError("P_e must lie in [0,1]");
    if (!(rates.tau_ms() > rates.tau_e1() && rates.tau_ms() > rates.tau_e2()))
        throw DomainError("alpha prefactor requires tau_ms > tau_e1, tau_e2");
    return P_e * alpha_slope(rates);
}

TwoPulseProtocol TwoPulseProtocol::scaled_to(const RateSet& rates) {
    TwoPulseProtocol p;
    const double t = std::max(rates.tau_ms(), rates.max_tau_e());
    p.init_spacing = 8.0 * t;
    p.init_wait = 16.0 * t;
    p.post_probe_wait = 8.0 * t;
    return p;
}

std::vector<double> two_pulse_curve(const RateSet& rates, double P_e, const std::vector<double>& taus,
                                    Mode mode, const TwoPulseProtocol& protocol) {
    for (double tau : taus)
        if (!(tau > 0.0)) throw DomainError("two-pulse delay must be > 0");
    std::vector<double> out;
    out.reserve(taus.size());
    if (mode == Mode::Analytic) {
        const double alpha = alpha_prefactor(rates, P_e);
        for (double tau : taus) out.push_back(alpha * std::exp(-tau / rates.tau_ms()));
        return out;
    }

    if (protocol.init_pulses < 0) throw DomainError("init_pulses must be >= 0");
    const Generator a = build_generator(rates);
    const Generator pulse = delta_pulse_matrix(P_e, Transition::Both);
    Generator prep = Generator::Identity();
    const Generator train_step = expm(a, protocol.init_spacing) * pulse;
    for (int n = 0; n < protocol.init_pulses; ++n) prep = train_step * prep;
    prep = expm(a, protocol.init_wait) * prep;
    const Generator tail = expm(a, protocol.post_probe_wait);
    const WindowIntegrator window(a, resolve_window(rates, protocol.window), rates.gamma_r());

    for (double tau : taus) {
        const Generator delay = expm(a, tau);
        // The sequence repeats, so the state entering it is the cycle's fixed point.
        const Generator cycle = tail * pulse * delay * pulse * prep;
        const Vec5 before_pump = prep * fixed_point(cycle);
        const Vec5 after_pump = pulse * before_pump;
        const double n1 = window.photons(after_pump);
        const Vec5 after_probe = pulse * (delay * after_pump);
        const double n2 = window.photons(after_probe);
        out.push_back(n1 > 0.0 ? 1.0 - n2 / n1 : 0.0);
    }
    return out;
}

double two_pulse_signal(const RateSet& rates, double P_e, double tau, Mode mode,
                        const TwoPulseProtocol& protocol) {
    return two_pulse_curve(rates, P_e, {tau}, mode, protocol).front();
}

std::vector<double> default_delay_grid() {
    std::vector<double> g(32);
    for (int m = 0; m < 32; ++m) g[static_cast<std::size_t>(m)] = 65.0 + 30.0 * m;
    return g;
}

LevelPopulations cw_steady_state(const RateSet& rates, PumpRates pump) {
    if (pump.w1 == 0.0 && pump.w2 == 0.0) throw DomainError("cw steady state needs a nonzero pump");
    const Generator a = build_generator(rates, pump);
    Eigen::FullPivLU<Generator> lu(a);
    lu.setThreshold(1e-12 * a.cwiseAbs().maxCoeff());
    if (lu.rank() < 4) throw NonUniqueSteadyStateError("generator has a degenerate zero eigenvalue");
    Generator sys = a;
    sys.row(4).setOnes();
    Vec5 rhs = Vec5::Zero();
    rhs(4) = 1.0;
    Vec5 x = sys.fullPivLu().solve(rhs);
    x = x.cwiseMax(0.0);
    return as_pops(x / x.sum());
}

PumpRates saturating_pump(const RateSet& r) {
    const double m = std::max({r.direct_decay(), r.gamma1(), r.gamma2(), r.gamma3(), r.gamma4()});
    return {1e3 * m, 1e3 * m};
}

double saturation_emission_rate(const RateSet& rates, double dwf, double eta_det, PumpRates pump) {
    if (!(dwf > 0.0 && dwf <= 1.0)) throw DomainError("dwf must lie in (0,1]");
    if (!(eta_det >= 0.0 && eta_det <= 1.0)) throw DomainError("eta_det must lie in [0,1]");
    if (eta_det == 0.0) return 0.0;
    const LevelPopulations p = cw_steady_state(rates, pump);
    return (1.0 - dwf) * eta_det * rates.gamma_r() * (p[level::e1] + p[level::e2]) * 1e3;
}

double resonant_readout_ratio(const RateSet& rates, Mode mode) {
    if (mode == Mode::Analytic) {
        if (rates.gamma1() == 0.0 || rates.gamma4() == 0.0)
            throw DivisionByZeroError("readout ratio needs gamma1, gamma4 > 0");
        return (rates.gamma2() / rates.gamma1()) / (rates.gamma4() / rates.gamma3());
    }
    const double settle = 40.0 * std::max(rates.tau_ms(), rates.max_tau_e());
    const LevelPopulations prepared = pulse_train_fixed_point(rates, 0.5, settle);
    const Generator a = build_generator(rates);
    const double window = 50.0 * rates.max_tau_e();
    const double n_a1 =
        integrated_emission(apply_delta_pulse(prepared, 1.0, Transition::A1), a, window, rates.gamma_r())
            .photons;
    const double n_a2 =
        integrated_emission(apply_delta_pulse(prepared, 1.0, Transition::A2), a, window, rates.gamma_r())
            .photons;
    if (n_a2 == 0.0) throw DivisionByZeroError("A2 readout collects no fluorescence");
    return n_a1 / n_a2;
}

std::vector<std::vector<double>> measurement_loop_deviation(const RateSet& rates, double P_e,
                                                            int rounds) {
    if (rounds < 1) throw DomainError("rounds must be >= 1");
    const double target = pulse_train_steady_state_analytic(rates).n_g1;
    const Generator a = build_generator(rates);
    const Generator pulse = delta_pulse_matrix(P_e, Transition::Both);
    const Generator train_step = expm(a, 1000.0) * pulse;
    const Generator wait2 = expm(a, 2000.0);
    const Generator post_probe = expm(a, 1000.0);
    const Generator loop_gap = expm(a, 100.0);
    const std::vector<double> grid = default_delay_grid();
    std::vector<Generator> delays;
    for (double tau : grid) delays.push_back(expm(a, tau));

    Vec5 p = as_vec(LevelPopulations::depolarized_ground());
    std::vector<std::vector<double>> out(static_cast<std::size_t>(rounds));
    for (auto& row : out) {
        for (std::size_t m = 0; m < grid.size(); ++m) {
            for (int n = 0; n < 9; ++n) p = train_step * p;
            p = wait2 * p;
            row.push_back((p(level::g1) - target) / target);
            p = post_probe * (pulse * (delays[m] * (pulse * p)));
        }
        p = loop_gap * p;
    }
    return out;
}

FluorescenceTrace lifetime_trace(const RateSet& rates, Transition target, double P_e,
                                 const std::vector<double>& edges) {
    if (edges.size() < 2 || edges.front() < 0.0) throw DomainError("trace edges must start at t >= 0");
    const Generator a = build_generator(rates);
    LevelPopulations p = apply_delta_pulse(LevelPopulations::depolarized_ground(), P_e, target);
    p = propagate(p, a, edges.front());
    std::vector<double> rates_out;
    rates_out.reserve(edges.size() - 1);
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        const double width = edges[i + 1] - edges[i];
        if (!(width > 0.0)) throw DomainError("trace edges must increase");
        EmissionWindow w = integrated_emission(p, a, width, rates.gamma_r());
        rates_out.push_back(w.photons / width);
        p = w.final_state;
    }
    return FluorescenceTrace(edges, std::move(rates_out));
}

}  // namespace siv1::ratedyn
