#include "siv1/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

namespace siv1::inference {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

using ResidualFn = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::MatrixXd&)>;

struct LmOutcome {
    Eigen::VectorXd p;
    double chi2 = 0.0;
    Eigen::MatrixXd jtj;
    int iterations = 0;
    bool converged = false;
};

/// Levenberg-Marquardt on weighted residuals r(p) with Jacobian J(p).
LmOutcome levenberg_marquardt(const ResidualFn& fn, Eigen::VectorXd p, int max_iterations = 1000) {
    Eigen::VectorXd r, r_try;
    Eigen::MatrixXd J, J_try;
    fn(p, r, J);
    double chi2 = r.squaredNorm();
    if (!std::isfinite(chi2)) throw DomainError("least-squares start point gives non-finite residuals");
    double lambda = 1e-3;
    LmOutcome out;
    for (int it = 0; it < max_iterations; ++it) {
        out.iterations = it + 1;
        const Eigen::MatrixXd A = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        if (chi2 == 0.0 || g.lpNorm<Eigen::Infinity>() == 0.0) {
            out.converged = true;
            break;
        }
        Eigen::MatrixXd damped = A;
        for (Eigen::Index i = 0; i < A.rows(); ++i) damped(i, i) += lambda * std::max(A(i, i), 1e-300);
        const Eigen::VectorXd step = damped.ldlt().solve(-g);
        const Eigen::VectorXd p_try = p + step;
        fn(p_try, r_try, J_try);
        const double chi2_try = r_try.squaredNorm();
        if (std::isfinite(chi2_try) && chi2_try <= chi2) {
            const double drop = chi2 - chi2_try;
            p = p_try;
            r.swap(r_try);
            J.swap(J_try);
            chi2 = chi2_try;
            lambda = std::max(lambda / 10.0, 1e-12);
            const bool small_step = step.norm() <= 1e-12 * (p.norm() + 1e-12);
            if (small_step || drop <= 1e-15 * chi2) {
                out.converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            // No representable downhill step is left: the minimum is resolved to round-off.
            if (lambda > 1e12) {
                out.converged = true;
                break;
            }
        }
    }
    out.p = p;
    out.chi2 = chi2;
    out.jtj = J.transpose() * J;
    return out;
}

/// Covariance (J^T J)^-1, with infinite variances on singular directions.
Eigen::MatrixXd covariance_from(const Eigen::MatrixXd& jtj, double scale) {
    const Eigen::Index n = jtj.rows();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jtj);
    const double top = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd weak = Eigen::VectorXd::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double ev = es.eigenvalues()(k);
        if (ev > 1e-14 * top) cov += (scale / ev) * es.eigenvectors().col(k) * es.eigenvectors().col(k).transpose();
        else weak += es.eigenvectors().col(k).cwiseAbs2();
    }
    for (Eigen::Index i = 0; i < n; ++i)
        if (weak(i) > 1e-6) cov(i, i) = kInf;
    return cov;
}

FitParameter parameter(const std::string& name, const std::string& unit, double value, double variance) {
    FitParameter p;
    p.name = name;
    p.unit = unit;
    p.value = value;
    p.uncertainty = std::isfinite(variance) ? std::sqrt(std::max(0.0, variance)) : kInf;
    p.ci_low = value - z95 * p.uncertainty;
    p.ci_high = value + z95 * p.uncertainty;
    return p;
}

/// Residual-scatter scale for data without explicit uncertainties.
double variance_scale(const Dataset& d, double chi2, std::size_t n_params) {
    if (d.sigma || d.size() <= n_params) return 1.0;
    return chi2 / static_cast<double>(d.size() - n_params);
}

std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, i / (n - 1.0));
    return g;
}

/// Weighted linear least squares of y on the columns of B; returns chi-square and fills coef.
double linear_fit(const Eigen::MatrixXd& B, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                  Eigen::VectorXd& coef) {
    const Eigen::MatrixXd Bw = w.asDiagonal() * B;
    coef = Bw.colPivHouseholderQr().solve(w.asDiagonal() * y);
    return (Bw * coef - w.asDiagonal() * y).squaredNorm();
}

Eigen::Map<const Eigen::VectorXd> as_vector(const std::vector<double>& v) {
    return {v.data(), static_cast<Eigen::Index>(v.size())};
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset

void Dataset::validate() const {
    if (x.size() != y.size()) throw DomainError("x and y lengths differ");
    if (x.empty()) throw DomainError("dataset is empty");
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw DomainError("dataset contains non-finite values");
        if (i > 0 && !(x[i] > x[i - 1])) throw DomainError("x must be strictly increasing");
    }
    if (sigma) {
        if (sigma->size() != x.size()) throw DomainError("sigma length differs from x");
        for (double s : *sigma)
            if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("uncertainties must be positive");
    }
    if (excitation_probability && !(*excitation_probability >= 0.0 && *excitation_probability <= 1.0))
        throw DomainError("excitation probability must lie in [0,1]");
    if (power && !(*power >= 0.0 && std::isfinite(*power))) throw DomainError("power must be >= 0");
}

std::vector<double> Dataset::effective_sigma() const {
    if (sigma) return *sigma;
    std::vector<double> s(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) s[i] = std::sqrt(std::max(y[i], 1.0));
    return s;
}

// ---------------------------------------------------------------------------
// Exponential

FitResult fit_exponential(const Dataset& data, bool with_offset) {
    data.validate();
    if (data.size() < 4) throw DomainError("exponential fit needs at least 4 points");
    const auto n = static_cast<Eigen::Index>(data.size());
    const Eigen::VectorXd t = as_vector(data.x), y = as_vector(data.y);
    Eigen::VectorXd w = as_vector(data.effective_sigma()).cwiseInverse();
    const double t0 = t(0), span = t(n - 1) - t(0);
    const std::size_t n_free = with_offset ? 3 : 2;

    FitResult res;
    const auto degenerate = [&](double offset, double chi2, const std::string& why) {
        res.parameters = {parameter("amplitude", "", 0.0, 0.0), parameter("tau", "ns", kNaN, kInf),
                          parameter("offset", "", offset, 0.0)};
        res.parameters[1].ci_low = res.parameters[1].ci_high = kNaN;
        res.objective = chi2;
        res.converged = true;
        res.warnings.push_back("tau unidentifiable: " + why);
        return res;
    };

    const double ymax = y.cwiseAbs().maxCoeff();
    if ((y.array() - y.mean()).abs().maxCoeff() <= 1e-12 * std::max(ymax, 1e-300)) {
        if (with_offset) return degenerate(y.mean(), 0.0, "the data show no decay");
    }

    // Shifted amplitude B = A exp(-t0/tau) keeps the basis well scaled far from t = 0.
    double min_dt = kInf;
    for (Eigen::Index i = 1; i < n; ++i) min_dt = std::min(min_dt, t(i) - t(i - 1));
    double best_chi2 = kInf, best_tau = 0.0;
    Eigen::VectorXd best_coef;
    for (double tau : log_grid(min_dt / 4.0, 50.0 * span, 240)) {
        Eigen::MatrixXd B(n, with_offset ? 2 : 1);
        B.col(0) = (-(t.array() - t0) / tau).exp().matrix();
        if (with_offset) B.col(1).setOnes();
        Eigen::VectorXd coef;
        const double c2 = linear_fit(B, y, w, coef);
        if (c2 < best_chi2) {
            best_chi2 = c2;
            best_tau = tau;
            best_coef = coef;
        }
    }

    const auto residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
        const double B = p(0), tau = p(1), c = with_offset ? p(2) : 0.0;
        const Eigen::ArrayXd dt = t.array() - t0;
        const Eigen::ArrayXd e = (-dt / tau).exp();
        r = ((B * e + c - y.array()) * w.array()).matrix();
        J.resize(n, p.size());
        J.col(0) = (e * w.array()).matrix();
        J.col(1) = (B * e * dt / (tau * tau) * w.array()).matrix();
        if (with_offset) J.col(2) = w;
    };
    Eigen::VectorXd p0(n_free);
    p0(0) = best_coef(0);
    p0(1) = best_tau;
    if (with_offset) p0(2) = best_coef(1);
    LmOutcome lm = levenberg_marquardt(residuals, p0);
    // Counting weights taken from the data bias tau low once bins hold few counts; re-derive them from the
    // fitted curve until tau settles.
    for (int pass = 0; pass < 5 && !data.sigma && lm.converged; ++pass) {
        const double c = with_offset ? lm.p(2) : 0.0;
        const Eigen::ArrayXd model = lm.p(0) * (-(t.array() - t0) / lm.p(1)).exp() + c;
        w = model.max(1.0).rsqrt().matrix();
        const double previous = lm.p(1);
        lm = levenberg_marquardt(residuals, lm.p);
        if (std::abs(lm.p(1) - previous) <= 1e-9 * std::abs(previous)) break;
    }
    if (!lm.converged) {
        FitResult best;
        best.parameters = {parameter("amplitude", "", lm.p(0) * std::exp(t0 / lm.p(1)), kInf),
                           parameter("tau", "ns", lm.p(1), kInf),
                           parameter("offset", "", with_offset ? lm.p(2) : 0.0, kInf)};
        best.objective = lm.chi2;
        best.iterations = lm.iterations;
        std::ostringstream os;
        os << "exponential fit did not converge after " << lm.iterations << " iterations (chi2 " << lm.chi2 << ")";
        throw ConvergenceError(os.str(), best);
    }

    const double scale = variance_scale(data, lm.chi2, n_free);
    const Eigen::MatrixXd cov = covariance_from(lm.jtj, scale);
    const double B = lm.p(0), tau = lm.p(1);
    if (!(tau > 0.0) || B == 0.0) return degenerate(with_offset ? lm.p(2) : 0.0, lm.chi2, "no decaying component");
    // A = B exp(t0/tau): propagate the (B, tau) covariance.
    const double A = B * std::exp(t0 / tau);
    Eigen::Vector2d grad(std::exp(t0 / tau), -A * t0 / (tau * tau));
    const double varA = grad.dot(cov.topLeftCorner(2, 2) * grad);

    res.parameters = {parameter("amplitude", "", A, varA), parameter("tau", "ns", tau, cov(1, 1)),
                      parameter("offset", "", with_offset ? lm.p(2) : 0.0, with_offset ? cov(2, 2) : 0.0)};
    res.objective = lm.chi2;
    res.converged = true;
    res.iterations = lm.iterations;
    const double sB = std::sqrt(cov(0, 0));
    if (!(std::isfinite(sB)) || std::abs(B) < 2.0 * sB) {
        res.parameters[1].uncertainty = kInf;
        res.parameters[1].ci_low = 0.0;
        res.parameters[1].ci_high = kInf;
        res.warnings.push_back("tau unidentifiable: amplitude is consistent with zero");
    } else if (tau > 20.0 * span) {
        res.warnings.push_back("tau exceeds 20x the sampled span and is poorly constrained");
    }
    return res;
}

// ---------------------------------------------------------------------------
// Saturation

FitResult fit_saturation(const Dataset& data) {
    data.validate();
    if (data.size() < 3) throw DomainError("saturation fit needs at least 3 points");
    if (!(data.x.front() >= 0.0)) throw DomainError("saturation abscissa must be >= 0");
    const auto n = static_cast<Eigen::Index>(data.size());
    const Eigen::VectorXd x = as_vector(data.x), y = as_vector(data.y);
    const Eigen::VectorXd w = as_vector(data.effective_sigma()).cwiseInverse();
    const double x_max = x(n - 1);
    if (!(x_max > 0.0)) throw DomainError("saturation data need a positive abscissa");
    double x_min_pos = x_max;
    for (Eigen::Index i = 0; i < n; ++i)
        if (x(i) > 0.0) x_min_pos = std::min(x_min_pos, x(i));

    // Below this ratio the curve deviates from a line by less than 10% and E_s is not identifiable.
    constexpr double kMinRatio = 0.21;
    const auto unidentifiable = [&](double Es) {
        std::ostringstream os;
        os << "saturation parameter unidentifiable: x_max / E_s = " << x_max / Es << " < " << kMinRatio
           << " (all points in the linear regime)";
        throw UnidentifiableError(os.str());
    };

    double best_chi2 = kInf, best_Es = 0.0, best_I0 = 0.0;
    const std::vector<double> grid = log_grid(x_min_pos / 10.0, 1000.0 * x_max, 300);
    for (double Es : grid) {
        Eigen::MatrixXd B(n, 1);
        B.col(0) = (1.0 - (-x.array() / Es).exp()).matrix();
        Eigen::VectorXd coef;
        const double c2 = linear_fit(B, y, w, coef);
        if (c2 < best_chi2) {
            best_chi2 = c2;
            best_Es = Es;
            best_I0 = coef(0);
        }
    }
    if (best_Es >= grid.back() * (1.0 - 1e-12)) unidentifiable(best_Es);

    const auto residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
        const double I0 = p(0), Es = p(1);
        const Eigen::ArrayXd e = (-x.array() / Es).exp();
        r = ((I0 * (1.0 - e) - y.array()) * w.array()).matrix();
        J.resize(n, 2);
        J.col(0) = ((1.0 - e) * w.array()).matrix();
        J.col(1) = (-I0 * e * x.array() / (Es * Es) * w.array()).matrix();
    };
    const LmOutcome lm = levenberg_marquardt(residuals, Eigen::Vector2d(best_I0, best_Es));
    if (!lm.converged) {
        FitResult best;
        best.parameters = {parameter("I0", "", lm.p(0), kInf), parameter("E_s", "", lm.p(1), kInf)};
        best.objective = lm.chi2;
        best.iterations = lm.iterations;
        throw ConvergenceError("saturation fit did not converge", best);
    }
    if (!(lm.p(1) > 0.0) || x_max / lm.p(1) < kMinRatio) unidentifiable(lm.p(1));
    const Eigen::MatrixXd cov = covariance_from(lm.jtj, variance_scale(data, lm.chi2, 2));
    FitResult res;
    res.parameters = {parameter("I0", "", lm.p(0), cov(0, 0)), parameter("E_s", "", lm.p(1), cov(1, 1))};
    res.objective = lm.chi2;
    res.converged = true;
    res.iterations = lm.iterations;
    return res;
}

double excitation_probability(double E_p, double E_s) {
    if (!(E_s > 0.0) || !std::isfinite(E_s)) throw DomainError("E_s must be positive");
    if (!(E_p >= 0.0)) throw DomainError("pulse energy must be >= 0");
    return -std::expm1(-E_p / E_s);
}

// ---------------------------------------------------------------------------
// Pulse-energy correction

EnergyCorrection pulse_energy_correction(const Dataset& raw, const std::vector<double>& energies, double E_s) {
    raw.validate();
    if (energies.size() != raw.size()) throw DomainError("one pulse energy per point is required");
    if (!(E_s > 0.0)) throw DomainError("E_s must be positive");
    for (std::size_t i = 0; i < energies.size(); ++i)
        if (!(energies[i] > 0.0) || !std::isfinite(energies[i])) {
            std::ostringstream os;
            os << "pulse energy at point " << i << " is invalid (" << energies[i] << " fJ)";
            throw DomainError(os.str());
        }
    double mean = 0.0;
    for (double e : energies) mean += e;
    mean /= static_cast<double>(energies.size());

    EnergyCorrection out;
    out.data = raw;
    out.reference_probability = excitation_probability(mean, E_s);
    out.data.excitation_probability = out.reference_probability;
    double worst = 0.0;
    std::size_t worst_i = 0;
    for (std::size_t i = 0; i < energies.size(); ++i) {
        const double p = excitation_probability(energies[i], E_s);
        const double f = out.reference_probability / p;
        out.factors.push_back(f);
        out.data.y[i] *= f;
        if (out.data.sigma) (*out.data.sigma)[i] *= f;
        if (std::abs(p / out.reference_probability - 1.0) > worst) {
            worst = std::abs(p / out.reference_probability - 1.0);
            worst_i = i;
        }
    }
    if (worst > 0.01) {
        std::ostringstream os;
        os << "excitation probability deviates by " << 100.0 * worst << "% at point " << worst_i
           << " (expected within 1%)";
        out.warnings.push_back(os.str());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Two-pulse

FitResult fit_two_pulse(const std::vector<Dataset>& datasets, const TwoPulseFitOptions& opt) {
    if (datasets.empty()) throw DomainError("two-pulse fit needs at least one dataset");
    if (!(opt.consistency_sigmas > 0.0) || !(opt.consistency_floor >= 0.0))
        throw DomainError("consistency settings must be positive");
    std::vector<Dataset> used;
    for (const Dataset& d : datasets) {
        d.validate();
        if (!d.excitation_probability || !(*d.excitation_probability > 0.0))
            throw DomainError("every two-pulse dataset needs a positive excitation_probability");
        Dataset r = d;
        r.x.clear();
        r.y.clear();
        if (d.sigma) r.sigma->clear();
        for (std::size_t i = 0; i < d.size(); ++i)
            if (d.x[i] >= opt.min_delay_ns) {
                r.x.push_back(d.x[i]);
                r.y.push_back(d.y[i]);
                if (d.sigma) r.sigma->push_back((*d.sigma)[i]);
            }
        if (r.size() < 8) throw DomainError("each two-pulse dataset needs at least 8 delays inside the fit domain");
        used.push_back(std::move(r));
    }
    const std::size_t m = used.size();

    // Independent fits: starting values and the decay-consistency check.
    std::vector<FitResult> single;
    for (const Dataset& d : used) {
        single.push_back(fit_exponential(d, false));
        if (!std::isfinite(single.back().value("tau")) || !std::isfinite(single.back().at("tau").uncertainty))
            throw UnidentifiableError("a two-pulse dataset shows no measurable decay");
    }
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
            const auto& a = single[i].at("tau");
            const auto& b = single[j].at("tau");
            const double floor = opt.consistency_floor * std::max(a.value, b.value);
            const double s = std::hypot(std::max(a.uncertainty, floor), std::max(b.uncertainty, floor));
            if (std::abs(a.value - b.value) > opt.consistency_sigmas * s) {
                std::ostringstream os;
                os << "tau_ms of datasets " << i + 1 << " (" << a.value << " +- " << a.uncertainty << " ns) and "
                   << j + 1 << " (" << b.value << " +- " << b.uncertainty << " ns) disagree beyond "
                   << opt.consistency_sigmas << " sigma";
                throw InconsistentDecayError(os.str());
            }
        }

    std::vector<Eigen::VectorXd> ts, ys, ws;
    Eigen::Index n_total = 0;
    bool explicit_sigma = true;
    for (const Dataset& d : used) {
        ts.push_back(as_vector(d.x));
        ys.push_back(as_vector(d.y));
        ws.push_back(as_vector(d.effective_sigma()).cwiseInverse());
        n_total += static_cast<Eigen::Index>(d.size());
        explicit_sigma = explicit_sigma && d.sigma.has_value();
    }
    const auto k = static_cast<Eigen::Index>(m);
    const auto residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
        const double tau = p(0);
        r.resize(n_total);
        J = Eigen::MatrixXd::Zero(n_total, k + 1);
        Eigen::Index row = 0;
        for (Eigen::Index s = 0; s < k; ++s) {
            const auto& t = ts[static_cast<std::size_t>(s)];
            const Eigen::ArrayXd e = (-t.array() / tau).exp();
            const Eigen::ArrayXd wv = ws[static_cast<std::size_t>(s)].array();
            const double a = p(1 + s);
            const Eigen::Index len = t.size();
            r.segment(row, len) = ((a * e - ys[static_cast<std::size_t>(s)].array()) * wv).matrix();
            J.block(row, 0, len, 1) = (a * e * t.array() / (tau * tau) * wv).matrix();
            J.block(row, 1 + s, len, 1) = (e * wv).matrix();
            row += len;
        }
    };
    Eigen::VectorXd p0(k + 1);
    double tau_sum = 0.0;
    for (std::size_t s = 0; s < m; ++s) {
        tau_sum += single[s].value("tau");
        p0(static_cast<Eigen::Index>(s) + 1) = single[s].value("amplitude");
    }
    p0(0) = tau_sum / static_cast<double>(m);
    const LmOutcome lm = levenberg_marquardt(residuals, p0);
    if (!lm.converged) {
        FitResult best;
        best.parameters.push_back(parameter("tau_ms", "ns", lm.p(0), kInf));
        best.objective = lm.chi2;
        best.iterations = lm.iterations;
        throw ConvergenceError("joint two-pulse fit did not converge", best);
    }
    const double scale =
        explicit_sigma || n_total <= k + 1 ? 1.0 : lm.chi2 / static_cast<double>(n_total - k - 1);
    const Eigen::MatrixXd cov = covariance_from(lm.jtj, scale);

    FitResult res;
    res.parameters.push_back(parameter("tau_ms", "ns", lm.p(0), cov(0, 0)));
    std::vector<double> P(m), alpha(m), s_alpha(m);
    for (std::size_t s = 0; s < m; ++s) {
        const auto i = static_cast<Eigen::Index>(s) + 1;
        P[s] = *used[s].excitation_probability;
        alpha[s] = lm.p(i);
        s_alpha[s] = std::sqrt(std::max(0.0, cov(i, i)));
        res.parameters.push_back(parameter("alpha_" + std::to_string(s + 1), "", alpha[s], cov(i, i)));
    }

    // Origin-anchored line alpha = slope P_e.
    const bool weighted = std::all_of(s_alpha.begin(), s_alpha.end(), [](double v) { return v > 0.0 && std::isfinite(v); });
    double sw_pp = 0.0, sw_pa = 0.0, ss_a = 0.0;
    for (std::size_t s = 0; s < m; ++s) {
        const double wt = weighted ? 1.0 / (s_alpha[s] * s_alpha[s]) : 1.0;
        sw_pp += wt * P[s] * P[s];
        sw_pa += wt * P[s] * alpha[s];
        ss_a += alpha[s] * alpha[s];
    }
    const double slope = sw_pa / sw_pp;
    double chi2_line = 0.0, ss_res = 0.0;
    for (std::size_t s = 0; s < m; ++s) {
        const double wt = weighted ? 1.0 / (s_alpha[s] * s_alpha[s]) : 1.0;
        chi2_line += wt * std::pow(alpha[s] - slope * P[s], 2);
        ss_res += std::pow(alpha[s] - slope * P[s], 2);
    }
    double var_slope;
    if (m == 1) {
        const double sd = weighted ? s_alpha[0] / P[0] : 0.0;
        var_slope = std::pow(opt.single_dataset_inflation * sd, 2);
    } else if (weighted) {
        var_slope = std::max(1.0, chi2_line / static_cast<double>(m - 1)) / sw_pp;
    } else {
        var_slope = chi2_line / static_cast<double>(m - 1) / sw_pp;
    }
    res.parameters.push_back(parameter("alpha_slope", "", slope, var_slope));
    FitParameter r2;
    r2.name = "linearity_r2";
    r2.value = ss_a > 0.0 ? 1.0 - ss_res / ss_a : 1.0;
    r2.ci_low = r2.ci_high = r2.value;
    res.parameters.push_back(r2);
    res.objective = lm.chi2;
    res.converged = true;
    res.iterations = lm.iterations;
    if (m == 1) res.warnings.push_back("single excitation probability: slope uncertainty inflated");
    return res;
}

}  // namespace siv1::inference
