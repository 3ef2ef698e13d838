#include "siv1/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace siv1::inference {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_eval(const Objective& f, const Eigen::VectorXd& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : kInf;
}

std::string name_of(const std::vector<std::string>& names, std::size_t i) {
    if (i < names.size()) return names[i];
    return "x" + std::to_string(i);
}

FitResult make_result(const Eigen::VectorXd& x, double fx, const std::vector<std::string>& names) {
    FitResult r;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        FitParameter p;
        p.name = name_of(names, static_cast<std::size_t>(i));
        p.value = x(i);
        p.ci_low = p.ci_high = x(i);
        r.parameters.push_back(p);
    }
    r.objective = fx;
    return r;
}

/// Evaluates f on every point; results land at their own index so the order of completion is irrelevant.
std::vector<double> evaluate_all(const Objective& f, const std::vector<Eigen::VectorXd>& xs, int threads) {
    std::vector<double> out(xs.size());
    const auto n = static_cast<int>(xs.size());
    const int t = std::clamp(threads, 1, std::max(1, n));
    if (t == 1) {
        for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = safe_eval(f, xs[static_cast<std::size_t>(i)]);
        return out;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(t));
    std::vector<std::thread> pool;
    for (int w = 0; w < t; ++w)
        pool.emplace_back([&, w] {
            try {
                for (int i = w; i < n; i += t)
                    out[static_cast<std::size_t>(i)] = safe_eval(f, xs[static_cast<std::size_t>(i)]);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

}  // namespace

int default_thread_count() {
    const char* env = std::getenv("SIV1_THREADS");
    if (env == nullptr) return 1;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || v < 1) return 1;
    return static_cast<int>(std::min<long>(v, 256));
}

// ---------------------------------------------------------------------------
// Nelder-Mead

FitResult nelder_mead(const Objective& f, const Eigen::VectorXd& x0, const NelderMeadOptions& o,
                      const std::vector<std::string>& names) {
    const Eigen::Index n = x0.size();
    if (n == 0) throw DomainError("nelder_mead needs at least one parameter");
    if (!x0.allFinite()) throw DomainError("start point must be finite");
    if (!(o.reflection > 0.0 && o.expansion > 1.0 && o.expansion > o.reflection && o.contraction > 0.0 &&
          o.contraction < 1.0 && o.shrink > 0.0 && o.shrink < 1.0))
        throw DomainError("invalid Nelder-Mead coefficients");
    if (!o.steps.empty() && o.steps.size() != static_cast<std::size_t>(n))
        throw DomainError("steps must match the parameter count");
    const double f0 = f(x0);
    if (!std::isfinite(f0)) throw DomainError("objective is not finite at the start point");

    std::vector<Eigen::VectorXd> xs(static_cast<std::size_t>(n + 1));
    std::vector<double> fs(static_cast<std::size_t>(n + 1));
    const auto build = [&](const Eigen::VectorXd& base, double fbase) {
        xs[0] = base;
        fs[0] = fbase;
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::VectorXd v = base;
            double step;
            if (!o.steps.empty()) step = o.steps[static_cast<std::size_t>(i)];
            else step = base(i) != 0.0 ? o.initial_step * base(i) : 0.00025;
            v(i) += step;
            xs[static_cast<std::size_t>(i + 1)] = v;
            fs[static_cast<std::size_t>(i + 1)] = safe_eval(f, v);
        }
    };
    build(x0, f0);

    std::vector<std::size_t> idx(static_cast<std::size_t>(n + 1));
    int iterations = 0, restarts_left = o.restarts;
    const auto sort_simplex = [&] {
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
        std::vector<Eigen::VectorXd> x2;
        std::vector<double> f2;
        for (std::size_t k : idx) {
            x2.push_back(xs[k]);
            f2.push_back(fs[k]);
        }
        xs.swap(x2);
        fs.swap(f2);
    };

    while (true) {
        sort_simplex();
        double size = 0.0;
        for (std::size_t i = 1; i < xs.size(); ++i) size = std::max(size, (xs[i] - xs[0]).cwiseAbs().maxCoeff());
        const bool small = size <= o.x_tolerance;
        const bool flat = o.f_tolerance > 0.0 && fs.back() - fs.front() <= o.f_tolerance;
        if (small || flat) {
            if (restarts_left > 0) {
                --restarts_left;
                const double before = fs.front();
                build(xs[0], fs[0]);
                sort_simplex();
                if (fs.front() < before) continue;
                // A fresh simplex that finds nothing lower confirms the minimum.
                double size2 = 0.0;
                for (std::size_t i = 1; i < xs.size(); ++i)
                    size2 = std::max(size2, (xs[i] - xs[0]).cwiseAbs().maxCoeff());
                if (size2 > o.x_tolerance) continue;
            }
            FitResult r = make_result(xs[0], fs[0], names);
            r.converged = true;
            r.iterations = iterations;
            return r;
        }
        if (iterations >= o.max_iterations) {
            FitResult r = make_result(xs[0], fs[0], names);
            r.iterations = iterations;
            std::ostringstream os;
            os << "Nelder-Mead reached " << o.max_iterations << " iterations (simplex size " << size << ")";
            throw ConvergenceError(os.str(), r);
        }
        ++iterations;

        const std::size_t w = xs.size() - 1;
        Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
        for (std::size_t i = 0; i < w; ++i) c += xs[i];
        c /= static_cast<double>(n);

        const Eigen::VectorXd xr = c + o.reflection * (c - xs[w]);
        const double fr = safe_eval(f, xr);
        if (fr < fs[0]) {
            const Eigen::VectorXd xe = c + o.expansion * (xr - c) / o.reflection;
            const double fe = safe_eval(f, xe);
            if (fe < fr) {
                xs[w] = xe;
                fs[w] = fe;
            } else {
                xs[w] = xr;
                fs[w] = fr;
            }
            continue;
        }
        if (fr < fs[w - 1]) {
            xs[w] = xr;
            fs[w] = fr;
            continue;
        }
        bool shrink = false;
        if (fr < fs[w]) {
            const Eigen::VectorXd xc = c + o.contraction * (xr - c);
            const double fc = safe_eval(f, xc);
            if (fc <= fr) {
                xs[w] = xc;
                fs[w] = fc;
            } else {
                shrink = true;
            }
        } else {
            const Eigen::VectorXd xc = c + o.contraction * (xs[w] - c);
            const double fc = safe_eval(f, xc);
            if (fc < fs[w]) {
                xs[w] = xc;
                fs[w] = fc;
            } else {
                shrink = true;
            }
        }
        if (shrink)
            for (std::size_t i = 1; i < xs.size(); ++i) {
                xs[i] = xs[0] + o.shrink * (xs[i] - xs[0]);
                fs[i] = safe_eval(f, xs[i]);
            }
    }
}

// ---------------------------------------------------------------------------
// Differential evolution

FitResult differential_evolution(const Objective& f, const Eigen::VectorXd& lower,
                                 const Eigen::VectorXd& upper, const DifferentialEvolutionOptions& o,
                                 const std::vector<std::string>& names) {
    const Eigen::Index n = lower.size();
    if (n == 0 || upper.size() != n) throw DomainError("bounds must be non-empty and of equal length");
    if (!lower.allFinite() || !upper.allFinite()) throw DomainError("bounds must be finite");
    if (!((upper - lower).minCoeff() > 0.0)) throw DomainError("every upper bound must exceed its lower bound");
    const int np = o.population > 0 ? o.population : static_cast<int>(15 * n);
    if (np < 4) throw DomainError("population must be at least 4");
    if (!(o.F > 0.0 && o.F <= 2.0) || !(o.CR >= 0.0 && o.CR <= 1.0))
        throw DomainError("F must lie in (0,2] and CR in [0,1]");
    if (o.max_generations < 0) throw DomainError("max_generations must be >= 0");
    const int threads = o.threads > 0 ? o.threads : default_thread_count();

    std::mt19937_64 rng(o.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> pick(0, np - 1);
    std::uniform_int_distribution<Eigen::Index> pick_dim(0, n - 1);
    const Eigen::VectorXd width = upper - lower;

    std::vector<Eigen::VectorXd> pop(static_cast<std::size_t>(np));
    for (auto& x : pop) {
        x.resize(n);
        for (Eigen::Index j = 0; j < n; ++j) x(j) = lower(j) + unit(rng) * width(j);
    }
    std::vector<double> fit = evaluate_all(f, pop, threads);

    const auto best_index = [&] {
        return static_cast<std::size_t>(std::min_element(fit.begin(), fit.end()) - fit.begin());
    };
    const auto finish = [&](int generations, bool converged) {
        const std::size_t b = best_index();
        FitResult r = make_result(pop[b], fit[b], names);
        for (Eigen::Index j = 0; j < n; ++j) {
            double mean = 0.0, sq = 0.0;
            for (const auto& x : pop) mean += x(j);
            mean /= np;
            for (const auto& x : pop) sq += (x(j) - mean) * (x(j) - mean);
            const double sd = std::sqrt(sq / std::max(1, np - 1));
            auto& p = r.parameters[static_cast<std::size_t>(j)];
            p.uncertainty = sd;
            p.ci_low = p.value - z95 * sd;
            p.ci_high = p.value + z95 * sd;
        }
        r.converged = converged;
        r.iterations = generations;
        r.seed = o.seed;
        return r;
    };
    const auto converged_now = [&] {
        bool tight = true;
        for (Eigen::Index j = 0; j < n && tight; ++j) {
            double lo = kInf, hi = -kInf;
            for (const auto& x : pop) {
                lo = std::min(lo, x(j));
                hi = std::max(hi, x(j));
            }
            tight = hi - lo <= o.x_tolerance * width(j);
        }
        if (tight) return true;
        if (o.f_rtol > 0.0 || o.f_atol > 0.0) {
            double mean = 0.0, sq = 0.0;
            for (double v : fit) {
                if (!std::isfinite(v)) return false;
                mean += v;
            }
            mean /= np;
            for (double v : fit) sq += (v - mean) * (v - mean);
            return std::sqrt(sq / np) <= o.f_atol + o.f_rtol * std::abs(mean);
        }
        return false;
    };

    std::vector<Eigen::VectorXd> trial(static_cast<std::size_t>(np));
    for (int gen = 0; gen < o.max_generations; ++gen) {
        if (converged_now()) return finish(gen, true);
        for (int i = 0; i < np; ++i) {
            int r1, r2, r3;
            do r1 = pick(rng); while (r1 == i);
            do r2 = pick(rng); while (r2 == i || r2 == r1);
            do r3 = pick(rng); while (r3 == i || r3 == r1 || r3 == r2);
            const Eigen::Index jr = pick_dim(rng);
            const auto& a = pop[static_cast<std::size_t>(r1)];
            const auto& b = pop[static_cast<std::size_t>(r2)];
            const auto& c = pop[static_cast<std::size_t>(r3)];
            Eigen::VectorXd t = pop[static_cast<std::size_t>(i)];
            for (Eigen::Index j = 0; j < n; ++j) {
                const double u = unit(rng);
                if (u < o.CR || j == jr) {
                    double v = a(j) + o.F * (b(j) - c(j));
                    if (v < lower(j) || v > upper(j)) v = lower(j) + unit(rng) * width(j);
                    t(j) = v;
                }
            }
            trial[static_cast<std::size_t>(i)] = std::move(t);
        }
        const std::vector<double> ft = evaluate_all(f, trial, threads);
        for (std::size_t i = 0; i < pop.size(); ++i)
            if (ft[i] <= fit[i]) {
                pop[i] = trial[i];
                fit[i] = ft[i];
            }
    }
    if (converged_now()) return finish(o.max_generations, true);
    FitResult best = finish(o.max_generations, false);
    std::ostringstream os;
    os << "differential evolution reached " << o.max_generations << " generations";
    throw ConvergenceError(os.str(), best);
}

// ---------------------------------------------------------------------------
// Curvature

Eigen::MatrixXd numerical_hessian(const Objective& f, const Eigen::VectorXd& x, const Eigen::VectorXd& h) {
    const Eigen::Index n = x.size();
    if (h.size() != n || !(h.minCoeff() > 0.0)) throw DomainError("Hessian steps must be positive");
    Eigen::MatrixXd H(n, n);
    const double f0 = f(x);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd xp = x, xm = x;
        xp(i) += h(i);
        xm(i) -= h(i);
        H(i, i) = (f(xp) - 2.0 * f0 + f(xm)) / (h(i) * h(i));
        for (Eigen::Index j = 0; j < i; ++j) {
            Eigen::VectorXd pp = x, pm = x, mp = x, mm = x;
            pp(i) += h(i), pp(j) += h(j);
            pm(i) += h(i), pm(j) -= h(j);
            mp(i) -= h(i), mp(j) += h(j);
            mm(i) -= h(i), mm(j) -= h(j);
            H(i, j) = H(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h(i) * h(j));
        }
    }
    return H;
}

CurvatureEstimate chi_square_curvature(const Objective& chi2, const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& steps) {
    CurvatureEstimate c;
    c.hessian = numerical_hessian(chi2, x, steps);
    const Eigen::Index n = x.size();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (c.hessian + c.hessian.transpose()));
    const Eigen::VectorXd ev = es.eigenvalues();
    const Eigen::MatrixXd V = es.eigenvectors();
    const double top = std::max(ev.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    c.covariance = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd weak = Eigen::VectorXd::Zero(n);
    c.positive_definite = true;
    for (Eigen::Index k = 0; k < n; ++k) {
        if (ev(k) > 1e-12 * top) {
            c.covariance += (2.0 / ev(k)) * V.col(k) * V.col(k).transpose();
        } else {
            c.positive_definite = false;
            weak += V.col(k).cwiseAbs2();
        }
    }
    c.std_error.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
        c.std_error(i) = weak(i) > 1e-6 ? kInf : std::sqrt(std::max(0.0, c.covariance(i, i)));
    return c;
}

}  // namespace siv1::inference
