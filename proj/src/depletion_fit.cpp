#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "siv1/fitting.hpp"

namespace siv1::inference {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const std::vector<std::string> kNames{"gamma_r", "gamma1", "gamma2", "gamma3", "gamma4", "kappa"};
const std::vector<std::string> kUnits{"1/ns", "1/ns", "1/ns", "1/ns", "1/ns", "MHz/sqrt(uW)"};

RateSet rates_from(const Eigen::VectorXd& v) { return RateSet(v(0), 0.0, v(1), v(2), v(3), v(4), false); }

void check_datasets(const std::vector<Dataset>& datasets) {
    if (datasets.empty()) throw DomainError("depletion fit needs at least one dataset");
    for (const Dataset& d : datasets) {
        d.validate();
        if (!d.power) throw DomainError("every depletion dataset needs a power");
        if (!d.target || *d.target == Transition::Both) throw DomainError("every depletion dataset needs target A1 or A2");
        if (d.x.front() < 0.0) throw DomainError("pumping times must be >= 0");
    }
}

}  // namespace

std::vector<std::vector<double>> depletion_model(const std::vector<Dataset>& datasets, const RateSet& rates,
                                                 double kappa, const DepletionFitConfig& config) {
    SixLevelParams p = config.base;
    p.rates = rates;
    std::vector<std::vector<double>> out(datasets.size());
    for (Transition target : {Transition::A1, Transition::A2}) {
        std::vector<std::size_t> members;
        std::vector<double> taus, amplitudes;
        for (std::size_t i = 0; i < datasets.size(); ++i)
            if (datasets[i].target == target) {
                members.push_back(i);
                amplitudes.push_back(kappa * std::sqrt(*datasets[i].power));
                taus.insert(taus.end(), datasets[i].x.begin(), datasets[i].x.end());
            }
        if (members.empty()) continue;
        std::sort(taus.begin(), taus.end());
        taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
        const auto curves = lindblad::simulate_depletion_batch(p, amplitudes, taus, target, config.simulation);
        for (std::size_t k = 0; k < members.size(); ++k) {
            const Dataset& d = datasets[members[k]];
            auto& dst = out[members[k]];
            for (double x : d.x) {
                const auto it = std::lower_bound(taus.begin(), taus.end(), x);
                dst.push_back(curves[k].signal[static_cast<std::size_t>(it - taus.begin())]);
            }
        }
    }
    return out;
}

FitResult fit_depletion_global(const std::vector<Dataset>& datasets, const DepletionFitConfig& cfg) {
    check_datasets(datasets);
    if (cfg.lower.size() != 6 || cfg.upper.size() != 6) throw DomainError("depletion bounds need 6 entries");
    if (!(cfg.lower.minCoeff() > 0.0) || !((cfg.upper - cfg.lower).minCoeff() > 0.0))
        throw DomainError("depletion bounds must be positive and ordered");

    std::vector<std::string> warnings;
    std::map<double, int> powers;
    for (const Dataset& d : datasets) ++powers[*d.power];
    if (powers.size() < 2) warnings.push_back("fewer than two power levels: rates and kappa are weakly separable");

    std::vector<std::vector<double>> sig;
    std::size_t n_points = 0;
    bool explicit_sigma = true;
    for (const Dataset& d : datasets) {
        sig.push_back(d.effective_sigma());
        n_points += d.size();
        explicit_sigma = explicit_sigma && d.sigma.has_value();
    }

    // Parameters live in log space so that every rate stays positive.
    const Eigen::VectorXd lo = cfg.lower.array().log(), hi = cfg.upper.array().log();
    const Objective chi2 = [&](const Eigen::VectorXd& th) {
        if (!th.allFinite()) return kInf;
        const Eigen::VectorXd v = th.array().exp();
        try {
            const auto model = depletion_model(datasets, rates_from(v), v(5), cfg);
            double s = 0.0;
            for (std::size_t i = 0; i < datasets.size(); ++i)
                for (std::size_t j = 0; j < datasets[i].size(); ++j)
                    s += std::pow((datasets[i].y[j] - model[i][j]) / sig[i][j], 2);
            return s;
        } catch (const std::exception&) {
            return kInf;
        }
    };

    Eigen::VectorXd theta;
    int iterations = 0;
    if (cfg.global_search) {
        FitResult de;
        try {
            de = differential_evolution(chi2, lo, hi, cfg.de, kNames);
        } catch (const ConvergenceError& e) {
            de = e.best();
            warnings.push_back("differential evolution stopped at its generation cap; continuing with the best member");
        }
        theta = de.values();
        iterations += de.iterations;
    } else {
        if (!cfg.start) throw DomainError("local depletion fit needs a start point");
        if (cfg.start->size() != 6 || !(cfg.start->minCoeff() > 0.0))
            throw DomainError("depletion start point needs 6 positive entries");
        theta = cfg.start->array().log();
    }

    NelderMeadOptions nm = cfg.nm;
    if (nm.steps.empty()) nm.steps.assign(6, 0.1);
    const auto refine = [&](const Eigen::VectorXd& from) {
        const FitResult r = nelder_mead(chi2, from, nm, kNames);
        iterations += r.iterations;
        return std::make_pair(Eigen::VectorXd(r.values()), r.objective);
    };
    auto [best, best_f] = refine(theta);

    // Scan gamma1 and gamma2 around the optimum and restart from any lower point.
    for (int round = 0; round < cfg.max_profile_rounds; ++round) {
        Eigen::VectorXd lower_point;
        double lower_f = best_f;
        for (Eigen::Index idx : {Eigen::Index{1}, Eigen::Index{2}})
            for (double off : cfg.profile_offsets) {
                Eigen::VectorXd t = best;
                t(idx) += off;
                const double f = chi2(t);
                if (f < lower_f - 1e-12 * std::abs(lower_f)) {
                    lower_f = f;
                    lower_point = t;
                }
            }
        if (lower_point.size() == 0) break;
        auto [next, next_f] = refine(lower_point);
        if (!(next_f < best_f)) break;
        best = next;
        best_f = next_f;
    }

    const CurvatureEstimate curv = chi_square_curvature(chi2, best, Eigen::VectorXd::Constant(6, 1e-3));
    const double scale = explicit_sigma || n_points <= 6 ? 1.0 : best_f / static_cast<double>(n_points - 6);

    FitResult res;
    for (Eigen::Index i = 0; i < 6; ++i) {
        const auto u = static_cast<std::size_t>(i);
        const double se = curv.std_error(i) * std::sqrt(scale);
        FitParameter p;
        p.name = kNames[u];
        p.unit = kUnits[u];
        p.value = std::exp(best(i));
        p.uncertainty = std::isfinite(se) ? p.value * se : kInf;
        p.ci_low = std::isfinite(se) ? p.value * std::exp(-z95 * se) : 0.0;
        p.ci_high = std::isfinite(se) ? p.value * std::exp(z95 * se) : kInf;
        res.parameters.push_back(p);
        if (!(se <= cfg.identifiability_threshold)) {
            std::ostringstream os;
            os << p.name << " is poorly constrained by the data (log standard error " << se << ")";
            warnings.push_back(os.str());
        }
    }
    res.objective = best_f;
    res.converged = true;
    res.iterations = iterations;
    if (cfg.global_search) res.seed = cfg.de.seed;
    res.warnings = std::move(warnings);
    return res;
}

}  // namespace siv1::inference
