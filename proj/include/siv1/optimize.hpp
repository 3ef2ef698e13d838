#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "siv1/model.hpp"

namespace siv1::inference {

/// Scalar objective. Non-finite values are treated as +infinity after the start point.
using Objective = std::function<double(const Eigen::VectorXd&)>;

struct NelderMeadOptions {
    double reflection = 1.0;
    double expansion = 2.0;
    double contraction = 0.5;
    double shrink = 0.5;
    /// Stop when every vertex lies within this distance (max norm) of the best one.
    double x_tolerance = 1e-10;
    /// Stop when the objective spread across the simplex falls to this value; 0 disables.
    double f_tolerance = 0.0;
    int max_iterations = 20000;
    /// Initial edge as a fraction of |x0_i|; 0.00025 is used for zero coordinates.
    double initial_step = 0.05;
    /// Absolute per-coordinate edges; overrides initial_step when non-empty.
    std::vector<double> steps;
    /// Fresh simplices built around the best point after convergence.
    int restarts = 0;
};

/**
 * @brief Downhill simplex minimization.
 *
 * Deterministic for a given x0 and options. Throws DomainError when the
 * objective is not finite at x0 and ConvergenceError (carrying the best point)
 * when max_iterations is reached.
 */
FitResult nelder_mead(const Objective& f, const Eigen::VectorXd& x0,
                      const NelderMeadOptions& options = {},
                      const std::vector<std::string>& names = {});

struct DifferentialEvolutionOptions {
    /// Members; 0 selects 15 x dimension. Must be >= 4.
    int population = 0;
    double F = 0.8;
    double CR = 0.9;
    std::uint64_t seed = 42;
    int max_generations = 1000;
    /// Stop when the population spans at most this fraction of every bound width.
    double x_tolerance = 1e-9;
    /// Also stop when std(f) <= f_atol + f_rtol |mean(f)|; both 0 disables.
    double f_rtol = 0.0;
    double f_atol = 0.0;
    /// Worker threads for objective evaluation; 0 reads SIV1_THREADS (default 1).
    int threads = 0;
};

/**
 * @brief rand/1/bin differential evolution inside box bounds.
 *
 * Each generation builds all trial vectors from the previous generation, so
 * results are bit-identical for a fixed seed whatever the thread count. The
 * objective must be safe to call concurrently when threads > 1. Parameter
 * uncertainties are the population standard deviations. Throws
 * ConvergenceError with the best member after max_generations.
 */
FitResult differential_evolution(const Objective& f, const Eigen::VectorXd& lower,
                                 const Eigen::VectorXd& upper,
                                 const DifferentialEvolutionOptions& options = {},
                                 const std::vector<std::string>& names = {});

/// Central-difference Hessian with per-coordinate steps.
Eigen::MatrixXd numerical_hessian(const Objective& f, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& steps);

struct CurvatureEstimate {
    Eigen::MatrixXd hessian;
    Eigen::MatrixXd covariance;
    Eigen::VectorXd std_error;
    bool positive_definite = false;
};

/**
 * @brief Covariance 2 H^-1 of a chi-square objective at its minimum.
 *
 * Coordinates with non-positive curvature get an infinite standard error.
 */
CurvatureEstimate chi_square_curvature(const Objective& chi2, const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& steps);

/// Two-sided 95% normal quantile.
inline constexpr double z95 = 1.959963984540054;

/// Worker count from SIV1_THREADS, at least 1.
int default_thread_count();

}  // namespace siv1::inference
