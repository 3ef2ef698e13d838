#pragma once

#include <complex>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "siv1/model.hpp"

namespace siv1::lindblad {

using Complex = std::complex<double>;
using Matrix6c = Eigen::Matrix<Complex, 6, 6>;

/**
 * @brief Density matrix over (g1, g2, e1, e2, d1, d2).
 *
 * Construction checks Hermiticity (1e-10), unit trace (1e-9) and eigenvalues
 * >= -1e-9.
 */
class DensityMatrix {
public:
    explicit DensityMatrix(const Matrix6c& rho);

    /// Diagonal state. Five-entry populations place half of d on each doublet.
    static DensityMatrix from_populations(const LevelPopulations& p);
    static DensityMatrix depolarized_ground();

    const Matrix6c& matrix() const { return rho_; }
    LevelPopulations populations() const;

    static constexpr double hermiticity_tolerance = 1e-10;
    static constexpr double trace_tolerance = 1e-9;
    static constexpr double positivity_tolerance = 1e-9;

private:
    Matrix6c rho_;
};

/// Largest of the Hermiticity error, trace error and negative-eigenvalue depth.
double physicality_violation(const Matrix6c& rho);

/// Rabi frequency envelope Omega(t) in MHz; t in ns.
class DriveEnvelope {
public:
    enum class Shape { Off, Constant, Gaussian, QuasiCW };

    static DriveEnvelope off();
    static DriveEnvelope constant(double omega_mhz);
    /// peak Omega, intensity FWHM and center; the field is exp(-(t-c)^2 / (2 sigma_E^2)).
    static DriveEnvelope gaussian(double peak_mhz, double fwhm_ns, double center_ns = 0.0);
    /// A |sin(2 pi f t)|, f in MHz.
    static DriveEnvelope quasi_cw(double amplitude_mhz, double modulation_mhz = 10.0);

    Shape shape() const { return shape_; }
    double operator()(double t_ns) const;
    double max_value() const { return amplitude_; }
    double amplitude() const { return amplitude_; }
    double fwhm() const { return fwhm_; }
    double center() const { return center_; }
    double modulation() const { return modulation_; }

private:
    DriveEnvelope(Shape s, double amplitude, double fwhm, double center, double modulation);
    Shape shape_;
    double amplitude_;
    double fwhm_;
    double center_;
    double modulation_;
};

/// sigma_E = FWHM / (2 sqrt(ln 2)) of the field envelope for an intensity FWHM.
double gaussian_sigma(double fwhm_ns);

/// Omega_peak sigma_E sqrt(2 pi) in radians, with Omega converted to rad/ns.
double pulse_area(const DriveEnvelope& envelope);

/// Peak Rabi frequency (MHz) giving the requested area for a Gaussian of this FWHM.
double peak_for_area(double area_rad, double fwhm_ns);

/// Six-level master equation, or the five-level reference embedded in the same basis.
enum class Model {
    SixLevel,
    /// Single metastable level in the d1 slot: e1,e2 -> d, d -> g1 at gamma3/2, d -> g2 at gamma4/2.
    FiveLevelMerged,
};

/// Rotating-frame Hamiltonian in rad/ns. Omega couples g1<->e1 and g2<->e2 with weight Omega/2.
Matrix6c build_hamiltonian(const SixLevelParams& params, double omega_mhz, double delta_L_mhz);

/// -i[H, rho] plus the decay and dephasing dissipators. Linear in rho for any 6x6 input.
Matrix6c lindblad_rhs(const Matrix6c& rho, const Matrix6c& H, const RateSet& rates, double gamma_s,
                      Model model = Model::SixLevel);

/**
 * @brief Largest admissible fixed step in ns.
 *
 * min(1/(10 Omega_max), FWHM/50, 1/(10 f)) extended by 1/(10 w) where w is the
 * fastest static frequency or decay rate of the undriven model.
 */
double max_time_step(const SixLevelParams& params, const DriveEnvelope& envelope,
                     double delta_L_mhz, Model model = Model::SixLevel);

enum class Integrator { RK4, DormandPrince45 };

struct EvolveOptions {
    /// Fixed step; <= 0 picks half of max_time_step. Initial step of the adaptive mode.
    double dt = 0.0;
    Integrator integrator = Integrator::RK4;
    double rtol = 1e-9;
    double atol = 1e-12;
    /// Spacing of stored samples; <= 0 keeps at most about 2000 samples.
    double sample_interval = 0.0;
    Model model = Model::SixLevel;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Matrix6c> states;
    /// gamma_r (rho_e1e1 + rho_e2e2) at each sample, 1/ns.
    std::vector<double> emission_rate;
    /// Photons emitted since the first sample.
    std::vector<double> emitted;

    LevelPopulations populations(std::size_t i) const;
    /// One bin per sample interval carrying the mean emission rate.
    FluorescenceTrace trace() const;
    double max_physicality_violation() const;
};

/// Integrates rho from t0 to t1 under params.delta_L and the given envelope.
Trajectory evolve(const DensityMatrix& rho0, const SixLevelParams& params,
                  const DriveEnvelope& envelope, double t0, double t1,
                  const EvolveOptions& options = {});

/**
 * @brief Liouvillian restricted to the coordinates reachable from diagonal states.
 *
 * Starting from populations, only the populations and the g1-e1, g2-e2 and
 * d1-d2 coherences ever become nonzero, so the 36-dimensional superoperator
 * collapses to at most 12 complex coordinates. The generator is affine in the
 * drive: L(Omega) = L0 + Omega L1 with Omega in MHz.
 */
class ReducedModel {
public:
    ReducedModel(const SixLevelParams& params, double delta_L_mhz, Model model = Model::SixLevel);

    Eigen::Index dimension() const { return static_cast<Eigen::Index>(entries_.size()); }
    /// (row, column) of the density-matrix entry behind each coordinate.
    const std::vector<std::pair<int, int>>& entries() const { return entries_; }

    Eigen::VectorXcd reduce(const Matrix6c& rho) const;
    Matrix6c expand(const Eigen::VectorXcd& v) const;
    Eigen::VectorXcd reduce_populations(const LevelPopulations& p) const;

    const Eigen::MatrixXcd& drift() const { return l0_; }
    const Eigen::MatrixXcd& drive() const { return l1_; }
    Eigen::MatrixXcd generator(double omega_mhz) const { return l0_ + omega_mhz * l1_; }
    /// exp(L(Omega) t).
    Eigen::MatrixXcd propagator(double omega_mhz, double t) const;

    /// Row r with r.v = gamma_r (rho_e1e1 + rho_e2e2).
    Eigen::RowVectorXcd emission_row() const;
    /// Row picking the population of one level.
    Eigen::RowVectorXcd population_row(std::size_t level) const;

    /// Instantaneous excitation of the addressed ground populations (Kraus form).
    Eigen::VectorXcd apply_delta_pulse(const Eigen::VectorXcd& v, double P_e, Transition target) const;

    using Drive = std::function<double(double)>;

    /// Fixed-step RK4 of v from t0 to t1 with steps <= h_max. Adds the emitted photons to *emitted.
    Eigen::VectorXcd integrate(Eigen::VectorXcd v, const Drive& omega, double t0, double t1,
                               double h_max, double* emitted = nullptr) const;
    /// Same scheme applied to every column of U.
    Eigen::MatrixXcd integrate(Eigen::MatrixXcd U, const Drive& omega, double t0, double t1,
                               double h_max) const;

    /**
     * @brief Row q with q.v(t0) = terminal.v(t1) + emission integrated over [gate_open, gate_close] within [t0, t1].
     *
     * Backward RK4 of the adjoint equation, so a linear readout of a driven
     * segment costs one vector integration.
     */
    Eigen::RowVectorXcd adjoint_emission(const Eigen::RowVectorXcd& terminal, const Drive& omega,
                                         double t0, double t1, double gate_open, double gate_close,
                                         double h_max) const;

    const SixLevelParams& params() const { return params_; }
    Model model() const { return model_; }
    double delta_L() const { return delta_L_; }

private:
    SixLevelParams params_;
    double delta_L_;
    Model model_;
    std::vector<std::pair<int, int>> entries_;
    int index_[6][6];
    Eigen::MatrixXcd l0_, l1_;
};

struct RabiOptions {
    Transition target = Transition::A1;
    double fwhm_ns = 1.5;
    /// Detection opens this long after the pulse peak.
    double gate_delay_ns = 3.0;
    /// Integration window after the gate; <= 0 selects 5 max(tau_e).
    double window_ns = 0.0;
    /// RK4 step; <= 0 selects half of max_time_step.
    double dt = 0.0;
};

struct RabiCurve {
    std::vector<double> energies_fj;
    std::vector<double> sqrt_energies;
    std::vector<double> signal;
};

/// Gated photons emitted after a resonant Gaussian pulse from the depolarized ground state.
double gated_fluorescence(const SixLevelParams& params, double peak_mhz, const RabiOptions& options = {});

/// Peak Rabi frequency field_scale * sqrt(E_p) for each pulse energy.
RabiCurve simulate_rabi(const SixLevelParams& params, const std::vector<double>& energies_fj,
                        double field_scale, const RabiOptions& options = {});

/// MHz per sqrt(fJ) that gives the requested pulse area at energy_fj.
double field_scale_for_area(double area_rad, double energy_fj, double fwhm_ns = 1.5);

/// Energy of the first fluorescence maximum, by golden-section search inside [e_lo, e_hi].
double first_rabi_maximum(const SixLevelParams& params, double field_scale, double e_lo,
                          double e_hi, const RabiOptions& options = {});

enum class QuasiCWMode {
    /// Omega(t) = A |sin(2 pi f t)| integrated through every period.
    Literal,
    /// Constant Omega = A / sqrt(2), the same mean intensity.
    AveragePower,
};

struct DepletionOptions {
    QuasiCWMode mode = QuasiCWMode::Literal;
    double modulation_mhz = 10.0;
    /// Dark wait before readout; <= 0 selects 10 tau_ms. Must be >= 5 tau_ms.
    double wait_ns = 0.0;
    double readout_fwhm_ns = 1.5;
    double readout_area = 3.141592653589793;
    double readout_gate_ns = 3.0;
    /// <= 0 selects 5 max(tau_e).
    double window_ns = 0.0;
    double dt = 0.0;
    Model model = Model::SixLevel;
};

struct DepletionCurve {
    std::vector<double> tau_ns;
    /// Readout fluorescence normalized to the tau = 0 readout.
    std::vector<double> signal;
    /// Population of the opposite ground state over total ground population before readout.
    std::vector<double> fidelity;
    double reference = 0.0;
};

/// Resonant quasi-cw pumping of the target transition for each tau, then wait and a pi readout.
DepletionCurve simulate_depletion(const SixLevelParams& params, double drive_amplitude_mhz,
                                  const std::vector<double>& taus, Transition target,
                                  const DepletionOptions& options = {});

/// Several drive amplitudes sharing one readout computation.
std::vector<DepletionCurve> simulate_depletion_batch(const SixLevelParams& params,
                                                     const std::vector<double>& drive_amplitudes_mhz,
                                                     const std::vector<double>& taus, Transition target,
                                                     const DepletionOptions& options = {});

/// Time for the signal excess over its last value to fall to 1/e, linearly interpolated.
double depletion_time(const DepletionCurve& curve);

struct EquivalenceOptions {
    /// Samples spread over every wait segment.
    int samples_per_wait = 50;
    /// Steps between samples inside driven segments.
    int steps_per_sample = 20;
    double dt = 0.0;
};

/**
 * @brief Max |n_g(six) - n_g(five)| over the protocol for both ground levels.
 *
 * The five-level side is ratedyn for incoherent protocols and the merged
 * master equation when a coherent drive is present.
 */
double six_vs_five_equivalence(const SixLevelParams& params, const PulseSequence& protocol,
                               const EquivalenceOptions& options = {});

}  // namespace siv1::lindblad
