#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "dpnls/model.hpp"

namespace dpnls {

using cplx = std::complex<double>;

struct EvolveSample {
  double t = 0.0;
  double energy = 0.0;
  double charge = 0.0;
  double modulation_distance = 0.0;
  double sup_norm = 0.0;
};

/// A real even profile on the periodic grid, with its derivative.
struct GridProfile {
  std::vector<double> phi;
  std::vector<double> phi_prime;
  double omega = 0.0;
};

class SpectralGrid;

/// Periodic field on [-L, L) with n points, x_j = -L + 2 L j / n.
struct FieldState {
  ModelParams params;
  double L = 0.0;
  std::size_t n = 0;
  double t = 0.0;
  double dt = 1e-3;
  std::vector<cplx> values;
  std::vector<EvolveSample> history;
  // test hook: drop the nonlinear substeps
  bool nonlinear = true;
  std::shared_ptr<const SpectralGrid> grid;

  double dx() const { return 2.0 * L / static_cast<double>(n); }
  double x(std::size_t j) const { return -L + dx() * static_cast<double>(j); }
};

/// FFTW plans and wavenumbers for one (L, n).
class SpectralGrid {
 public:
  SpectralGrid(double L, std::size_t n);
  ~SpectralGrid();
  SpectralGrid(const SpectralGrid&) = delete;
  SpectralGrid& operator=(const SpectralGrid&) = delete;

  double L() const { return L_; }
  std::size_t n() const { return n_; }
  const std::vector<double>& k() const { return k_; }

  void forward(std::vector<cplx>& v) const;   // unnormalized
  void backward(std::vector<cplx>& v) const;  // includes 1/n
  std::vector<cplx> derivative(const std::vector<cplx>& v) const;

 private:
  double L_;
  std::size_t n_;
  std::vector<double> k_;
  void* plan_fwd_;
  void* plan_bwd_;
};

std::shared_ptr<const SpectralGrid> make_grid(double L, std::size_t n);

struct GridOptions {
  double L = 0.0;  // 0: 100 characteristic lengths
  std::size_t n = 1u << 14;
  double dt = 1e-3;
};

/// Zero field on the given grid; L must be set explicitly.
FieldState make_state(const ModelParams& params, GridOptions grid);

/// chi_{L/2.5} * phi_omega sampled on the grid (even by construction).
GridProfile sample_profile(const ModelParams& params, double omega,
                           const FieldState& like);

/// phi_0 + lambda_raw psi_R with lambda_raw = lambda ||phi_0||_{H1} /
/// ||psi_R||_{H1}, times chi_{L/2.5}. Throws if psi_R or the tail of phi_0
/// does not fit in the box.
FieldState init_state(const ModelParams& params, double lambda, double R,
                      GridOptions grid = {});

/// Standing-wave data phi_omega + lambda_raw * dphi/domega (central
/// difference), same normalization.
FieldState init_standing_wave(const ModelParams& params, double omega,
                              double lambda, GridOptions grid = {});

void step(FieldState& state);
/// Advances to t_max, appending a sample every `sample_every` steps (and at
/// the start and end). `reference` is used for the modulation distance.
void run(FieldState& state, double t_max, std::size_t sample_every,
         const GridProfile& reference, double stop_above = 0.0);

double energy(const FieldState& state);
double charge(const FieldState& state);
double sup_norm(const FieldState& state);
/// inf over theta of || u - e^{i theta} phi ||_{H1}.
double modulation_distance(const FieldState& state, const GridProfile& ref);
double h1_norm(const FieldState& state, const std::vector<cplx>& v);

/// H1 norm of (-d_xx + |u|^{p-1} - |u|^{q-1} + omega) u, the initial speed
/// of the flow away from a stationary profile.
double stationary_defect_rate(const FieldState& state, double omega);

struct ExitReport {
  double lambda = 0.0;
  bool exited = false;
  std::optional<double> t_exit;
  double initial_distance = 0.0;
  double peak_distance = 0.0;
  double threshold = 0.0;
  std::vector<EvolveSample> history;
};

struct InstabilityReport {
  ModelParams params;
  double R_star = 0.0;
  double omega = 0.0;
  ExitReport plus;
  ExitReport minus;
};

struct ExperimentOptions {
  GridOptions grid;
  double threshold_factor = 10.0;
  std::size_t sample_every = 100;
  bool stop_on_exit = true;
};

/// Both signs of lambda along psi_{R*}, R* from the evolve schedule.
InstabilityReport instability_experiment(const ModelParams& params,
                                         double lambda, double t_max,
                                         ExperimentOptions options = {});
/// Same measurement around e^{i omega t} phi_omega.
InstabilityReport standing_wave_experiment(const ModelParams& params,
                                           double omega, double lambda,
                                           double t_max,
                                           ExperimentOptions options = {});

/// {10, 20, 50} characteristic lengths, kept where 2R <= 0.4 L.
std::vector<double> evolve_r_schedule(const ModelParams& params, double L);

}  // namespace dpnls
