// Reduced-physics reservoir environment: single-phase slightly-compressible
// pressure diffusion on a 2-D cell grid with injection/extraction wells,
// advanced by implicit backward-Euler substeps.
//
// Units: pressure kPa, permeability mD, viscosity mPa·s (cP), lengths m,
// time years, well rates MMTon/yr (1 MMTon = 1e9 kg), density kg/m³.
// Cell (i, j) maps to flat index j*nx + i.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ccs {

struct GridSpec {
  int nx = 0;
  int ny = 0;
  double dx = 0.0;
  double dy = 0.0;
  double thickness = 0.0;
  double porosity = 0.0;
  double total_compressibility = 0.0;  // 1/kPa
  double viscosity = 0.0;              // mPa·s
  std::vector<double> permeability;    // mD, row-major, size nx*ny

  int cell_count() const { return nx * ny; }
  int index(int i, int j) const { return j * nx + i; }
  double cell_volume() const { return dx * dy * thickness; }
  void validate() const;  // throws std::invalid_argument
};

enum class WellKind { Injector, Extractor };

struct WellSpec {
  std::string id;
  int owner = 0;
  int i = 0;
  int j = 0;
  WellKind kind = WellKind::Injector;
  double rate_min = 0.0;  // MMTon/yr, magnitude
  double rate_max = 0.0;  // MMTon/yr, magnitude
};

struct ProjectArea {
  int owner = 0;
  std::vector<int> cells;      // flat cell indices, sorted unique
  double p_threshold = 0.0;    // kPa
};

struct ReservoirState {
  std::vector<double> pressure;  // kPa, per cell
  int t = 0;                     // completed control steps (years elapsed / dt_step)
};

struct EnvConfig {
  GridSpec grid;
  std::vector<WellSpec> wells;
  std::vector<ProjectArea> areas;
  double p_init = 0.0;        // kPa
  double p_frac = 0.0;        // kPa
  double co2_density = 0.0;   // kg/m³
  int substeps_per_step = 1;
  double dt_step = 1.0;       // years per control step
  double cg_tolerance = 1e-12;

  int n_agents() const;
  void validate() const;  // throws std::invalid_argument
};

// Volume-flux coupling between neighbor cells, in m³/(yr·kPa): harmonic mean
// of the two permeabilities times face area / (distance · viscosity), with the
// mD·kPa·yr unit conversion folded in. Applied as the graph Laplacian
// (L p)[c] = sum_faces T_face (p[c] - p[nbr]); symmetric positive semidefinite.
class TransmissibilityMatrix {
 public:
  TransmissibilityMatrix() = default;
  TransmissibilityMatrix(int nx, int ny, std::vector<double> tx, std::vector<double> ty);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int size() const { return nx_ * ny_; }

  // Coupling between (i,j) and (i+1,j) / (i,j+1).
  double coupling_x(int i, int j) const { return tx_[j * (nx_ - 1) + i]; }
  double coupling_y(int i, int j) const { return ty_[j * nx_ + i]; }
  double row_sum(int cell) const { return diag_[cell]; }

  void apply(std::span<const double> p, std::span<double> out) const;

 private:
  int nx_ = 0, ny_ = 0;
  std::vector<double> tx_;    // (nx-1) * ny
  std::vector<double> ty_;    // nx * (ny-1)
  std::vector<double> diag_;  // row sums
};

// Conversion factor from mD·m²·kPa / (m·cP) to m³/yr.
double transmissibility_unit_factor();

TransmissibilityMatrix build_system(const GridSpec& grid);

double max_region_pressure(const ReservoirState& state, const ProjectArea& area);

// Log-normal permeability field: exp(N(ln(mean_md), sigma_log²)) per cell.
std::vector<double> lognormal_permeability(int nx, int ny, double mean_md,
                                           double sigma_log, std::uint64_t seed);

// CSV exchange: rows of `i,j,perm_mD` resp. `i,j,p_kPa`, one per cell.
std::vector<double> read_permeability_csv(const std::string& path, int nx, int ny);
void write_permeability_csv(const std::string& path, const GridSpec& grid);
void write_pressure_csv(const std::string& path, const GridSpec& grid,
                        const ReservoirState& state);

// Immutable simulator: owns the validated config and the assembled system.
// step() and observe() are pure; one instance may serve concurrent rollouts.
class Reservoir {
 public:
  explicit Reservoir(EnvConfig cfg);

  const EnvConfig& config() const { return cfg_; }
  const TransmissibilityMatrix& system() const { return system_; }

  ReservoirState initial_state() const;

  // Advances one control step (dt_step years, substeps_per_step implicit
  // substeps). rates: one signed MMTon/yr entry per well, in config order.
  // A rate of exactly 0 means a shut-in well; otherwise the magnitude must
  // lie within [rate_min, rate_max] and match the well's sign convention.
  ReservoirState step(const ReservoirState& state, std::span<const double> rates) const;

  // Fixed-length local observation for one agent:
  //   [p at each own well cell / p_frac,
  //    max p over own area / p_frac,
  //    fraction of own-area cells with p > 0.9 * p_threshold,
  //    t / horizon_steps]
  std::vector<double> observe(const ReservoirState& state, int agent,
                              int horizon_steps) const;
  int observation_dim(int agent) const;

  const std::vector<int>& wells_of(int agent) const { return wells_by_agent_[agent]; }
  const ProjectArea& area_of(int agent) const;

 private:
  EnvConfig cfg_;
  TransmissibilityMatrix system_;
  std::vector<double> accumulation_;            // phi*ct*V/dt_sub per cell
  std::vector<std::vector<int>> wells_by_agent_;
  std::vector<int> area_by_agent_;              // agent -> index into cfg_.areas
};

}  // namespace ccs
