#include "ccs/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ccs/sparse.hpp"

namespace ccs {

namespace {

constexpr double kMilliDarcyM2 = 9.869233e-16;
constexpr double kSecondsPerYear = 365.25 * 86400.0;
constexpr double kKgPerMMTon = 1e9;

void fail(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

double transmissibility_unit_factor() {
  // mD -> m², kPa -> Pa, cP -> Pa·s, then m³/s -> m³/yr.
  return kMilliDarcyM2 * 1e3 / 1e-3 * kSecondsPerYear;
}

void GridSpec::validate() const {
  if (nx < 2 || ny < 2) fail("grid: nx and ny must both be >= 2");
  if (!(dx > 0.0) || !(dy > 0.0) || !(thickness > 0.0))
    fail("grid: dx, dy, thickness must be positive");
  if (!(porosity > 0.0) || !(porosity < 1.0)) fail("grid: porosity must be in (0,1)");
  if (!(total_compressibility > 0.0)) fail("grid: total_compressibility must be positive");
  if (!(viscosity > 0.0)) fail("grid: viscosity must be positive");
  if (static_cast<int>(permeability.size()) != cell_count())
    fail("grid: permeability must have nx*ny entries");
  for (double k : permeability)
    if (!(k > 0.0) || !std::isfinite(k)) fail("grid: all permeabilities must be positive");
}

int EnvConfig::n_agents() const {
  int n = 0;
  for (const auto& w : wells) n = std::max(n, w.owner + 1);
  for (const auto& a : areas) n = std::max(n, a.owner + 1);
  return n;
}

void EnvConfig::validate() const {
  grid.validate();
  if (wells.empty()) fail("env: at least one well required");
  for (const auto& w : wells) {
    if (w.i < 0 || w.i >= grid.nx || w.j < 0 || w.j >= grid.ny)
      fail("env: well '" + w.id + "' cell outside grid");
    if (w.owner < 0) fail("env: well '" + w.id + "' owner must be >= 0");
    if (!(w.rate_min >= 0.0) || !(w.rate_min <= w.rate_max))
      fail("env: well '" + w.id + "' needs 0 <= rate_min <= rate_max");
  }
  std::vector<char> seen(grid.cell_count(), 0);
  for (const auto& a : areas) {
    if (a.cells.empty()) fail("env: project area must be non-empty");
    if (!(a.p_threshold < p_frac)) fail("env: area p_threshold must be < p_frac");
    for (int c : a.cells) {
      if (c < 0 || c >= grid.cell_count()) fail("env: area cell outside grid");
      if (seen[c]) fail("env: project areas of distinct owners must be disjoint");
      seen[c] = 1;
    }
  }
  if (!(p_init > 0.0)) fail("env: p_init must be positive");
  for (const auto& a : areas)
    if (!(p_init < a.p_threshold)) fail("env: p_init must be below every p_threshold");
  if (!(p_frac > 0.0)) fail("env: p_frac must be positive");
  if (!(co2_density > 0.0)) fail("env: co2_density must be positive");
  if (substeps_per_step < 1) fail("env: substeps_per_step must be >= 1");
  if (!(dt_step > 0.0)) fail("env: dt_step must be positive");
  if (!(cg_tolerance > 0.0) || cg_tolerance > 1e-10)
    fail("env: cg_tolerance must be in (0, 1e-10]");
}

TransmissibilityMatrix::TransmissibilityMatrix(int nx, int ny, std::vector<double> tx,
                                               std::vector<double> ty)
    : nx_(nx), ny_(ny), tx_(std::move(tx)), ty_(std::move(ty)), diag_(nx * ny, 0.0) {
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i + 1 < nx_; ++i) {
      const double t = coupling_x(i, j);
      diag_[j * nx_ + i] += t;
      diag_[j * nx_ + i + 1] += t;
    }
  for (int j = 0; j + 1 < ny_; ++j)
    for (int i = 0; i < nx_; ++i) {
      const double t = coupling_y(i, j);
      diag_[j * nx_ + i] += t;
      diag_[(j + 1) * nx_ + i] += t;
    }
}

void TransmissibilityMatrix::apply(std::span<const double> p, std::span<double> out) const {
  for (int c = 0; c < size(); ++c) out[c] = diag_[c] * p[c];
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i + 1 < nx_; ++i) {
      const double t = coupling_x(i, j);
      const int a = j * nx_ + i;
      out[a] -= t * p[a + 1];
      out[a + 1] -= t * p[a];
    }
  for (int j = 0; j + 1 < ny_; ++j)
    for (int i = 0; i < nx_; ++i) {
      const double t = coupling_y(i, j);
      const int a = j * nx_ + i;
      out[a] -= t * p[a + nx_];
      out[a + nx_] -= t * p[a];
    }
}

TransmissibilityMatrix build_system(const GridSpec& grid) {
  grid.validate();
  const double unit = transmissibility_unit_factor();
  std::vector<double> tx((grid.nx - 1) * grid.ny);
  std::vector<double> ty(grid.nx * (grid.ny - 1));
  const auto harmonic = [](double a, double b) { return 2.0 * a * b / (a + b); };
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i + 1 < grid.nx; ++i) {
      const double k = harmonic(grid.permeability[grid.index(i, j)],
                                grid.permeability[grid.index(i + 1, j)]);
      tx[j * (grid.nx - 1) + i] =
          unit * k * (grid.dy * grid.thickness) / (grid.dx * grid.viscosity);
    }
  for (int j = 0; j + 1 < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      const double k = harmonic(grid.permeability[grid.index(i, j)],
                                grid.permeability[grid.index(i, j + 1)]);
      ty[j * grid.nx + i] =
          unit * k * (grid.dx * grid.thickness) / (grid.dy * grid.viscosity);
    }
  return TransmissibilityMatrix(grid.nx, grid.ny, std::move(tx), std::move(ty));
}

double max_region_pressure(const ReservoirState& state, const ProjectArea& area) {
  if (area.cells.empty()) fail("max_region_pressure: empty project area");
  double m = -std::numeric_limits<double>::infinity();
  for (int c : area.cells) m = std::max(m, state.pressure[c]);
  return m;
}

std::vector<double> lognormal_permeability(int nx, int ny, double mean_md,
                                           double sigma_log, std::uint64_t seed) {
  if (nx < 1 || ny < 1 || !(mean_md > 0.0) || sigma_log < 0.0)
    fail("lognormal_permeability: invalid parameters");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> k(static_cast<std::size_t>(nx) * ny);
  const double mu = std::log(mean_md);
  for (auto& v : k) v = std::exp(mu + sigma_log * gauss(rng));
  return k;
}

std::vector<double> read_permeability_csv(const std::string& path, int nx, int ny) {
  std::ifstream in(path);
  if (!in) fail("read_permeability_csv: cannot open " + path);
  std::vector<double> k(static_cast<std::size_t>(nx) * ny,
                        std::numeric_limits<double>::quiet_NaN());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (std::isalpha(static_cast<unsigned char>(line[0]))) continue;  // header row
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    int i, j;
    double v;
    if (!(row >> i >> j >> v)) fail("read_permeability_csv: malformed row: " + line);
    if (i < 0 || i >= nx || j < 0 || j >= ny)
      fail("read_permeability_csv: cell out of range: " + line);
    k[static_cast<std::size_t>(j) * nx + i] = v;
  }
  for (double v : k)
    if (std::isnan(v)) fail("read_permeability_csv: missing cells in " + path);
  return k;
}

namespace {
std::string format_cell_csv(int i, int j, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%d,%d,%.17g\n", i, j, v);
  return buf;
}
}  // namespace

void write_permeability_csv(const std::string& path, const GridSpec& grid) {
  std::ofstream out(path);
  if (!out) fail("write_permeability_csv: cannot open " + path);
  out << "i,j,perm_mD\n";
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i)
      out << format_cell_csv(i, j, grid.permeability[grid.index(i, j)]);
}

void write_pressure_csv(const std::string& path, const GridSpec& grid,
                        const ReservoirState& state) {
  std::ofstream out(path);
  if (!out) fail("write_pressure_csv: cannot open " + path);
  out << "i,j,p_kPa\n";
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i)
      out << format_cell_csv(i, j, state.pressure[grid.index(i, j)]);
}

Reservoir::Reservoir(EnvConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  system_ = build_system(cfg_.grid);

  const double dt_sub = cfg_.dt_step / cfg_.substeps_per_step;
  const double acc = cfg_.grid.porosity * cfg_.grid.total_compressibility *
                     cfg_.grid.cell_volume() / dt_sub;
  accumulation_.assign(cfg_.grid.cell_count(), acc);

  const int n = cfg_.n_agents();
  wells_by_agent_.resize(n);
  for (int w = 0; w < static_cast<int>(cfg_.wells.size()); ++w)
    wells_by_agent_[cfg_.wells[w].owner].push_back(w);
  area_by_agent_.assign(n, -1);
  for (int a = 0; a < static_cast<int>(cfg_.areas.size()); ++a)
    area_by_agent_[cfg_.areas[a].owner] = a;
}

const ProjectArea& Reservoir::area_of(int agent) const {
  const int idx = area_by_agent_.at(agent);
  if (idx < 0) throw std::invalid_argument("Reservoir: agent has no project area");
  return cfg_.areas[idx];
}

ReservoirState Reservoir::initial_state() const {
  ReservoirState s;
  s.pressure.assign(cfg_.grid.cell_count(), cfg_.p_init);
  s.t = 0;
  return s;
}

ReservoirState Reservoir::step(const ReservoirState& state,
                               std::span<const double> rates) const {
  if (rates.size() != cfg_.wells.size())
    throw std::invalid_argument("Reservoir::step: one rate per well required");
  for (std::size_t w = 0; w < rates.size(); ++w) {
    const auto& well = cfg_.wells[w];
    const double r = rates[w];
    if (!std::isfinite(r)) throw std::invalid_argument("Reservoir::step: non-finite rate");
    if (r == 0.0) continue;  // shut-in
    if (well.kind == WellKind::Injector && r < 0.0)
      throw std::invalid_argument("Reservoir::step: injector '" + well.id +
                                  "' requires rate >= 0");
    if (well.kind == WellKind::Extractor && r > 0.0)
      throw std::invalid_argument("Reservoir::step: extractor '" + well.id +
                                  "' requires rate <= 0");
    const double mag = std::abs(r);
    if (mag < well.rate_min || mag > well.rate_max)
      throw std::invalid_argument("Reservoir::step: rate for well '" + well.id +
                                  "' outside [rate_min, rate_max]");
  }

  const int n = cfg_.grid.cell_count();
  // Volumetric source per cell, m³/yr.
  std::vector<double> q_vol(n, 0.0);
  for (std::size_t w = 0; w < rates.size(); ++w) {
    const auto& well = cfg_.wells[w];
    q_vol[cfg_.grid.index(well.i, well.j)] +=
        rates[w] * kKgPerMMTon / cfg_.co2_density;
  }

  ReservoirState next;
  next.pressure = state.pressure;
  next.t = state.t + 1;

  std::vector<double> rhs(n);
  const auto apply = [this](std::span<const double> in, std::span<double> out) {
    system_.apply(in, out);
    for (int c = 0; c < static_cast<int>(out.size()); ++c)
      out[c] += accumulation_[c] * in[c];
  };
  const int max_iter = 10 * n;
  for (int s = 0; s < cfg_.substeps_per_step; ++s) {
    for (int c = 0; c < n; ++c) rhs[c] = accumulation_[c] * next.pressure[c] + q_vol[c];
    // Warm start from the previous substep's solution.
    const CgOutcome cg = conjugate_gradient(apply, rhs, next.pressure,
                                            cfg_.cg_tolerance, max_iter);
    if (!cg.converged)
      throw std::runtime_error("Reservoir::step: CG failed to converge within " +
                               std::to_string(max_iter) + " iterations (residual " +
                               std::to_string(cg.relative_residual) + ")");
  }
  for (double p : next.pressure)
    if (!std::isfinite(p) || p <= 0.0)
      throw std::runtime_error("Reservoir::step: pressure left the valid range");
  return next;
}

int Reservoir::observation_dim(int agent) const {
  return static_cast<int>(wells_by_agent_.at(agent).size()) + 3;
}

std::vector<double> Reservoir::observe(const ReservoirState& state, int agent,
                                       int horizon_steps) const {
  const auto& own_wells = wells_by_agent_.at(agent);
  if (own_wells.empty())
    throw std::invalid_argument("Reservoir::observe: agent has no wells");
  const ProjectArea& area = area_of(agent);

  std::vector<double> obs;
  obs.reserve(observation_dim(agent));
  for (int w : own_wells) {
    const auto& well = cfg_.wells[w];
    obs.push_back(state.pressure[cfg_.grid.index(well.i, well.j)] / cfg_.p_frac);
  }
  obs.push_back(max_region_pressure(state, area) / cfg_.p_frac);
  int above = 0;
  for (int c : area.cells)
    if (state.pressure[c] > 0.9 * area.p_threshold) ++above;
  obs.push_back(static_cast<double>(above) / static_cast<double>(area.cells.size()));
  obs.push_back(static_cast<double>(state.t) / static_cast<double>(horizon_steps));
  return obs;
}

}  // namespace ccs
