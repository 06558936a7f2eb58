// Conjugate-gradient solver for symmetric positive definite operators.
// The operator is supplied as a callable y = A*x so callers can use
// matrix-free stencils without assembling anything.

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace ccs {

struct CgOutcome {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Solves A x = b to ||b - A x|| <= tol * ||b||, starting from the value
// already in x (warm start). apply(in, out) must compute out = A * in.
template <class ApplyFn>
CgOutcome conjugate_gradient(ApplyFn&& apply, std::span<const double> b,
                             std::span<double> x, double tol, int max_iterations) {
  const std::size_t n = b.size();
  std::vector<double> r(n), p(n), ap(n);

  apply(std::span<const double>(x.data(), n), std::span<double>(r.data(), n));
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];

  const double b_norm = std::sqrt(dot(b, b));
  const double stop = (b_norm > 0.0) ? tol * b_norm : tol;

  double rs_old = dot(r, r);
  CgOutcome out;
  out.relative_residual = (b_norm > 0.0) ? std::sqrt(rs_old) / b_norm : std::sqrt(rs_old);
  if (std::sqrt(rs_old) <= stop) {
    out.converged = true;
    return out;
  }

  p.assign(r.begin(), r.end());
  for (int it = 1; it <= max_iterations; ++it) {
    apply(std::span<const double>(p.data(), n), std::span<double>(ap.data(), n));
    const double p_ap = dot(p, ap);
    const double alpha = rs_old / p_ap;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    const double rs_new = dot(r, r);
    out.iterations = it;
    if (std::sqrt(rs_new) <= stop) {
      out.converged = true;
      out.relative_residual = (b_norm > 0.0) ? std::sqrt(rs_new) / b_norm : std::sqrt(rs_new);
      return out;
    }
    const double beta = rs_new / rs_old;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    rs_old = rs_new;
  }
  out.relative_residual = (b_norm > 0.0) ? std::sqrt(rs_old) / b_norm : std::sqrt(rs_old);
  return out;
}

}  // namespace ccs
