#pragma once

#include <complex>
#include <vector>

#include "lasso/core.hpp"

namespace lasso {

/// exp-integral E(w) = int_0^L e^{iwx} dx, accurate for small |w|.
cplx exp_integral(cplx w, double L);

/// Loop-supported state stored in gauge-stripped form g(x) = e^{iAx} u(x),
/// x in [0, L]. The physical wavefunction is u(x) = e^{-iAx} g(x), so a state
/// built here is independent of the flux until it is paired with parameters.
///
/// Two representations: a finite exponential sum g(x) = sum_j c_j e^{i q_j x}
/// (closed-form overlaps), or samples on a uniform grid including both
/// endpoints (trapezoid rule).
class LoopState {
 public:
  LoopState() = default;

  static LoopState exponential_sum(double L, std::vector<cplx> coeffs, std::vector<double> freqs);
  /// g(x) = e^{2 pi i n x / L} / sqrt(L), i.e. u(x) = e^{-ix(A - 2 pi n / L)} / sqrt(L).
  static LoopState winding(double L, int n);
  /// Loop eigenfunction index n: g(x) = sqrt(2/L) sin(n pi x / L).
  static LoopState sine_mode(double L, int n);
  /// Samples g(x_i), x_i = i L / (N - 1), N >= 3.
  static LoopState sampled(double L, std::vector<cplx> samples);

  double length() const { return L_; }
  bool is_sampled() const { return !samples_.empty(); }
  const std::vector<cplx>& coefficients() const { return coeffs_; }
  const std::vector<double>& frequencies() const { return freqs_; }
  const std::vector<cplx>& samples() const { return samples_; }

  /// Gauge-stripped value g(x).
  cplx value(double x) const;
  /// Physical loop wavefunction u(x) = e^{-iAx} g(x).
  cplx wavefunction(const LassoParams& p, double x) const;

  /// int_0^L conj(g(x)) e^{iwx} dx.
  cplx overlap_exp(cplx w) const;
  /// <this, other> = int conj(g) g_other.
  cplx inner(const LoopState& other) const;
  double norm2() const;
  LoopState normalized() const;

  LoopState scaled(cplx s) const;
  LoopState plus(const LoopState& other) const;
  /// g(x) -> g(L - x).
  LoopState reflected() const;
  /// Largest |q| of an exponential sum, or the grid Nyquist wavenumber.
  double max_wavenumber() const;

  /// Exponential sum evaluated on a uniform grid.
  LoopState to_sampled(int n) const;

 private:
  double L_ = 1.0;
  std::vector<cplx> coeffs_;
  std::vector<double> freqs_;
  std::vector<cplx> samples_;
};

}  // namespace lasso
