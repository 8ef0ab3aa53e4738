#pragma once

#include <string>
#include <vector>

#include "lasso/core.hpp"

namespace lasso {

/// Resolvent pole at k = kappa - i eta.
struct Pole {
  enum class Kind { resonance, embedded };
  cplx k;
  Kind kind = Kind::resonance;
  double residual = 0.0;  ///< |g(k)| at convergence, g = entire_denominator / k
};

/// Pole root function g(k) = entire_denominator(p, k) / k.
cplx pole_function(const LassoParams& p, cplx k);
cplx pole_function_derivative(const LassoParams& p, cplx k);

/// Classifies k as embedded (|Im k| < 1e-9 and Phi within 1e-9 of a multiple of pi) or resonance.
Pole::Kind classify_pole(const LassoParams& p, cplx k);

/// Closed-form poles for the ideal delta coupling (alpha = 0) with Re k in
/// [kappa_min, kappa_max]. Near-integer flux (cos^2 Phi >= 3/4) gives pairs on
/// the verticals Re k = pi n / L; otherwise poles sit on Im k = -ln 3 / (2L).
std::vector<Pole> poles_alpha_zero(const LassoParams& p, double kappa_min, double kappa_max);

/// Closed-form poles for alpha = mu = 0 and arbitrary omega: roots w of
/// (1 - omega^2/2) w^2 - 2 cos(Phi) w + (1 + omega^2/2) = 0 with k L = -i ln w + 2 pi m.
std::vector<Pole> poles_ideal_family(const LassoParams& p, double kappa_min, double kappa_max);

/// Newton iteration on g from k_guess. Throws NumericalError on divergence
/// or when the iteration lands in the upper half-plane.
Pole find_pole(const LassoParams& p, cplx k_guess, int max_iterations = 200);

/// Poles with Re k in [kappa_min, kappa_max], sorted by Re k then Im k.
/// alpha = mu = 0 uses the closed forms; otherwise Newton is seeded on a grid
/// with spacing pi / (4L) in Re k and several depths, and converged roots are
/// merged. The scan is a heuristic for general couplings: deep poles
/// (Im k < -eta_max) are not searched for.
std::vector<Pole> find_poles(const LassoParams& p, double kappa_min, double kappa_max, double eta_max = 0.0);

enum class SweepParam { flux, alpha };

const char* sweep_param_name(SweepParam s);

struct SweepSpec {
  SweepParam param = SweepParam::flux;
  double from = 0.0;
  double to = 1.0;
  int steps = 100;             ///< nominal number of parameter intervals
  double max_k_step = 0.0;     ///< largest accepted |dk| per step; 0 selects 0.1 / L
  int max_branches = 32;
};

struct TrajectorySample {
  double param = 0.0;
  Pole pole;
};

struct CrossingEvent {
  double param = 0.0;
  cplx k;
};

struct Trajectory {
  SweepParam param = SweepParam::flux;
  int branch_id = 0;
  int parent_id = -1;  ///< branch this one emerged from at a crossing, -1 for the seed
  std::vector<TrajectorySample> samples;
  std::vector<CrossingEvent> crossings;
};

/// Predictor-corrector continuation of a pole from sweep.from to sweep.to.
/// Where two poles collide the crossing is located, recorded, and every
/// emerging branch is traced; the first entry is the seed's branch.
std::vector<Trajectory> trace_trajectory(const LassoParams& p, const SweepSpec& sweep, const Pole& seed);

/// Several seeds traced together; crossings shared between them are resolved once.
std::vector<Trajectory> trace_trajectories(const LassoParams& p, const SweepSpec& sweep,
                                           const std::vector<Pole>& seeds);

}  // namespace lasso
