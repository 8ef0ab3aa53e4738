#include "lasso/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace lasso {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr cplx kI{0.0, 1.0};

// Removable-singularity window of the reflection amplitude.
constexpr double kRemovableWindow = 1e-9;
constexpr double kFluxTolerance = 1e-9;

// cos(Phi) - cos(kL) written as a product so that it keeps relative accuracy
// near the points where both cosines agree.
template <class T>
T cos_difference(double Phi, T kL) {
  return -2.0 * std::sin((Phi + kL) / 2.0) * std::sin((Phi - kL) / 2.0);
}

double distance_to_lattice(double x, double period) {
  const double r = std::remainder(x, period);
  return std::abs(r);
}

// kappa / sinh(kappa L), continuous at kappa = 0.
double kappa_over_sinh(double kappa, double L) {
  const double z = kappa * L;
  if (z < 1e-4) return (1.0 - z * z / 6.0) / L;
  return kappa / std::sinh(z);
}

}  // namespace

LassoParams LassoParams::delta(double L, double Phi, double alpha) {
  LassoParams p;
  p.L = L;
  p.Phi = Phi;
  p.alpha = alpha;
  p.validate();
  return p;
}

LassoParams LassoParams::general(double L, double Phi, double alpha, double mu, double omega) {
  LassoParams p;
  p.L = L;
  p.Phi = Phi;
  p.alpha = alpha;
  p.mu = mu;
  p.omega = omega;
  p.validate();
  return p;
}

LassoParams LassoParams::decoupled(double L, double Phi, double mu, double omega) {
  LassoParams p;
  p.L = L;
  p.Phi = Phi;
  p.alpha = 0.0;
  p.mu = mu;
  p.omega = omega;
  p.coupling = Coupling::decoupled;
  p.validate();
  return p;
}

LassoParams LassoParams::from_flux_quanta(double L, double phi, double alpha, double mu,
                                          double omega) {
  return general(L, 2.0 * kPi * phi, alpha, mu, omega);
}

void LassoParams::validate() const {
  if (!(std::isfinite(L) && L > 0.0)) throw InputError("loop length L must be positive and finite");
  if (!std::isfinite(Phi)) throw InputError("flux must be finite");
  if (!std::isfinite(mu) || !std::isfinite(omega))
    throw InputError("coupling parameters mu, omega must be finite");
  if (coupling == Coupling::finite && !std::isfinite(alpha))
    throw InputError("alpha must be finite (use the decoupled coupling for alpha = infinity)");
}

double flux_distance_to_pi_lattice(double Phi) { return distance_to_lattice(Phi, kPi); }

cplx delta_denominator(const LassoParams& p, cplx k) {
  const cplx kL = k * p.L;
  return (p.alpha - kI * k) * std::sin(kL) - 2.0 * k * cos_difference(p.Phi, kL);
}

cplx entire_denominator(const LassoParams& p, cplx k) {
  if (p.is_decoupled()) throw InputError("decoupled junction has no resolvent poles");
  const cplx kL = k * p.L;
  const cplx s = std::sin(kL);
  const cplx c = cos_difference(p.Phi, kL);
  const double w2 = p.omega * p.omega;
  return (1.0 - kI * p.mu * k) * (2.0 * k * c - p.alpha * s) + kI * w2 * k * s;
}

cplx entire_denominator_derivative(const LassoParams& p, cplx k) {
  if (p.is_decoupled()) throw InputError("decoupled junction has no resolvent poles");
  const double L = p.L;
  const cplx kL = k * L;
  const cplx s = std::sin(kL);
  const cplx cs = std::cos(kL);
  const cplx c = cos_difference(p.Phi, kL);
  const double w2 = p.omega * p.omega;
  const cplx inner = 2.0 * k * c - p.alpha * s;
  const cplx inner_d = 2.0 * c + 2.0 * k * L * s - p.alpha * L * cs;
  return -kI * p.mu * inner + (1.0 - kI * p.mu * k) * inner_d + kI * w2 * (s + k * L * cs);
}

namespace {

// Denominator of r multiplied by sin kL (or its limit at removable points).
// For real k and real parameters the numerator is its complex conjugate.
cplx reflection_denominator(const LassoParams& p, double k) {
  const double mu_k = p.mu * k;
  if (p.is_decoupled()) return cplx(1.0, -mu_k);
  const double w2 = p.omega * p.omega;
  const double kL = k * p.L;
  const double s = std::sin(kL);
  const double c = cos_difference(p.Phi, kL);
  if (std::abs(s) < kRemovableWindow && std::abs(c) < kRemovableWindow) {
    // (cos Phi - cos kL) / sin kL -> 0, so the bracket tends to alpha.
    return cplx(1.0, -mu_k) * p.alpha - kI * w2 * k;
  }
  const double X = p.alpha * s - 2.0 * k * c;
  return cplx(1.0, -mu_k) * X - kI * w2 * k * s;
}

void require_on_shell(double k) {
  if (!(std::isfinite(k) && k > 0.0))
    throw InputError("reflection requires a real momentum k > 0");
}

}  // namespace

cplx reflection(const LassoParams& p, double k) {
  require_on_shell(k);
  const cplx den = reflection_denominator(p, k);
  if (den == cplx(0.0, 0.0))
    throw NumericalError("reflection amplitude undefined (vanishing numerator and denominator)");
  return -std::conj(den) / den;
}

std::vector<double> phase_shift(const LassoParams& p, std::span<const double> k_grid) {
  std::vector<double> delta;
  delta.reserve(k_grid.size());
  for (std::size_t i = 0; i < k_grid.size(); ++i) {
    const double k = k_grid[i];
    require_on_shell(k);
    if (i > 0 && !(k > k_grid[i - 1])) throw InputError("phase_shift grid must be strictly ascending");
    // r = -conj(den)/den = exp(i(pi - 2 arg den)), so delta = pi/2 - arg den (mod pi).
    const double raw = kPi / 2.0 - std::arg(reflection_denominator(p, k));
    if (delta.empty()) {
      // Normalise into (0, pi].
      double d = raw - kPi * std::floor(raw / kPi);
      if (d <= 0.0) d += kPi;
      delta.push_back(d);
    } else {
      const double prev = delta.back();
      delta.push_back(raw + kPi * std::round((prev - raw) / kPi));
    }
  }
  return delta;
}

std::vector<BoundState> positive_bound_states(const LassoParams& p, int n_max) {
  if (n_max < 1) throw InputError("n_max must be at least 1");
  if (p.omega == 0.0) throw InputError("omega = 0 decouples the loop; bound states are not classified");
  std::vector<BoundState> states;
  int first = 0;
  int stride = 2;
  if (p.is_decoupled()) {
    first = 1;
    stride = 1;
  } else if (distance_to_lattice(p.Phi, 2.0 * kPi) < kFluxTolerance) {
    first = 2;
  } else if (distance_to_lattice(p.Phi - kPi, 2.0 * kPi) < kFluxTolerance) {
    first = 1;
  } else {
    return states;
  }
  for (int n = first; n <= n_max; n += stride) {
    BoundState b;
    b.kind = BoundState::Kind::embedded;
    b.n = n;
    const double q = n * kPi / p.L;
    b.energy = q * q;
    states.push_back(b);
  }
  return states;
}

double negative_state_residual(const LassoParams& p, double kappa) {
  const double L = p.L;
  double lhs;
  if (kappa * L < 1.0) {
    const double s2 = std::sin(p.Phi / 2.0);
    const double h2 = std::sinh(kappa * L / 2.0);
    lhs = 2.0 * kappa_over_sinh(kappa, L) * (-2.0 * s2 * s2 - 2.0 * h2 * h2);
  } else {
    lhs = 2.0 * kappa * (std::cos(p.Phi) / std::sinh(kappa * L) - 1.0 / std::tanh(kappa * L));
  }
  return (1.0 + p.mu * kappa) * (lhs - p.alpha) - p.omega * p.omega * kappa;
}

int expected_negative_count(const LassoParams& p) {
  if (p.is_decoupled()) return 0;
  const double threshold = 2.0 / p.L * (std::cos(p.Phi) - 1.0);
  const int base = p.mu >= 0.0 ? 0 : 1;
  return p.alpha >= threshold ? base : base + 1;
}

std::vector<BoundState> negative_bound_states(const LassoParams& p) {
  if (p.is_decoupled()) return {};
  if (p.omega == 0.0) throw InputError("omega = 0 decouples the loop; bound states are not classified");

  double kappa_max = std::max(10.0 / p.L, 3.0 * std::abs(p.alpha));
  if (p.mu != 0.0) {
    kappa_max = std::max(kappa_max, 3.0 / std::abs(p.mu));
    kappa_max = std::max(kappa_max, 3.0 * p.omega * p.omega / std::abs(p.mu));
  }
  const double kappa_min = 1e-13 * kappa_max;
  constexpr int kGrid = 4000;

  auto residual = [&](double kappa) { return negative_state_residual(p, kappa); };

  std::vector<double> nodes;
  nodes.reserve(kGrid + 1);
  nodes.push_back(0.0);
  const double ratio = std::log(kappa_max / kappa_min) / (kGrid - 1);
  for (int i = 0; i < kGrid; ++i) nodes.push_back(kappa_min * std::exp(ratio * i));
  nodes.back() = kappa_max;

  std::vector<BoundState> states;
  auto push_root = [&](double kappa) {
    BoundState b;
    b.kind = BoundState::Kind::negative;
    b.kappa = kappa;
    b.energy = -kappa * kappa;
    states.push_back(b);
  };

  // Value at kappa -> 0+ is the analytic limit.
  double f_prev = 2.0 / p.L * (std::cos(p.Phi) - 1.0) - p.alpha;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const double f = residual(nodes[i]);
    if (f == 0.0) {
      push_root(nodes[i]);
    } else if (f_prev != 0.0 && std::signbit(f) != std::signbit(f_prev)) {
      double a = nodes[i - 1];
      double b = nodes[i];
      double fa = f_prev;
      int iter = 0;
      while (b - a > 1e-12 * b) {
        if (++iter > 2000) {
          std::ostringstream msg;
          msg << "negative bound state bisection did not converge in bracket [" << a << ", " << b
              << "] (residuals " << fa << ", " << residual(b) << ")";
          throw NumericalError(msg.str());
        }
        const double m = (a > 0.0 && b / a > 4.0) ? std::sqrt(a * b) : 0.5 * (a + b);
        const double fm = residual(m);
        if (fm == 0.0) {
          a = b = m;
          break;
        }
        if (std::signbit(fm) == std::signbit(fa)) {
          a = m;
          fa = fm;
        } else {
          b = m;
        }
      }
      push_root(0.5 * (a + b));
    }
    f_prev = f;
  }
  return states;
}

KreinCoefficients krein_coefficients(const LassoParams& p, cplx k) {
  KreinCoefficients out;
  if (p.is_decoupled()) {
    out.lambda.setZero();
    out.D = cplx(std::numeric_limits<double>::infinity(), 0.0);
    return out;
  }
  const cplx kL = k * p.L;
  const cplx s = std::sin(kL);
  if (std::abs(s) < 1e-14) {
    throw SingularInputError("Krein coefficients undefined at sin kL = 0");
  }
  const cplx m = 2.0 * k * cos_difference(p.Phi, kL) / s;
  const cplx one_mu = 1.0 - kI * p.mu * k;
  const double w2 = p.omega * p.omega;
  const cplx D = one_mu * (m - p.alpha) + kI * w2 * k;
  const double scale = std::abs(one_mu) * (std::abs(m) + std::abs(p.alpha)) + w2 * std::abs(k);
  if (std::abs(D) <= 1e-14 * std::max(scale, 1e-300)) {
    throw ResolventPoleError("k is a pole of the resolvent (D(k) = 0)");
  }
  out.D = D;
  out.lambda(0, 0) = -one_mu / D;
  out.lambda(0, 1) = -p.omega / D;
  out.lambda(1, 0) = -p.omega / D;
  out.lambda(1, 1) = (p.mu * (m - p.alpha) - w2) / D;
  return out;
}

namespace {

void require_loop_coordinate(const LassoParams& p, double x) {
  if (!(x >= 0.0 && x <= p.L)) throw InputError("loop coordinate must lie in [0, L]");
}

void require_lead_coordinate(double x) {
  if (!(x >= 0.0 && std::isfinite(x))) throw InputError("lead coordinate must be >= 0");
}

cplx loop_dirichlet_kernel(const LassoParams& p, cplx k, double x, double y) {
  const cplx s = std::sin(k * p.L);
  if (std::abs(s) < 1e-14) throw SingularInputError("decoupled loop kernel undefined at sin kL = 0");
  const double lo = std::min(x, y);
  const double hi = std::max(x, y);
  const double A = p.vector_potential();
  return -std::exp(-kI * A * (x - y)) * std::sin(k * lo) * std::sin(k * (hi - p.L)) / (k * s);
}

cplx lead_dirichlet_kernel(cplx k, double x, double y) {
  const double lo = std::min(x, y);
  const double hi = std::max(x, y);
  return std::sin(k * lo) * std::exp(kI * k * hi) / k;
}

}  // namespace

cplx loop_deficiency(const LassoParams& p, cplx k, double x) {
  const cplx s = std::sin(k * p.L);
  if (std::abs(s) < 1e-14) throw SingularInputError("deficiency vector undefined at sin kL = 0");
  const double A = p.vector_potential();
  return std::exp(-kI * A * x) * (std::exp(kI * p.Phi) * std::sin(k * x) - std::sin(k * (x - p.L))) / s;
}

cplx loop_deficiency_transposed(const LassoParams& p, cplx k, double y) {
  const cplx s = std::sin(k * p.L);
  if (std::abs(s) < 1e-14) throw SingularInputError("deficiency vector undefined at sin kL = 0");
  const double A = p.vector_potential();
  return std::exp(kI * A * y) * (std::exp(-kI * p.Phi) * std::sin(k * y) - std::sin(k * (y - p.L))) / s;
}

ResolventKernelValue decoupled_kernel(const LassoParams& p, cplx k, double x, double y) {
  require_loop_coordinate(p, x);
  require_loop_coordinate(p, y);
  if (k == cplx(0.0, 0.0)) throw SingularInputError("kernel undefined at k = 0");
  ResolventKernelValue v;
  v.block(0, 0) = loop_dirichlet_kernel(p, k, x, y);
  v.block(0, 1) = 0.0;
  v.block(1, 0) = 0.0;
  v.block(1, 1) = lead_dirichlet_kernel(k, x, y);
  return v;
}

ResolventKernelValue resolvent_kernel(const LassoParams& p, cplx k, double x, double y) {
  ResolventKernelValue v = decoupled_kernel(p, k, x, y);
  if (p.is_decoupled()) return v;
  const KreinCoefficients kc = krein_coefficients(p, k);
  const cplx wx = loop_deficiency(p, k, x);
  const cplx wy = loop_deficiency_transposed(p, k, y);
  const cplx ex = std::exp(kI * k * x);
  const cplx ey = std::exp(kI * k * y);
  v.block(0, 0) += kc.lambda(0, 0) * wx * wy;
  v.block(0, 1) += kc.lambda(0, 1) * wx * ey;
  v.block(1, 0) += kc.lambda(1, 0) * ex * wy;
  v.block(1, 1) += kc.lambda(1, 1) * ex * ey;
  return v;
}

cplx resolvent_kernel(const LassoParams& p, cplx k, GraphPoint x, GraphPoint y) {
  if (k == cplx(0.0, 0.0)) throw SingularInputError("kernel undefined at k = 0");
  x.branch == Branch::loop ? require_loop_coordinate(p, x.x) : require_lead_coordinate(x.x);
  y.branch == Branch::loop ? require_loop_coordinate(p, y.x) : require_lead_coordinate(y.x);

  cplx value = 0.0;
  if (x.branch == y.branch) {
    value = x.branch == Branch::loop ? loop_dirichlet_kernel(p, k, x.x, y.x)
                                     : lead_dirichlet_kernel(k, x.x, y.x);
  }
  if (p.is_decoupled()) return value;

  const KreinCoefficients kc = krein_coefficients(p, k);
  const int row = x.branch == Branch::loop ? 0 : 1;
  const int col = y.branch == Branch::loop ? 0 : 1;
  const cplx fx = row == 0 ? loop_deficiency(p, k, x.x) : std::exp(kI * k * x.x);
  const cplx fy = col == 0 ? loop_deficiency_transposed(p, k, y.x) : std::exp(kI * k * y.x);
  return value + kc.lambda(row, col) * fx * fy;
}

}  // namespace lasso
