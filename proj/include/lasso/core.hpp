#pragma once

// Closed-form quantities for a charged particle on a magnetic lasso graph:
// a loop of perimeter L threaded by flux Phi with a halfline lead attached at
// one vertex. Units: hbar = 2m = e = c = 1, energy E = k^2.

#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lasso/errors.hpp"

namespace lasso {

using cplx = std::complex<double>;

enum class Coupling { finite, decoupled };

/// Lasso model parameters.
///
/// The junction condition (loop value U = u(0) = u(L), loop derivative jump
/// U' = u'(0) - u'(L), lead value F = f(0), lead derivative F' = f'(0)) is
///
///     F  = omega U + mu F'
///     U' = alpha U - omega F'
///
/// which is the self-adjoint member of the three-parameter family and reduces
/// to the delta coupling U = F, U' + F' = alpha U for mu = 0, omega = 1.
struct LassoParams {
  double L = 1.0;
  double Phi = 0.0;
  double alpha = 0.0;
  double mu = 0.0;
  double omega = 1.0;
  Coupling coupling = Coupling::finite;

  static LassoParams delta(double L, double Phi, double alpha);
  static LassoParams general(double L, double Phi, double alpha, double mu, double omega);
  /// alpha = infinity: the lead is disconnected and the loop sees Dirichlet at the vertex.
  static LassoParams decoupled(double L, double Phi, double mu = 0.0, double omega = 1.0);
  /// Flux given in flux quanta phi = Phi / 2pi.
  static LassoParams from_flux_quanta(double L, double phi, double alpha, double mu = 0.0,
                                      double omega = 1.0);

  /// Throws InputError unless L > 0 and every parameter is finite.
  void validate() const;

  bool is_delta() const { return mu == 0.0 && omega == 1.0; }
  bool is_decoupled() const { return coupling == Coupling::decoupled; }

  double vector_potential() const { return Phi / L; }
  double radius() const { return L / (2.0 * std::numbers::pi); }
  double flux_quanta() const { return Phi / (2.0 * std::numbers::pi); }
  /// Field strength B = 2A/R.
  double field() const { return 2.0 * vector_potential() / radius(); }
};

/// Distance of Phi from the nearest multiple of pi.
double flux_distance_to_pi_lattice(double Phi);

struct BoundState {
  enum class Kind { embedded, negative };
  Kind kind = Kind::embedded;
  double energy = 0.0;
  int n = 0;           ///< loop eigenfunction index (embedded only)
  double kappa = 0.0;  ///< E = -kappa^2 (negative only)
};

/// Delta-coupling denominator Delta(k) = (alpha - ik) sin kL - 2k (cos Phi - cos kL).
cplx delta_denominator(const LassoParams& p, cplx k);

/// Entire function D(k) sin kL, D being the Krein denominator. For the delta
/// coupling it equals -Delta(k). Zeros off k = 0 are the resolvent poles.
cplx entire_denominator(const LassoParams& p, cplx k);
/// d/dk of entire_denominator.
cplx entire_denominator_derivative(const LassoParams& p, cplx k);

/// On-shell reflection amplitude for real k > 0; |r| = 1.
cplx reflection(const LassoParams& p, double k);

/// Unwrapped phase shift on an ascending positive grid, exp(2i delta) = r.
/// The first node is normalised into (0, pi].
std::vector<double> phase_shift(const LassoParams& p, std::span<const double> k_grid);

/// Embedded eigenvalues (n pi / L)^2 with n <= n_max. Non-empty only when
/// Phi is a multiple of pi (even n for Phi = 0 mod 2pi, odd n for Phi = pi mod 2pi).
std::vector<BoundState> positive_bound_states(const LassoParams& p, int n_max);

/// Negative eigenvalues -kappa^2, ascending in kappa.
std::vector<BoundState> negative_bound_states(const LassoParams& p);

/// Number of negative eigenvalues predicted from the threshold
/// alpha_c = (2/L)(cos Phi - 1) and the sign of mu.
int expected_negative_count(const LassoParams& p);

/// Residual of the negative bound-state condition multiplied through by
/// (1 + mu kappa), continuous in kappa > 0.
double negative_state_residual(const LassoParams& p, double kappa);

struct KreinCoefficients {
  Eigen::Matrix2cd lambda;
  cplx D;
};

/// Krein coefficients lambda_{jl} and denominator D at momentum k.
KreinCoefficients krein_coefficients(const LassoParams& p, cplx k);

enum class Branch { loop, lead };

struct GraphPoint {
  Branch branch = Branch::loop;
  double x = 0.0;
};

/// Resolvent kernel (H - k^2)^{-1}(x, y) as a 2x2 block indexed by
/// (loop|lead) x (loop|lead); row entries use x, column entries use y.
struct ResolventKernelValue {
  Eigen::Matrix2cd block;

  cplx loop_loop() const { return block(0, 0); }
  cplx loop_lead() const { return block(0, 1); }
  cplx lead_loop() const { return block(1, 0); }
  cplx lead_lead() const { return block(1, 1); }
};

/// Decoupled (Dirichlet) kernel; both x and y must lie in [0, L].
ResolventKernelValue decoupled_kernel(const LassoParams& p, cplx k, double x, double y);

/// Full kernel; both x and y must lie in [0, L] because all four blocks are filled.
ResolventKernelValue resolvent_kernel(const LassoParams& p, cplx k, double x, double y);

/// Single kernel entry between two tagged points of the graph.
cplx resolvent_kernel(const LassoParams& p, cplx k, GraphPoint x, GraphPoint y);

/// Loop deficiency solution e^{-iAx}(e^{i Phi} sin kx - sin k(x - L)) / sin kL
/// (value 1 at both loop ends), used in the row slot of the Krein term.
cplx loop_deficiency(const LassoParams& p, cplx k, double x);

/// Its transpose partner e^{iAy}(e^{-i Phi} sin ky - sin k(y - L)) / sin kL.
cplx loop_deficiency_transposed(const LassoParams& p, cplx k, double y);

}  // namespace lasso
