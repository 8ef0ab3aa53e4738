#pragma once

#include <optional>
#include <vector>

#include "lasso/core.hpp"
#include "lasso/loop_state.hpp"

namespace lasso {

struct BoundProjection {
  BoundState state;
  cplx c;  ///< <phi_p, psi>, phi_p normalized over loop and lead
};

/// Projections of a loop state onto the bound states of the lasso. Only
/// nonzero projections are returned. Embedded states are scanned up to n_max
/// (0 picks a bound from the state's wavenumber content).
std::vector<BoundProjection> project_bound(const LassoParams& p, const LoopState& psi, int n_max = 0);

/// Absolutely continuous spectral density of psi per unit momentum, f(k) = rho(k^2) 2k,
/// obtained from the imaginary part of the resolvent form on the real axis.
double spectral_density(const LassoParams& p, const LoopState& psi, double k);

/// int_0^L conj(g(x)) (e^{i Phi} sin kx - sin k(x - L)) dx, the overlap of the
/// gauge-stripped state with the loop deficiency solution (times sin kL).
cplx deficiency_overlap(const LassoParams& p, const LoopState& psi, double k);

struct DecayOptions {
  double k_mass = 0.0;          ///< momentum cutoff of the mass integral before extrapolation; 0 = automatic
  double abs_tol = 1e-12;       ///< adaptive quadrature tolerance on each mass segment
  std::size_t node_budget = 200000;  ///< quadrature nodes allowed for the time integrals
  int density_samples = 256;
};

enum class Asymptotics { decays_to_zero, constant_limit, periodic, quasiperiodic };

const char* asymptotics_name(Asymptotics a);

struct DecayProfile {
  std::vector<BoundProjection> bound;
  double norm2 = 0.0;              ///< ||psi||^2
  double bound_mass = 0.0;         ///< sum |c_p|^2 including the embedded tail
  double embedded_tail_mass = 0.0; ///< embedded weight above the scanned n_max
  double ac_mass = 0.0;            ///< int f(k) dk including the extrapolated tail
  double ac_tail_mass = 0.0;       ///< extrapolated power-law remainder beyond the last integrated octave
  double completeness = 0.0;       ///< (bound_mass + ac_mass) / norm2
  double k_mass = 0.0;
  double k_time = 0.0;             ///< momentum cutoff of the time integrals
  double t_ceiling = 0.0;          ///< largest admissible time for this state
  std::vector<double> density_k;
  std::vector<double> density;     ///< f(k) at density_k
  std::vector<double> times;
  std::vector<cplx> amplitude;     ///< <psi, U_t psi> over the integrated spectral mass (= ||psi||^2 up to completeness)
  std::vector<double> probability; ///< |amplitude|^2
  Asymptotics asymptotics = Asymptotics::decays_to_zero;
  double limit = 0.0;              ///< limit of P, or its time average when it oscillates
  double period = 0.0;             ///< recurrence period for the periodic case
};

/// Survival amplitude and probability of psi at the given ascending times t >= 0.
/// Throws NumericalError when max(times) exceeds the validity ceiling set by the node budget.
DecayProfile survival(const LassoParams& p, const LoopState& psi, const std::vector<double>& times,
                      const DecayOptions& options = {});

struct ParitySplit {
  LoopState even;  ///< g(L - x) = g(x)
  LoopState odd;   ///< g(L - x) = -g(x)
};

/// Splits the gauge-stripped state under reflection x -> L - x through the junction.
ParitySplit a_parity_decompose(const LassoParams& p, const LoopState& psi);

enum class Parity { even, odd };

/// Parity class spanned by the embedded eigenfunctions sin(n pi x / L):
/// odd at integer flux quanta, even at half-integer, none otherwise.
std::optional<Parity> surviving_parity(const LassoParams& p);

/// Loop component of U_t psi in the twisted basis e^{i(Phi + 2 pi m)x/L} / sqrt(L).
struct EvolvedState {
  LoopState loop;
  double loop_norm2 = 0.0;
  double k_time = 0.0;
  int modes = 0;
};

EvolvedState evolve_loop_state(const LassoParams& p, const LoopState& psi, double t,
                               const DecayOptions& options = {});

/// Gauge-stripped state seen from a junction moved to x = s along the loop.
LoopState shift_junction(const LassoParams& p, const LoopState& psi, double s, int modes = 0);

struct ParityWeights {
  double even = 0.0;
  double odd = 0.0;
};

struct TwoJunctionReport {
  bool switched = true;
  double survival_stage1 = 0.0;   ///< |<psi0, psi1>|^2 / ||psi0||^4
  double survival_stage2 = 0.0;   ///< |<psi0, psi2>|^2 / ||psi0||^4
  double loop_norm_stage1 = 0.0;  ///< ||psi1||^2 / ||psi0||^2
  double loop_norm_stage2 = 0.0;
  double bound_norm_stage1 = 0.0; ///< bound content of psi0 under the first junction
  double bound_norm_stage2 = 0.0; ///< bound content of psi1 under the second junction
  ParityWeights initial_j1, initial_j2, stage1_j1, stage1_j2, stage2_j1, stage2_j2;
};

/// Evolve under junction 1 (at x = 0) for T1, discard the lead part, move the
/// junction to x = s (parameters p2) and evolve for T2. With p1 == p2 and s = 0
/// no switch happens and the second stage is the single evolution for T1 + T2.
TwoJunctionReport two_junction_scenario(const LassoParams& p1, const LassoParams& p2, double s,
                                        const LoopState& psi0, double T1, double T2,
                                        const DecayOptions& options = {});

}  // namespace lasso
