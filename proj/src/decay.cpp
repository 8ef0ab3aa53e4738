#include "lasso/decay.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "lasso/quadrature.hpp"

namespace lasso {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr cplx kI{0.0, 1.0};
constexpr double kFluxTol = 1e-9;
// Phase advance allowed across one Gauss-Kronrod panel of the time integrals.
constexpr double kPanelPhase = 6.0;
// k^2 t above which the tail integral is replaced by its endpoint term.
constexpr double kEndpointPhase = 30.0;

void check_params(const LassoParams& p, const LoopState& psi) {
  p.validate();
  if (p.is_decoupled()) throw InputError("decay analysis needs a coupled junction (decoupled parameters given)");
  if (p.omega == 0.0) throw InputError("omega = 0 decouples the loop; decay analysis is undefined");
  if (std::abs(psi.length() - p.L) > 1e-12 * p.L) throw InputError("loop state length does not match L");
}

bool on_lattice(double x, double period) { return std::abs(std::remainder(x, period)) < kFluxTol; }

// Embedded eigenfunctions sin(n pi x / L) exist for even n (flux = 0 mod 2pi) or odd n (flux = pi mod 2pi).
int embedded_parity(const LassoParams& p) {
  if (on_lattice(p.Phi, 2.0 * kPi)) return 0;
  if (on_lattice(p.Phi - kPi, 2.0 * kPi)) return 1;
  return -1;
}

double ac_weight(const LassoParams& p, double k) {
  const double kL = k * p.L;
  const double s = std::sin(kL);
  const double c = -2.0 * std::sin((p.Phi + kL) / 2.0) * std::sin((p.Phi - kL) / 2.0);
  const double beta = p.omega * p.omega * k / (1.0 + p.mu * p.mu * k * k);
  const double R = 2.0 * k * c - p.alpha * s - beta * p.mu * k * s;
  const double den = R * R + beta * beta * s * s;
  if (!(den > 0.0)) return 0.0;
  return beta / (kPi * den);
}

// Gauge-stripped loop part of the negative-energy eigenfunction with unit vertex value.
cplx negative_loop_function(const LassoParams& p, double kappa, double x) {
  const double L = p.L;
  const double d = 1.0 - std::exp(-2.0 * kappa * L);
  const double a = std::exp(kappa * (x - L)) * (1.0 - std::exp(-2.0 * kappa * x)) / d;  // sinh kx / sinh kL
  const double b = std::exp(-kappa * x) * (1.0 - std::exp(-2.0 * kappa * (L - x))) / d;  // sinh k(L-x) / sinh kL
  return std::exp(kI * p.Phi) * a + b;
}

struct LoopRule {
  std::vector<double> x, w;
};

LoopRule loop_rule(double L, double max_width) {
  const int panels = std::max(8, static_cast<int>(std::ceil(L / max_width)));
  LoopRule r;
  for (int i = 0; i < panels; ++i) {
    const auto g = quad::gauss_legendre(16, L * i / panels, L * (i + 1) / panels);
    r.x.insert(r.x.end(), g.x.begin(), g.x.end());
    r.w.insert(r.w.end(), g.w.begin(), g.w.end());
  }
  return r;
}

struct NegativeState {
  BoundState state;
  double norm2 = 0.0;  // loop + lead
};

double negative_norm2(const LassoParams& p, double kappa) {
  const LoopRule r = loop_rule(p.L, std::min(p.L / 8.0, 0.5 / kappa));
  double n2 = 0.0;
  for (std::size_t i = 0; i < r.x.size(); ++i) n2 += r.w[i] * std::norm(negative_loop_function(p, kappa, r.x[i]));
  const double F = p.omega / (1.0 + p.mu * kappa);
  return n2 + F * F / (2.0 * kappa);
}

// Wavenumber below which all but a 1e-12 fraction of the coefficient weight lies.
double effective_wavenumber(const LoopState& psi) {
  if (psi.is_sampled()) return psi.max_wavenumber();
  const auto& c = psi.coefficients();
  const auto& q = psi.frequencies();
  std::vector<std::size_t> idx(c.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return std::abs(q[a]) > std::abs(q[b]); });
  double total = 0.0;
  for (const auto& v : c) total += std::norm(v);
  double dropped = 0.0;
  for (std::size_t i : idx) {
    dropped += std::norm(c[i]);
    if (dropped > 1e-12 * total) return std::abs(q[i]);
  }
  return 0.0;
}

// int conj(f(x)) g(x) dx with f given pointwise, using the representation of g.
template <class F>
cplx overlap_with(const LassoParams& p, const LoopState& psi, F f, double scale) {
  if (psi.is_sampled()) {
    const auto& v = psi.samples();
    const std::size_t n = v.size();
    const double h = p.L / static_cast<double>(n - 1);
    cplx acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double wt = (i == 0 || i + 1 == n) ? 0.5 * h : h;
      acc += wt * std::conj(f(h * static_cast<double>(i))) * v[i];
    }
    return acc;
  }
  const double width = std::min({p.L / 8.0, scale, kPi / (effective_wavenumber(psi) + 1e-300)});
  const LoopRule r = loop_rule(p.L, width);
  cplx acc = 0.0;
  for (std::size_t i = 0; i < r.x.size(); ++i) acc += r.w[i] * std::conj(f(r.x[i])) * psi.value(r.x[i]);
  return acc;
}

int auto_n_max(const LassoParams& p, const LoopState& psi) {
  if (psi.is_sampled()) return static_cast<int>(psi.samples().size()) - 1;
  return static_cast<int>(std::ceil(2.0 * effective_wavenumber(psi) * p.L / kPi)) + 64;
}

double default_k_mass(const LassoParams& p, const LoopState& psi, const DecayOptions& o) {
  if (o.k_mass > 0.0) return o.k_mass;
  if (psi.is_sampled()) return std::max(8.0 * kPi / p.L, effective_wavenumber(psi) / 4.0);
  return std::max(40.0 * kPi / p.L, 2.0 * effective_wavenumber(psi) + 20.0 * kPi / p.L);
}

double min_time_cutoff(const LassoParams& p, const LoopState& psi, double k4) {
  return std::min(k4, std::max(8.0 * kPi / p.L, 1.5 * effective_wavenumber(psi)));
}

double time_cutoff(double t_max, std::size_t budget, double k4) {
  if (!(t_max > 0.0)) return k4;
  return std::min(k4, std::sqrt(kPanelPhase * static_cast<double>(budget) / (15.0 * t_max)));
}

double ceiling_for(double k_min, std::size_t budget) {
  return kPanelPhase * static_cast<double>(budget) / (15.0 * k_min * k_min);
}

struct Node {
  double k, w;
};

// GK15 nodes on the given panels clipped at kmax, each panel split so that the
// phase k^2 t changes by at most kPanelPhase and the width stays below max_width.
std::vector<Node> time_nodes(const std::vector<quad::Panel>& panels, double kmax, double t, double max_width) {
  std::vector<Node> nodes;
  for (const auto& pn : panels) {
    if (pn.a >= kmax) break;
    const double b = std::min(pn.b, kmax);
    const double width = b - pn.a;
    const int m = std::max({1, static_cast<int>(std::ceil(2.0 * b * width * t / kPanelPhase)),
                            static_cast<int>(std::ceil(width / max_width))});
    for (int j = 0; j < m; ++j) {
      const auto r = quad::kronrod15(pn.a + width * j / m, pn.a + width * (j + 1) / m);
      for (std::size_t i = 0; i < r.x.size(); ++i) nodes.push_back({r.x[i], r.w[i]});
    }
  }
  return nodes;
}

// int_a^b e^{-ik^2 t} f(k) dk on panels sized for amplitude and phase.
template <class F>
cplx oscillatory_integral(F f, double a, double b, double t, double max_width) {
  cplx acc = 0.0;
  double lo = a;
  while (lo < b) {
    double hi = std::min(b, std::max(lo * 1.25, lo + 1e-12));
    hi = std::min(hi, lo + max_width);
    const double width = hi - lo;
    const int m = std::max(1, static_cast<int>(std::ceil(2.0 * hi * width * t / kPanelPhase)));
    for (int j = 0; j < m; ++j) {
      const auto r = quad::kronrod15(lo + width * j / m, lo + width * (j + 1) / m);
      for (std::size_t i = 0; i < r.x.size(); ++i)
        acc += r.w[i] * f(r.x[i]) * std::polar(1.0, -r.x[i] * r.x[i] * t);
    }
    lo = hi;
  }
  return acc;
}

cplx endpoint_term(double K, double fK, double t) {
  return std::polar(1.0, -K * K * t) * fK / (2.0 * kI * K * t);
}

// Mass integral split as [0, K], [K, 2K], [2K, 4K] plus a power-law tail.
struct MassSplit {
  double k0 = 0.0;
  double inner = 0.0, d1 = 0.0, d2 = 0.0, tail = 0.0;
  double power = 0.0, coeff = 0.0;  // f ~ coeff k^-power beyond 4K
  std::vector<quad::Panel> panels;
  double total() const { return inner + d1 + d2 + tail; }
};

template <class F>
MassSplit mass_split(F f, double k0, double abs_tol) {
  MassSplit m;
  m.k0 = k0;
  auto fc = [&](double k) { return cplx(f(k), 0.0); };
  const auto ra = quad::gauss_kronrod(fc, 0.0, 0.5 * k0, abs_tol, 0.0, 20000);
  const auto rb = quad::gauss_kronrod(fc, 0.5 * k0, k0, abs_tol, 0.0, 20000);
  const auto r1 = quad::gauss_kronrod(fc, k0, 2.0 * k0, abs_tol, 0.0, 20000);
  const auto r2 = quad::gauss_kronrod(fc, 2.0 * k0, 4.0 * k0, abs_tol, 0.0, 20000);
  const double d0 = rb.value.real();
  m.inner = ra.value.real() + d0;
  m.d1 = r1.value.real();
  m.d2 = r2.value.real();
  for (const auto* r : {&ra, &rb, &r1, &r2}) m.panels.insert(m.panels.end(), r->panels.begin(), r->panels.end());
  if (m.d2 > 0.0 && m.d1 > m.d2 * 1.05) {
    const double ratio = m.d1 / m.d2;
    m.tail = m.d2 / (ratio - 1.0);
    m.power = 1.0 + std::log2(ratio);
    // Integer decay order n: octave masses behave as sum_r X_r z_r^j with z_r = 2^-(n + r).
    const double order = std::round(m.power - 1.0);
    if (order >= 1.0 && std::abs(m.power - 1.0 - order) < 0.25) {
      Eigen::Matrix3d V;
      Eigen::Vector3d d(d0, m.d1, m.d2), z;
      for (int r = 0; r < 3; ++r) {
        z[r] = std::pow(2.0, -(order + r));
        for (int j = 0; j < 3; ++j) V(j, r) = std::pow(z[r], j);
      }
      const Eigen::Vector3d X = V.fullPivLu().solve(d);
      double tail = 0.0;
      for (int r = 0; r < 3; ++r) tail += X[r] * std::pow(z[r], 3) / (1.0 - z[r]);
      if (tail > 0.0 && std::isfinite(tail)) m.tail = tail;
    }
    const double e = 1.0 - m.power;
    m.coeff = m.d2 * (m.power - 1.0) / (std::pow(2.0 * k0, e) - std::pow(4.0 * k0, e));
  }
  return m;
}

}  // namespace

cplx deficiency_overlap(const LassoParams& p, const LoopState& psi, double k) {
  const cplx e = std::exp(kI * p.Phi);
  const cplx em = std::exp(-kI * k * p.L);
  return ((e - em) * psi.overlap_exp(k) - (e - 1.0 / em) * psi.overlap_exp(-k)) / (2.0 * kI);
}

double spectral_density(const LassoParams& p, const LoopState& psi, double k) {
  check_params(p, psi);
  if (!(k > 0.0 && std::isfinite(k))) throw InputError("spectral density requires k > 0");
  return ac_weight(p, k) * std::norm(deficiency_overlap(p, psi, k)) * 2.0 * k;
}

std::vector<BoundProjection> project_bound(const LassoParams& p, const LoopState& psi, int n_max) {
  check_params(p, psi);
  std::vector<BoundProjection> out;
  const double scale = std::sqrt(std::max(psi.norm2(), 1e-300));
  const int parity = embedded_parity(p);
  if (parity >= 0) {
    const int n_top = n_max > 0 ? n_max : auto_n_max(p, psi);
    for (int n = parity == 0 ? 2 : 1; n <= n_top; n += 2) {
      const cplx c = LoopState::sine_mode(p.L, n).inner(psi);
      if (std::abs(c) > 1e-12 * scale) {
        BoundState b;
        b.kind = BoundState::Kind::embedded;
        b.n = n;
        b.energy = std::pow(n * kPi / p.L, 2);
        out.push_back({b, c});
      }
    }
  }
  for (const auto& b : negative_bound_states(p)) {
    const double n2 = negative_norm2(p, b.kappa);
    const cplx c = overlap_with(p, psi, [&](double x) { return negative_loop_function(p, b.kappa, x); },
                                0.5 / b.kappa) / std::sqrt(n2);
    if (std::abs(c) > 1e-12 * scale) out.push_back({b, c});
  }
  return out;
}

const char* asymptotics_name(Asymptotics a) {
  switch (a) {
    case Asymptotics::decays_to_zero: return "decays_to_zero";
    case Asymptotics::constant_limit: return "constant_limit";
    case Asymptotics::periodic: return "periodic";
    case Asymptotics::quasiperiodic: return "quasiperiodic";
  }
  return "unknown";
}

DecayProfile survival(const LassoParams& p, const LoopState& psi, const std::vector<double>& times,
                      const DecayOptions& options) {
  check_params(p, psi);
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] >= 0.0 && std::isfinite(times[i]))) throw InputError("times must be finite and >= 0");
    if (i > 0 && times[i] < times[i - 1]) throw InputError("times must be ascending");
  }
  DecayProfile out;
  out.norm2 = psi.norm2();
  if (!(out.norm2 > 0.0)) throw InputError("the initial state is zero");

  out.bound = project_bound(p, psi);
  double embedded_sum = 0.0;
  for (const auto& b : out.bound) {
    out.bound_mass += std::norm(b.c);
    if (b.state.kind == BoundState::Kind::embedded) embedded_sum += std::norm(b.c);
  }
  const int parity = embedded_parity(p);
  if (parity >= 0) {
    const auto split = a_parity_decompose(p, psi);
    const double exact = (parity == 0 ? split.odd : split.even).norm2();
    out.embedded_tail_mass = std::max(0.0, exact - embedded_sum);
    out.bound_mass += out.embedded_tail_mass;
  }

  auto f = [&](double k) { return ac_weight(p, k) * std::norm(deficiency_overlap(p, psi, k)) * 2.0 * k; };
  out.k_mass = default_k_mass(p, psi, options);
  const MassSplit ms = mass_split(f, out.k_mass, options.abs_tol * std::max(1.0, out.norm2));
  out.ac_mass = ms.total();
  out.ac_tail_mass = ms.tail;
  out.completeness = (out.bound_mass + out.ac_mass) / out.norm2;

  const double k4 = 4.0 * out.k_mass;
  const double k_min = min_time_cutoff(p, psi, k4);
  out.t_ceiling = ceiling_for(k_min, options.node_budget);
  const double t_max = times.empty() ? 0.0 : times.back();
  if (t_max > out.t_ceiling) {
    std::ostringstream msg;
    msg << "t = " << t_max << " exceeds the validity ceiling t_max = " << out.t_ceiling
        << " of the oscillatory quadrature for this state (node budget " << options.node_budget << ")";
    throw NumericalError(msg.str());
  }
  out.k_time = std::max(k_min, time_cutoff(t_max, options.node_budget, k4));

  const int ns = std::max(options.density_samples, 0);
  for (int i = 1; i <= ns; ++i) {
    const double k = out.k_mass * i / ns;
    out.density_k.push_back(k);
    out.density.push_back(f(k));
  }

  const double max_width = 1.0 / p.L;
  const std::vector<Node> nodes = time_nodes(ms.panels, out.k_time, t_max, max_width);
  std::vector<double> fv(nodes.size());
  double mass_inside = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    fv[i] = f(nodes[i].k);
    mass_inside += nodes[i].w * fv[i];
  }
  const double f_time_edge = f(out.k_time);
  const double f_k4 = f(k4);
  auto model = [&](double k) { return ms.coeff * std::pow(k, -ms.power); };

  // Normalizing by the integrated measure keeps P(0) = 1 exactly; the
  // discrepancy with ||psi||^2 is reported as completeness.
  const double measure = out.bound_mass + out.ac_mass;
  for (double t : times) {
    cplx A = 0.0;
    for (const auto& b : out.bound) A += std::norm(b.c) * std::polar(1.0, -b.state.energy * t);
    if (t == 0.0) {
      A += out.embedded_tail_mass + out.ac_mass;
    } else {
      for (std::size_t i = 0; i < nodes.size(); ++i)
        A += nodes[i].w * fv[i] * std::polar(1.0, -nodes[i].k * nodes[i].k * t);
      const double Kt = out.k_time;
      if (Kt * Kt * t >= kEndpointPhase) {
        A += endpoint_term(Kt, f_time_edge, t);
      } else {
        if (Kt < k4) A += oscillatory_integral(f, Kt, k4, t, max_width);
        if (k4 * k4 * t >= kEndpointPhase) {
          A += endpoint_term(k4, f_k4, t);
        } else if (ms.coeff > 0.0) {
          const double K3 = std::sqrt(kEndpointPhase / t);
          A += oscillatory_integral(model, k4, K3, t, 1e300);
          A += endpoint_term(K3, model(K3), t);
        }
      }
    }
    A /= measure;
    out.times.push_back(t);
    out.amplitude.push_back(A);
    out.probability.push_back(std::norm(A));
  }

  int significant = 0;
  bool all_embedded = true;
  double fourth = 0.0;
  for (const auto& b : out.bound) {
    const double w = std::norm(b.c) / out.norm2;
    if (w > 1e-10) {
      ++significant;
      fourth += w * w;
      all_embedded = all_embedded && b.state.kind == BoundState::Kind::embedded;
    }
  }
  out.limit = fourth;
  if (significant == 0) {
    out.asymptotics = Asymptotics::decays_to_zero;
  } else if (significant == 1) {
    out.asymptotics = Asymptotics::constant_limit;
  } else if (all_embedded) {
    out.asymptotics = Asymptotics::periodic;
    out.period = 2.0 * p.L * p.L / kPi;
  } else {
    out.asymptotics = Asymptotics::quasiperiodic;
  }
  return out;
}

ParitySplit a_parity_decompose(const LassoParams& p, const LoopState& psi) {
  if (std::abs(psi.length() - p.L) > 1e-12 * p.L) throw InputError("loop state length does not match L");
  const LoopState r = psi.reflected();
  return {psi.plus(r).scaled(0.5), psi.plus(r.scaled(-1.0)).scaled(0.5)};
}

std::optional<Parity> surviving_parity(const LassoParams& p) {
  switch (embedded_parity(p)) {
    case 0: return Parity::odd;
    case 1: return Parity::even;
    default: return std::nullopt;
  }
}

namespace {

std::vector<double> twisted_frequencies(const LassoParams& p, int M) {
  std::vector<double> q;
  for (int m = -M; m <= M; ++m) q.push_back((p.Phi + 2.0 * kPi * m) / p.L);
  return q;
}

bool on_twisted_lattice(const LassoParams& p, const LoopState& psi) {
  if (psi.is_sampled()) return false;
  for (double q : psi.frequencies())
    if (!on_lattice(q * p.L - p.Phi, 2.0 * kPi)) return false;
  return true;
}

// Coefficients of psi in the twisted basis e^{i q_m x} / sqrt(L).
LoopState twisted_projection(const LassoParams& p, const LoopState& psi, int M) {
  const auto q = twisted_frequencies(p, M);
  std::vector<cplx> c(q.size());
  const double norm = 1.0 / std::sqrt(p.L);
  for (std::size_t i = 0; i < q.size(); ++i) c[i] = std::conj(psi.overlap_exp(q[i])) * norm * norm;
  return LoopState::exponential_sum(p.L, std::move(c), q);
}

}  // namespace

LoopState shift_junction(const LassoParams& p, const LoopState& psi, double s, int modes) {
  if (std::abs(psi.length() - p.L) > 1e-12 * p.L) throw InputError("loop state length does not match L");
  if (!std::isfinite(s)) throw InputError("junction shift must be finite");
  LoopState base = psi;
  if (!on_twisted_lattice(p, psi)) {
    const int M = modes > 0 ? modes
                            : std::max(256, static_cast<int>(std::ceil(effective_wavenumber(psi) * p.L / (2.0 * kPi))) + 64);
    base = twisted_projection(p, psi, M);
  }
  std::vector<cplx> c = base.coefficients();
  const std::vector<double>& q = base.frequencies();
  const double A = p.vector_potential();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= std::exp(kI * (q[i] - A) * s);
  return LoopState::exponential_sum(p.L, std::move(c), q);
}

EvolvedState evolve_loop_state(const LassoParams& p, const LoopState& psi, double t, const DecayOptions& options) {
  check_params(p, psi);
  if (!(t >= 0.0 && std::isfinite(t))) throw InputError("evolution time must be finite and >= 0");
  const double L = p.L;
  const auto bound = project_bound(p, psi);
  auto f = [&](double k) { return ac_weight(p, k) * std::norm(deficiency_overlap(p, psi, k)) * 2.0 * k; };
  const double k0 = default_k_mass(p, psi, options);
  const double k4 = 4.0 * k0;
  const double k_min = min_time_cutoff(p, psi, k4);
  if (t > ceiling_for(k_min, options.node_budget)) {
    std::ostringstream msg;
    msg << "t = " << t << " exceeds the validity ceiling t_max = " << ceiling_for(k_min, options.node_budget)
        << " of the oscillatory quadrature for this state";
    throw NumericalError(msg.str());
  }
  const double kt = std::max(k_min, time_cutoff(t, options.node_budget, k4));
  const auto mass = quad::gauss_kronrod([&](double k) { return cplx(f(k), 0.0); }, 0.0, kt,
                                        options.abs_tol * std::max(1.0, psi.norm2()), 0.0, 20000);
  const std::vector<Node> nodes = time_nodes(mass.panels, kt, t, 1.0 / L);

  const int M = static_cast<int>(std::ceil(std::max(kt, effective_wavenumber(psi)) * L / (2.0 * kPi))) + 8;
  const auto q = twisted_frequencies(p, M);
  const double rs = 1.0 / std::sqrt(L);
  std::vector<cplx> d(q.size(), 0.0);

  const cplx e = std::exp(kI * p.Phi);
  for (const auto& nd : nodes) {
    const double k = nd.k;
    const cplx amp = deficiency_overlap(p, psi, k);
    const cplx kern = nd.w * std::polar(1.0, -k * k * t) * ac_weight(p, k) * std::conj(amp) * 2.0 * k;
    if (kern == cplx(0.0, 0.0)) continue;
    const cplx em = std::exp(-kI * k * L);
    const cplx cp = (e - em) / (2.0 * kI) * rs;
    const cplx cm = (e - 1.0 / em) / (2.0 * kI) * rs;
    // On the twisted lattice e^{i q_m L} = e^{i Phi}, so E(w) reduces to one division per mode.
    const cplx np = std::conj(em) / e - 1.0, nm = em / e - 1.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double wp = k - q[i], wm = -k - q[i];
      const cplx Ep = std::abs(wp) * L > 1e-3 ? np / (kI * wp) : exp_integral(wp, L);
      const cplx Em = std::abs(wm) * L > 1e-3 ? nm / (kI * wm) : exp_integral(wm, L);
      d[i] += kern * (cp * Ep - cm * Em);
    }
  }
  for (const auto& b : bound) {
    const cplx phase = b.c * std::polar(1.0, -b.state.energy * t);
    if (b.state.kind == BoundState::Kind::embedded) {
      const double qn = b.state.n * kPi / L;
      const cplx c = std::sqrt(2.0 / L) * rs / (2.0 * kI);
      for (std::size_t i = 0; i < q.size(); ++i)
        d[i] += phase * c * (exp_integral(qn - q[i], L) - exp_integral(-qn - q[i], L));
    } else {
      const double kappa = b.state.kappa;
      const double n2 = negative_norm2(p, kappa);
      const LoopRule r = loop_rule(L, std::min({L / 8.0, 0.5 / kappa, kPi / (std::abs(q.back()) + 1.0)}));
      for (std::size_t i = 0; i < q.size(); ++i) {
        cplx acc = 0.0;
        for (std::size_t j = 0; j < r.x.size(); ++j)
          acc += r.w[j] * std::exp(-kI * q[i] * r.x[j]) * negative_loop_function(p, kappa, r.x[j]);
        d[i] += phase * acc * rs / std::sqrt(n2);
      }
    }
  }

  EvolvedState out;
  out.k_time = kt;
  out.modes = static_cast<int>(q.size());
  std::vector<cplx> coeffs(q.size());
  double n2 = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    coeffs[i] = d[i] * rs;  // basis functions carry 1/sqrt(L)
    n2 += std::norm(d[i]);
  }
  out.loop_norm2 = n2;
  out.loop = LoopState::exponential_sum(L, std::move(coeffs), q);
  return out;
}

namespace {

ParityWeights parity_weights(const LassoParams& p, const LoopState& psi, double s, double norm0) {
  const LoopState shifted = s == 0.0 ? psi : shift_junction(p, psi, s);
  const auto split = a_parity_decompose(p, shifted);
  return {split.even.norm2() / norm0, split.odd.norm2() / norm0};
}

// Drops twisted-basis modes above qcut; the stage-2 input keeps the slow part of the surviving state.
LoopState truncate_modes(const LoopState& psi, double qcut) {
  std::vector<cplx> c;
  std::vector<double> q;
  for (std::size_t i = 0; i < psi.frequencies().size(); ++i) {
    if (std::abs(psi.frequencies()[i]) <= qcut) {
      c.push_back(psi.coefficients()[i]);
      q.push_back(psi.frequencies()[i]);
    }
  }
  if (c.empty()) return psi.scaled(0.0);
  return LoopState::exponential_sum(psi.length(), std::move(c), std::move(q));
}

bool same_params(const LassoParams& a, const LassoParams& b) {
  return a.L == b.L && a.Phi == b.Phi && a.alpha == b.alpha && a.mu == b.mu && a.omega == b.omega &&
         a.coupling == b.coupling;
}

}  // namespace

TwoJunctionReport two_junction_scenario(const LassoParams& p1, const LassoParams& p2, double s,
                                        const LoopState& psi0, double T1, double T2, const DecayOptions& options) {
  check_params(p1, psi0);
  check_params(p2, psi0);
  if (p1.L != p2.L || p1.Phi != p2.Phi)
    throw InputError("both junctions must sit on the same loop with the same flux");
  if (!(s >= 0.0 && s < p1.L)) throw InputError("junction offset s must lie in [0, L)");
  if (!(T1 >= 0.0 && T2 >= 0.0)) throw InputError("stage durations must be >= 0");

  TwoJunctionReport r;
  const double norm0 = psi0.norm2();
  if (!(norm0 > 0.0)) throw InputError("the initial state is zero");
  r.switched = !(same_params(p1, p2) && s == 0.0);

  r.initial_j1 = parity_weights(p1, psi0, 0.0, norm0);
  r.initial_j2 = parity_weights(p1, psi0, s, norm0);
  for (const auto& b : project_bound(p1, psi0)) r.bound_norm_stage1 += std::norm(b.c);
  r.bound_norm_stage1 /= norm0;

  const EvolvedState st1 = evolve_loop_state(p1, psi0, T1, options);
  r.survival_stage1 = std::norm(psi0.inner(st1.loop)) / (norm0 * norm0);
  r.loop_norm_stage1 = st1.loop_norm2 / norm0;
  r.stage1_j1 = parity_weights(p1, st1.loop, 0.0, norm0);
  r.stage1_j2 = parity_weights(p1, st1.loop, s, norm0);

  if (!r.switched) {
    const EvolvedState st = evolve_loop_state(p1, psi0, T1 + T2, options);
    r.survival_stage2 = std::norm(psi0.inner(st.loop)) / (norm0 * norm0);
    r.loop_norm_stage2 = st.loop_norm2 / norm0;
    r.bound_norm_stage2 = r.bound_norm_stage1;
    r.stage2_j1 = parity_weights(p1, st.loop, 0.0, norm0);
    r.stage2_j2 = parity_weights(p1, st.loop, s, norm0);
    return r;
  }

  // Second stage runs in the frame of junction 2; the lead part at the switch is discarded.
  const double qcut = std::max(8.0 * kPi / p1.L, 1.5 * effective_wavenumber(psi0) + 8.0 * kPi / p1.L);
  const LoopState psi1_j2 = truncate_modes(shift_junction(p1, st1.loop, s), qcut);
  if (!(psi1_j2.norm2() > 1e-300)) {
    r.stage2_j1 = r.stage2_j2 = ParityWeights{};
    return r;
  }
  for (const auto& b : project_bound(p2, psi1_j2)) r.bound_norm_stage2 += std::norm(b.c);
  r.bound_norm_stage2 /= norm0;
  const EvolvedState st2 = evolve_loop_state(p2, psi1_j2, T2, options);
  const LoopState psi2_j1 = shift_junction(p1, st2.loop, -s);
  r.survival_stage2 = std::norm(psi0.inner(psi2_j1)) / (norm0 * norm0);
  r.loop_norm_stage2 = st2.loop_norm2 / norm0;
  r.stage2_j1 = parity_weights(p1, psi2_j1, 0.0, norm0);
  r.stage2_j2 = parity_weights(p1, st2.loop, 0.0, norm0);
  return r;
}

}  // namespace lasso
