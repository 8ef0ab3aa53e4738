#include "lasso/resonances.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <sstream>

namespace lasso {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr cplx kI{0.0, 1.0};
constexpr double kResidualTol = 1e-12;
constexpr double kEmbeddedTol = 1e-9;

void require_finite_coupling(const LassoParams& p) {
  p.validate();
  if (p.is_decoupled()) throw InputError("the decoupled junction has no resonances");
}

double residual_scale(const LassoParams& p, cplx k) {
  const cplx kL = k * p.L;
  const double s = std::abs(std::sin(kL));
  const double c = std::abs(std::cos(p.Phi)) + std::abs(std::cos(kL));
  const double mu_term = std::abs(1.0 - kI * p.mu * k);
  return mu_term * (2.0 * c + std::abs(p.alpha) * s / std::max(std::abs(k), 1e-300)) +
         p.omega * p.omega * s + 1e-300;
}

std::optional<cplx> newton(const LassoParams& p, cplx k, int max_iterations) {
  const double max_step = 1.0 / p.L;
  for (int it = 0; it < max_iterations; ++it) {
    if (std::abs(k) < 1e-12 / p.L) return std::nullopt;
    const cplx g = pole_function(p, k);
    if (!std::isfinite(g.real()) || !std::isfinite(g.imag())) return std::nullopt;
    if (std::abs(g) <= kResidualTol * residual_scale(p, k)) {
      // Two polishing steps; keep them only if they do not worsen the residual.
      for (int j = 0; j < 2; ++j) {
        const cplx d = pole_function_derivative(p, k);
        if (d == cplx(0.0, 0.0)) break;
        const cplx kn = k - g / d;
        if (std::abs(pole_function(p, kn)) <= std::abs(pole_function(p, k))) k = kn;
      }
      return k;
    }
    const cplx d = pole_function_derivative(p, k);
    if (d == cplx(0.0, 0.0)) return std::nullopt;
    cplx step = g / d;
    if (std::abs(step) > max_step) step *= max_step / std::abs(step);
    k -= step;
  }
  return std::nullopt;
}

Pole make_pole(const LassoParams& p, cplx k) {
  Pole out;
  out.kind = classify_pole(p, k);
  if (out.kind == Pole::Kind::embedded || (k.imag() > 0.0 && k.imag() < kEmbeddedTol * std::max(1.0, std::abs(k))))
    k.imag(out.kind == Pole::Kind::embedded ? 0.0 : std::min(k.imag(), 0.0));
  out.k = k;
  out.residual = std::abs(pole_function(p, k));
  return out;
}

void sort_poles(std::vector<Pole>& v) {
  std::sort(v.begin(), v.end(), [](const Pole& a, const Pole& b) {
    if (a.k.real() != b.k.real()) return a.k.real() < b.k.real();
    return a.k.imag() > b.k.imag();
  });
}

// Lattice copies kL = z0 + 2 pi m with Re k in the window.
void push_lattice(const LassoParams& p, cplx z0, double kappa_min, double kappa_max, std::vector<Pole>& out) {
  const double L = p.L;
  const long m_lo = static_cast<long>(std::ceil((kappa_min * L - z0.real()) / (2.0 * kPi) - 1e-12));
  const long m_hi = static_cast<long>(std::floor((kappa_max * L - z0.real()) / (2.0 * kPi) + 1e-12));
  for (long m = m_lo; m <= m_hi; ++m) {
    const cplx k = (z0 + 2.0 * kPi * static_cast<double>(m)) / L;
    if (std::abs(k) < 1e-12 / L) continue;
    bool dup = false;
    for (const auto& q : out) dup = dup || std::abs(q.k - k) < 1e-12 / L;
    if (!dup) out.push_back(make_pole(p, k));
  }
}

}  // namespace

cplx pole_function(const LassoParams& p, cplx k) { return entire_denominator(p, k) / k; }

cplx pole_function_derivative(const LassoParams& p, cplx k) {
  return (entire_denominator_derivative(p, k) - pole_function(p, k)) / k;
}

Pole::Kind classify_pole(const LassoParams& p, cplx k) {
  if (std::abs(k.imag()) < kEmbeddedTol && flux_distance_to_pi_lattice(p.Phi) < kEmbeddedTol)
    return Pole::Kind::embedded;
  return Pole::Kind::resonance;
}

std::vector<Pole> poles_alpha_zero(const LassoParams& p, double kappa_min, double kappa_max) {
  require_finite_coupling(p);
  if (!p.is_delta() || p.alpha != 0.0) throw InputError("closed-form poles require the delta coupling with alpha = 0");
  if (!(kappa_min <= kappa_max)) throw InputError("empty pole window");
  const double L = p.L;
  const double c = std::cos(p.Phi);
  std::vector<Pole> out;
  if (4.0 * c * c >= 3.0) {
    const double root = std::sqrt(std::max(0.0, 4.0 * c * c - 3.0));
    const long n_lo = static_cast<long>(std::ceil(kappa_min * L / kPi - 1e-12));
    const long n_hi = static_cast<long>(std::floor(kappa_max * L / kPi + 1e-12));
    for (long n = n_lo; n <= n_hi; ++n) {
      const double sgn = (n % 2 == 0) ? 1.0 : -1.0;
      if (sgn * c <= 0.0) continue;
      for (double pm : {-1.0, 1.0}) {
        if (root == 0.0 && pm > 0.0) continue;
        const double eta = std::log(2.0 * sgn * c + pm * root) / L;
        if (n == 0 && eta == 0.0) continue;
        out.push_back(make_pole(p, cplx(kPi * static_cast<double>(n) / L, -eta)));
      }
    }
  } else {
    const double eta = std::log(3.0) / (2.0 * L);
    const double a = std::acos(2.0 * c / std::sqrt(3.0));
    push_lattice(p, cplx(a, -eta * L), kappa_min, kappa_max, out);
    push_lattice(p, cplx(-a, -eta * L), kappa_min, kappa_max, out);
  }
  sort_poles(out);
  return out;
}

std::vector<Pole> poles_ideal_family(const LassoParams& p, double kappa_min, double kappa_max) {
  require_finite_coupling(p);
  if (p.alpha != 0.0 || p.mu != 0.0) throw InputError("closed-form family requires alpha = mu = 0");
  if (!(kappa_min <= kappa_max)) throw InputError("empty pole window");
  const double w2 = p.omega * p.omega;
  const double a2 = 1.0 - w2 / 2.0;
  const double a1 = -2.0 * std::cos(p.Phi);
  const double a0 = 1.0 + w2 / 2.0;
  std::vector<cplx> roots;
  if (std::abs(a2) < 1e-15) {
    if (a1 != 0.0) roots.push_back(-a0 / a1);
  } else {
    const cplx disc = std::sqrt(cplx(a1 * a1 - 4.0 * a2 * a0, 0.0));
    const cplx q = -0.5 * (a1 + (a1 >= 0.0 ? disc : -disc));
    if (q != cplx(0.0, 0.0)) {
      roots.push_back(q / a2);
      roots.push_back(a0 / q);
    }
  }
  std::vector<Pole> out;
  for (const cplx& w : roots) {
    if (w == cplx(0.0, 0.0)) continue;
    const double b = std::log(std::abs(w));
    if (b < -1e-12) continue;
    push_lattice(p, cplx(std::arg(w), -std::max(b, 0.0)), kappa_min, kappa_max, out);
  }
  sort_poles(out);
  return out;
}

Pole find_pole(const LassoParams& p, cplx k_guess, int max_iterations) {
  require_finite_coupling(p);
  if (!(std::isfinite(k_guess.real()) && std::isfinite(k_guess.imag())))
    throw InputError("initial guess must be finite");
  const auto k = newton(p, k_guess, max_iterations);
  if (!k) {
    std::ostringstream msg;
    msg << "pole search from k = " << k_guess << " did not converge in " << max_iterations << " iterations";
    throw NumericalError(msg.str());
  }
  if (k->imag() > kEmbeddedTol * std::max(1.0, std::abs(*k))) {
    std::ostringstream msg;
    msg << "pole search converged into the upper half-plane at k = " << *k
        << " (no resolvent poles exist there apart from negative eigenvalues on the imaginary axis)";
    throw NumericalError(msg.str());
  }
  const Pole pole = make_pole(p, *k);
  if (p.is_delta() && p.alpha != 0.0) {
    const double kappa = pole.k.real();
    const double eta = -pole.k.imag();
    const double n = std::round(kappa * p.L / kPi);
    if (std::abs(kappa - n * kPi / p.L) < 1e-8 && eta > 1e-8) {
      std::ostringstream msg;
      msg << "internal consistency failure: pole " << pole.k << " sits on Re k = n pi / L off the real axis";
      throw NumericalError(msg.str());
    }
  }
  return pole;
}

std::vector<Pole> find_poles(const LassoParams& p, double kappa_min, double kappa_max, double eta_max) {
  require_finite_coupling(p);
  if (!(std::isfinite(kappa_min) && std::isfinite(kappa_max) && kappa_min <= kappa_max))
    throw InputError("pole search needs a finite range kappa_min <= kappa_max");
  if (p.alpha == 0.0 && p.mu == 0.0)
    return p.is_delta() ? poles_alpha_zero(p, kappa_min, kappa_max) : poles_ideal_family(p, kappa_min, kappa_max);
  const double depth = eta_max > 0.0 ? eta_max : 3.0 / p.L;
  std::vector<Pole> found;
  auto known = [&](cplx k) {
    for (const auto& q : found)
      if (std::abs(q.k - k) < 1e-8 * std::max(1.0, std::abs(k))) return true;
    return false;
  };
  const double step = kPi / (4.0 * p.L);
  const int n0 = static_cast<int>(std::floor(kappa_min / step));
  const int n1 = static_cast<int>(std::ceil(kappa_max / step));
  for (int n = std::max(n0, 0); n <= n1; ++n) {
    for (double frac : {0.01, 0.1, 0.3, 0.6, 1.0}) {
      const cplx guess(std::max(n * step, 1e-3 / p.L), -frac * depth);
      try {
        const Pole q = find_pole(p, guess);
        const double kappa = q.k.real();
        if (kappa < kappa_min || kappa > kappa_max || -q.k.imag() > depth || known(q.k)) continue;
        if (std::abs(q.k) < 1e-9 / p.L) continue;  // k = 0 is a removable zero of g
        found.push_back(q);
      } catch (const NumericalError&) {
      }
    }
  }
  std::sort(found.begin(), found.end(), [](const Pole& a, const Pole& b) {
    if (a.k.real() != b.k.real()) return a.k.real() < b.k.real();
    return a.k.imag() > b.k.imag();
  });
  return found;
}

const char* sweep_param_name(SweepParam s) { return s == SweepParam::flux ? "flux" : "alpha"; }

namespace {

struct CrossingRecord {
  double param;
  cplx k;
  std::vector<cplx> claimed;
};

class Tracer {
 public:
  Tracer(const LassoParams& p, const SweepSpec& s) : base_(p), sweep_(s) {
    range_ = std::abs(s.to - s.from);
    dir_ = s.to >= s.from ? 1.0 : -1.0;
    nominal_ = range_ / std::max(s.steps, 1);
    max_dk_ = s.max_k_step > 0.0 ? s.max_k_step : 0.1 / p.L;
    radius_ = 0.05 / p.L;
  }

  std::vector<Trajectory> run(const std::vector<Pole>& seeds) {
    for (const auto& seed : seeds) {
      Branch b;
      b.traj.param = sweep_.param;
      b.traj.branch_id = static_cast<int>(queue_.size());
      b.v = sweep_.from;
      b.k = seed.k;
      b.traj.samples.push_back({b.v, make_pole(at(b.v), b.k)});
      queue_.push_back(b);
    }
    for (std::size_t i = 0; i < queue_.size(); ++i) {
      Branch b = queue_[i];
      advance(b);
      done_.push_back(b.traj);
    }
    return done_;
  }

 private:
  struct Branch {
    Trajectory traj;
    double v = 0.0;
    cplx k;
    bool have_prev = false;
    double v_prev = 0.0;
    cplx k_prev;
    bool zone = false;
  };

  LassoParams at(double v) const {
    LassoParams q = base_;
    if (sweep_.param == SweepParam::flux) q.Phi = v; else q.alpha = v;
    return q;
  }

  double remaining(double v) const { return dir_ * (sweep_.to - v); }

  static cplx second_derivative(const LassoParams& q, cplx k) {
    const double h = 1e-5 * std::max(1.0, std::abs(k));
    return (pole_function_derivative(q, k + h) - pole_function_derivative(q, k - h)) / (2.0 * h);
  }

  static double separation(const LassoParams& q, cplx k) {
    const cplx d2 = second_derivative(q, k);
    if (d2 == cplx(0.0, 0.0)) return std::numeric_limits<double>::infinity();
    return 2.0 * std::abs(pole_function_derivative(q, k) / d2);
  }

  // Critical point of g near k0 and the local discriminant Z = -2 g / g''.
  static std::optional<std::pair<cplx, cplx>> critical(const LassoParams& q, cplx k0) {
    cplx k = k0;
    for (int it = 0; it < 60; ++it) {
      const cplx d2 = second_derivative(q, k);
      if (d2 == cplx(0.0, 0.0)) return std::nullopt;
      const cplx step = pole_function_derivative(q, k) / d2;
      k -= step;
      if (std::abs(step) < 1e-14 * std::max(1.0, std::abs(k))) break;
    }
    if (std::abs(k - k0) > 0.5 / q.L) return std::nullopt;
    const cplx d2 = second_derivative(q, k);
    return std::make_pair(k, -2.0 * pole_function(q, k) / d2);
  }

  [[noreturn]] void lost(const Branch& b, const std::string& why) const {
    std::ostringstream msg;
    msg << "trajectory branch " << b.traj.branch_id << " lost (" << why << "); last good sample "
        << sweep_param_name(sweep_.param) << " = " << b.v << ", k = " << b.k;
    throw NumericalError(msg.str());
  }

  void push(Branch& b, double v, cplx k) {
    b.v_prev = b.v;
    b.k_prev = b.k;
    b.v = v;
    b.k = k;
    b.traj.samples.push_back({v, make_pole(at(v), k)});
  }

  void advance(Branch& b) {
    double h = nominal_;
    const double h_min = 1e-13 * std::max(range_, 1.0);
    while (remaining(b.v) > 1e-14 * std::max(range_, 1.0)) {
      const LassoParams q = at(b.v);
      const double sep = separation(q, b.k);
      if (b.zone && sep > 2.0 * radius_) b.zone = false;
      if (!b.zone && sep < radius_) {
        const int outcome = handle_crossing(b);
        if (outcome < 0) return;  // merged into an already traced branch
        h = std::max(h_min, std::abs(b.v - b.v_prev));
        continue;
      }
      const double hs = std::min(h, remaining(b.v));
      const double target = b.v + dir_ * hs;
      cplx pred = b.k;
      if (b.have_prev && b.v != b.v_prev) pred = b.k + (b.k - b.k_prev) * ((target - b.v) / (b.v - b.v_prev));
      const auto res = newton(at(target), pred, 60);
      const bool ok = res && std::abs(*res - b.k) <= std::min(max_dk_, 0.25 * sep) &&
                      std::abs(*res - pred) <= 0.5 * sep &&
                      res->imag() <= kEmbeddedTol * std::max(1.0, std::abs(*res));
      if (ok) {
        push(b, target, *res);
        b.have_prev = true;
        h = std::min(2.0 * h, nominal_);
      } else {
        h *= 0.5;
        if (h < h_min) lost(b, "corrector failed at the minimum step");
      }
    }
  }

  // Returns 1 when the branch continues, 0 when the zone was an avoided
  // crossing, -1 when the branch ends because every outgoing root is taken.
  int handle_crossing(Branch& b) {
    const double v0 = b.v;
    const auto c0 = critical(at(v0), b.k);
    if (!c0) {
      b.zone = true;
      return 0;
    }
    auto z_at = [&](double v, cplx& kc) -> std::optional<cplx> {
      const auto c = critical(at(v), kc);
      if (!c) return std::nullopt;
      kc = c->first;
      return c->second;
    };
    cplx kc = c0->first;
    const cplx Z0 = c0->second;
    const double eps = 1e-4 * nominal_;
    cplx kc_eps = kc;
    const auto Z1 = z_at(v0 + dir_ * eps, kc_eps);
    if (!Z1 || Z1->real() == Z0.real()) {
      b.zone = true;
      return 0;
    }
    const double slope = (Z1->real() - Z0.real()) / eps;
    const double dist = -Z0.real() / slope;  // along the sweep direction
    if (!(dist > 0.0) || dist > remaining(v0)) {
      b.zone = true;
      return 0;
    }
    // Bracket the sign change of Re Z, tracking the critical point in small substeps.
    const double far = std::min(2.0 * dist, remaining(v0));
    double lo = 0.0, hi = 0.0;
    cplx kc_lo = kc, kc_walk = kc;
    bool bracketed = false;
    constexpr int kSub = 16;
    for (int i = 1; i <= kSub; ++i) {
      const double t = far * i / kSub;
      const auto Z = z_at(v0 + dir_ * t, kc_walk);
      if (!Z) break;
      if (std::signbit(Z->real()) != std::signbit(Z0.real())) {
        hi = t;
        bracketed = true;
        break;
      }
      lo = t;
      kc_lo = kc_walk;
    }
    if (!bracketed) {
      b.zone = true;
      return 0;
    }
    cplx kc_mid = kc_lo;
    cplx Zs = Z0;
    for (int it = 0; it < 100 && hi - lo > 1e-15 * std::max(1.0, std::abs(v0)); ++it) {
      const double mid = 0.5 * (lo + hi);
      cplx kk = kc_lo;
      const auto Z = z_at(v0 + dir_ * mid, kk);
      if (!Z) break;
      if (std::signbit(Z->real()) == std::signbit(Z0.real())) {
        lo = mid;
        kc_lo = kk;
      } else {
        hi = mid;
      }
      kc_mid = kk;
      Zs = *Z;
    }
    const double v_star = v0 + dir_ * 0.5 * (lo + hi);
    {
      cplx kk = kc_mid;
      const auto Z = z_at(v_star, kk);
      if (Z) {
        Zs = *Z;
        kc_mid = kk;
      }
    }
    if (std::abs(Zs) > 1e-8 / (base_.L * base_.L)) {
      b.zone = true;
      return 0;
    }

    // Genuine collision: step just past it and collect the emerging roots.
    cplx kp = kc_mid, km = kc_mid;
    const auto Zp = z_at(v_star + dir_ * eps, kp);
    const auto Zm = z_at(v_star - dir_ * eps, km);
    double dZ = (Zp && Zm) ? std::abs(*Zp - *Zm) / (2.0 * eps) : 0.0;
    if (!(dZ > 0.0)) dZ = 1.0;
    constexpr double kFan = 1e-3;
    double dv = std::min(kFan * kFan / dZ, remaining(v_star));
    const double v1 = v_star + dir_ * dv;
    const LassoParams q1 = at(v1);
    cplx kc1 = kc_mid;
    if (const auto c1 = critical(q1, kc_mid)) kc1 = c1->first;
    std::vector<cplx> roots;
    for (int j = 0; j < 8; ++j) {
      const cplx guess = kc1 + kFan / base_.L * std::exp(kI * (2.0 * kPi * j / 8.0 + 0.3));
      const auto r = newton(q1, guess, 80);
      if (!r || std::abs(*r - kc1) > 10.0 * kFan / base_.L) continue;
      bool dup = false;
      for (const auto& x : roots) dup = dup || std::abs(x - *r) < 1e-9 / base_.L;
      if (!dup) roots.push_back(*r);
    }
    if (roots.empty()) lost(b, "no root found around the crossing");
    std::sort(roots.begin(), roots.end(), [](cplx x, cplx y) {
      return x.real() != y.real() ? x.real() < y.real() : x.imag() > y.imag();
    });

    const CrossingEvent ev{v_star, kc_mid};
    b.traj.crossings.push_back(ev);
    b.traj.samples.push_back({v_star, make_pole(at(v_star), kc_mid)});

    CrossingRecord* rec = nullptr;
    for (auto& r : registry_)
      if (std::abs(r.param - v_star) < 1e-7 * std::max(1.0, range_) && std::abs(r.k - kc_mid) < 1e-5 / base_.L)
        rec = &r;
    if (!rec) {
      registry_.push_back({v_star, kc_mid, {}});
      rec = &registry_.back();
    }
    std::vector<cplx> free_roots;
    for (const auto& r : roots) {
      bool taken = false;
      for (const auto& c : rec->claimed) taken = taken || std::abs(c - r) < 1e-7 / base_.L;
      if (!taken) free_roots.push_back(r);
    }
    if (free_roots.empty()) return -1;
    for (const auto& r : free_roots) rec->claimed.push_back(r);

    for (std::size_t i = 1; i < free_roots.size(); ++i) {
      if (static_cast<int>(queue_.size()) >= sweep_.max_branches) break;
      Branch nb;
      nb.traj.param = sweep_.param;
      nb.traj.branch_id = static_cast<int>(queue_.size());
      nb.traj.parent_id = b.traj.branch_id;
      nb.traj.crossings.push_back(ev);
      nb.traj.samples.push_back({v_star, make_pole(at(v_star), kc_mid)});
      nb.v = v_star;
      nb.k = kc_mid;
      push(nb, v1, free_roots[i]);
      nb.have_prev = false;
      nb.zone = true;
      queue_.push_back(nb);
    }
    b.v = v_star;
    b.k = kc_mid;
    push(b, v1, free_roots[0]);
    b.have_prev = false;
    b.zone = true;
    return 1;
  }

  LassoParams base_;
  SweepSpec sweep_;
  double range_ = 0.0, dir_ = 1.0, nominal_ = 0.0, max_dk_ = 0.0, radius_ = 0.0;
  std::deque<Branch> queue_;
  std::deque<CrossingRecord> registry_;
  std::vector<Trajectory> done_;
};

}  // namespace

std::vector<Trajectory> trace_trajectories(const LassoParams& p, const SweepSpec& sweep,
                                           const std::vector<Pole>& seeds) {
  require_finite_coupling(p);
  if (!(std::isfinite(sweep.from) && std::isfinite(sweep.to))) throw InputError("sweep bounds must be finite");
  if (sweep.steps < 1) throw InputError("sweep needs at least one step");
  if (sweep.max_branches < 1) throw InputError("max_branches must be positive");
  if (seeds.empty()) throw InputError("no seed poles");
  Tracer tracer(p, sweep);
  return tracer.run(seeds);
}

std::vector<Trajectory> trace_trajectory(const LassoParams& p, const SweepSpec& sweep, const Pole& seed) {
  return trace_trajectories(p, sweep, {seed});
}

}  // namespace lasso
