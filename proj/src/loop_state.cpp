#include "lasso/loop_state.hpp"

#include <algorithm>
#include <cmath>

namespace lasso {

namespace {

constexpr cplx kI{0.0, 1.0};

void require_length(double L) {
  if (!(std::isfinite(L) && L > 0.0)) throw InputError("loop length must be positive");
}

}  // namespace

cplx exp_integral(cplx w, double L) {
  const cplx z = 0.5 * w * L;
  cplx sinc;
  if (std::abs(z) < 1e-4) {
    const cplx z2 = z * z;
    sinc = 1.0 - z2 / 6.0 + z2 * z2 / 120.0;
  } else {
    sinc = std::sin(z) / z;
  }
  return L * std::exp(kI * z) * sinc;
}

LoopState LoopState::exponential_sum(double L, std::vector<cplx> coeffs, std::vector<double> freqs) {
  require_length(L);
  if (coeffs.size() != freqs.size() || coeffs.empty())
    throw InputError("exponential sum needs matching, non-empty coefficient and frequency lists");
  for (std::size_t i = 0; i < coeffs.size(); ++i)
    if (!std::isfinite(freqs[i]) || !std::isfinite(std::abs(coeffs[i])))
      throw InputError("exponential sum entries must be finite");
  LoopState s;
  s.L_ = L;
  s.coeffs_ = std::move(coeffs);
  s.freqs_ = std::move(freqs);
  return s;
}

LoopState LoopState::winding(double L, int n) {
  require_length(L);
  return exponential_sum(L, {1.0 / std::sqrt(L)}, {2.0 * std::numbers::pi * n / L});
}

LoopState LoopState::sine_mode(double L, int n) {
  require_length(L);
  if (n < 1) throw InputError("sine mode index must be >= 1");
  const double q = n * std::numbers::pi / L;
  const cplx c = std::sqrt(2.0 / L) / (2.0 * kI);
  return exponential_sum(L, {c, -c}, {q, -q});
}

LoopState LoopState::sampled(double L, std::vector<cplx> samples) {
  require_length(L);
  if (samples.size() < 3) throw InputError("a sampled loop state needs at least 3 samples");
  for (const auto& v : samples)
    if (!std::isfinite(std::abs(v))) throw InputError("loop state samples must be finite");
  LoopState s;
  s.L_ = L;
  s.samples_ = std::move(samples);
  return s;
}

cplx LoopState::value(double x) const {
  if (!is_sampled()) {
    cplx v = 0.0;
    for (std::size_t j = 0; j < coeffs_.size(); ++j) v += coeffs_[j] * std::exp(kI * freqs_[j] * x);
    return v;
  }
  const double h = L_ / static_cast<double>(samples_.size() - 1);
  const double t = std::clamp(x / h, 0.0, static_cast<double>(samples_.size() - 1));
  const std::size_t i = std::min(static_cast<std::size_t>(t), samples_.size() - 2);
  const double f = t - static_cast<double>(i);
  return (1.0 - f) * samples_[i] + f * samples_[i + 1];
}

cplx LoopState::wavefunction(const LassoParams& p, double x) const {
  return std::exp(-kI * p.vector_potential() * x) * value(x);
}

cplx LoopState::overlap_exp(cplx w) const {
  cplx acc = 0.0;
  if (!is_sampled()) {
    for (std::size_t j = 0; j < coeffs_.size(); ++j) acc += std::conj(coeffs_[j]) * exp_integral(w - freqs_[j], L_);
    return acc;
  }
  const std::size_t n = samples_.size();
  const double h = L_ / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double wt = (i == 0 || i + 1 == n) ? 0.5 * h : h;
    acc += wt * std::conj(samples_[i]) * std::exp(kI * w * (h * static_cast<double>(i)));
  }
  return acc;
}

cplx LoopState::inner(const LoopState& other) const {
  if (std::abs(other.L_ - L_) > 1e-12 * L_) throw InputError("loop states live on loops of different length");
  if (!other.is_sampled()) {
    cplx acc = 0.0;
    for (std::size_t j = 0; j < other.coeffs_.size(); ++j) acc += other.coeffs_[j] * overlap_exp(other.freqs_[j]);
    return acc;
  }
  if (!is_sampled()) return std::conj(other.inner(*this));
  if (other.samples_.size() != samples_.size())
    throw InputError("sampled loop states must share the same grid");
  const std::size_t n = samples_.size();
  const double h = L_ / static_cast<double>(n - 1);
  cplx acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wt = (i == 0 || i + 1 == n) ? 0.5 * h : h;
    acc += wt * std::conj(samples_[i]) * other.samples_[i];
  }
  return acc;
}

double LoopState::norm2() const { return inner(*this).real(); }

LoopState LoopState::normalized() const {
  const double n2 = norm2();
  if (!(n2 > 0.0)) throw InputError("cannot normalize a zero loop state");
  return scaled(1.0 / std::sqrt(n2));
}

LoopState LoopState::scaled(cplx s) const {
  LoopState r = *this;
  for (auto& c : r.coeffs_) c *= s;
  for (auto& v : r.samples_) v *= s;
  return r;
}

LoopState LoopState::plus(const LoopState& other) const {
  if (std::abs(other.L_ - L_) > 1e-12 * L_) throw InputError("loop states live on loops of different length");
  if (!is_sampled() && !other.is_sampled()) {
    LoopState r = *this;
    r.coeffs_.insert(r.coeffs_.end(), other.coeffs_.begin(), other.coeffs_.end());
    r.freqs_.insert(r.freqs_.end(), other.freqs_.begin(), other.freqs_.end());
    return r;
  }
  const int n = static_cast<int>(is_sampled() ? samples_.size() : other.samples_.size());
  const LoopState a = is_sampled() ? *this : to_sampled(n);
  const LoopState b = other.is_sampled() ? other : other.to_sampled(n);
  if (a.samples_.size() != b.samples_.size()) throw InputError("sampled loop states must share the same grid");
  LoopState r = a;
  for (std::size_t i = 0; i < r.samples_.size(); ++i) r.samples_[i] += b.samples_[i];
  return r;
}

LoopState LoopState::reflected() const {
  LoopState r = *this;
  if (is_sampled()) {
    std::reverse(r.samples_.begin(), r.samples_.end());
    return r;
  }
  for (std::size_t j = 0; j < coeffs_.size(); ++j) {
    r.coeffs_[j] = coeffs_[j] * std::exp(kI * freqs_[j] * L_);
    r.freqs_[j] = -freqs_[j];
  }
  return r;
}

double LoopState::max_wavenumber() const {
  if (is_sampled()) return std::numbers::pi * static_cast<double>(samples_.size() - 1) / L_;
  double q = 0.0;
  for (double f : freqs_) q = std::max(q, std::abs(f));
  return q;
}

LoopState LoopState::to_sampled(int n) const {
  if (n < 3) throw InputError("a sampled loop state needs at least 3 samples");
  if (is_sampled()) {
    if (static_cast<int>(samples_.size()) == n) return *this;
    throw InputError("resampling a sampled loop state is not supported");
  }
  std::vector<cplx> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = value(L_ * i / (n - 1));
  return sampled(L_, std::move(v));
}

}  // namespace lasso
