#include "lasso/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <sstream>

#include "lasso/errors.hpp"

namespace lasso::quad {

namespace {

constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b;
  std::complex<double> value;
  double error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

Segment gk15(const std::function<std::complex<double>(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const std::complex<double> fc = f(c);
  std::complex<double> kron = fc * kWgk[7];
  std::complex<double> gauss = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const std::complex<double> s = f(c - dx) + f(c + dx);
    kron += kWgk[j] * s;
    if (j % 2 == 1) gauss += kWg[j / 2] * s;
  }
  return {a, b, kron * h, std::abs((kron - gauss) * h)};
}

}  // namespace

Rule gauss_legendre(int n, double a, double b) {
  Rule r;
  r.x.resize(n);
  r.w.resize(n);
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    r.x[i] = c - h * z;
    r.x[n - 1 - i] = c + h * z;
    r.w[i] = r.w[n - 1 - i] = h * w;
  }
  return r;
}

Rule kronrod15(double a, double b) {
  Rule r;
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  for (int j = 0; j < 7; ++j) {
    r.x.push_back(c - h * kXgk[j]);
    r.w.push_back(h * kWgk[j]);
  }
  r.x.push_back(c);
  r.w.push_back(h * kWgk[7]);
  for (int j = 6; j >= 0; --j) {
    r.x.push_back(c + h * kXgk[j]);
    r.w.push_back(h * kWgk[j]);
  }
  return r;
}

AdaptiveResult gauss_kronrod(const std::function<std::complex<double>(double)>& f, double a,
                             double b, double abs_tol, double rel_tol, int max_panels) {
  std::priority_queue<Segment> heap;
  Segment first = gk15(f, a, b);
  heap.push(first);
  std::complex<double> total = first.value;
  double err = first.error;
  int evals = 15;
  while (err > std::max(abs_tol, rel_tol * std::abs(total))) {
    if (static_cast<int>(heap.size()) >= max_panels) {
      std::ostringstream msg;
      msg << "adaptive quadrature on [" << a << ", " << b << "] stalled at " << heap.size()
          << " panels, error estimate " << err;
      throw NumericalError(msg.str());
    }
    Segment s = heap.top();
    heap.pop();
    const double m = 0.5 * (s.a + s.b);
    Segment l = gk15(f, s.a, m);
    Segment r = gk15(f, m, s.b);
    evals += 30;
    total += l.value + r.value - s.value;
    err += l.error + r.error - s.error;
    heap.push(l);
    heap.push(r);
  }
  AdaptiveResult out;
  out.evaluations = evals;
  out.value = 0.0;
  out.error = 0.0;
  while (!heap.empty()) {
    const Segment& s = heap.top();
    out.value += s.value;
    out.error += s.error;
    out.panels.push_back({s.a, s.b});
    heap.pop();
  }
  std::sort(out.panels.begin(), out.panels.end(), [](const Panel& x, const Panel& y) { return x.a < y.a; });
  return out;
}

}  // namespace lasso::quad
