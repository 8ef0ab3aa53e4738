#pragma once

#include <complex>
#include <functional>
#include <vector>

namespace lasso::quad {

/// Gauss-Legendre nodes and weights on [a, b].
struct Rule {
  std::vector<double> x;
  std::vector<double> w;
};

Rule gauss_legendre(int n, double a, double b);

struct Panel {
  double a = 0.0;
  double b = 0.0;
};

struct AdaptiveResult {
  std::complex<double> value;
  double error = 0.0;
  std::vector<Panel> panels;  ///< accepted panels, ascending
  int evaluations = 0;
};

/// Adaptive Gauss-Kronrod (7/15) on [a, b]. Throws NumericalError when the
/// panel budget is exhausted before the tolerance |err| <= max(abs_tol, rel_tol |I|) is met.
AdaptiveResult gauss_kronrod(const std::function<std::complex<double>(double)>& f, double a,
                             double b, double abs_tol, double rel_tol, int max_panels = 4000);

/// Kronrod 15-point abscissae mapped to [a, b] with weights.
Rule kronrod15(double a, double b);

}  // namespace lasso::quad
