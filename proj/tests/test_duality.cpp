#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "lasso/core.hpp"
#include "lasso/duality.hpp"
#include "lasso/errors.hpp"

using namespace lasso;
using std::numbers::pi;
constexpr cplx I{0.0, 1.0};

namespace {

VertexSpec vertex(const std::string& id, double alpha, int leads = 0) {
  VertexSpec v;
  v.id = id;
  v.alpha = alpha;
  v.leads = leads;
  return v;
}

LinkSpec link(std::size_t a, std::size_t b, double length, double phase = 0.0) {
  LinkSpec l;
  l.from = a;
  l.to = b;
  l.length = length;
  l.phase = phase;
  return l;
}

// Connected random graph with real couplings.
GraphSpec random_graph(std::mt19937_64& rng, int max_vertices, int max_links, int max_leads, bool ideal = false) {
  std::uniform_int_distribution<int> nv(2, max_vertices);
  std::uniform_real_distribution<double> len(0.3, 2.0), ph(-pi, pi), a(-2.0, 2.0), u(0.0, 1.0);
  GraphSpec g;
  const int n = nv(rng);
  for (int i = 0; i < n; ++i) g.vertices.push_back(vertex("v" + std::to_string(i), ideal ? 0.0 : a(rng)));
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<int> pick(0, i - 1);
    g.links.push_back(link(static_cast<std::size_t>(pick(rng)), static_cast<std::size_t>(i), len(rng), ph(rng)));
  }
  std::uniform_int_distribution<int> any(0, n - 1);
  while (static_cast<int>(g.links.size()) < max_links && u(rng) < 0.6)
    g.links.push_back(link(static_cast<std::size_t>(any(rng)), static_cast<std::size_t>(any(rng)), len(rng), ph(rng)));
  if (!ideal) {
    for (auto& l : g.links)
      if (u(rng) < 0.3) {
        const double w = u(rng) * 0.8 + 0.1;
        l.potential = {{a(rng), w * l.length}, {a(rng), (1 - w) * l.length}};
      }
  }
  int leads = 0;
  std::uniform_int_distribution<int> nl(1, max_leads);
  const int want = ideal ? std::min(nl(rng), n) : nl(rng);
  while (leads < want) {
    auto& v = g.vertices[static_cast<std::size_t>(any(rng))];
    if (ideal && v.leads > 0) continue;
    v.leads += 1;
    ++leads;
  }
  if (!ideal) {
    for (auto& v : g.vertices)
      if (v.leads > 1 && u(rng) < 0.5) {
        v.alpha_ext = a(rng);
        v.gamma = a(rng);
      }
  }
  return g;
}

GraphSpec stub(double alpha, double length, double omega) {
  GraphSpec g;
  g.vertices.push_back(vertex("J", alpha, 1));
  VertexSpec b;
  b.id = "B";
  b.omega = omega;
  g.vertices.push_back(b);
  g.links.push_back(link(1, 0, length));
  return g;
}

}  // namespace

TEST_CASE("Dirichlet data of a free link") {
  LinkSpec l = link(0, 1, 1.0);
  const auto d = dirichlet_data(l, pi / 2);
  CHECK(std::abs(d.vl - cplx(2 / pi)) < 1e-14);
  CHECK(std::abs(d.W - cplx(-2 / pi)) < 1e-14);
  CHECK(std::abs(d.u0 - d.W) < 1e-14);
  for (double len : {0.3, 1.1, 2.7})
    for (double k : {0.4, 1.9, 7.3}) {
      l.length = len;
      CHECK(std::abs(dirichlet_data(l, k).W - cplx(-std::sin(k * len) / k)) < 1e-13);
    }
}

TEST_CASE("constant potential shifts the effective momentum") {
  LinkSpec l = link(0, 1, 1.0);
  const double k = 4.0;
  l.potential = {{k * k - pi * pi, 1.0}};
  CHECK(std::abs(dirichlet_data(l, k).W) < 1e-13);
  l.potential = {{1.5, 0.4}, {1.5, 0.6}};
  LinkSpec one = link(0, 1, 1.0);
  one.potential = {{1.5, 1.0}};
  const auto a = dirichlet_data(l, 2.2), b = dirichlet_data(one, 2.2);
  CHECK(std::abs(a.W - b.W) < 1e-13);
  CHECK(std::abs(a.dvl - b.dvl) < 1e-13);
  // Below the barrier top the solution is evanescent.
  one.potential = {{9.0, 1.0}};
  const double q = std::sqrt(9.0 - 4.0);
  CHECK(std::abs(dirichlet_data(one, 2.0).W - cplx(-std::sinh(q) / q)) < 1e-12);
}

TEST_CASE("lasso graph reproduces the closed-form reflection") {
  const auto p = LassoParams::delta(1.0, 0.7, 0.2);
  const auto g = lasso_as_graph(p);
  CHECK(std::abs(smatrix(g, 1.3).S(0, 0) - reflection(p, 1.3)) < 1e-10);
  double worst = 0.0;
  for (int i = 1; i <= 100; ++i) {
    const double k = 0.05 + 0.123 * i;
    worst = std::max(worst, std::abs(smatrix(g, k).S(0, 0) - reflection(p, k)));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("self-loop input is split automatically") {
  const auto p = LassoParams::delta(1.0, 0.7, 0.2);
  GraphSpec g;
  g.vertices.push_back(vertex("J", 0.2, 1));
  g.links.push_back(link(0, 0, 1.0, 0.7));
  const auto n = normalize_graph(g);
  CHECK(n.vertices.size() == 3);
  CHECK(n.links.size() == 3);
  for (double k : {0.7, 2.5, 5.1}) CHECK(std::abs(smatrix(g, k).S(0, 0) - reflection(p, k)) < 1e-10);
}

TEST_CASE("loop flux is all that matters") {
  const double Phi = 1.1, k = 2.3;
  GraphSpec g;
  g.vertices = {vertex("J", 0.4, 1), vertex("A", 0.0), vertex("B", 0.0)};
  g.links = {link(0, 1, 0.3, 0.2), link(1, 2, 0.5, 0.5), link(2, 0, 0.2, Phi - 0.7)};
  GraphSpec h = g;
  h.links[0].phase = Phi;
  h.links[1].phase = 0.0;
  h.links[2].phase = 0.0;
  const cplx expected = reflection(LassoParams::delta(1.0, Phi, 0.4), k);
  CHECK(std::abs(smatrix(g, k).S(0, 0) - expected) < 1e-10);
  CHECK(std::abs(smatrix(h, k).S(0, 0) - expected) < 1e-10);
}

TEST_CASE("Dirichlet stub") {
  for (double alpha : {-1.0, 0.0, 0.8})
    for (double k : {0.7, 1.9, 4.4}) {
      const double len = 0.9;
      const auto r = smatrix(stub(alpha, len, 0.0), k);
      const double cot = 1.0 / std::tan(k * len);
      const cplx expected = -(alpha + k * cot + I * k) / (alpha + k * cot - I * k);
      CHECK(std::abs(r.S(0, 0) - expected) < 1e-11);
      CHECK(std::abs(std::abs(r.S(0, 0)) - 1.0) < 1e-12);
    }
}

TEST_CASE("Neumann stub") {
  const double len = 0.9, alpha = 0.3, k = 1.4;
  const auto r = smatrix(stub(alpha, len, pi / 2), k);
  const double t = std::tan(k * len);
  const cplx expected = -(alpha - k * t + I * k) / (alpha - k * t - I * k);
  CHECK(std::abs(r.S(0, 0) - expected) < 1e-11);
}

TEST_CASE("two leads at a single vertex transmit fully") {
  GraphSpec g;
  g.vertices.push_back(vertex("J", 0.0, 2));
  const auto r = smatrix(g, 1.7);
  CHECK(std::abs(r.S(0, 0)) < 1e-14);
  CHECK(std::abs(r.S(1, 1)) < 1e-14);
  CHECK(std::abs(r.S(0, 1) - 1.0) < 1e-14);
  CHECK(std::abs(r.S(1, 0) - 1.0) < 1e-14);
}

TEST_CASE("reciprocity on a chain") {
  GraphSpec g;
  g.vertices = {vertex("a", 0.3, 1), vertex("b", -0.7), vertex("c", 1.2, 1)};
  g.links = {link(0, 1, 0.8), link(1, 2, 1.3)};
  const auto r = smatrix(g, 2.0);
  CHECK((r.S - r.S.transpose()).norm() < 1e-12);
  CHECK(r.reciprocity_residual < 1e-12);
  CHECK(r.unitarity_residual < 1e-12);
}

TEST_CASE("property: unitarity on random graphs") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> kd(0.3, 6.0);
  int checked = 0;
  for (int seed = 0; seed < 100; ++seed) {
    const auto g = random_graph(rng, 6, 8, 3);
    const double k = kd(rng);
    try {
      const auto r = smatrix(g, k);
      CHECK(r.unitarity_residual < 1e-12);
      ++checked;
    } catch (const DirichletSpectrumError&) {
    }
  }
  CHECK(checked > 90);
}

TEST_CASE("property: lead permutation conjugates S") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = random_graph(rng, 5, 7, 3, true);
    GraphSpec h = g;
    std::reverse(h.vertices.begin(), h.vertices.end());
    const std::size_t n = g.vertices.size();
    for (auto& l : h.links) {
      l.from = n - 1 - l.from;
      l.to = n - 1 - l.to;
    }
    const auto a = smatrix(g, 1.3), b = smatrix(h, 1.3);
    const auto m = a.S.rows();
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) CHECK(std::abs(a.S(i, j) - b.S(m - 1 - i, m - 1 - j)) < 1e-10);
  }
}

TEST_CASE("property: gauge transformations conjugate S by lead phases") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> th(-pi, pi);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = random_graph(rng, 5, 7, 3);
    std::vector<double> theta(g.vertices.size());
    for (auto& t : theta) t = th(rng);
    GraphSpec h = g;
    for (auto& l : h.links) l.phase += theta[l.to] - theta[l.from];
    try {
      const auto a = smatrix(g, 1.1), b = smatrix(h, 1.1);
      const auto ch = channels(normalize_graph(g));
      for (std::size_t i = 0; i < ch.size(); ++i)
        for (std::size_t j = 0; j < ch.size(); ++j) {
          const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
          CHECK(std::abs(std::abs(a.S(ii, jj)) - std::abs(b.S(ii, jj))) < 1e-10);
          const double d = theta[ch[i].vertex] - theta[ch[j].vertex];
          const bool plus = std::abs(b.S(ii, jj) - a.S(ii, jj) * std::exp(I * d)) < 1e-10;
          const bool minus = std::abs(b.S(ii, jj) - a.S(ii, jj) * std::exp(-I * d)) < 1e-10;
          CHECK((plus || minus));
        }
    } catch (const DirichletSpectrumError&) {
    }
  }
}

TEST_CASE("ideal coupling through the graph operator h") {
  const auto p = LassoParams::delta(1.0, 0.9, 0.0);
  const auto g = lasso_as_graph(p);
  for (double k : {0.8, 2.2, 3.9}) {
    const auto h = graph_operator_h(g, k);
    REQUIRE(h.rows() == 1);
    const cplx expected = 2 * k * (std::cos(k) - std::cos(0.9)) / std::sin(k);
    CHECK(std::abs(h(0, 0) - expected) < 1e-10);
    CHECK(std::abs(ideal_smatrix_via_h(g, k).S(0, 0) - reflection(p, k)) < 1e-10);
  }
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    GraphSpec r = random_graph(rng, 4, 6, 4, true);
    for (auto& v : r.vertices) v.leads = 1;
    const auto h = graph_operator_h(r, 1.7);
    CHECK((h - h.adjoint()).norm() < 1e-10 * std::max(1.0, h.norm()));
    CHECK((ideal_smatrix_via_h(r, 1.7).S - smatrix(r, 1.7).S).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("bundle with alpha_ext = alpha and gamma = 1 / alpha acts as a plain delta vertex") {
  const double alpha = 0.6;
  const auto p = LassoParams::delta(1.0, 0.5, alpha);
  GraphSpec g = lasso_as_graph(p);
  g.vertices[0].alpha_ext = alpha;
  g.vertices[0].gamma = 1.0 / alpha;
  for (double k : {0.9, 2.7, 5.3}) CHECK(std::abs(smatrix(g, k).S(0, 0) - reflection(p, k)) < 1e-10);
}

TEST_CASE("errors") {
  const auto g = lasso_as_graph(LassoParams::delta(1.0, 0.3, 0.0));
  CHECK_THROWS_AS(smatrix(g, 2 * pi), DirichletSpectrumError);
  GraphSpec bad;
  CHECK_THROWS_AS(validate_graph(bad), InputError);
  bad.vertices = {vertex("a", 0, 1), vertex("b", 0)};
  CHECK_THROWS_AS(validate_graph(bad), InputError);  // disconnected
  bad.links = {link(0, 1, -1.0)};
  CHECK_THROWS_AS(validate_graph(bad), InputError);
  bad.links = {link(0, 1, 1.0)};
  bad.links[0].potential = {{1.0, 0.5}};
  CHECK_THROWS_AS(validate_graph(bad), InputError);
  GraphSpec bv = stub(0.0, 1.0, 0.0);
  bv.vertices[1].alpha = 1.0;
  CHECK_THROWS_AS(validate_graph(bv), InputError);
}
