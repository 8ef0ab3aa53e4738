#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "lasso/core.hpp"
#include "lasso/duality.hpp"
#include "lasso/graph_format.hpp"

using namespace lasso;
using std::numbers::pi;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_graph(text);
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

SourcePos pos_of(const std::string& text) {
  try {
    parse_graph(text);
  } catch (const ParseError& e) {
    return e.pos();
  }
  return {};
}

void check_same(const GraphSpec& a, const GraphSpec& b) {
  REQUIRE(a.vertices.size() == b.vertices.size());
  REQUIRE(a.links.size() == b.links.size());
  for (std::size_t i = 0; i < a.vertices.size(); ++i) {
    const auto &u = a.vertices[i], &v = b.vertices[i];
    CHECK(u.id == v.id);
    CHECK(u.alpha == v.alpha);
    CHECK(u.leads == v.leads);
    CHECK(u.alpha_ext == v.alpha_ext);
    CHECK(u.gamma == v.gamma);
    CHECK(u.omega == v.omega);
  }
  for (std::size_t i = 0; i < a.links.size(); ++i) {
    const auto &l = a.links[i], &m = b.links[i];
    CHECK(l.from == m.from);
    CHECK(l.to == m.to);
    CHECK(l.length == m.length);
    CHECK(l.phase == m.phase);
    REQUIRE(l.potential.size() == m.potential.size());
    for (std::size_t j = 0; j < l.potential.size(); ++j) {
      CHECK(l.potential[j].value == m.potential[j].value);
      CHECK(l.potential[j].width == m.potential[j].width);
    }
  }
}

std::string random_document(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nv(2, 6), coin(0, 1), leads(0, 2);
  std::uniform_real_distribution<double> u(0.0, 1.0), a(-3.0, 3.0), len(0.1, 3.0);
  const int n = nv(rng);
  std::ostringstream s;
  s.precision(17);
  bool any_lead = false;
  for (int i = 0; i < n; ++i) {
    s << "vertex v" << i;
    if (coin(rng)) s << " alpha=" << a(rng);
    int l = leads(rng);
    if (i == n - 1 && !any_lead) l = 1;
    any_lead = any_lead || l > 0;
    if (l > 0) s << " leads=" << l;
    if (l > 1 && coin(rng)) s << " alpha_ext=" << a(rng) << " gamma=" << a(rng);
    s << (coin(rng) ? "   # comment\n" : "\n");
  }
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<int> pick(0, i - 1);
    const double L = len(rng);
    s << "link v" << pick(rng) << " v" << i << " length=" << L;
    if (coin(rng)) s << " phase=" << a(rng);
    if (coin(rng)) {
      const double w = 0.1 + 0.8 * u(rng);
      s << " potential=" << a(rng) << ":" << w * L << "," << a(rng) << ":" << L - w * L;
    }
    s << "\n";
  }
  if (coin(rng)) s << "vertex b boundary omega=" << a(rng) << "\nlink v0 b length=" << len(rng) << "\n";
  if (coin(rng)) s << "link v1 v1 length=" << len(rng) << " phase=0.4\n";
  return s.str();
}

}  // namespace

TEST_CASE("lasso document reproduces the reflection amplitude") {
  const std::string text =
      "# magnetic lasso\n"
      "vertex J alpha=0.2 leads=1\n"
      "vertex X\n"
      "link J X length=0.5 phase=0.7\n"
      "link X J length=0.5\n";
  const auto g = parse_graph(text);
  const auto p = LassoParams::delta(1.0, 0.7, 0.2);
  for (double k : {0.4, 1.3, 3.3, 7.7}) CHECK(std::abs(smatrix(g, k).S(0, 0) - reflection(p, k)) < 1e-10);
}

TEST_CASE("empty documents have no vertices") {
  CHECK(error_of("").find("no vertices") != std::string::npos);
  CHECK(error_of("   \n# only a comment\n\n").find("no vertices") != std::string::npos);
}

TEST_CASE("unknown ids are reported with their line") {
  const std::string text = "vertex a leads=1\nvertex b\nlink a c length=1\n";
  const auto msg = error_of(text);
  CHECK(msg.find("'c'") != std::string::npos);
  CHECK(msg.find("line 3") != std::string::npos);
  const auto pos = pos_of(text);
  CHECK(pos.line == 3);
  CHECK(pos.column == 8);
}

TEST_CASE("syntax errors carry line and column") {
  struct Case {
    std::string text;
    int line, column;
  };
  const std::vector<Case> cases = {
      {"vertex a leads=1\nnode b\n", 2, 1},
      {"vertex a leads=one\n", 1, 16},
      {"vertex a leads=1\nvertex b\nlink a b length=-2\n", 3, 17},
      {"vertex a leads=1\nvertex b\nlink a b\n", 3, 1},
      {"vertex a leads=1 colour=red\n", 1, 18},
      {"vertex a leads=1\nvertex a\n", 2, 1},
      {"vertex a alpha=1 alpha=2 leads=1\n", 1, 18},
      {"vertex a leads=1\nvertex b\nlink a b length=1 potential=1:0.5\n", 3, 1},
      {"vertex a leads=1\nvertex b boundary\nlink a b length=1\n", 2, 1},
      {"vertex a leads=1 alpha_ext=2\n", 1, 1},
  };
  for (const auto& c : cases) {
    INFO(c.text);
    CHECK_THROWS_AS(parse_graph(c.text), ParseError);
    const auto p = pos_of(c.text);
    CHECK(p.line == c.line);
    CHECK(p.column == c.column);
    CHECK(error_of(c.text).find("line " + std::to_string(c.line)) == 0);
  }
}

TEST_CASE("whitespace and comments are insignificant") {
  const auto a = parse_graph("vertex J alpha=0.2 leads=1\nvertex X\nlink J X length=1 potential=1:0.25,2:0.75\n");
  const auto b = parse_graph(
      "\n  vertex   J alpha = 0.2\tleads= 1   # lead here\n"
      "vertex X\n\n"
      "link J X   length =1 potential=1:0.25, 2:0.75\n");
  check_same(a, b);
}

TEST_CASE("boundary vertices and bundles parse") {
  const auto g = parse_graph(
      "vertex J alpha=-0.5 leads=2 alpha_ext=1.5 gamma=0.25\n"
      "vertex B boundary omega=1.5707963267948966\n"
      "link J B length=0.9\n");
  REQUIRE(g.vertices.size() == 2);
  CHECK(g.vertices[0].alpha_ext == 1.5);
  CHECK(g.vertices[0].gamma == 0.25);
  CHECK(g.vertices[1].is_boundary());
  CHECK(*g.vertices[1].omega == doctest::Approx(pi / 2));
  CHECK(smatrix(g, 1.1).unitarity_residual < 1e-12);
}

TEST_CASE("property: printing and parsing round-trips") {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 200; ++trial) {
    const std::string text = random_document(rng);
    INFO(text);
    const auto g = parse_graph(text);
    const std::string printed = print_graph(g);
    const auto h = parse_graph(printed);
    check_same(g, h);
    CHECK(print_graph(h) == printed);
  }
}

TEST_CASE("self-loops in a document are split") {
  const auto g = parse_graph("vertex J alpha=0.2 leads=1\nlink J J length=1 phase=0.7\n");
  CHECK(g.vertices.size() == 3);
  const auto p = LassoParams::delta(1.0, 0.7, 0.2);
  CHECK(std::abs(smatrix(g, 2.1).S(0, 0) - reflection(p, 2.1)) < 1e-10);
}
