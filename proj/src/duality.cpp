#include "lasso/duality.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace lasso {

namespace {

constexpr cplx kI{0.0, 1.0};
constexpr double kRcondFloor = 1e-13;

cplx sinc(cplx z) {
  if (std::abs(z) < 1e-4) {
    const cplx z2 = z * z;
    return 1.0 - z2 / 6.0 + z2 * z2 / 120.0;
  }
  return std::sin(z) / z;
}

using Mat2 = Eigen::Matrix2cd;

Mat2 transfer_matrix(const LinkSpec& link, cplx k) {
  Mat2 T = Mat2::Identity();
  auto apply = [&](double V, double w) {
    const cplx q = std::sqrt(k * k - V);
    const cplx c = std::cos(q * w);
    const cplx s = w * sinc(q * w);  // sin(qw)/q
    Mat2 seg;
    seg << c, s, -q * q * s, c;
    T = seg * T;
  };
  if (link.potential.empty()) {
    apply(0.0, link.length);
  } else {
    for (const auto& seg : link.potential) apply(seg.value, seg.width);
  }
  return T;
}

std::string vertex_name(const GraphSpec& g, std::size_t i) {
  return g.vertices[i].id.empty() ? "#" + std::to_string(i) : g.vertices[i].id;
}

LinkSpec reversed(const LinkSpec& l) {
  LinkSpec r = l;
  std::swap(r.from, r.to);
  r.phase = -l.phase;
  std::reverse(r.potential.begin(), r.potential.end());
  return r;
}

// Splits a link at fraction t of its length.
std::pair<LinkSpec, LinkSpec> split_link(const LinkSpec& l, double t, std::size_t mid) {
  LinkSpec a = l, b = l;
  a.to = mid;
  b.from = mid;
  a.length = t * l.length;
  b.length = l.length - a.length;
  a.phase = t * l.phase;
  b.phase = l.phase - a.phase;
  a.potential.clear();
  b.potential.clear();
  if (!l.potential.empty()) {
    double pos = 0.0;
    const double cut = a.length;
    for (const auto& seg : l.potential) {
      const double lo = pos, hi = pos + seg.width;
      if (hi <= cut) {
        a.potential.push_back(seg);
      } else if (lo >= cut) {
        b.potential.push_back(seg);
      } else {
        a.potential.push_back({seg.value, cut - lo});
        b.potential.push_back({seg.value, hi - cut});
      }
      pos = hi;
    }
    // Absorb rounding so that widths sum to the new lengths exactly.
    auto fix = [](LinkSpec& x) {
      double sum = 0.0;
      for (std::size_t i = 0; i + 1 < x.potential.size(); ++i) sum += x.potential[i].width;
      x.potential.back().width = x.length - sum;
    };
    fix(a);
    fix(b);
  }
  return {a, b};
}

// Per-vertex contributions of the internal links to the outward derivative sums:
// S_int(j) = sum_n C(j, n) psi_n, with boundary links folded into the diagonal.
Eigen::MatrixXcd link_matrix(const GraphSpec& g, cplx k) {
  const std::size_t n = g.vertices.size();
  Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(n, n);
  for (std::size_t li = 0; li < g.links.size(); ++li) {
    LinkSpec link = g.links[li];
    const bool from_b = g.vertices[link.from].is_boundary();
    const bool to_b = g.vertices[link.to].is_boundary();
    if (from_b || to_b) {
      if (to_b) link = reversed(link);
      const DirichletData d = dirichlet_data_boundary(link, *g.vertices[link.from].omega, k);
      if (std::abs(d.W) < 1e-13 * std::max(1.0, std::abs(d.dvl))) {
        std::ostringstream msg;
        msg << "k lies in the Dirichlet spectrum: Wronskian vanishes on the boundary link at "
            << vertex_name(g, link.to);
        throw DirichletSpectrumError(msg.str());
      }
      C(link.to, link.to) += d.dvl / d.W;
      continue;
    }
    const DirichletData d = dirichlet_data(link, k);
    const double scale = std::max({1.0, std::abs(d.du0), std::abs(d.dvl)});
    if (std::abs(d.W) < 1e-13 * scale) {
      std::ostringstream msg;
      msg << "k lies in the Dirichlet spectrum: Wronskian vanishes on link "
          << vertex_name(g, link.from) << " - " << vertex_name(g, link.to);
      throw DirichletSpectrumError(msg.str());
    }
    const cplx e = std::exp(kI * link.phase);
    const std::size_t a = link.from, b = link.to;
    C(a, a) += d.du0 / d.W;
    C(a, b) += -e / d.W;
    C(b, a) += -1.0 / (e * d.W);
    C(b, b) += d.dvl / d.W;
  }
  return C;
}

double frobenius(const Eigen::MatrixXcd& m) { return m.norm(); }

void fill_diagnostics(SMatrixResult& r) {
  const Eigen::Index n = r.S.rows();
  r.unitarity_residual = frobenius(r.S.adjoint() * r.S - Eigen::MatrixXcd::Identity(n, n));
  r.reciprocity_residual = frobenius(r.S - r.S.transpose());
}

}  // namespace

std::size_t GraphSpec::lead_count() const {
  std::size_t n = 0;
  for (const auto& v : vertices) n += static_cast<std::size_t>(std::max(v.leads, 0));
  return n;
}

void validate_graph(const GraphSpec& g) {
  if (g.vertices.empty()) throw InputError("graph has no vertices");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < g.vertices.size(); ++i) {
    const auto& v = g.vertices[i];
    if (!v.id.empty() && !ids.insert(v.id).second) throw InputError("duplicate vertex id '" + v.id + "'");
    if (v.leads < 0) throw InputError("vertex '" + vertex_name(g, i) + "' has a negative lead count");
    auto finite = [&](const std::optional<double>& x, const char* what) {
      if (x && !std::isfinite(*x))
        throw InputError(std::string(what) + " of vertex '" + vertex_name(g, i) + "' must be finite");
    };
    finite(v.alpha, "alpha");
    finite(v.alpha_ext, "alpha_ext");
    finite(v.gamma, "gamma");
    finite(v.omega, "omega");
    if (v.is_boundary() && (v.alpha || v.leads > 0 || v.has_bundle()))
      throw InputError("boundary vertex '" + vertex_name(g, i) + "' cannot carry alpha, leads or bundle fields");
    if (v.has_bundle() && !(v.alpha_ext && v.gamma))
      throw InputError("vertex '" + vertex_name(g, i) + "': alpha_ext and gamma must be given together");
    if (v.has_bundle() && v.leads == 0)
      throw InputError("vertex '" + vertex_name(g, i) + "': bundle coupling requires leads > 0");
  }

  std::vector<int> degree(g.vertices.size(), 0);
  for (const auto& l : g.links) {
    if (l.from >= g.vertices.size() || l.to >= g.vertices.size())
      throw InputError("link references an undefined vertex");
    if (!(std::isfinite(l.length) && l.length > 0.0)) throw InputError("link length must be positive");
    if (!std::isfinite(l.phase)) throw InputError("link phase must be finite");
    if (!l.potential.empty()) {
      double sum = 0.0;
      for (const auto& s : l.potential) {
        if (!(s.width > 0.0) || !std::isfinite(s.width)) throw InputError("potential widths must be positive");
        if (!std::isfinite(s.value)) throw InputError("potential values must be finite");
        sum += s.width;
      }
      if (std::abs(sum - l.length) > 1e-9 * l.length)
        throw InputError("potential widths do not sum to the link length");
    }
    ++degree[l.from];
    ++degree[l.to];
    if (g.vertices[l.from].is_boundary() && g.vertices[l.to].is_boundary())
      throw InputError("a link cannot join two boundary vertices");
  }
  for (std::size_t i = 0; i < g.vertices.size(); ++i) {
    if (g.vertices[i].is_boundary() && degree[i] != 1)
      throw InputError("boundary vertex '" + vertex_name(g, i) + "' must have exactly one link");
  }

  // Connectivity.
  std::vector<std::size_t> parent(g.vertices.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& l : g.links) parent[find(l.from)] = find(l.to);
  for (std::size_t i = 1; i < g.vertices.size(); ++i)
    if (find(i) != find(0)) throw InputError("graph is not connected (vertex '" + vertex_name(g, i) + "')");
}

GraphSpec normalize_graph(const GraphSpec& g) {
  GraphSpec out;
  out.vertices = g.vertices;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  int aux = 0;
  auto new_vertex = [&]() {
    VertexSpec v;
    v.id = "~split" + std::to_string(aux++);
    v.alpha = 0.0;
    out.vertices.push_back(v);
    return out.vertices.size() - 1;
  };
  for (const auto& l : g.links) {
    if (l.from == l.to) {
      const std::size_t m1 = new_vertex();
      const std::size_t m2 = new_vertex();
      auto [a, rest] = split_link(l, 1.0 / 3.0, m1);
      rest.from = m1;
      auto [b, c] = split_link(rest, 0.5, m2);
      out.links.push_back(a);
      out.links.push_back(b);
      out.links.push_back(c);
      seen.insert({std::min(l.from, m1), std::max(l.from, m1)});
      seen.insert({std::min(l.from, m2), std::max(l.from, m2)});
      seen.insert({m1, m2});
      continue;
    }
    const auto key = std::make_pair(std::min(l.from, l.to), std::max(l.from, l.to));
    if (seen.insert(key).second) {
      out.links.push_back(l);
      continue;
    }
    const std::size_t m = new_vertex();
    auto [a, b] = split_link(l, 0.5, m);
    out.links.push_back(a);
    out.links.push_back(b);
    seen.insert({std::min(l.from, m), std::max(l.from, m)});
    seen.insert({std::min(l.to, m), std::max(l.to, m)});
  }
  return out;
}

std::vector<Channel> channels(const GraphSpec& g) {
  std::vector<Channel> out;
  for (std::size_t i = 0; i < g.vertices.size(); ++i)
    for (int m = 0; m < g.vertices[i].leads; ++m) out.push_back({i, m});
  return out;
}

DirichletData dirichlet_data(const LinkSpec& link, cplx k) {
  if (k == cplx(0.0, 0.0)) throw InputError("Dirichlet data require k != 0");
  const Mat2 T = transfer_matrix(link, k);
  DirichletData d;
  d.u0 = -T(0, 1);
  d.du0 = T(0, 0);
  d.vl = T(0, 1);
  d.dvl = T(1, 1);
  d.W = d.u0;
  return d;
}

DirichletData dirichlet_data_boundary(const LinkSpec& link, double omega, cplx k) {
  DirichletData d = dirichlet_data(link, k);
  const Mat2 T = transfer_matrix(link, k);
  const Eigen::Vector2cd v = T * Eigen::Vector2cd(std::sin(omega), -std::cos(omega));
  d.vl = v(0);
  d.dvl = v(1);
  d.W = -d.u0 * std::cos(omega) - d.du0 * std::sin(omega);
  return d;
}

LinearSystem assemble_system(const GraphSpec& g, cplx k, const Eigen::MatrixXcd& incoming) {
  const auto ch = channels(g);
  if (static_cast<std::size_t>(incoming.rows()) != ch.size())
    throw InputError("incoming amplitude vector has the wrong dimension");

  const Eigen::MatrixXcd C = link_matrix(g, k);
  const std::size_t nv = g.vertices.size();

  // Unknown layout: psi for every non-boundary vertex, then one bundle value per bundle vertex.
  std::vector<long> psi_index(nv, -1);
  std::vector<long> bundle_index(nv, -1);
  long n_unknown = 0;
  for (std::size_t i = 0; i < nv; ++i)
    if (!g.vertices[i].is_boundary()) psi_index[i] = n_unknown++;
  for (std::size_t i = 0; i < nv; ++i)
    if (g.vertices[i].has_bundle()) bundle_index[i] = n_unknown++;

  LinearSystem sys;
  sys.matrix = Eigen::MatrixXcd::Zero(n_unknown, n_unknown);
  sys.rhs = Eigen::MatrixXcd::Zero(n_unknown, incoming.cols());
  sys.value_row.assign(nv, 0);

  // Sum of incoming amplitudes per vertex.
  Eigen::MatrixXcd in_sum = Eigen::MatrixXcd::Zero(nv, incoming.cols());
  for (std::size_t c = 0; c < ch.size(); ++c) in_sum.row(ch[c].vertex) += incoming.row(c);

  for (std::size_t j = 0; j < nv; ++j) {
    const VertexSpec& v = g.vertices[j];
    if (v.is_boundary()) continue;
    const long r = psi_index[j];
    const double m = v.leads;
    const double alpha = v.coupling();
    auto add_internal = [&](long row, cplx factor) {
      for (std::size_t n = 0; n < nv; ++n)
        if (C(j, n) != cplx(0.0, 0.0)) sys.matrix(row, psi_index[n]) += factor * C(j, n);
    };
    if (!v.has_bundle()) {
      // S_int + ik(m psi - 2 sum a) - alpha psi = 0
      add_internal(r, 1.0);
      sys.matrix(r, r) += kI * k * m - alpha;
      sys.rhs.row(r) = 2.0 * kI * k * in_sum.row(j);
      sys.value_row[j] = static_cast<std::size_t>(r);
    } else {
      const long b = bundle_index[j];
      const double at = *v.alpha_ext;
      const double gm = *v.gamma;
      // alpha psi - S_int - alpha gamma ik m G = -2ik alpha gamma sum a
      add_internal(r, -1.0);
      sys.matrix(r, r) += alpha;
      sys.matrix(r, b) += -alpha * gm * kI * k * m;
      sys.rhs.row(r) = -2.0 * kI * k * alpha * gm * in_sum.row(j);
      // alpha~ G - alpha~ gamma S_int - ik m G = -2ik sum a
      add_internal(b, -at * gm);
      sys.matrix(b, b) += at - kI * k * m;
      sys.rhs.row(b) = -2.0 * kI * k * in_sum.row(j);
      sys.value_row[j] = static_cast<std::size_t>(b);
    }
  }
  return sys;
}

SMatrixResult smatrix(const GraphSpec& g0, cplx k) {
  validate_graph(g0);
  const GraphSpec g = normalize_graph(g0);
  const auto ch = channels(g);
  if (ch.empty()) throw InputError("graph has no leads; the S-matrix is empty");
  const Eigen::Index n = static_cast<Eigen::Index>(ch.size());
  const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(n, n);
  const LinearSystem sys = assemble_system(g, k, I);

  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(sys.matrix);
  SMatrixResult out;
  out.channels = channels(g0);
  out.rcond = lu.rcond();
  if (!(out.rcond > kRcondFloor)) {
    std::ostringstream msg;
    msg << "scattering system is singular at k = " << k << " (rcond " << out.rcond
        << "); k may be an eigenvalue with nonzero vertex values";
    throw NumericalError(msg.str());
  }
  out.vertex_values = lu.solve(sys.rhs);
  out.S.resize(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const std::size_t vtx = ch[c].vertex;
    out.S.row(c) = out.vertex_values.row(static_cast<Eigen::Index>(sys.value_row[vtx])) - I.row(c);
  }
  fill_diagnostics(out);
  return out;
}

Eigen::MatrixXcd graph_operator_h(const GraphSpec& g0, cplx k) {
  validate_graph(g0);
  const GraphSpec g = normalize_graph(g0);
  std::vector<Eigen::Index> lead_v, inner_v;
  for (std::size_t i = 0; i < g.vertices.size(); ++i) {
    const VertexSpec& v = g.vertices[i];
    if (v.is_boundary()) continue;
    if (v.has_bundle())
      throw InputError("ideal coupling requires plain delta vertices (vertex '" + vertex_name(g, i) + "')");
    if (v.leads == 0) {
      inner_v.push_back(static_cast<Eigen::Index>(i));
    } else {
      if (v.leads != 1 || v.coupling() != 0.0)
        throw InputError("ideal coupling requires exactly one lead and alpha = 0 at vertex '" +
                         vertex_name(g, i) + "'");
      lead_v.push_back(static_cast<Eigen::Index>(i));
    }
  }
  if (lead_v.empty()) throw InputError("graph has no leads");
  Eigen::MatrixXcd C = link_matrix(g, k);
  for (Eigen::Index i : inner_v) C(i, i) -= g.vertices[static_cast<std::size_t>(i)].coupling();
  const Eigen::MatrixXcd Cll = C(lead_v, lead_v);
  if (inner_v.empty()) return -Cll;
  const Eigen::MatrixXcd Cli = C(lead_v, inner_v);
  const Eigen::MatrixXcd Cil = C(inner_v, lead_v);
  const Eigen::MatrixXcd Cii = C(inner_v, inner_v);
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(Cii);
  if (!(lu.rcond() > kRcondFloor))
    throw NumericalError("lead-free vertices cannot be eliminated at this k (singular block)");
  return -(Cll - Cli * lu.solve(Cil));
}

SMatrixResult ideal_smatrix_via_h(const GraphSpec& g, cplx k) {
  const Eigen::MatrixXcd h = graph_operator_h(g, k);
  const Eigen::Index n = h.rows();
  const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(n, n);
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(h - kI * k * I);
  SMatrixResult out;
  out.channels = channels(g);
  out.rcond = lu.rcond();
  if (!(out.rcond > kRcondFloor)) throw NumericalError("h - ik is singular");
  out.S = -lu.solve(h + kI * k * I);
  fill_diagnostics(out);
  return out;
}

GraphSpec lasso_as_graph(const LassoParams& p) {
  p.validate();
  if (p.is_decoupled() || !p.is_delta())
    throw InputError("lasso_as_graph supports the delta coupling only");
  GraphSpec g;
  VertexSpec J;
  J.id = "J";
  J.alpha = p.alpha;
  J.leads = 1;
  VertexSpec X;
  X.id = "X";
  X.alpha = 0.0;
  g.vertices = {J, X};
  LinkSpec a{0, 1, p.L / 2.0, p.Phi / 2.0, {}};
  LinkSpec b{1, 0, p.L / 2.0, p.Phi / 2.0, {}};
  g.links = {a, b};
  return g;
}

}  // namespace lasso
