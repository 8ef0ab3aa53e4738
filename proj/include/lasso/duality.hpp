#pragma once

// S-matrix of a finite metric graph with attached halfline leads, computed
// from per-link Dirichlet solutions and a linear system in the vertex values.
//
// Magnetic convention: on a link with coordinate x in [0, l] the operator is
// (-i d/dx + A(x))^2 + V(x), and the link's magnetic phase is the integral of A.

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lasso/core.hpp"

namespace lasso {

struct PotentialSegment {
  double value = 0.0;
  double width = 0.0;
};

struct VertexSpec {
  std::string id;
  std::optional<double> alpha;      ///< delta coupling on the internal links (default 0)
  int leads = 0;                    ///< number of attached halflines
  std::optional<double> alpha_ext;  ///< coupling inside the lead bundle
  std::optional<double> gamma;      ///< bundle cross-coupling
  std::optional<double> omega;      ///< boundary angle; marks a boundary vertex

  bool is_boundary() const { return omega.has_value(); }
  bool has_bundle() const { return alpha_ext.has_value() || gamma.has_value(); }
  double coupling() const { return alpha.value_or(0.0); }
};

struct LinkSpec {
  std::size_t from = 0;  ///< vertex index at x = 0
  std::size_t to = 0;    ///< vertex index at x = length
  double length = 1.0;
  double phase = 0.0;
  std::vector<PotentialSegment> potential;  ///< empty means V = 0
};

struct GraphSpec {
  std::vector<VertexSpec> vertices;
  std::vector<LinkSpec> links;

  std::size_t lead_count() const;
};

/// Lead channel: vertex index and lead number (0-based) within its bundle.
struct Channel {
  std::size_t vertex = 0;
  int lead = 0;
};

/// Throws InputError on structural problems (bad lengths, widths, boundary
/// vertices with interior fields, disconnected graph, ...).
void validate_graph(const GraphSpec& g);

/// Splits self-loops and repeated vertex pairs by inserting alpha = 0
/// vertices so that every unordered vertex pair carries at most one link.
GraphSpec normalize_graph(const GraphSpec& g);

/// Channels ordered by vertex index, then lead number.
std::vector<Channel> channels(const GraphSpec& g);

/// Boundary values of the two normalized link solutions.
struct DirichletData {
  cplx u0;   ///< u(0)
  cplx du0;  ///< u'(0)
  cplx vl;   ///< v(l)
  cplx dvl;  ///< v'(l)
  cplx W;    ///< Wronskian
};

/// Interior link: u(l) = 0, u'(l) = 1, v(0) = 0, v'(0) = 1, W = u(0) = -v(l).
DirichletData dirichlet_data(const LinkSpec& link, cplx k);

/// Link whose x = 0 end is a boundary vertex with angle omega:
/// v(0) = sin omega, v'(0) = -cos omega, W = -u(0) cos omega - u'(0) sin omega.
DirichletData dirichlet_data_boundary(const LinkSpec& link, double omega, cplx k);

struct LinearSystem {
  Eigen::MatrixXcd matrix;
  Eigen::MatrixXcd rhs;                ///< one column per incoming vector
  std::vector<std::size_t> value_row;  ///< unknown index of the value seen by each vertex's leads
};

/// Linear system for the vertex values (and bundle values) given incoming
/// amplitudes, one column of `incoming` per scattering experiment.
LinearSystem assemble_system(const GraphSpec& g, cplx k, const Eigen::MatrixXcd& incoming);

struct SMatrixResult {
  std::vector<Channel> channels;
  Eigen::MatrixXcd S;
  double unitarity_residual = 0.0;    ///< ||S^* S - I||_F
  double reciprocity_residual = 0.0;  ///< ||S - S^T||_F
  double rcond = 0.0;                 ///< reciprocal condition estimate of the system
  Eigen::MatrixXcd vertex_values;     ///< solved unknowns, one column per unit incoming vector
};

SMatrixResult smatrix(const GraphSpec& g, cplx k);

/// Ideal-coupling path: every lead-bearing vertex has one lead and alpha = 0;
/// lead-free vertices are eliminated. S = -(h - ik)^{-1}(h + ik).
SMatrixResult ideal_smatrix_via_h(const GraphSpec& g, cplx k);

/// The graph part h of the ideal-coupling system (Schur complement onto the lead vertices).
Eigen::MatrixXcd graph_operator_h(const GraphSpec& g, cplx k);

/// Lasso as a graph: junction J (alpha, one lead) and an auxiliary alpha = 0
/// vertex X joined by two links of length L/2, each carrying phase Phi/2.
GraphSpec lasso_as_graph(const LassoParams& p);

}  // namespace lasso
