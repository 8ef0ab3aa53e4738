#pragma once

// Line-oriented text format for graphs with leads:
//
//   vertex <id> [alpha=<f>] [leads=<int> [alpha_ext=<f> gamma=<f>]] [boundary omega=<f>]
//   link <id> <id> length=<f> [phase=<f>] [potential=<v1>:<w1>,<v2>:<w2>,...]
//
// '#' starts a comment. Whitespace between tokens, including around '=' and
// after ',' in potential lists, is ignored.

#include <string>
#include <string_view>
#include <vector>

#include "lasso/duality.hpp"
#include "lasso/errors.hpp"

namespace lasso {

struct SourcePos {
  int line = 0;
  int column = 0;
};

/// Input error tied to a location in the graph text (line and column are 1-based).
class ParseError : public InputError {
 public:
  ParseError(SourcePos pos, const std::string& what);
  SourcePos pos() const { return pos_; }

 private:
  SourcePos pos_;
};

struct GraphDocument {
  struct Vertex {
    VertexSpec spec;
    SourcePos pos;
  };
  struct Link {
    std::string from, to;
    double length = 0.0;
    double phase = 0.0;
    std::vector<PotentialSegment> potential;
    SourcePos pos, from_pos, to_pos;
  };
  std::vector<Vertex> vertices;
  std::vector<Link> links;
};

/// Syntax-level parse; ids are not resolved yet.
GraphDocument parse_document(std::string_view text);

/// Resolves ids, checks the document and builds the graph. Self-loops and
/// repeated links are split as in normalize_graph.
GraphSpec to_graph(const GraphDocument& doc);

GraphSpec parse_graph(std::string_view text);

/// Text form of a graph; parse_graph(print_graph(g)) reproduces g.
std::string print_graph(const GraphSpec& g);

}  // namespace lasso
