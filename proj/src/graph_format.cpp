#include "lasso/graph_format.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

namespace lasso {

namespace {

std::string located(SourcePos pos, const std::string& what) {
  return "line " + std::to_string(pos.line) + ", column " + std::to_string(pos.column) + ": " + what;
}

struct Token {
  std::string text;
  SourcePos pos;
};

std::vector<Token> tokenize(std::string_view line, int line_no) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    const char c = line[i];
    if (c == '#') break;
    if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
      ++i;
      continue;
    }
    const SourcePos pos{line_no, static_cast<int>(i) + 1};
    if (c == '=') {
      out.push_back({"=", pos});
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < line.size() && line[j] != '=' && line[j] != '#' && line[j] != ' ' && line[j] != '\t' &&
           line[j] != '\r' && line[j] != '\f' && line[j] != '\v')
      ++j;
    out.push_back({std::string(line.substr(i, j - i)), pos});
    i = j;
  }
  return out;
}

double parse_number(const Token& t, const std::string& key) {
  double v = 0.0;
  const char* b = t.text.data();
  const char* e = b + t.text.size();
  if (!t.text.empty() && *b == '+') ++b;
  const auto r = std::from_chars(b, e, v);
  if (r.ec != std::errc() || r.ptr != e || b == e)
    throw ParseError(t.pos, "expected a number for '" + key + "', found '" + t.text + "'");
  if (!std::isfinite(v)) throw ParseError(t.pos, "'" + key + "' must be finite");
  return v;
}

int parse_int(const Token& t, const std::string& key) {
  int v = 0;
  const char* b = t.text.data();
  const char* e = b + t.text.size();
  const auto r = std::from_chars(b, e, v);
  if (r.ec != std::errc() || r.ptr != e || b == e)
    throw ParseError(t.pos, "expected an integer for '" + key + "', found '" + t.text + "'");
  return v;
}

std::vector<PotentialSegment> parse_potential(const Token& t) {
  std::vector<PotentialSegment> out;
  std::size_t start = 0;
  const std::string& s = t.text;
  while (true) {
    const std::size_t comma = s.find(',', start);
    const std::string item = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    const SourcePos pos{t.pos.line, t.pos.column + static_cast<int>(start)};
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos) throw ParseError(pos, "potential entries have the form value:width");
    const Token v{item.substr(0, colon), pos};
    const Token w{item.substr(colon + 1), {pos.line, pos.column + static_cast<int>(colon) + 1}};
    PotentialSegment seg{parse_number(v, "potential"), parse_number(w, "potential")};
    if (!(seg.width > 0.0)) throw ParseError(w.pos, "potential widths must be positive");
    out.push_back(seg);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

struct Option {
  std::string key;
  Token value;  // empty text for flags
  SourcePos pos;
  bool flag = false;
};

// Splits tokens after the statement head into key=value pairs and bare flags.
std::vector<Option> options(const std::vector<Token>& toks, std::size_t first) {
  std::vector<Option> out;
  std::size_t i = first;
  while (i < toks.size()) {
    const Token& k = toks[i];
    if (k.text == "=") throw ParseError(k.pos, "unexpected '='");
    if (i + 1 < toks.size() && toks[i + 1].text == "=") {
      if (i + 2 >= toks.size() || toks[i + 2].text == "=")
        throw ParseError(toks[i + 1].pos, "missing value after '" + k.text + "='");
      Token v = toks[i + 2];
      i += 3;
      // Lists may be written with spaces after separators.
      auto joins = [](const std::string& s) { return !s.empty() && (s.back() == ',' || s.back() == ':'); };
      while (i < toks.size() && toks[i].text != "=" &&
             (joins(v.text) || toks[i].text.front() == ',' || toks[i].text.front() == ':') &&
             !(i + 1 < toks.size() && toks[i + 1].text == "=")) {
        v.text += toks[i].text;
        ++i;
      }
      out.push_back({k.text, v, k.pos, false});
    } else {
      out.push_back({k.text, Token{}, k.pos, true});
      ++i;
    }
  }
  return out;
}

void parse_vertex(const std::vector<Token>& toks, GraphDocument& doc) {
  if (toks.size() < 2 || toks[1].text == "=") throw ParseError(toks[0].pos, "vertex needs an id");
  GraphDocument::Vertex v;
  v.pos = toks[0].pos;
  v.spec.id = toks[1].text;
  std::set<std::string> seen;
  bool boundary = false;
  for (const auto& o : options(toks, 2)) {
    if (!seen.insert(o.key).second) throw ParseError(o.pos, "duplicate field '" + o.key + "'");
    if (o.flag) {
      if (o.key != "boundary") throw ParseError(o.pos, "unknown vertex field '" + o.key + "'");
      boundary = true;
      continue;
    }
    if (o.key == "alpha") {
      v.spec.alpha = parse_number(o.value, o.key);
    } else if (o.key == "leads") {
      v.spec.leads = parse_int(o.value, o.key);
      if (v.spec.leads < 0) throw ParseError(o.value.pos, "leads must be >= 0");
    } else if (o.key == "alpha_ext") {
      v.spec.alpha_ext = parse_number(o.value, o.key);
    } else if (o.key == "gamma") {
      v.spec.gamma = parse_number(o.value, o.key);
    } else if (o.key == "omega") {
      v.spec.omega = parse_number(o.value, o.key);
    } else {
      throw ParseError(o.pos, "unknown vertex field '" + o.key + "'");
    }
  }
  const auto& s = v.spec;
  if (boundary != s.omega.has_value())
    throw ParseError(v.pos, boundary ? "boundary vertex '" + s.id + "' needs omega"
                                     : "omega is only allowed on boundary vertices ('" + s.id + "')");
  if (boundary && (s.alpha || s.leads > 0 || s.has_bundle()))
    throw ParseError(v.pos, "boundary vertex '" + s.id + "' cannot carry alpha, leads, alpha_ext or gamma");
  if (s.has_bundle() && !(s.alpha_ext && s.gamma))
    throw ParseError(v.pos, "vertex '" + s.id + "': alpha_ext and gamma must be given together");
  if (s.has_bundle() && s.leads == 0)
    throw ParseError(v.pos, "vertex '" + s.id + "': alpha_ext and gamma require leads > 0");
  doc.vertices.push_back(std::move(v));
}

void parse_link(const std::vector<Token>& toks, GraphDocument& doc) {
  if (toks.size() < 3 || toks[1].text == "=" || toks[2].text == "=" || (toks.size() > 3 && toks[3].text == "="))
    throw ParseError(toks[0].pos, "link needs two vertex ids");
  GraphDocument::Link l;
  l.pos = toks[0].pos;
  l.from = toks[1].text;
  l.from_pos = toks[1].pos;
  l.to = toks[2].text;
  l.to_pos = toks[2].pos;
  std::set<std::string> seen;
  bool has_length = false;
  for (const auto& o : options(toks, 3)) {
    if (!seen.insert(o.key).second) throw ParseError(o.pos, "duplicate field '" + o.key + "'");
    if (o.flag) throw ParseError(o.pos, "unexpected token '" + o.key + "'");
    if (o.key == "length") {
      l.length = parse_number(o.value, o.key);
      if (!(l.length > 0.0)) throw ParseError(o.value.pos, "link length must be positive");
      has_length = true;
    } else if (o.key == "phase") {
      l.phase = parse_number(o.value, o.key);
    } else if (o.key == "potential") {
      l.potential = parse_potential(o.value);
    } else {
      throw ParseError(o.pos, "unknown link field '" + o.key + "'");
    }
  }
  if (!has_length) throw ParseError(l.pos, "link " + l.from + " " + l.to + " needs length=<f>");
  if (!l.potential.empty()) {
    double sum = 0.0;
    for (const auto& s : l.potential) sum += s.width;
    if (std::abs(sum - l.length) > 1e-9 * l.length)
      throw ParseError(l.pos, "potential widths sum to " + std::to_string(sum) + " but the link length is " +
                                  std::to_string(l.length));
  }
  doc.links.push_back(std::move(l));
}

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

ParseError::ParseError(SourcePos pos, const std::string& what) : InputError(located(pos, what)), pos_(pos) {}

GraphDocument parse_document(std::string_view text) {
  GraphDocument doc;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    const std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    ++line_no;
    const auto toks = tokenize(line, line_no);
    if (!toks.empty()) {
      if (toks[0].text == "vertex") {
        parse_vertex(toks, doc);
      } else if (toks[0].text == "link") {
        parse_link(toks, doc);
      } else {
        throw ParseError(toks[0].pos, "expected 'vertex' or 'link', found '" + toks[0].text + "'");
      }
    }
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return doc;
}

GraphSpec to_graph(const GraphDocument& doc) {
  if (doc.vertices.empty()) throw InputError("no vertices");
  GraphSpec g;
  std::map<std::string, std::size_t> index;
  for (const auto& v : doc.vertices) {
    if (!index.emplace(v.spec.id, g.vertices.size()).second)
      throw ParseError(v.pos, "duplicate vertex id '" + v.spec.id + "'");
    g.vertices.push_back(v.spec);
  }
  std::vector<int> degree(g.vertices.size(), 0);
  for (const auto& l : doc.links) {
    auto resolve = [&](const std::string& id, SourcePos pos) {
      const auto it = index.find(id);
      if (it == index.end())
        throw ParseError(pos, "unknown vertex id '" + id + "' on line " + std::to_string(pos.line));
      return it->second;
    };
    LinkSpec s;
    s.from = resolve(l.from, l.from_pos);
    s.to = resolve(l.to, l.to_pos);
    s.length = l.length;
    s.phase = l.phase;
    s.potential = l.potential;
    if (g.vertices[s.from].is_boundary() && g.vertices[s.to].is_boundary())
      throw ParseError(l.pos, "a link cannot join two boundary vertices");
    ++degree[s.from];
    ++degree[s.to];
    g.links.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < g.vertices.size(); ++i)
    if (g.vertices[i].is_boundary() && degree[i] != 1)
      throw ParseError(doc.vertices[i].pos, "boundary vertex '" + g.vertices[i].id + "' must have exactly one link");
  validate_graph(g);
  return normalize_graph(g);
}

GraphSpec parse_graph(std::string_view text) { return to_graph(parse_document(text)); }

std::string print_graph(const GraphSpec& g) {
  std::string out;
  for (const auto& v : g.vertices) {
    out += "vertex " + v.id;
    if (v.alpha) out += " alpha=" + format_number(*v.alpha);
    if (v.leads > 0) out += " leads=" + std::to_string(v.leads);
    if (v.alpha_ext) out += " alpha_ext=" + format_number(*v.alpha_ext);
    if (v.gamma) out += " gamma=" + format_number(*v.gamma);
    if (v.omega) out += " boundary omega=" + format_number(*v.omega);
    out += '\n';
  }
  for (const auto& l : g.links) {
    out += "link " + g.vertices.at(l.from).id + " " + g.vertices.at(l.to).id + " length=" + format_number(l.length);
    if (l.phase != 0.0) out += " phase=" + format_number(l.phase);
    if (!l.potential.empty()) {
      out += " potential=";
      for (std::size_t i = 0; i < l.potential.size(); ++i) {
        if (i) out += ',';
        out += format_number(l.potential[i].value) + ":" + format_number(l.potential[i].width);
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace lasso
