#include "lasso/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "lasso/decay.hpp"
#include "lasso/duality.hpp"
#include "lasso/errors.hpp"
#include "lasso/graph_format.hpp"
#include "lasso/resonances.hpp"

namespace lasso {

namespace {

using json = nlohmann::ordered_json;

constexpr double kDefaultUnitarityTol = 1e-10;
constexpr double kDefaultDecayTol = 1e-12;

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", x);
  return buf;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError("invalid number '" + s + "' in " + what);
  }
}

int parse_int(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError("invalid integer '" + s + "' in " + what);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read graph file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// One entry per sweep value; a single unnamed entry without --sweep.
std::vector<std::pair<double, LassoParams>> sweep_points(const SweepConfig& cfg) {
  std::vector<std::pair<double, LassoParams>> out;
  if (!cfg.sweep) {
    out.emplace_back(0.0, cfg.params);
    return out;
  }
  for (double v : cfg.sweep->grid.points()) out.emplace_back(v, with_param(cfg.params, cfg.sweep->param, v));
  return out;
}

std::vector<std::string> with_sweep_column(const SweepConfig& cfg, std::vector<std::string> cols) {
  if (cfg.sweep) cols.insert(cols.begin(), cfg.sweep->param);
  return cols;
}

std::vector<Cell> start_row(const SweepConfig& cfg, double v) {
  std::vector<Cell> row;
  if (cfg.sweep) row.emplace_back(v);
  return row;
}

double unitarity_tol(const SweepConfig& cfg) { return cfg.tol.value_or(kDefaultUnitarityTol); }

Table scatter_table(const SweepConfig& cfg) {
  Table t;
  t.columns = with_sweep_column(cfg, {"k", "re_r", "im_r", "abs_r", "delta"});
  const auto ks = cfg.k.points();
  for (const auto& [v, p] : sweep_points(cfg)) {
    const auto delta = phase_shift(p, ks);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const cplx r = reflection(p, ks[i]);
      if (!(std::abs(std::abs(r) - 1.0) <= unitarity_tol(cfg)))
        throw NumericalError("|r| deviates from 1 by " + fmt(std::abs(std::abs(r) - 1.0)) + " at k = " + fmt(ks[i]));
      auto row = start_row(cfg, v);
      row.insert(row.end(), {ks[i], r.real(), r.imag(), std::abs(r), delta[i]});
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

Table phase_table(const SweepConfig& cfg) {
  Table t;
  t.columns = with_sweep_column(cfg, {"k", "delta", "delta_over_pi"});
  const auto ks = cfg.k.points();
  for (const auto& [v, p] : sweep_points(cfg)) {
    const auto delta = phase_shift(p, ks);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      auto row = start_row(cfg, v);
      row.insert(row.end(), {ks[i], delta[i], delta[i] / std::numbers::pi});
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

Table bound_table(const SweepConfig& cfg) {
  Table t;
  t.columns = with_sweep_column(cfg, {"kind", "n", "kappa", "energy"});
  for (const auto& [v, p] : sweep_points(cfg)) {
    for (const auto& b : negative_bound_states(p)) {
      auto row = start_row(cfg, v);
      row.insert(row.end(), {Cell{std::string("negative")}, Cell{std::int64_t{0}}, Cell{b.kappa}, Cell{b.energy}});
      t.rows.push_back(std::move(row));
    }
    for (const auto& b : positive_bound_states(p, cfg.n_max)) {
      auto row = start_row(cfg, v);
      row.insert(row.end(), {Cell{std::string("embedded")}, Cell{std::int64_t{b.n}}, Cell{0.0}, Cell{b.energy}});
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

const char* kind_name(Pole::Kind k) { return k == Pole::Kind::embedded ? "embedded" : "resonance"; }

Table poles_table(const SweepConfig& cfg) {
  Table t;
  t.columns = with_sweep_column(cfg, {"re_k", "im_k", "kind", "residual"});
  for (const auto& [v, p] : sweep_points(cfg)) {
    for (const auto& q : find_poles(p, cfg.k.from, cfg.k.to)) {
      auto row = start_row(cfg, v);
      row.insert(row.end(), {Cell{q.k.real()}, Cell{q.k.imag()}, Cell{std::string(kind_name(q.kind))}, Cell{q.residual}});
      t.rows.push_back(std::move(row));
    }
  }
  json meta;
  meta["method"] = (cfg.params.alpha == 0.0 && cfg.params.mu == 0.0) ? "closed_form" : "newton_scan";
  t.metadata_json = meta.dump();
  return t;
}

Table trajectory_table(const SweepConfig& cfg) {
  if (!cfg.sweep) throw InputError("trajectory needs --sweep flux:<from>:<to>:<steps> or alpha:...");
  SweepSpec spec;
  LassoParams start = cfg.params;
  const std::string& name = cfg.sweep->param;
  if (name == "flux" || name == "flux-quanta") {
    spec.param = SweepParam::flux;
  } else if (name == "alpha") {
    spec.param = SweepParam::alpha;
  } else {
    throw InputError("trajectory sweeps flux, flux-quanta or alpha, not '" + name + "'");
  }
  const double scale = name == "flux-quanta" ? 2.0 * std::numbers::pi : 1.0;
  spec.from = cfg.sweep->grid.from * scale;
  spec.to = cfg.sweep->grid.to * scale;
  spec.steps = cfg.sweep->grid.steps;
  start = with_param(start, name, cfg.sweep->grid.from);
  const auto seeds = find_poles(start, cfg.k.from, cfg.k.to);
  if (seeds.empty()) throw InputError("no poles in the k range at the start of the sweep");
  const auto branches = trace_trajectories(start, spec, seeds);

  Table t;
  t.columns = {"row", "branch", "parent", sweep_param_name(spec.param), "re_k", "im_k", "kind"};
  for (const auto& b : branches) {
    for (const auto& s : b.samples)
      t.rows.push_back({std::string("sample"), std::int64_t{b.branch_id}, std::int64_t{b.parent_id}, s.param,
                        s.pole.k.real(), s.pole.k.imag(), std::string(kind_name(s.pole.kind))});
  }
  for (const auto& b : branches) {
    for (const auto& c : b.crossings)
      t.rows.push_back({std::string("crossing"), std::int64_t{b.branch_id}, std::int64_t{b.parent_id}, c.param,
                        c.k.real(), c.k.imag(), std::string("crossing")});
  }
  json meta;
  meta["branches"] = branches.size();
  meta["seeds"] = seeds.size();
  t.metadata_json = meta.dump();
  return t;
}

Table decay_table(const SweepConfig& cfg) {
  Table t;
  t.columns = with_sweep_column(cfg, {"t", "re_A", "im_A", "P"});
  DecayOptions opt;
  opt.abs_tol = cfg.tol.value_or(kDefaultDecayTol);
  const auto times = cfg.t.points();
  json summaries = json::array();
  for (const auto& [v, p] : sweep_points(cfg)) {
    const LoopState psi = parse_state(cfg.state, p.L);
    const DecayProfile d = survival(p, psi, times, opt);
    for (std::size_t i = 0; i < d.times.size(); ++i) {
      auto row = start_row(cfg, v);
      row.insert(row.end(), {d.times[i], d.amplitude[i].real(), d.amplitude[i].imag(), d.probability[i]});
      t.rows.push_back(std::move(row));
    }
    json s;
    if (cfg.sweep) s[cfg.sweep->param] = v;
    s["completeness"] = d.completeness;
    s["bound_mass"] = d.bound_mass / d.norm2;
    s["ac_mass"] = d.ac_mass / d.norm2;
    s["asymptotics"] = asymptotics_name(d.asymptotics);
    s["limit"] = d.limit;
    s["period"] = d.period;
    s["t_ceiling"] = d.t_ceiling;
    summaries.push_back(s);
  }
  json meta;
  meta["state"] = cfg.state;
  meta["summary"] = summaries;
  t.metadata_json = meta.dump();
  return t;
}

Table graph_table(const SweepConfig& cfg) {
  if (cfg.graph_path.empty()) throw InputError("graph-scatter needs --graph <file>");
  if (cfg.sweep) throw InputError("graph-scatter does not take --sweep");
  const GraphSpec g = parse_graph(read_file(cfg.graph_path));
  const auto chans = channels(g);
  if (chans.empty()) throw InputError("graph has no leads");
  Table t;
  t.columns = {"k"};
  std::vector<std::string> labels;
  for (const auto& c : chans) labels.push_back(g.vertices[c.vertex].id + "." + std::to_string(c.lead));
  for (std::size_t i = 0; i < chans.size(); ++i)
    for (std::size_t j = 0; j < chans.size(); ++j) {
      const std::string tag = "S_" + std::to_string(i) + "_" + std::to_string(j);
      t.columns.push_back("re_" + tag);
      t.columns.push_back("im_" + tag);
    }
  t.columns.push_back("unitarity");
  for (double k : cfg.k.points()) {
    const SMatrixResult r = smatrix(g, k);
    if (!(r.unitarity_residual <= unitarity_tol(cfg)))
      throw NumericalError("S-matrix unitarity residual " + fmt(r.unitarity_residual) + " at k = " + fmt(k));
    std::vector<Cell> row{k};
    for (Eigen::Index i = 0; i < r.S.rows(); ++i)
      for (Eigen::Index j = 0; j < r.S.cols(); ++j) {
        row.emplace_back(r.S(i, j).real());
        row.emplace_back(r.S(i, j).imag());
      }
    row.emplace_back(r.unitarity_residual);
    t.rows.push_back(std::move(row));
  }
  json meta;
  meta["graph"] = cfg.graph_path;
  meta["channels"] = labels;
  t.metadata_json = meta.dump();
  return t;
}

json cell_json(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) {
    if (!std::isfinite(*d)) return fmt(*d);
    return *d;
  }
  if (const auto* i = std::get_if<std::int64_t>(&c)) return *i;
  return std::get<std::string>(c);
}

json grid_json(const GridSpec& g) { return json{{"from", g.from}, {"to", g.to}, {"steps", g.steps}}; }

void add_common(CLI::App* sub, SweepConfig& cfg, std::optional<double>& flux, std::optional<double>& quanta,
                bool& decoupled, std::string& sweep) {
  sub->add_option("--L", cfg.params.L, "loop length")->capture_default_str();
  auto* f = sub->add_option("--flux", flux, "magnetic flux Phi in radians (default 0)");
  auto* q = sub->add_option("--flux-quanta", quanta, "flux in quanta, phi = Phi / 2pi");
  f->excludes(q);
  sub->add_option("--alpha", cfg.params.alpha, "junction coupling alpha")->capture_default_str();
  sub->add_option("--mu", cfg.params.mu, "junction parameter mu")->capture_default_str();
  sub->add_option("--omega", cfg.params.omega, "junction parameter omega")->capture_default_str();
  sub->add_flag("--decoupled", decoupled, "alpha = infinity (lead disconnected)");
  sub->add_option("--k-min", cfg.k.from, "lower end of the k grid")->capture_default_str();
  sub->add_option("--k-max", cfg.k.to, "upper end of the k grid")->capture_default_str();
  sub->add_option("--k-steps", cfg.k.steps, "number of k points")->capture_default_str();
  sub->add_option("--t-max", cfg.t.to, "largest time")->capture_default_str();
  sub->add_option("--t-steps", cfg.t.steps, "number of time points from 0 to t-max")->capture_default_str();
  sub->add_option("--sweep", sweep, "outer sweep param:from:to:steps");
  sub->add_option("--graph", cfg.graph_path, "graph description file");
  sub->add_option("--state", cfg.state, "decay initial state, e.g. sine:2 or winding:1+sine:2")->capture_default_str();
  sub->add_option("--n-max", cfg.n_max, "highest embedded index listed")->capture_default_str();
  sub->add_option("--format", cfg.format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  sub->add_option("--out", cfg.out, "output path, - for stdout")->capture_default_str();
  sub->add_option("--tol", cfg.tol, "unitarity guard (scatter, graph-scatter) or quadrature tolerance (decay)");
}

}  // namespace

const char* command_name(Quantity q) {
  switch (q) {
    case Quantity::reflection: return "scatter";
    case Quantity::phase: return "phase";
    case Quantity::bound: return "bound-states";
    case Quantity::poles: return "poles";
    case Quantity::trajectory: return "trajectory";
    case Quantity::decay: return "decay";
    case Quantity::graph_smatrix: return "graph-scatter";
  }
  return "";
}

std::vector<double> GridSpec::points() const {
  std::vector<double> out;
  if (steps == 1) {
    out.push_back(from);
    return out;
  }
  for (int i = 0; i < steps; ++i) out.push_back(i == steps - 1 ? to : from + (to - from) * i / (steps - 1));
  return out;
}

void SweepConfig::validate() const {
  auto check_grid = [](const GridSpec& g, const char* name) {
    if (!(std::isfinite(g.from) && std::isfinite(g.to))) throw InputError(std::string(name) + " range must be finite");
    if (g.steps < 1) throw InputError(std::string(name) + " steps must be >= 1");
    if (g.steps > 1 && !(g.to > g.from))
      throw InputError(std::string(name) + " range is empty (need max > min for more than one step)");
  };
  params.validate();
  check_grid(k, "k");
  if (quantity != Quantity::poles && quantity != Quantity::trajectory && !(k.from > 0.0))
    throw InputError("k range must be positive");
  if (quantity == Quantity::poles || quantity == Quantity::trajectory) {
    if (k.from < 0.0) throw InputError("k-min must be >= 0");
    if (!(k.to > k.from)) throw InputError("pole search needs k-max > k-min");
  }
  if (quantity == Quantity::decay) {
    if (!(t.to >= 0.0) || !std::isfinite(t.to)) throw InputError("t-max must be finite and >= 0");
    if (t.steps < 1) throw InputError("t steps must be >= 1");
    if (t.steps > 1 && !(t.to > 0.0)) throw InputError("t-max must be > 0 for more than one time point");
  }
  if (sweep) {
    check_grid(sweep->grid, "sweep");
    if (quantity != Quantity::trajectory && sweep->grid.steps > 10000)
      throw InputError("sweep steps must be <= 10000");
  }
  if (tol && !(*tol > 0.0 && std::isfinite(*tol))) throw InputError("--tol must be positive");
  if (n_max < 1) throw InputError("--n-max must be >= 1");
  if (format != "csv" && format != "json") throw InputError("--format must be csv or json");
}

ParamSweep parse_param_sweep(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
  if (parts.size() != 4) throw InputError("--sweep expects param:from:to:steps, got '" + text + "'");
  static const std::vector<std::string> names{"flux", "flux-quanta", "alpha", "mu", "omega", "L"};
  if (std::find(names.begin(), names.end(), parts[0]) == names.end())
    throw InputError("unknown sweep parameter '" + parts[0] + "' (flux, flux-quanta, alpha, mu, omega, L)");
  ParamSweep s;
  s.param = parts[0];
  s.grid.from = parse_double(parts[1], "--sweep");
  s.grid.to = parse_double(parts[2], "--sweep");
  s.grid.steps = parse_int(parts[3], "--sweep");
  if (s.grid.steps < 1) throw InputError("--sweep steps must be >= 1");
  return s;
}

LassoParams with_param(LassoParams p, const std::string& param, double value) {
  if (param == "flux") p.Phi = value;
  else if (param == "flux-quanta") p.Phi = 2.0 * std::numbers::pi * value;
  else if (param == "alpha") p.alpha = value;
  else if (param == "mu") p.mu = value;
  else if (param == "omega") p.omega = value;
  else if (param == "L") p.L = value;
  else throw InputError("unknown sweep parameter '" + param + "'");
  p.validate();
  return p;
}

LoopState parse_state(const std::string& text, double L) {
  std::optional<LoopState> sum;
  std::stringstream ss(text);
  for (std::string term; std::getline(ss, term, '+');) {
    const auto colon = term.find(':');
    if (colon == std::string::npos) throw InputError("state terms look like sine:<n> or winding:<n>, got '" + term + "'");
    const std::string kind = term.substr(0, colon);
    const int n = parse_int(term.substr(colon + 1), "--state");
    LoopState s;
    if (kind == "sine") s = LoopState::sine_mode(L, n);
    else if (kind == "winding") s = LoopState::winding(L, n);
    else throw InputError("unknown state kind '" + kind + "' (sine, winding)");
    sum = sum ? sum->plus(s) : s;
  }
  if (!sum) throw InputError("empty --state");
  const double n2 = sum->norm2();
  if (!(n2 > 1e-24)) throw InputError("--state sums to zero");
  return sum->normalized();
}

Table run_command(const SweepConfig& cfg) {
  cfg.validate();
  switch (cfg.quantity) {
    case Quantity::reflection: return scatter_table(cfg);
    case Quantity::phase: return phase_table(cfg);
    case Quantity::bound: return bound_table(cfg);
    case Quantity::poles: return poles_table(cfg);
    case Quantity::trajectory: return trajectory_table(cfg);
    case Quantity::decay: return decay_table(cfg);
    case Quantity::graph_smatrix: return graph_table(cfg);
  }
  throw InputError("unknown command");
}

std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (i) out += ',';
    out += t.columns[i];
  }
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      const Cell& c = row[i];
      if (const auto* d = std::get_if<double>(&c)) out += fmt(*d);
      else if (const auto* n = std::get_if<std::int64_t>(&c)) out += std::to_string(*n);
      else out += std::get<std::string>(c);
    }
    out += '\n';
  }
  return out;
}

std::string to_json(const Table& t, const SweepConfig& cfg) {
  json doc;
  doc["command"] = command_name(cfg.quantity);
  doc["version"] = kVersion;
  const LassoParams& p = cfg.params;
  doc["parameters"] = json{{"L", p.L},
                           {"flux", p.Phi},
                           {"flux_quanta", p.flux_quanta()},
                           {"alpha", p.alpha},
                           {"mu", p.mu},
                           {"omega", p.omega},
                           {"coupling", p.is_decoupled() ? "decoupled" : "finite"}};
  json grids;
  grids["k"] = grid_json(cfg.k);
  if (cfg.quantity == Quantity::decay) grids["t"] = grid_json(GridSpec{0.0, cfg.t.to, cfg.t.steps});
  if (cfg.sweep) grids["sweep"] = json{{"param", cfg.sweep->param}, {"grid", grid_json(cfg.sweep->grid)}};
  doc["grids"] = grids;
  json tol;
  if (cfg.quantity == Quantity::reflection || cfg.quantity == Quantity::graph_smatrix)
    tol["unitarity"] = cfg.tol.value_or(kDefaultUnitarityTol);
  if (cfg.quantity == Quantity::decay) tol["quadrature_abs"] = cfg.tol.value_or(kDefaultDecayTol);
  if (cfg.quantity == Quantity::poles || cfg.quantity == Quantity::trajectory) {
    tol["newton_residual_rel"] = 1e-12;
    tol["embedded_imag"] = 1e-9;
  }
  doc["tolerances"] = tol.is_null() ? json::object() : tol;
  doc["metadata"] = json::parse(t.metadata_json);
  doc["columns"] = t.columns;
  json rows = json::array();
  for (const auto& r : t.rows) {
    json row = json::array();
    for (const auto& c : r) row.push_back(cell_json(c));
    rows.push_back(std::move(row));
  }
  doc["rows"] = std::move(rows);
  return doc.dump(2) + "\n";
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scattering, resonances and decay on a magnetic lasso graph", "lasso"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SweepConfig cfg;
  std::optional<double> flux, quanta;
  bool decoupled = false;
  std::string sweep;
  const std::vector<std::pair<Quantity, const char*>> commands{
      {Quantity::reflection, "reflection amplitude r(k) and phase shift"},
      {Quantity::phase, "continuous phase shift delta(k)"},
      {Quantity::bound, "embedded and negative-energy bound states"},
      {Quantity::poles, "resolvent poles with Re k in [k-min, k-max]"},
      {Quantity::trajectory, "pole trajectories along a flux or alpha sweep"},
      {Quantity::decay, "survival probability of a loop state"},
      {Quantity::graph_smatrix, "S-matrix of a graph read from --graph"}};
  std::vector<std::pair<CLI::App*, Quantity>> subs;
  for (const auto& [q, help] : commands) {
    CLI::App* sub = app.add_subcommand(command_name(q), help);
    add_common(sub, cfg, flux, quanta, decoupled, sweep);
    subs.emplace_back(sub, q);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "lasso: " << e.what() << "\n";
    return 1;
  }

  try {
    for (const auto& [sub, q] : subs)
      if (sub->parsed()) cfg.quantity = q;
    if (quanta) cfg.params.Phi = 2.0 * std::numbers::pi * *quanta;
    else cfg.params.Phi = flux.value_or(0.0);
    if (decoupled) cfg.params.coupling = Coupling::decoupled;
    if (!sweep.empty()) cfg.sweep = parse_param_sweep(sweep);
    cfg.t.from = 0.0;

    const Table table = run_command(cfg);
    const std::string text = cfg.format == "json" ? to_json(table, cfg) : to_csv(table);
    if (cfg.out == "-") {
      out << text;
    } else {
      std::ofstream f(cfg.out, std::ios::binary);
      if (!f) throw InputError("cannot open output file '" + cfg.out + "'");
      f << text;
      if (!f) throw InputError("failed writing '" + cfg.out + "'");
    }
    return 0;
  } catch (const InputError& e) {
    err << "lasso: input error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    err << "lasso: numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "lasso: numerical failure: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace lasso
