#include "io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gauge_ot/errors.hpp"
#include "gauge_ot/fiber.hpp"

namespace gauge_ot::cli {

namespace fs = std::filesystem;

namespace {

const json& member(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object()) throw SchemaError(where, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(where.empty() ? key : where + "." + key, "missing");
  return *it;
}

std::string join(const std::string& where, const std::string& key) { return where.empty() ? key : where + "." + key; }

int get_int(const json& obj, const std::string& key, const std::string& where, std::optional<int> fallback = {}) {
  if (fallback && (!obj.is_object() || !obj.contains(key))) return *fallback;
  const json& v = member(obj, key, where);
  if (!v.is_number_integer()) throw SchemaError(join(where, key), "expected an integer");
  return v.get<int>();
}

double get_double(const json& obj, const std::string& key, const std::string& where, double fallback) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw SchemaError(join(where, key), "expected a number");
  return v.get<double>();
}

std::string line_col(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + " column " + std::to_string(col);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

Field field_from_rows(const PeriodicGrid& g, int ncomp, const std::vector<std::vector<double>>& rows,
                      std::size_t first_col, const std::string& where) {
  if (rows.size() != g.cells())
    throw SchemaError(where, "expected " + std::to_string(g.cells()) + " rows, got " + std::to_string(rows.size()));
  Field f(g, ncomp);
  for (std::size_t c = 0; c < rows.size(); ++c) {
    if (rows[c].size() < first_col + static_cast<std::size_t>(ncomp))
      throw SchemaError(where, "row " + std::to_string(c + 1) + " has " + std::to_string(rows[c].size()) +
                                   " columns, expected " + std::to_string(first_col + ncomp));
    for (int i = 0; i < ncomp; ++i) f(c, i) = rows[c][first_col + static_cast<std::size_t>(i)];
  }
  return f;
}

std::string snapshot_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "snapshot_%04zu.csv", i);
  return buf;
}

std::vector<std::string> coordinate_names(const PeriodicGrid& g) {
  return g.dim() == 1 ? std::vector<std::string>{"x"} : std::vector<std::string>{"x", "y"};
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json grid_json(const PeriodicGrid& g) {
  json sizes = json::array(), lengths = json::array();
  for (int a = 0; a < g.dim(); ++a) {
    sizes.push_back(g.size(a));
    lengths.push_back(g.length(a));
  }
  return {{"dim", g.dim()},
          {"sizes", sizes},
          {"lengths", lengths},
          {"scheme", g.scheme() == DiffScheme::Spectral ? "spectral" : "centered"}};
}

PeriodicGrid grid_from_json(const json& j, const std::string& where) {
  const int dim = get_int(j, "dim", where);
  if (dim != 1 && dim != 2) throw SchemaError(join(where, "dim"), "must be 1 or 2");
  const json& sizes = member(j, "sizes", where);
  if (!sizes.is_array() || sizes.size() != static_cast<std::size_t>(dim))
    throw SchemaError(join(where, "sizes"), "expected an array of " + std::to_string(dim) + " integers");
  std::array<int, 2> n{1, 1};
  std::array<double, 2> len{1.0, 1.0};
  for (int a = 0; a < dim; ++a) {
    const json& v = sizes[static_cast<std::size_t>(a)];
    if (!v.is_number_integer() || v.get<int>() < 4)
      throw SchemaError(join(where, "sizes") + "[" + std::to_string(a) + "]", "expected an integer >= 4");
    n[static_cast<std::size_t>(a)] = v.get<int>();
  }
  if (j.contains("lengths")) {
    const json& l = j.at("lengths");
    if (!l.is_array() || l.size() != static_cast<std::size_t>(dim))
      throw SchemaError(join(where, "lengths"), "expected an array of " + std::to_string(dim) + " numbers");
    for (int a = 0; a < dim; ++a) {
      const json& v = l[static_cast<std::size_t>(a)];
      if (!v.is_number() || v.get<double>() <= 0.0)
        throw SchemaError(join(where, "lengths") + "[" + std::to_string(a) + "]", "expected a positive number");
      len[static_cast<std::size_t>(a)] = v.get<double>();
    }
  }
  DiffScheme scheme = DiffScheme::Centered;
  if (j.contains("scheme")) {
    const json& s = j.at("scheme");
    if (s == "spectral")
      scheme = DiffScheme::Spectral;
    else if (s != "centered")
      throw SchemaError(join(where, "scheme"), "expected \"centered\" or \"spectral\"");
  }
  return PeriodicGrid(dim, n, len, scheme);
}

ProblemFile load_problem(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("problem", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  ProblemFile pf;
  try {
    pf.doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(line_col(text, e.byte > 0 ? e.byte - 1 : 0), "malformed JSON");
  }
  if (!pf.doc.is_object()) throw SchemaError("(root)", "expected an object");
  const json& version = member(pf.doc, "version", "");
  if (version != "1") throw SchemaError("version", "expected \"1\"");
  pf.base_dir = path.parent_path();
  pf.grid = grid_from_json(member(pf.doc, "grid", ""), "grid");
  pf.k = get_int(pf.doc, "k", "");
  if (pf.k < 1 || pf.k > 8) throw SchemaError("k", "expected 1..8");
  if (pf.doc.contains("seed")) {
    const json& s = pf.doc.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
      throw SchemaError("seed", "expected a non-negative integer");
    pf.seed = s.get<std::uint64_t>();
  }
  return pf;
}

namespace {

// Field value at a dotted path such as "endpoints[0]" or "initial.w".
Field field_value(const ProblemFile& pf, const json& v, const std::string& where, int ncomp) {
  const PeriodicGrid& g = pf.grid;
  if (v.is_string()) {
    fs::path p = v.get<std::string>();
    if (p.is_relative()) p = pf.base_dir / p;
    if (!fs::exists(p)) throw SchemaError(where, "CSV file not found: " + p.string());
    return field_from_rows(g, ncomp, read_csv(p).rows, 0, where);
  }
  if (!v.is_array()) throw SchemaError(where, "expected an inline array or a CSV path");
  const std::size_t want = g.cells() * static_cast<std::size_t>(ncomp);
  // flat row-major or nested per-cell rows
  std::vector<double> vals;
  vals.reserve(want);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const json& e = v[i];
    if (e.is_number()) {
      vals.push_back(e.get<double>());
    } else if (e.is_array()) {
      for (const json& x : e) {
        if (!x.is_number()) throw SchemaError(where + "[" + std::to_string(i) + "]", "expected numbers");
        vals.push_back(x.get<double>());
      }
    } else {
      throw SchemaError(where + "[" + std::to_string(i) + "]", "expected a number");
    }
  }
  if (vals.size() != want)
    throw SchemaError(where, "expected " + std::to_string(want) + " values (" + std::to_string(g.cells()) +
                                 " cells x " + std::to_string(ncomp) + " components), got " +
                                 std::to_string(vals.size()));
  return Field(g, ncomp, std::move(vals));
}

}  // namespace

Field read_field_value(const ProblemFile& pf, const std::string& field, int ncomp) {
  const json* node = &pf.doc;
  for (const auto& key : split(field, '.')) node = &member(*node, key, "");
  return field_value(pf, *node, field, ncomp);
}

BvpProblem distance_problem(const ProblemFile& pf) {
  BvpProblem p;
  const json& space = member(pf.doc, "space", "");
  if (!space.is_string()) throw SchemaError("space", "expected a string");
  try {
    p.space = space_from_string(space.get<std::string>());
  } catch (const Error& e) {
    throw SchemaError("space", e.what());
  }
  const int ncomp = is_matrix_space(p.space) ? pf.k * pf.k : pf.k;
  const json& ends = member(pf.doc, "endpoints", "");
  if (!ends.is_array() || ends.size() != 2) throw SchemaError("endpoints", "expected an array of two fields");
  p.endpoint0 = field_value(pf, ends[0], "endpoints[0]", ncomp);
  p.endpoint1 = field_value(pf, ends[1], "endpoints[1]", ncomp);

  BvpOptions& o = p.options;
  o.seed = pf.seed;
  if (pf.doc.contains("solver")) {
    const json& s = pf.doc.at("solver");
    if (!s.is_object()) throw SchemaError("solver", "expected an object");
    static const std::vector<std::string> known = {"steps", "max_iterations", "penalty_rounds", "penalty",
                                                   "penalty_growth", "gradient_tol", "progress_tol", "residual_tol",
                                                   "transport_substeps", "precond_length", "shoot_modes",
                                                   "shoot_warm_relax", "max_seconds", "warm_start",
                                                   "warm_iterations"};
    for (auto it = s.begin(); it != s.end(); ++it)
      if (std::find(known.begin(), known.end(), it.key()) == known.end())
        throw SchemaError("solver." + it.key(), "unknown option");
    o.steps = get_int(s, "steps", "solver", o.steps);
    o.max_iterations = get_int(s, "max_iterations", "solver", o.max_iterations);
    o.penalty_rounds = get_int(s, "penalty_rounds", "solver", o.penalty_rounds);
    o.penalty = get_double(s, "penalty", "solver", o.penalty);
    o.penalty_growth = get_double(s, "penalty_growth", "solver", o.penalty_growth);
    o.gradient_tol = get_double(s, "gradient_tol", "solver", o.gradient_tol);
    o.progress_tol = get_double(s, "progress_tol", "solver", o.progress_tol);
    o.residual_tol = get_double(s, "residual_tol", "solver", o.residual_tol);
    o.transport_substeps = get_int(s, "transport_substeps", "solver", o.transport_substeps);
    o.precond_length = get_double(s, "precond_length", "solver", o.precond_length);
    o.shoot_modes = get_int(s, "shoot_modes", "solver", o.shoot_modes);
    o.max_seconds = get_double(s, "max_seconds", "solver", o.max_seconds);
    o.warm_iterations = get_int(s, "warm_iterations", "solver", o.warm_iterations);
    if (s.contains("shoot_warm_relax")) {
      if (!s.at("shoot_warm_relax").is_boolean()) throw SchemaError("solver.shoot_warm_relax", "expected a boolean");
      o.shoot_warm_relax = s.at("shoot_warm_relax").get<bool>();
    }
    if (s.contains("warm_start")) {
      const json& w = s.at("warm_start");
      if (!w.is_array()) throw SchemaError("solver.warm_start", "expected an array of numbers");
      o.warm_start.clear();
      for (const json& x : w) {
        if (!x.is_number()) throw SchemaError("solver.warm_start", "expected an array of numbers");
        o.warm_start.push_back(x.get<double>());
      }
    }
    if (o.steps < 1) throw SchemaError("solver.steps", "must be positive");
    if (o.max_seconds < 0.0) throw SchemaError("solver.max_seconds", "must be non-negative");
  }
  try {
    validate_problem(p);
  } catch (const Error& e) {
    throw SchemaError("endpoints", e.what());
  }
  return p;
}

VectorGeodesicState vector_initial_state(const ProblemFile& pf, VectorSystem system) {
  const json& init = member(pf.doc, "initial", "");
  const PeriodicGrid& g = pf.grid;
  const int k = pf.k;
  const Flavor flavor = system == VectorSystem::Balanced ? Flavor::So : Flavor::Conf;
  const Field w = field_value(pf, member(init, "w", "initial"), "initial.w", k);
  try {
    require_floor(w, "initial.w");
  } catch (const Error& e) {
    throw SchemaError("initial.w", e.what());
  }
  if (init.contains("theta")) {
    if (init.contains("u") || init.contains("a")) throw SchemaError("initial", "give either theta or (u, a)");
    return vector_state_from_theta(w, field_value(pf, init.at("theta"), "initial.theta", k), flavor);
  }
  VectorGeodesicState s{Field(g, g.dim()), Field(g, k * k), w, 0.0};
  if (init.contains("u")) s.u = field_value(pf, init.at("u"), "initial.u", g.dim());
  if (init.contains("a")) s.a = field_value(pf, init.at("a"), "initial.a", k * k);
  const Field proj = project_flavor(s.a, k, flavor).values;
  if ((proj - s.a).max_abs() > 1e-12 * std::max(1.0, s.a.max_abs()))
    throw SchemaError("initial.a", system == VectorSystem::Balanced ? "must be skew-symmetric"
                                                                    : "must be skew plus a multiple of I");
  return s;
}

MatrixGeodesicState matrix_initial_state(const ProblemFile& pf, MatrixSystem system) {
  const json& init = member(pf.doc, "initial", "");
  const PeriodicGrid& g = pf.grid;
  const int k = pf.k;
  const Field sigma = field_value(pf, member(init, "sigma", "initial"), "initial.sigma", k * k);
  try {
    require_spd(sigma, "initial.sigma");
  } catch (const Error& e) {
    throw SchemaError("initial.sigma", e.what());
  }
  if (init.contains("P")) {
    if (init.contains("u") || init.contains("a")) throw SchemaError("initial", "give either P or (u, a)");
    return matrix_state_from_P(sigma, field_value(pf, init.at("P"), "initial.P", k * k), system);
  }
  const Factorized f = factorize(sigma);
  MatrixGeodesicState s{Field(g, g.dim()), Field(g, k * k), f.S, f.rho, 0.0};
  if (init.contains("u")) s.u = field_value(pf, init.at("u"), "initial.u", g.dim());
  if (init.contains("a")) s.a = field_value(pf, init.at("a"), "initial.a", k * k);
  if (system == MatrixSystem::Balanced && pgl_constraint_defect(s.a, s.S) > 1e-10)
    throw SchemaError("initial.a", "balanced system needs tr(a S) = 0 pointwise");
  return s;
}

void write_csv(const fs::path& path, const CsvTable& t, const std::string& comment) {
  std::ofstream out(path);
  if (!out) throw SchemaError("output", "cannot write " + path.string());
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "# columns: ";
  for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
  out << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
    out << '\n';
  }
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path.string(), "cannot open");
  CsvTable t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty()) continue;
    if (s[0] == '#') {
      const std::string tag = "# columns:";
      if (s.rfind(tag, 0) == 0)
        for (const auto& c : split(s.substr(tag.size()), ',')) t.columns.push_back(trim(c));
      continue;
    }
    std::vector<double> row;
    for (const auto& cell : split(s, ',')) {
      const std::string v = trim(cell);
      std::size_t used = 0;
      double x = 0.0;
      try {
        x = std::stod(v, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != v.size())
        throw SchemaError(path.string() + ":" + std::to_string(lineno), "not a number: '" + v + "'");
      row.push_back(x);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

namespace {

CsvTable snapshot_table(const PeriodicGrid& g, const Snapshot& s, bool coordinates) {
  CsvTable t;
  if (coordinates) t.columns = coordinate_names(g);
  for (const auto& nf : s.fields)
    for (int i = 0; i < nf.field.ncomp(); ++i) t.columns.push_back(nf.name + "_" + std::to_string(i));
  t.rows.resize(g.cells());
  for (std::size_t c = 0; c < g.cells(); ++c) {
    auto& row = t.rows[c];
    if (coordinates)
      for (int a = 0; a < g.dim(); ++a) row.push_back(g.center(c, a));
    for (const auto& nf : s.fields)
      for (int i = 0; i < nf.field.ncomp(); ++i) row.push_back(nf.field(c, i));
  }
  return t;
}

// Groups "<name>_<i>" columns back into fields, starting at column `first`.
Snapshot snapshot_from_table(const CsvTable& t, const PeriodicGrid& g, std::size_t first, const std::string& where) {
  Snapshot s;
  std::size_t col = first;
  while (col < t.columns.size()) {
    const std::string& c0 = t.columns[col];
    const auto us = c0.rfind('_');
    if (us == std::string::npos) throw SchemaError(where, "column '" + c0 + "' is not <field>_<component>");
    const std::string name = c0.substr(0, us);
    std::size_t n = 0;
    while (col + n < t.columns.size() && t.columns[col + n] == name + "_" + std::to_string(n)) ++n;
    if (n == 0) throw SchemaError(where, "column '" + c0 + "' out of order");
    s.fields.push_back({name, field_from_rows(g, static_cast<int>(n), t.rows, col, where)});
    col += n;
  }
  return s;
}

}  // namespace

void write_trajectory(const fs::path& dir, const PeriodicGrid& g, const std::vector<Snapshot>& snaps,
                      const std::vector<Diagnostics>& diag, const json& extra) {
  fs::create_directories(dir);
  json manifest = extra;
  manifest["grid"] = grid_json(g);
  json list = json::array();
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    const std::string name = snapshot_name(i);
    write_csv(dir / name, snapshot_table(g, snaps[i], false), "t=" + format_double(snaps[i].t));
    json fields = json::array();
    for (const auto& nf : snaps[i].fields) fields.push_back({{"name", nf.name}, {"ncomp", nf.field.ncomp()}});
    list.push_back({{"index", i}, {"t", snaps[i].t}, {"file", name}, {"fields", fields}});
  }
  manifest["snapshots"] = list;
  json d = json::array();
  for (const auto& x : diag)
    d.push_back({{"t", x.t}, {"mass", x.mass}, {"energy", x.energy}, {"constraint_drift", x.constraint}});
  manifest["diagnostics"] = d;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw SchemaError("out-dir", "cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

Trajectory read_trajectory(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw SchemaError("manifest", "no manifest.json in " + dir.string());
  std::ifstream in(mpath);
  Trajectory tr;
  try {
    tr.manifest = json::parse(in);
  } catch (const json::parse_error&) {
    throw SchemaError("manifest", "malformed JSON in " + mpath.string());
  }
  tr.grid = grid_from_json(member(tr.manifest, "grid", "manifest"), "manifest.grid");
  const json& snaps = member(tr.manifest, "snapshots", "manifest");
  if (!snaps.is_array()) throw SchemaError("manifest.snapshots", "expected an array");
  for (const json& s : snaps) {
    const fs::path file = dir / member(s, "file", "manifest.snapshots").get<std::string>();
    if (!fs::exists(file)) throw SchemaError("manifest.snapshots", "missing " + file.string());
    Snapshot snap = snapshot_from_table(read_csv(file), tr.grid, 0, file.string());
    snap.t = member(s, "t", "manifest.snapshots").get<double>();
    tr.snapshots.push_back(std::move(snap));
  }
  if (tr.manifest.contains("diagnostics"))
    for (const json& d : tr.manifest.at("diagnostics"))
      tr.diagnostics.push_back({d.at("t").get<double>(), d.at("mass").get<double>(), d.at("energy").get<double>(),
                                d.at("constraint_drift").get<double>()});
  return tr;
}

std::vector<fs::path> export_csv(const Trajectory& tr, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::vector<fs::path> files;
  for (std::size_t i = 0; i < tr.snapshots.size(); ++i) {
    const fs::path p = out_dir / snapshot_name(i);
    write_csv(p, snapshot_table(tr.grid, tr.snapshots[i], true), "t=" + format_double(tr.snapshots[i].t));
    files.push_back(p);
  }
  CsvTable d;
  d.columns = {"t", "mass", "energy", "constraint_drift"};
  for (const auto& x : tr.diagnostics) d.rows.push_back({x.t, x.mass, x.energy, x.constraint});
  const fs::path dp = out_dir / "diagnostics.csv";
  write_csv(dp, d);
  files.push_back(dp);
  return files;
}

Snapshot import_snapshot_csv(const fs::path& path, const PeriodicGrid& g) {
  const CsvTable t = read_csv(path);
  return snapshot_from_table(t, g, static_cast<std::size_t>(g.dim()), path.string());
}

}  // namespace gauge_ot::cli
