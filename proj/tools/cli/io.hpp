#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gauge_ot/bvp.hpp"
#include "gauge_ot/grid.hpp"
#include "gauge_ot/matrix_transport.hpp"
#include "gauge_ot/vector_transport.hpp"

namespace gauge_ot::cli {

using nlohmann::json;

// Input error tied to a location in the problem document ("grid.sizes", "line 3 column 7", ...).
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string field, const std::string& msg)
      : std::runtime_error("field '" + field + "': " + msg), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Parsed problem document. Relative CSV paths resolve against `base_dir`.
struct ProblemFile {
  json doc;
  std::filesystem::path base_dir;
  PeriodicGrid grid;
  int k = 1;
  std::uint64_t seed = 0;
};

ProblemFile load_problem(const std::filesystem::path& path);

// A field given either as an inline row-major array (cells x ncomp) or a CSV path.
Field read_field_value(const ProblemFile& pf, const std::string& field, int ncomp);

// distance: space, endpoints [e0, e1], optional solver options.
BvpProblem distance_problem(const ProblemFile& pf);

// geodesic: "initial" holds w (vector systems) or sigma (matrix systems), plus either a covector
// (theta / P) or explicit controls u, a (zero when absent).
VectorGeodesicState vector_initial_state(const ProblemFile& pf, VectorSystem system);
MatrixGeodesicState matrix_initial_state(const ProblemFile& pf, MatrixSystem system);

// CSV with an optional "# columns: a,b,c" header; every value written with 17 significant digits.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};
void write_csv(const std::filesystem::path& path, const CsvTable& t, const std::string& comment = {});
CsvTable read_csv(const std::filesystem::path& path);
std::string format_double(double v);

// Trajectory directory: manifest.json plus one CSV per snapshot with columns named
// <field>_<component>. Each snapshot is a list of named fields.
struct NamedField {
  std::string name;
  Field field;
};
struct Snapshot {
  double t = 0.0;
  std::vector<NamedField> fields;
};
struct Diagnostics {
  double t = 0.0;
  double mass = 0.0;
  double energy = 0.0;
  double constraint = 0.0;
};

json grid_json(const PeriodicGrid& g);
PeriodicGrid grid_from_json(const json& j, const std::string& where);

// Writes snapshot_NNNN.csv files and manifest.json; `extra` is merged into the manifest.
void write_trajectory(const std::filesystem::path& dir, const PeriodicGrid& g, const std::vector<Snapshot>& snaps,
                      const std::vector<Diagnostics>& diag, const json& extra);
struct Trajectory {
  json manifest;
  PeriodicGrid grid;
  std::vector<Snapshot> snapshots;
  std::vector<Diagnostics> diagnostics;
};
// Throws SchemaError("manifest", ...) when the manifest is missing or malformed.
Trajectory read_trajectory(const std::filesystem::path& dir);

// Export: per-snapshot CSV with cell-centre coordinates ahead of the field columns, plus
// diagnostics.csv (t, mass, energy, constraint_drift). Returns the files written.
std::vector<std::filesystem::path> export_csv(const Trajectory& tr, const std::filesystem::path& out_dir);
// Inverse of the export for one snapshot file: drops the coordinate columns.
Snapshot import_snapshot_csv(const std::filesystem::path& path, const PeriodicGrid& g);

}  // namespace gauge_ot::cli
