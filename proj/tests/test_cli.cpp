#include <sys/wait.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "gauge_ot_checks/fixtures.hpp"
#include "gauge_ot/version.hpp"
#include "io.hpp"

namespace fs = std::filesystem;
using namespace gauge_ot;
using namespace gauge_ot::cli;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("gauge_ot_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // exit status of the CLI; stderr lands in err_
  int run(const std::string& args) {
    const fs::path errf = dir_ / "stderr.txt";
    const std::string cmd = std::string(GAUGE_OT_CLI) + " " + args + " > " + (dir_ / "stdout.txt").string() +
                            " 2> " + errf.string();
    const int status = std::system(cmd.c_str());
    std::ifstream in(errf);
    std::stringstream ss;
    ss << in.rdbuf();
    err_ = ss.str();
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  fs::path write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }
  fs::path write(const std::string& name, const json& j) { return write(name, j.dump()); }

  static json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
  }

  static json values(const Field& f) { return f.values(); }

  json base(int n, int k) const {
    return {{"version", "1"}, {"grid", {{"dim", 1}, {"sizes", {n}}, {"lengths", {1.0}}}}, {"k", k}, {"seed", 7}};
  }

  fs::path dir_;
  std::string err_;
};

TEST(CsvIo, ExportRoundTripIsBitExact) {
  const auto g = PeriodicGrid::square(8);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  Field a(g, 3);
  for (double& v : a.values()) v = nd(rng) * std::pow(10.0, static_cast<int>(nd(rng) * 5));
  a(0, 0) = 0.1;
  a(1, 1) = -0.0;
  a(2, 2) = 1e-300;
  const Field b = fixtures::spd_field(g, 2, 4);
  const fs::path d = fs::temp_directory_path() / "gauge_ot_csv_roundtrip";
  fs::remove_all(d);
  write_trajectory(d / "state", g, {{0.25, {{"a", a}, {"sigma", b}}}}, {{0.25, 1.0, 2.0, 0.0}}, json::object());
  const Trajectory tr = read_trajectory(d / "state");
  const auto files = export_csv(tr, d / "csv");
  ASSERT_EQ(files.size(), 2u);
  const Snapshot s = import_snapshot_csv(files[0], g);
  ASSERT_EQ(s.fields.size(), 2u);
  EXPECT_EQ(s.fields[0].name, "a");
  EXPECT_EQ(s.fields[1].name, "sigma");
  EXPECT_EQ(std::memcmp(s.fields[0].field.values().data(), a.values().data(), a.values().size() * sizeof(double)), 0);
  EXPECT_EQ(std::memcmp(s.fields[1].field.values().data(), b.values().data(), b.values().size() * sizeof(double)), 0);
  fs::remove_all(d);
}

TEST_F(CliTest, DistanceIdenticalEndpoints) {
  const auto g = PeriodicGrid::line(16);
  const Field w = fixtures::half_density(g, 2, 1);
  json p = base(16, 2);
  p["space"] = "vhprob";
  p["endpoints"] = {values(w), values(w)};
  p["solver"] = {{"steps", 8}, {"max_seconds", 20.0}};
  ASSERT_EQ(run("distance " + write("p.json", p).string() + " --solver both --out " + (dir_ / "r.json").string()), 0)
      << err_;
  const json r = read_json(dir_ / "r.json");
  EXPECT_LE(r["distance_sq"].get<double>(), 1e-6);
  EXPECT_EQ(r["version"], version());
  EXPECT_EQ(r["seed"], 7);
  EXPECT_TRUE(r["results"].contains("shoot"));
  EXPECT_TRUE(r["results"].contains("relax"));
  EXPECT_TRUE(r["inputs"].contains("document"));
}

TEST_F(CliTest, DistanceReadsCsvEndpoints) {
  const auto g = PeriodicGrid::line(16);
  const Field w = fixtures::half_density(g, 1, 2);
  CsvTable t;
  t.columns = {"w_0"};
  for (std::size_t c = 0; c < g.cells(); ++c) t.rows.push_back({w(c)});
  write_csv(dir_ / "w.csv", t);
  json p = base(16, 1);
  p["space"] = "vhprob";
  p["endpoints"] = {"w.csv", "w.csv"};
  p["solver"] = {{"steps", 8}};
  ASSERT_EQ(run("distance " + write("p.json", p).string() + " --solver relax --out " + (dir_ / "r.json").string()), 0)
      << err_;
  EXPECT_LE(read_json(dir_ / "r.json")["distance_sq"].get<double>(), 1e-6);
}

TEST_F(CliTest, MalformedJsonIsAnInputError) {
  const fs::path p = write("bad.json", std::string("{\"version\": \"1\",\n  \"grid\": {\"dim\": 1,,}\n}"));
  EXPECT_EQ(run("distance " + p.string() + " --out " + (dir_ / "r.json").string()), 1);
  EXPECT_NE(err_.find("line 2"), std::string::npos) << err_;
}

TEST_F(CliTest, SchemaErrorsNameTheField) {
  json p = base(16, 1);
  p["grid"]["sizes"] = {16, 16};
  EXPECT_EQ(run("distance " + write("a.json", p).string() + " --out " + (dir_ / "r.json").string()), 1);
  EXPECT_NE(err_.find("grid.sizes"), std::string::npos) << err_;

  const auto g = PeriodicGrid::line(16);
  const Field w = fixtures::half_density(g, 1, 3);
  p = base(16, 1);
  p["space"] = "vhprob";
  p["endpoints"] = {values(w), json::array({1.0, 2.0})};
  EXPECT_EQ(run("distance " + write("b.json", p).string() + " --out " + (dir_ / "r.json").string()), 1);
  EXPECT_NE(err_.find("endpoints[1]"), std::string::npos) << err_;

  p["endpoints"] = {values(w), values(w)};
  p["space"] = "nope";
  EXPECT_EQ(run("distance " + write("c.json", p).string() + " --out " + (dir_ / "r.json").string()), 1);
  EXPECT_NE(err_.find("space"), std::string::npos) << err_;

  p["space"] = "vhprob";
  p["solver"] = {{"stepz", 3}};
  EXPECT_EQ(run("distance " + write("d.json", p).string() + " --out " + (dir_ / "r.json").string()), 1);
  EXPECT_NE(err_.find("solver.stepz"), std::string::npos) << err_;

  p.erase("solver");
  p["endpoints"] = {values(w), "missing.csv"};
  EXPECT_EQ(run("distance " + write("e.json", p).string() + " --out " + (dir_ / "r.json").string()), 1);
  EXPECT_NE(err_.find("endpoints[1]"), std::string::npos) << err_;
}

TEST_F(CliTest, GeodesicZeroDataGivesConstantSnapshotsAndExports) {
  const auto g = PeriodicGrid::line(16);
  const Field w = fixtures::half_density(g, 2, 4);
  json p = base(16, 2);
  p["initial"] = {{"w", values(w)}};
  const fs::path out = dir_ / "traj";
  ASSERT_EQ(run("geodesic " + write("g.json", p).string() +
                " --system vector-balanced --T 0.5 --steps 6 --out-dir " + out.string()),
            0)
      << err_;
  const Trajectory tr = read_trajectory(out);
  ASSERT_EQ(tr.snapshots.size(), 7u);
  for (const auto& s : tr.snapshots) EXPECT_LE((s.fields[2].field - w).max_abs(), 1e-14);

  ASSERT_EQ(run("export " + out.string() + " --format csv"), 0) << err_;
  std::ifstream in(out / "csv" / "diagnostics.csv");
  std::string line;
  int data = 0;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("#", 0), 0u);
  EXPECT_NE(line.find("t,mass,energy,constraint_drift"), std::string::npos);
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') ++data;
  EXPECT_EQ(data, 7);
  EXPECT_TRUE(fs::exists(out / "csv" / "snapshot_0006.csv"));
}

TEST_F(CliTest, GeodesicReportsConservation) {
  const auto g = PeriodicGrid::line(64);
  json p = base(64, 2);
  p["initial"] = {{"w", values(fixtures::half_density(g, 2, 5))},
                  {"theta", values(random_band_limited(g, 2, 6, 3, 0.02))}};
  ASSERT_EQ(run("geodesic " + write("v.json", p).string() + " --system vector-balanced --T 0.5 --steps 10 --out-dir " +
                (dir_ / "v").string()),
            0)
      << err_;
  const json rv = read_json(dir_ / "v" / "result.json");
  EXPECT_LE(rv["conservation"]["max_mass_drift"].get<double>(), 1e-8);
  EXPECT_LE(rv["conservation"]["max_relative_energy_drift"].get<double>(), 1e-6);
  EXPECT_EQ(rv["conservation"]["per_step"].size(), 11u);

  const auto g2 = PeriodicGrid::square(16, 1.0, DiffScheme::Spectral);
  const MatrixGeodesicState s = fixtures::random_matrix_state(g2, 2, 8, MatrixSystem::Balanced, 0.2);
  json q = {{"version", "1"},
            {"grid", {{"dim", 2}, {"sizes", {16, 16}}, {"lengths", {1.0, 1.0}}, {"scheme", "spectral"}}},
            {"k", 2},
            {"initial", {{"sigma", values(s.sigma())}, {"u", values(s.u)}, {"a", values(s.a)}}}};
  ASSERT_EQ(run("geodesic " + write("m.json", q).string() +
                " --system matrix-balanced --T 0.5 --steps 20 --substeps 2 --out-dir " + (dir_ / "m").string()),
            0)
      << err_;
  const json rm = read_json(dir_ / "m" / "result.json");
  EXPECT_LE(rm["conservation"]["max_constraint"].get<double>(), 1e-8);
  EXPECT_LE(rm["conservation"]["max_mass_drift"].get<double>(), 1e-8);
}

TEST_F(CliTest, GeodesicShockExitsTwo) {
  const auto g = PeriodicGrid::line(64);
  Field theta(g, 2);
  for (std::size_t c = 0; c < g.cells(); ++c) theta(c, 0) = std::sin(2 * std::numbers::pi * g.center(c, 0));
  json p = base(64, 2);
  p["initial"] = {{"w", values(fixtures::half_density(g, 2, 9))}, {"theta", values(theta)}};
  EXPECT_EQ(run("geodesic " + write("s.json", p).string() + " --system vector-balanced --T 2 --steps 8 --out-dir " +
                (dir_ / "s").string()),
            2)
      << err_;
  const json r = read_json(dir_ / "s" / "result.json");
  EXPECT_EQ(r["status"], "shock");
  EXPECT_GT(r["failing_time"].get<double>(), 0.0);
}

TEST_F(CliTest, ExportWithoutManifestFails) {
  fs::create_directories(dir_ / "empty");
  EXPECT_EQ(run("export " + (dir_ / "empty").string() + " --format csv"), 1);
  EXPECT_NE(err_.find("manifest"), std::string::npos) << err_;
}

TEST_F(CliTest, VerifyIsDeterministic) {
  ASSERT_EQ(run("verify --suite duality --size small --seed 4 --out " + (dir_ / "a.json").string()), 0) << err_;
  ASSERT_EQ(run("verify --suite duality --size small --seed 4 --out " + (dir_ / "b.json").string()), 0) << err_;
  const json a = read_json(dir_ / "a.json"), b = read_json(dir_ / "b.json");
  EXPECT_EQ(a["report"].dump(), b["report"].dump());
  EXPECT_TRUE(a["timings"].contains("total_seconds"));
}

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(run("verify --suite bogus"), 1);
  EXPECT_EQ(run("frobnicate"), 1);
}

}  // namespace
