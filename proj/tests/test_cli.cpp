// End-to-end checks of the tpst binary: exit codes, file outputs, and
// determinism. Each case runs the real executable in a scratch directory.

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "doctest.h"
#include "test_helpers.hpp"
#include "tpst/bernstein.hpp"
#include "tpst/io.hpp"
#include "tpst/mesh.hpp"

using namespace tpst;
using namespace tpst::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run_cli(const std::string& args, const fs::path& dir, std::string* out = nullptr,
            std::string* err = nullptr) {
  const fs::path out_path = dir / "stdout.txt";
  const fs::path err_path = dir / "stderr.txt";
  std::string cmd = std::string(TPST_CLI_PATH) + " " + args + " > " + out_path.string() +
                    " 2> " + err_path.string();
  int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  if (out != nullptr) *out = read_file(out_path);
  if (err != nullptr) *err = read_file(err_path);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

// A one-cell box split into six tets, saved as node/element files.
void write_box_mesh(const fs::path& dir) {
  TetMesh mesh = generate_box_mesh({{0, 0, 0}, {1, 1, 1}}, {1, 1, 1});
  save_mesh(mesh, (dir / "nodes.csv").string(), (dir / "elems.csv").string());
}

// Observations of a fixed quadratic at reproducible random points.
void write_quadratic_data(const fs::path& dir, int n, const std::string& name = "data.csv") {
  std::mt19937_64 rng(2024);
  std::ostringstream os;
  os << "x,y,z,value\n";
  for (int i = 0; i < n; ++i) {
    Point3 p = random_box_point({{0, 0, 0}, {1, 1, 1}}, rng);
    double v = 1 + p.x + 2 * p.y - p.z + 0.5 * p.x * p.y;
    os << format_g17(p.x) << ',' << format_g17(p.y) << ',' << format_g17(p.z) << ','
       << format_g17(v) << '\n';
  }
  write_file(dir / name, os.str());
}

std::string mesh_flags(const fs::path& dir) {
  return "--nodes " + (dir / "nodes.csv").string() + " --elems " + (dir / "elems.csv").string();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("version flag prints the library version") {
  auto dir = scratch_dir("cli_version");
  std::string out;
  CHECK(run_cli("--version", dir, &out) == 0);
  CHECK(out.find(kVersion) != std::string::npos);
}

TEST_CASE("bad invocations exit with the usage code") {
  auto dir = scratch_dir("cli_usage");
  CHECK(run_cli("--frobnicate", dir) == 1);
  CHECK(run_cli("", dir) == 1);              // a subcommand is required
  CHECK(run_cli("fit", dir) == 1);           // missing required options
  CHECK(run_cli("fit " + mesh_flags(dir) + " --data d --out o --select bogus", dir) == 1);
}

TEST_CASE("mesh-check reports a clean partition") {
  auto dir = scratch_dir("cli_mesh_ok");
  write_box_mesh(dir);
  std::string out;
  int code = run_cli("mesh-check " + (dir / "nodes.csv").string() + " " +
                         (dir / "elems.csv").string() + " --per-tet",
                     dir, &out);
  CHECK(code == 0);
  json doc = json::parse(out);
  CHECK(doc.at("valid").get<bool>());
  CHECK(doc.at("violations").empty());
  CHECK(doc.at("quality").at("num_tets").get<int>() == 6);
  CHECK(doc.at("quality").at("num_nodes").get<int>() == 8);
  CHECK(doc.at("quality").at("total_volume").get<double>() == doctest::Approx(1.0));
  CHECK(doc.at("quality").at("per_tet").size() == 6);
  CHECK(doc.at("inputs").at("nodes").at("checksum").get<std::string>().rfind("fnv1a:", 0) == 0);
}

TEST_CASE("mesh-check reports violations without failing") {
  auto dir = scratch_dir("cli_mesh_bad");
  write_box_mesh(dir);
  // Duplicate the last element row: same tet twice is a partition violation.
  std::string elems = read_file(dir / "elems.csv");
  size_t last = elems.find_last_of('\n', elems.size() - 2);
  write_file(dir / "elems.csv", elems + elems.substr(last + 1));

  std::string out;
  int code = run_cli("mesh-check " + (dir / "nodes.csv").string() + " " +
                         (dir / "elems.csv").string(),
                     dir, &out);
  CHECK(code == 0);  // the check ran; invalidity is data, not an error
  json doc = json::parse(out);
  CHECK(!doc.at("valid").get<bool>());
  bool saw_duplicate = false;
  for (const auto& v : doc.at("violations")) {
    if (v.at("kind").get<std::string>() == "duplicate_tet") saw_duplicate = true;
  }
  CHECK(saw_duplicate);
}

TEST_CASE("mesh-check on unreadable files is a data error") {
  auto dir = scratch_dir("cli_mesh_missing");
  std::string err;
  CHECK(run_cli("mesh-check " + (dir / "absent.csv").string() + " " +
                    (dir / "absent2.csv").string(),
                dir, nullptr, &err) == 2);
  CHECK(err.find("data error") != std::string::npos);
}

TEST_CASE("fit writes a document, coefficients, and manifest deterministically") {
  auto dir = scratch_dir("cli_fit");
  write_box_mesh(dir);
  write_quadratic_data(dir, 200);
  const std::string common = "fit " + mesh_flags(dir) + " --data " +
                             (dir / "data.csv").string() +
                             " --degree 2 --smoothness 0 --select fixed --lambda 1e-3";

  CHECK(run_cli(common + " --out " + (dir / "fit.json").string(), dir) == 0);
  CHECK(fs::exists(dir / "fit.json"));
  CHECK(fs::exists(dir / "fit_coefficients.csv"));
  CHECK(fs::exists(dir / "fit.json.manifest.json"));

  json doc = json::parse(read_file(dir / "fit.json"));
  CHECK(doc.at("degree").get<int>() == 2);
  CHECK(doc.at("smoothness").get<int>() == 0);
  CHECK(doc.at("fit").at("lambda").get<double>() == 1e-3);
  CHECK(doc.at("fit").at("n_used").get<int>() == 200);

  json manifest = json::parse(read_file(dir / "fit.json.manifest.json"));
  CHECK(manifest.at("command").get<std::string>() == "fit");
  CHECK(manifest.at("config").at("select").get<std::string>() == "fixed");
  CHECK(manifest.at("timings").contains("total_seconds"));

  // Same inputs, second output path: identical document and coefficients.
  fs::create_directories(dir / "again");
  CHECK(run_cli(common + " --out " + (dir / "again" / "fit.json").string(), dir) == 0);
  CHECK(read_file(dir / "again" / "fit.json") == read_file(dir / "fit.json"));
  CHECK(read_file(dir / "again" / "fit_coefficients.csv") ==
        read_file(dir / "fit_coefficients.csv"));
}

TEST_CASE("fit flag validation and missing inputs use distinct exit codes") {
  auto dir = scratch_dir("cli_fit_err");
  write_box_mesh(dir);
  write_quadratic_data(dir, 50);
  const std::string base = "fit " + mesh_flags(dir) + " --data " +
                           (dir / "data.csv").string() + " --out " +
                           (dir / "fit.json").string();

  std::string err;
  CHECK(run_cli(base + " --select fixed", dir, nullptr, &err) == 1);
  CHECK(err.find("--lambda") != std::string::npos);

  CHECK(run_cli("fit " + mesh_flags(dir) + " --data " + (dir / "nope.csv").string() +
                    " --out " + (dir / "fit.json").string() +
                    " --select fixed --lambda 1",
                dir) == 2);
}

TEST_CASE("underdetermined interpolation surfaces as a numerical error") {
  auto dir = scratch_dir("cli_fit_singular");
  write_box_mesh(dir);
  write_quadratic_data(dir, 3);  // far fewer points than coefficients
  std::string err;
  int code = run_cli("fit " + mesh_flags(dir) + " --data " + (dir / "data.csv").string() +
                         " --out " + (dir / "fit.json").string() +
                         " --degree 2 --smoothness 0 --select fixed --lambda 0",
                     dir, nullptr, &err);
  CHECK(code == 3);
  CHECK(err.find("numerical error") != std::string::npos);
}

TEST_CASE("predict round-trips the fitted field and flags exterior points") {
  auto dir = scratch_dir("cli_predict");
  write_box_mesh(dir);
  write_quadratic_data(dir, 200);
  REQUIRE(run_cli("fit " + mesh_flags(dir) + " --data " + (dir / "data.csv").string() +
                      " --out " + (dir / "fit.json").string() +
                      " --degree 2 --smoothness 0 --select fixed --lambda 1e-3",
                  dir) == 0);

  // Three interior probes plus one point far outside the mesh.
  std::vector<Point3> probes = {{0.25, 0.5, 0.75}, {0.9, 0.1, 0.2}, {0.5, 0.5, 0.5}};
  std::ostringstream ps;
  ps << "x,y,z\n";
  for (const Point3& p : probes) {
    ps << format_g17(p.x) << ',' << format_g17(p.y) << ',' << format_g17(p.z) << '\n';
  }
  ps << "9,9,9\n";
  write_file(dir / "points.csv", ps.str());

  REQUIRE(run_cli("predict --fit " + (dir / "fit.json").string() + " --points " +
                      (dir / "points.csv").string() + " --out " + (dir / "pred.csv").string(),
                  dir) == 0);
  CHECK(fs::exists(dir / "pred.csv.manifest.json"));

  // The CSV must reproduce the library's own evaluations bit for bit.
  TetMesh mesh = load_mesh((dir / "nodes.csv").string(), (dir / "elems.csv").string());
  FitDocument doc = load_fit_document((dir / "fit.json").string());
  SplineField field{&mesh, doc.degree, doc.smoothness, doc.coeffs};

  std::istringstream pred(read_file(dir / "pred.csv"));
  std::string line;
  std::getline(pred, line);
  CHECK(line == "x,y,z,prediction");
  for (const Point3& p : probes) {
    REQUIRE(std::getline(pred, line));
    const std::string value = line.substr(line.rfind(',') + 1);
    auto expect = eval_spline(field, p);
    REQUIRE(expect.has_value());
    CHECK(std::strtod(value.c_str(), nullptr) == *expect);
  }
  REQUIRE(std::getline(pred, line));
  CHECK(line.back() == ',');  // exterior point: empty prediction field
}

TEST_CASE("predict refuses a mesh that no longer matches the fit") {
  auto dir = scratch_dir("cli_predict_tamper");
  write_box_mesh(dir);
  write_quadratic_data(dir, 150);
  REQUIRE(run_cli("fit " + mesh_flags(dir) + " --data " + (dir / "data.csv").string() +
                      " --out " + (dir / "fit.json").string() +
                      " --degree 2 --smoothness 0 --select fixed --lambda 1e-3",
                  dir) == 0);
  write_file(dir / "points.csv", "0.5,0.5,0.5\n");

  // Same mesh content plus a comment line: geometry identical, checksum not.
  write_file(dir / "nodes.csv", read_file(dir / "nodes.csv") + "# touched\n");
  std::string err;
  CHECK(run_cli("predict --fit " + (dir / "fit.json").string() + " --points " +
                    (dir / "points.csv").string() + " --out " + (dir / "pred.csv").string(),
                dir, nullptr, &err) == 2);
  CHECK(err.find("checksum mismatch") != std::string::npos);
}

TEST_CASE("simulate writes a reproducible report") {
  auto dir = scratch_dir("cli_simulate");
  write_file(dir / "sim.json", R"({
    "seed": 99,
    "mesh": {"box": [[0,0,0],[2,1,1]], "resolution": [2,1,1]},
    "truth": "smooth",
    "design": {"type": "random", "n": 150},
    "psnr": 10,
    "replications": 2,
    "eval_points": 100,
    "fit": {"select": "gcv", "lambda_grid": "1e-3:1e-1:2"},
    "scenarios": [
      {"name": "plain"},
      {"name": "adaptive", "methods": [
        {"name": "atpst", "adaptive": {"c_grid": [2.0]}}]}
    ]
  })");

  const std::string cmd = "--quiet simulate --config " + (dir / "sim.json").string();
  CHECK(run_cli(cmd + " --out " + (dir / "out1").string(), dir) == 0);
  for (const char* name : {"report.csv", "summary.json", "manifest.json"}) {
    CHECK(fs::exists(dir / "out1" / name));
  }
  std::string report = read_file(dir / "out1" / "report.csv");
  CHECK(report.rfind("scenario,method,replication,mise,lambda,c\n", 0) == 0);
  CHECK(std::count(report.begin(), report.end(), '\n') == 1 + 4);
  CHECK(report.find("plain,tpst,") != std::string::npos);
  CHECK(report.find("adaptive,atpst,") != std::string::npos);

  json manifest = json::parse(read_file(dir / "out1" / "manifest.json"));
  CHECK(manifest.at("seed").get<int>() == 99);
  CHECK(manifest.at("config").at("scenarios").size() == 2);
  CHECK(manifest.at("timings").at("records").size() == 4);

  // A fresh run into a fresh directory reproduces the report exactly.
  CHECK(run_cli(cmd + " --out " + (dir / "out2").string(), dir) == 0);
  CHECK(read_file(dir / "out2" / "report.csv") == report);

  CHECK(run_cli("simulate --config " + (dir / "absent.json").string() + " --out " +
                    (dir / "out3").string(),
                dir) == 2);
}

}  // TEST_SUITE("cli")
