#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tpst/adaptive.hpp"
#include "tpst/mesh.hpp"
#include "tpst/solver.hpp"

namespace tpst {

struct MeshSpec {
  Box3 box{{0, 0, 0}, {2, 1, 1}};
  std::array<int, 3> resolution{6, 3, 3};
  std::vector<Box3> holes;
};

struct DesignSpec {
  enum class Kind { kRandom, kGrid };
  Kind kind = Kind::kRandom;
  int n = 2000;                      // kRandom
  std::array<int, 3> grid{20, 10, 10};  // kGrid: cell-center voxel grid
};

struct MissingSpec {
  enum class Scheme { kNone, kRandom, kBlock, kBlockRandom };
  Scheme scheme = Scheme::kNone;
  double rate = 0;  // target total missing fraction
  Box3 block{{0, 0, 0}, {0, 0, 0}};
};

struct MethodSpec {
  std::string name = "tpst";  // "tpst" or "atpst"
  FitConfig fit;
  AdaptiveConfig adaptive;
};

/// One fully resolved experiment: everything a replication needs.
struct Scenario {
  std::string name;
  MeshSpec mesh;
  std::string truth_id = "smooth";   // smooth | wavy | linear | custom
  std::string truth_text = "smooth"; // builtin id, or the expression source
  std::function<double(const Point3&)> truth;
  DesignSpec design;
  double psnr = 10;
  MissingSpec missing;
  int replications = 20;
  int eval_points = 2000;
  std::vector<MethodSpec> methods;
};

struct SimConfig {
  std::uint64_t seed = 0;
  std::vector<Scenario> scenarios;
};

/// Parse sim.json: a base scenario plus an optional "scenarios" array of
/// overrides, each inheriting every unspecified field from the base.
SimConfig load_sim_config(const std::string& path);

/// Expand "lo:hi:count" into count values, log-spaced (lambda grids) or
/// linearly spaced (C grids). count = 1 yields {lo}.
std::vector<double> parse_grid_spec(const std::string& spec, bool log_spaced);

/// Built-in truth functions by id; the domain box fixes the jump midpoint of
/// "wavy". Unknown ids throw UsageError.
std::function<double(const Point3&)> builtin_truth(const std::string& id, const Box3& box);

/// sigma such that 10*log10(max_i m_i^2 / sigma^2) = psnr, using |max_i m_i|.
/// Throws DataError when the truth is identically zero at the design points.
double noise_sigma(const std::vector<double>& truth_values, double psnr);

/// Indices of retained points under a missing-data scheme. Random drops are
/// independent coin flips; block drops everything inside the block box;
/// block+random tops the block up with random drops among survivors until the
/// expected total fraction reaches `rate`. Throws DataError when nothing
/// survives.
std::vector<int> apply_missing(const std::vector<Point3>& points, const MissingSpec& spec,
                               std::uint64_t seed);

/// Mean squared prediction error over evaluation points; points that fail to
/// locate are excluded and counted. Throws DataError when none locate.
double mise(const SplineField& field, const std::function<double(const Point3&)>& truth,
            const std::vector<Point3>& eval_points, int* excluded = nullptr);

struct RepRecord {
  std::string scenario;
  std::string method;
  int replication = 0;
  double mise = 0;
  double lambda = 0;
  double c = std::numeric_limits<double>::quiet_NaN();  // NaN for plain tpst
  double rss = 0;
  double seconds = 0;  // wall clock; manifest-only, never in report.csv
};

struct SimReport {
  std::vector<RepRecord> records;  // scenario-major, then method, then replication
};

/// Run every scenario: mesh, shared evaluation points, then per replication
/// design -> truth -> noise -> missing -> fit per method -> MISE. All
/// randomness derives from config.seed via labeled sub-seeds; replications
/// run concurrently and write into preassigned slots, so reruns are
/// bit-identical at any thread count. `log` gets one progress line per
/// scenario when non-null.
SimReport run_experiment(const SimConfig& config, std::ostream* log = nullptr);

/// report.csv: header + one row per record with columns
/// scenario,method,replication,mise,lambda,c (c empty for tpst).
void write_report_csv(const SimReport& report, const std::string& path);

/// summary.json: per (scenario, method) replication count, mean/standard
/// error of MISE, mean RSS/lambda, and the per-replication arrays.
void write_summary_json(const SimReport& report, const std::string& path);

}  // namespace tpst
