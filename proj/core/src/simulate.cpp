#include "tpst/simulate.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "tpst/expression.hpp"
#include "tpst/io.hpp"
#include "tpst/parallel.hpp"
#include "tpst/rng.hpp"
#include "tpst/types.hpp"

namespace tpst {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;
constexpr double kPi = std::numbers::pi;

}  // namespace

std::function<double(const Point3&)> builtin_truth(const std::string& id, const Box3& box) {
  if (id == "smooth") {
    return [](const Point3& p) { return std::sin(kPi * p.x) * std::cos(kPi * p.y) * p.z; };
  }
  if (id == "wavy") {
    const double mid = 0.5 * (box.lo.x + box.hi.x);
    return [mid](const Point3& p) {
      double v = std::sin(kPi * p.x) * std::cos(kPi * p.y) * p.z;
      if (p.x > mid) v += 0.8 * std::sin(4 * kPi * p.x) * std::sin(4 * kPi * p.y);
      return v;
    };
  }
  if (id == "linear") {
    return [](const Point3& p) { return 1 + p.x + 2 * p.y - p.z; };
  }
  throw UsageError("unknown truth \"" + id + "\" (expected smooth, wavy, or linear)");
}

double noise_sigma(const std::vector<double>& truth_values, double psnr) {
  if (truth_values.empty()) throw DataError("no truth values to calibrate noise against");
  const double peak = *std::max_element(truth_values.begin(), truth_values.end());
  if (peak == 0) {
    throw DataError("truth is zero at its peak over the design points; PSNR is undefined");
  }
  return std::abs(peak) * std::pow(10.0, -psnr / 20.0);
}

std::vector<int> apply_missing(const std::vector<Point3>& points, const MissingSpec& spec,
                               std::uint64_t seed) {
  const int n = static_cast<int>(points.size());
  std::vector<int> retained;
  retained.reserve(points.size());

  if (spec.scheme == MissingSpec::Scheme::kNone) {
    for (int i = 0; i < n; ++i) retained.push_back(i);
    return retained;
  }
  if (!(spec.rate >= 0) || spec.rate >= 1) {
    throw UsageError("missing rate must lie in [0, 1)");
  }

  std::mt19937_64 rng(seed);
  std::bernoulli_distribution drop(spec.rate);
  switch (spec.scheme) {
    case MissingSpec::Scheme::kNone:
      break;
    case MissingSpec::Scheme::kRandom:
      for (int i = 0; i < n; ++i) {
        if (!drop(rng)) retained.push_back(i);
      }
      break;
    case MissingSpec::Scheme::kBlock:
      for (int i = 0; i < n; ++i) {
        if (!spec.block.contains(points[static_cast<std::size_t>(i)], 0)) retained.push_back(i);
      }
      break;
    case MissingSpec::Scheme::kBlockRandom: {
      std::vector<int> outside;
      for (int i = 0; i < n; ++i) {
        if (!spec.block.contains(points[static_cast<std::size_t>(i)], 0)) outside.push_back(i);
      }
      // Top the block loss up to the total target: if the block already ate
      // fraction f_b, survivors get dropped at (rate - f_b) / (1 - f_b).
      const double f_block = 1.0 - static_cast<double>(outside.size()) / n;
      double extra = 0;
      if (f_block < 1.0) extra = std::max(0.0, (spec.rate - f_block) / (1.0 - f_block));
      std::bernoulli_distribution drop_extra(extra);
      for (int i : outside) {
        if (!drop_extra(rng)) retained.push_back(i);
      }
      break;
    }
  }
  if (retained.empty()) throw DataError("missing-data scheme removed every observation");
  return retained;
}

double mise(const SplineField& field, const std::function<double(const Point3&)>& truth,
            const std::vector<Point3>& eval_points, int* excluded) {
  if (eval_points.empty()) throw DataError("no evaluation points");
  // Serial on purpose: mise runs inside the per-replication parallel loop.
  double acc = 0;
  long used = 0;
  int outside = 0;
  for (const Point3& p : eval_points) {
    const auto pred = eval_spline(field, p);
    if (!pred) {
      ++outside;
      continue;
    }
    const double diff = *pred - truth(p);
    acc += diff * diff;
    ++used;
  }
  if (excluded != nullptr) *excluded = outside;
  if (used == 0) throw DataError("every evaluation point fell outside the mesh");
  return acc / static_cast<double>(used);
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void config_error(const std::string& what) {
  throw UsageError("sim config: " + what);
}

Point3 parse_point(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) config_error(what + " must be [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Box3 parse_box(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2) config_error(what + " must be [[lo], [hi]]");
  return {parse_point(j[0], what + " lo"), parse_point(j[1], what + " hi")};
}

std::vector<double> parse_grid(const json& j, bool log_spaced, const std::string& what) {
  std::vector<double> grid;
  if (j.is_array()) {
    for (const auto& v : j) grid.push_back(v.get<double>());
  } else if (j.is_string()) {
    try {
      grid = parse_grid_spec(j.get<std::string>(), log_spaced);
    } catch (const UsageError& e) {
      config_error(what + ": " + e.what());
    }
  } else {
    config_error(what + " must be an array or \"lo:hi:count\"");
  }
  return grid;
}

FitConfig parse_fit_config(const json& j) {
  FitConfig cfg;
  if (j.contains("degree")) cfg.degree = j.at("degree").get<int>();
  if (j.contains("smoothness")) cfg.smoothness = j.at("smoothness").get<int>();
  if (j.contains("select")) {
    const std::string s = j.at("select").get<std::string>();
    if (s == "gcv") {
      cfg.select = Select::kGCV;
    } else if (s == "cv") {
      cfg.select = Select::kCV;
    } else if (s == "fixed") {
      cfg.select = Select::kFixed;
    } else {
      config_error("fit.select must be gcv, cv, or fixed");
    }
  }
  if (j.contains("lambda")) cfg.fixed_lambda = j.at("lambda").get<double>();
  if (cfg.select == Select::kFixed && !j.contains("lambda")) {
    config_error("fit.select \"fixed\" requires fit.lambda");
  }
  if (j.contains("lambda_grid")) {
    cfg.lambda_grid = parse_grid(j.at("lambda_grid"), /*log_spaced=*/true, "fit.lambda_grid");
  }
  if (j.contains("folds")) cfg.cv_folds = j.at("folds").get<int>();
  if (j.contains("rank_tol")) cfg.rank_rel_tol = j.at("rank_tol").get<double>();
  if (j.contains("hutchinson")) cfg.hutchinson_trace = j.at("hutchinson").get<bool>();
  if (j.contains("probes")) cfg.hutchinson_probes = j.at("probes").get<int>();
  return cfg;
}

AdaptiveConfig parse_adaptive_config(const json& j) {
  AdaptiveConfig cfg;
  if (j.contains("tau")) cfg.tau = j.at("tau").get<double>();
  if (j.contains("c_grid")) {
    cfg.c_grid = parse_grid(j.at("c_grid"), /*log_spaced=*/false, "adaptive.c_grid");
  }
  if (j.contains("quad_order")) cfg.quad_order = j.at("quad_order").get<int>();
  return cfg;
}

Scenario parse_scenario(const json& j, const std::string& default_name) {
  Scenario sc;
  sc.name = j.value("name", default_name);
  if (sc.name.empty() || sc.name.find(',') != std::string::npos ||
      sc.name.find('\n') != std::string::npos) {
    config_error("scenario name must be nonempty and free of commas/newlines");
  }

  if (j.contains("mesh")) {
    const json& m = j.at("mesh");
    if (m.contains("box")) sc.mesh.box = parse_box(m.at("box"), "mesh.box");
    if (m.contains("resolution")) {
      const json& r = m.at("resolution");
      if (!r.is_array() || r.size() != 3) config_error("mesh.resolution must be [nx, ny, nz]");
      for (int a = 0; a < 3; ++a) sc.mesh.resolution[static_cast<std::size_t>(a)] = r[static_cast<std::size_t>(a)].get<int>();
    }
    if (m.contains("holes")) {
      for (const auto& h : m.at("holes")) sc.mesh.holes.push_back(parse_box(h, "mesh.holes entry"));
    }
  }

  if (j.contains("truth")) {
    const json& t = j.at("truth");
    if (t.is_string()) {
      sc.truth_id = t.get<std::string>();
      sc.truth_text = sc.truth_id;
      sc.truth = builtin_truth(sc.truth_id, sc.mesh.box);
    } else if (t.is_object() && t.contains("expression")) {
      const std::string text = t.at("expression").get<std::string>();
      Expression expr = parse_expression(text);
      sc.truth_id = "custom";
      sc.truth_text = text;
      sc.truth = [expr](const Point3& p) { return expr(p); };
    } else {
      config_error("truth must be a builtin name or {\"expression\": \"...\"}");
    }
  } else {
    sc.truth = builtin_truth(sc.truth_id, sc.mesh.box);
  }

  if (j.contains("design")) {
    const json& d = j.at("design");
    const std::string kind = d.value("type", "random");
    if (kind == "random") {
      sc.design.kind = DesignSpec::Kind::kRandom;
      if (d.contains("n")) sc.design.n = d.at("n").get<int>();
      if (sc.design.n < 1) config_error("design.n must be >= 1");
    } else if (kind == "grid") {
      sc.design.kind = DesignSpec::Kind::kGrid;
      if (d.contains("resolution")) {
        const json& r = d.at("resolution");
        if (!r.is_array() || r.size() != 3) config_error("design.resolution must be [gx, gy, gz]");
        for (int a = 0; a < 3; ++a) {
          sc.design.grid[static_cast<std::size_t>(a)] = r[static_cast<std::size_t>(a)].get<int>();
          if (sc.design.grid[static_cast<std::size_t>(a)] < 1) config_error("design.resolution entries must be >= 1");
        }
      }
    } else {
      config_error("design.type must be random or grid");
    }
  }

  if (j.contains("psnr")) sc.psnr = j.at("psnr").get<double>();
  if (!std::isfinite(sc.psnr)) config_error("psnr must be finite");

  if (j.contains("missing")) {
    const json& m = j.at("missing");
    const std::string scheme = m.value("scheme", "none");
    if (scheme == "none") {
      sc.missing.scheme = MissingSpec::Scheme::kNone;
    } else if (scheme == "random") {
      sc.missing.scheme = MissingSpec::Scheme::kRandom;
    } else if (scheme == "block") {
      sc.missing.scheme = MissingSpec::Scheme::kBlock;
    } else if (scheme == "block_random") {
      sc.missing.scheme = MissingSpec::Scheme::kBlockRandom;
    } else {
      config_error("missing.scheme must be none, random, block, or block_random");
    }
    if (m.contains("rate")) sc.missing.rate = m.at("rate").get<double>();
    if (sc.missing.scheme != MissingSpec::Scheme::kNone &&
        (!(sc.missing.rate >= 0) || sc.missing.rate > 0.5)) {
      config_error("missing.rate must lie in [0, 0.5]");
    }
    const bool needs_block = sc.missing.scheme == MissingSpec::Scheme::kBlock ||
                             sc.missing.scheme == MissingSpec::Scheme::kBlockRandom;
    if (needs_block) {
      if (!m.contains("block")) config_error("missing scheme needs a block box");
      sc.missing.block = parse_box(m.at("block"), "missing.block");
      const Box3& dom = sc.mesh.box;
      const Box3& b = sc.missing.block;
      const bool overlaps = b.lo.x < dom.hi.x && b.hi.x > dom.lo.x && b.lo.y < dom.hi.y &&
                            b.hi.y > dom.lo.y && b.lo.z < dom.hi.z && b.hi.z > dom.lo.z;
      if (!overlaps) config_error("missing.block does not intersect the domain box");
    }
  }

  if (j.contains("replications")) sc.replications = j.at("replications").get<int>();
  if (sc.replications < 1) config_error("replications must be >= 1");
  if (j.contains("eval_points")) sc.eval_points = j.at("eval_points").get<int>();
  if (sc.eval_points < 1) config_error("eval_points must be >= 1");

  json jfit = j.value("fit", json::object());
  json jad = j.value("adaptive", json::object());
  json jmethods = j.value("methods", json::array({"tpst"}));
  if (!jmethods.is_array() || jmethods.empty()) config_error("methods must be a nonempty array");
  for (const auto& jm : jmethods) {
    MethodSpec ms;
    json fit_json = jfit;
    json ad_json = jad;
    if (jm.is_string()) {
      ms.name = jm.get<std::string>();
    } else if (jm.is_object()) {
      ms.name = jm.value("name", std::string());
      if (jm.contains("fit")) fit_json.merge_patch(jm.at("fit"));
      if (jm.contains("adaptive")) ad_json.merge_patch(jm.at("adaptive"));
    } else {
      config_error("methods entries must be names or objects");
    }
    if (ms.name != "tpst" && ms.name != "atpst") {
      config_error("method name must be tpst or atpst, got \"" + ms.name + "\"");
    }
    ms.fit = parse_fit_config(fit_json);
    ms.adaptive = parse_adaptive_config(ad_json);
    sc.methods.push_back(std::move(ms));
  }
  return sc;
}

}  // namespace

std::vector<double> parse_grid_spec(const std::string& spec, bool log_spaced) {
  // "lo:hi:count" — log-spaced for lambda grids, linear for C grids.
  double lo = 0, hi = 0;
  int count = 0;
  char c1 = 0, c2 = 0;
  std::istringstream ss(spec);
  if (!(ss >> lo >> c1 >> hi >> c2 >> count) || c1 != ':' || c2 != ':' || !ss.eof()) {
    throw UsageError("expected \"lo:hi:count\", got \"" + spec + "\"");
  }
  if (count < 1) throw UsageError("grid count must be >= 1");
  std::vector<double> grid;
  if (count == 1) {
    grid.push_back(lo);
  } else if (log_spaced) {
    if (!(lo > 0) || !(hi > lo)) {
      throw UsageError("need 0 < lo < hi for a log-spaced grid, got \"" + spec + "\"");
    }
    for (int i = 0; i < count; ++i) {
      grid.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
    }
  } else {
    if (!(hi > lo)) throw UsageError("need lo < hi, got \"" + spec + "\"");
    for (int i = 0; i < count; ++i) {
      grid.push_back(lo + (hi - lo) * static_cast<double>(i) / (count - 1));
    }
  }
  return grid;
}

SimConfig load_sim_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw DataError(path + ": invalid JSON (" + std::string(e.what()) + ")");
  }
  if (!doc.is_object()) throw DataError(path + ": top level must be a JSON object");

  SimConfig cfg;
  cfg.seed = doc.value("seed", 0ull);

  json base = doc;
  base.erase("scenarios");
  base.erase("seed");
  if (doc.contains("scenarios")) {
    const json& list = doc.at("scenarios");
    if (!list.is_array() || list.empty()) {
      throw UsageError("sim config: scenarios must be a nonempty array");
    }
    int idx = 0;
    for (const auto& over : list) {
      if (!over.is_object()) throw UsageError("sim config: scenarios entries must be objects");
      json merged = base;
      merged.merge_patch(over);
      cfg.scenarios.push_back(parse_scenario(merged, "scenario-" + std::to_string(idx)));
      ++idx;
    }
  } else {
    cfg.scenarios.push_back(parse_scenario(base, "base"));
  }

  // Duplicate names would make report rows ambiguous.
  for (std::size_t i = 0; i < cfg.scenarios.size(); ++i) {
    for (std::size_t k = i + 1; k < cfg.scenarios.size(); ++k) {
      if (cfg.scenarios[i].name == cfg.scenarios[k].name) {
        throw UsageError("sim config: duplicate scenario name \"" + cfg.scenarios[i].name + "\"");
      }
    }
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Experiment driver
// ---------------------------------------------------------------------------

namespace {

std::vector<Point3> sample_interior(const TetMesh& mesh, int count, std::mt19937_64& rng) {
  const Box3 box = mesh.bounding_box();
  std::uniform_real_distribution<double> ux(box.lo.x, box.hi.x);
  std::uniform_real_distribution<double> uy(box.lo.y, box.hi.y);
  std::uniform_real_distribution<double> uz(box.lo.z, box.hi.z);
  std::vector<Point3> pts;
  pts.reserve(static_cast<std::size_t>(count));
  long attempts = 0;
  const long max_attempts = 10000L + 1000L * count;
  while (static_cast<int>(pts.size()) < count) {
    if (++attempts > max_attempts) {
      throw DataError("rejection sampling failed: the mesh covers too little of its bounding box");
    }
    Point3 p{ux(rng), uy(rng), uz(rng)};
    if (mesh.locate(p)) pts.push_back(p);
  }
  return pts;
}

std::vector<Point3> grid_design(const TetMesh& mesh, const std::array<int, 3>& res) {
  const Box3 box = mesh.bounding_box();
  std::vector<Point3> pts;
  for (int i = 0; i < res[0]; ++i) {
    for (int jj = 0; jj < res[1]; ++jj) {
      for (int k = 0; k < res[2]; ++k) {
        Point3 p{box.lo.x + (i + 0.5) * (box.hi.x - box.lo.x) / res[0],
                 box.lo.y + (jj + 0.5) * (box.hi.y - box.lo.y) / res[1],
                 box.lo.z + (k + 0.5) * (box.hi.z - box.lo.z) / res[2]};
        if (mesh.locate(p)) pts.push_back(p);
      }
    }
  }
  if (pts.empty()) throw DataError("fixed design grid has no points inside the mesh");
  return pts;
}

[[noreturn]] void rethrow_labeled(const std::string& label) {
  try {
    throw;
  } catch (const UsageError& e) {
    throw UsageError(label + e.what());
  } catch (const DataError& e) {
    throw DataError(label + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(label + e.what());
  } catch (const std::exception& e) {
    throw DataError(label + e.what());
  }
}

}  // namespace

SimReport run_experiment(const SimConfig& config, std::ostream* log) {
  SimReport report;
  for (const Scenario& sc : config.scenarios) {
    try {
      if (!sc.truth) throw UsageError("scenario has no truth function");
      TetMesh mesh = generate_box_mesh(sc.mesh.box, sc.mesh.resolution, sc.mesh.holes);

      // One context per distinct (degree, smoothness); methods share them.
      std::vector<FitContext> contexts;
      std::vector<std::size_t> ctx_of_method;
      for (const MethodSpec& ms : sc.methods) {
        std::size_t found = contexts.size();
        for (std::size_t c = 0; c < contexts.size(); ++c) {
          if (contexts[c].degree == ms.fit.degree && contexts[c].smoothness == ms.fit.smoothness) {
            found = c;
            break;
          }
        }
        if (found == contexts.size()) {
          contexts.push_back(make_fit_context(mesh, ms.fit.degree, ms.fit.smoothness,
                                              ms.fit.rank_rel_tol));
        }
        ctx_of_method.push_back(found);
      }

      // Evaluation points are scenario-level: shared by every replication.
      std::mt19937_64 eval_rng(sub_seed(config.seed, "eval:" + sc.name));
      const std::vector<Point3> eval_pts = sample_interior(mesh, sc.eval_points, eval_rng);

      const std::size_t methods = sc.methods.size();
      const std::size_t reps = static_cast<std::size_t>(sc.replications);
      const std::size_t base = report.records.size();
      report.records.resize(base + methods * reps);

      parallel_for(reps, [&](std::size_t rep) {
        // Design points and responses for this replication.
        std::vector<Point3> design;
        if (sc.design.kind == DesignSpec::Kind::kRandom) {
          std::mt19937_64 rng(sub_seed(config.seed, "design:" + sc.name, rep));
          design = sample_interior(mesh, sc.design.n, rng);
        } else {
          design = grid_design(mesh, sc.design.grid);
        }
        std::vector<double> truth_vals(design.size());
        for (std::size_t i = 0; i < design.size(); ++i) truth_vals[i] = sc.truth(design[i]);
        const double sigma = noise_sigma(truth_vals, sc.psnr);

        std::mt19937_64 noise_rng(sub_seed(config.seed, "noise:" + sc.name, rep));
        std::normal_distribution<double> gauss(0.0, sigma);
        Eigen::VectorXd y(static_cast<Eigen::Index>(design.size()));
        for (std::size_t i = 0; i < design.size(); ++i) {
          y[static_cast<Eigen::Index>(i)] = truth_vals[i] + gauss(noise_rng);
        }

        std::vector<int> keep =
            apply_missing(design, sc.missing, sub_seed(config.seed, "missing:" + sc.name, rep));
        std::vector<Point3> kept_pts;
        kept_pts.reserve(keep.size());
        Eigen::VectorXd kept_y(static_cast<Eigen::Index>(keep.size()));
        for (std::size_t i = 0; i < keep.size(); ++i) {
          kept_pts.push_back(design[static_cast<std::size_t>(keep[i])]);
          kept_y[static_cast<Eigen::Index>(i)] = y[keep[i]];
        }
        Dataset data = make_dataset(mesh, kept_pts, kept_y);

        for (std::size_t mi = 0; mi < methods; ++mi) {
          const MethodSpec& ms = sc.methods[mi];
          FitConfig fit_cfg = ms.fit;
          fit_cfg.seed = sub_seed(config.seed, "fit:" + sc.name + ":" + ms.name, rep);
          const auto t0 = std::chrono::steady_clock::now();
          FitResult fr = ms.name == "atpst"
                             ? fit_atpst(contexts[ctx_of_method[mi]], data, fit_cfg, ms.adaptive)
                             : fit_tpst(contexts[ctx_of_method[mi]], data, fit_cfg);
          RepRecord& rec = report.records[base + mi * reps + rep];
          rec.scenario = sc.name;
          rec.method = ms.name;
          rec.replication = static_cast<int>(rep);
          rec.mise = mise(fr.field, sc.truth, eval_pts);
          rec.lambda = fr.lambda;
          rec.c = fr.c_value;
          rec.rss = fr.rss;
          rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
      });
      if (log != nullptr) {
        (*log) << "scenario " << sc.name << ": " << reps << " replications x " << methods
               << " methods done\n";
      }
    } catch (...) {
      rethrow_labeled("scenario \"" + sc.name + "\": ");
    }
  }
  return report;
}

void write_report_csv(const SimReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "scenario,method,replication,mise,lambda,c\n";
  for (const RepRecord& r : report.records) {
    out << r.scenario << ',' << r.method << ',' << r.replication << ',' << format_g17(r.mise)
        << ',' << format_g17(r.lambda) << ',';
    if (std::isfinite(r.c)) out << format_g17(r.c);
    out << '\n';
  }
}

void write_summary_json(const SimReport& report, const std::string& path) {
  // Group records by (scenario, method) in first-appearance order.
  std::vector<std::pair<std::string, std::string>> keys;
  std::vector<std::vector<const RepRecord*>> groups;
  for (const RepRecord& r : report.records) {
    std::size_t g = keys.size();
    for (std::size_t i = 0; i < keys.size(); ++i) {
      if (keys[i].first == r.scenario && keys[i].second == r.method) {
        g = i;
        break;
      }
    }
    if (g == keys.size()) {
      keys.emplace_back(r.scenario, r.method);
      groups.emplace_back();
    }
    groups[g].push_back(&r);
  }

  ordered_json doc;
  doc["groups"] = ordered_json::array();
  for (std::size_t g = 0; g < keys.size(); ++g) {
    const auto& rows = groups[g];
    const double n = static_cast<double>(rows.size());
    double mean_mise = 0, mean_rss = 0, mean_lambda = 0;
    for (const RepRecord* r : rows) {
      mean_mise += r->mise;
      mean_rss += r->rss;
      mean_lambda += r->lambda;
    }
    mean_mise /= n;
    mean_rss /= n;
    mean_lambda /= n;
    double var = 0;
    for (const RepRecord* r : rows) var += (r->mise - mean_mise) * (r->mise - mean_mise);
    const double se = rows.size() > 1 ? std::sqrt(var / (n - 1)) / std::sqrt(n) : 0.0;

    ordered_json entry;
    entry["scenario"] = keys[g].first;
    entry["method"] = keys[g].second;
    entry["replications"] = rows.size();
    entry["mean_mise"] = mean_mise;
    entry["se_mise"] = se;
    entry["mean_rss"] = mean_rss;
    entry["mean_lambda"] = mean_lambda;
    ordered_json mise_arr = ordered_json::array(), rss_arr = ordered_json::array(),
                 lam_arr = ordered_json::array(), c_arr = ordered_json::array();
    for (const RepRecord* r : rows) {
      mise_arr.push_back(r->mise);
      rss_arr.push_back(r->rss);
      lam_arr.push_back(r->lambda);
      if (std::isfinite(r->c)) {
        c_arr.push_back(r->c);
      } else {
        c_arr.push_back(nullptr);
      }
    }
    entry["mise"] = std::move(mise_arr);
    entry["rss"] = std::move(rss_arr);
    entry["lambda"] = std::move(lam_arr);
    entry["c"] = std::move(c_arr);
    doc["groups"].push_back(std::move(entry));
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << doc.dump(2) << '\n';
}

}  // namespace tpst
