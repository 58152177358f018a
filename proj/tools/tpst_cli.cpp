// tpst: command-line front end for the trivariate penalized spline library.
// Subcommands: mesh-check, fit, predict, simulate. Exit codes: 0 success,
// 1 usage error, 2 data/mesh error, 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "tpst/adaptive.hpp"
#include "tpst/io.hpp"
#include "tpst/mesh.hpp"
#include "tpst/parallel.hpp"
#include "tpst/simulate.hpp"
#include "tpst/solver.hpp"
#include "tpst/types.hpp"

namespace {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

ordered_json tool_stamp() {
  return {{"name", "tpst"}, {"version", tpst::kVersion}};
}

ordered_json input_stamp(const std::string& path, std::uint64_t checksum) {
  return {{"path", path}, {"checksum", tpst::checksum_string(checksum)}};
}

void write_json_file(const std::string& path, const ordered_json& doc) {
  std::ofstream out(path);
  if (!out) throw tpst::DataError("cannot write " + path);
  out << doc.dump(2) << '\n';
}

ordered_json box_json(const tpst::Box3& b) {
  return ordered_json::array(
      {{b.lo.x, b.lo.y, b.lo.z}, {b.hi.x, b.hi.y, b.hi.z}});
}

const char* select_name(tpst::Select s) {
  switch (s) {
    case tpst::Select::kGCV: return "gcv";
    case tpst::Select::kCV: return "cv";
    case tpst::Select::kFixed: return "fixed";
  }
  return "gcv";
}

ordered_json fit_config_json(const tpst::FitConfig& cfg) {
  ordered_json j;
  j["degree"] = cfg.degree;
  j["smoothness"] = cfg.smoothness;
  j["select"] = select_name(cfg.select);
  if (cfg.select == tpst::Select::kFixed) j["lambda"] = cfg.fixed_lambda;
  j["lambda_grid"] = cfg.lambda_grid;  // empty = auto (20 log-spaced, data-scaled)
  j["folds"] = cfg.cv_folds;
  j["rank_tol"] = cfg.rank_rel_tol;
  j["hutchinson"] = cfg.hutchinson_trace;
  j["probes"] = cfg.hutchinson_probes;
  return j;
}

ordered_json adaptive_config_json(const tpst::AdaptiveConfig& cfg) {
  ordered_json j;
  j["tau"] = cfg.tau;
  j["c_grid"] = cfg.c_grid;  // empty = default 1.25..3.00
  j["quad_order"] = cfg.quad_order;
  return j;
}

ordered_json scenario_json(const tpst::Scenario& sc) {
  ordered_json j;
  j["name"] = sc.name;
  ordered_json holes = ordered_json::array();
  for (const auto& h : sc.mesh.holes) holes.push_back(box_json(h));
  j["mesh"] = {{"box", box_json(sc.mesh.box)},
               {"resolution", sc.mesh.resolution},
               {"holes", std::move(holes)}};
  j["truth"] = {{"id", sc.truth_id}, {"text", sc.truth_text}};
  if (sc.design.kind == tpst::DesignSpec::Kind::kRandom) {
    j["design"] = {{"type", "random"}, {"n", sc.design.n}};
  } else {
    j["design"] = {{"type", "grid"}, {"resolution", sc.design.grid}};
  }
  j["psnr"] = sc.psnr;
  ordered_json mj;
  switch (sc.missing.scheme) {
    case tpst::MissingSpec::Scheme::kNone: mj["scheme"] = "none"; break;
    case tpst::MissingSpec::Scheme::kRandom: mj["scheme"] = "random"; break;
    case tpst::MissingSpec::Scheme::kBlock: mj["scheme"] = "block"; break;
    case tpst::MissingSpec::Scheme::kBlockRandom: mj["scheme"] = "block_random"; break;
  }
  mj["rate"] = sc.missing.rate;
  if (sc.missing.scheme == tpst::MissingSpec::Scheme::kBlock ||
      sc.missing.scheme == tpst::MissingSpec::Scheme::kBlockRandom) {
    mj["block"] = box_json(sc.missing.block);
  }
  j["missing"] = std::move(mj);
  j["replications"] = sc.replications;
  j["eval_points"] = sc.eval_points;
  ordered_json methods = ordered_json::array();
  for (const auto& ms : sc.methods) {
    methods.push_back({{"name", ms.name},
                       {"fit", fit_config_json(ms.fit)},
                       {"adaptive", adaptive_config_json(ms.adaptive)}});
  }
  j["methods"] = std::move(methods);
  return j;
}

// ---------------------------------------------------------------------------
// mesh-check
// ---------------------------------------------------------------------------

struct MeshCheckArgs {
  std::string nodes, elems;
  int index_base = 0;
  double vol_tol = 0;
  bool per_tet = false;
};

int run_mesh_check(const MeshCheckArgs& a) {
  const std::uint64_t nsum = tpst::file_checksum(a.nodes);
  const std::uint64_t esum = tpst::file_checksum(a.elems);
  // Lenient load: a duplicated element should land in the violation report,
  // not abort the check.
  tpst::TetMesh mesh =
      tpst::load_mesh(a.nodes, a.elems, a.index_base, /*allow_duplicates=*/true);
  tpst::ValidationReport vr = tpst::validate_partition(mesh, a.vol_tol);
  tpst::MeshQualityReport qr = tpst::shape_metrics(mesh);

  ordered_json out;
  out["tool"] = tool_stamp();
  out["inputs"] = {{"nodes", input_stamp(a.nodes, nsum)},
                   {"elems", input_stamp(a.elems, esum)}};
  out["valid"] = vr.valid;
  out["vol_tol"] = vr.vol_tol;
  ordered_json viol = ordered_json::array();
  for (const auto& v : vr.violations) {
    viol.push_back({{"kind", v.kind}, {"tets", v.tets}, {"nodes", v.nodes},
                    {"detail", v.detail}});
  }
  out["violations"] = std::move(viol);
  ordered_json q;
  q["num_nodes"] = mesh.num_nodes();
  q["num_tets"] = mesh.num_tets();
  q["diameter"] = qr.diameter;
  q["beta"] = qr.beta;
  q["min_volume"] = qr.min_volume;
  q["total_volume"] = qr.total_volume;
  if (a.per_tet) {
    ordered_json arr = ordered_json::array();
    for (const auto& s : qr.per_tet) {
      arr.push_back({{"volume", s.volume}, {"longest_edge", s.longest_edge},
                     {"rho", s.rho}, {"beta", s.beta}});
    }
    q["per_tet"] = std::move(arr);
  }
  out["quality"] = std::move(q);
  std::cout << out.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitArgs {
  std::string nodes, elems, data, out;
  int index_base = 0;
  int degree = 3;
  int smoothness = 1;
  std::string select = "gcv";
  double lambda = -1;  // < 0: unset
  std::string lambda_grid;
  int folds = 5;
  std::uint64_t seed = 0;
  double rank_tol = 0;
  double locate_tol = 1e-9;
  bool hutchinson = false;
  int probes = 32;
  bool adaptive = false;
  double tau = 2.0;
  std::string c_grid;
  int tv_quad_order = 4;
  bool quiet = false;
};

int run_fit(const FitArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  tpst::MeshSource src;
  src.nodes_path = a.nodes;
  src.elems_path = a.elems;
  src.index_base = a.index_base;
  src.nodes_checksum = tpst::file_checksum(a.nodes);
  src.elems_checksum = tpst::file_checksum(a.elems);
  tpst::TetMesh mesh = tpst::load_mesh(a.nodes, a.elems, a.index_base);
  tpst::Observations obs = tpst::load_observations(a.data);
  tpst::Dataset data =
      tpst::make_dataset(mesh, obs.points, obs.values, Eigen::VectorXd(), a.locate_tol);

  tpst::FitConfig cfg;
  cfg.degree = a.degree;
  cfg.smoothness = a.smoothness;
  if (a.select == "gcv") {
    cfg.select = tpst::Select::kGCV;
  } else if (a.select == "cv") {
    cfg.select = tpst::Select::kCV;
  } else if (a.select == "fixed") {
    cfg.select = tpst::Select::kFixed;
    if (a.lambda < 0) throw tpst::UsageError("--select fixed requires --lambda");
    cfg.fixed_lambda = a.lambda;
  } else {
    throw tpst::UsageError("--select must be gcv, cv, or fixed");
  }
  if (!a.lambda_grid.empty()) {
    cfg.lambda_grid = tpst::parse_grid_spec(a.lambda_grid, /*log_spaced=*/true);
  }
  cfg.cv_folds = a.folds;
  cfg.seed = a.seed;
  cfg.rank_rel_tol = a.rank_tol;
  cfg.locate_tol = a.locate_tol;
  cfg.hutchinson_trace = a.hutchinson;
  cfg.hutchinson_probes = a.probes;

  tpst::AdaptiveConfig acfg;
  acfg.tau = a.tau;
  acfg.quad_order = a.tv_quad_order;
  if (!a.c_grid.empty()) acfg.c_grid = tpst::parse_grid_spec(a.c_grid, /*log_spaced=*/false);

  tpst::FitResult fr = a.adaptive ? tpst::fit_atpst(mesh, data, cfg, acfg)
                                  : tpst::fit_tpst(mesh, data, cfg);

  tpst::FitInvocation inv;
  inv.select = a.select;
  inv.seed = a.seed;
  inv.adaptive = a.adaptive;
  inv.tau = a.tau;
  inv.tv_quad_order = a.tv_quad_order;
  tpst::save_fit_document(a.out, fr, src, inv);

  ordered_json manifest;
  manifest["tool"] = tool_stamp();
  manifest["command"] = "fit";
  manifest["seed"] = a.seed;
  manifest["inputs"] = {{"nodes", input_stamp(a.nodes, src.nodes_checksum)},
                        {"elems", input_stamp(a.elems, src.elems_checksum)},
                        {"data", input_stamp(a.data, tpst::file_checksum(a.data))}};
  ordered_json rcfg = fit_config_json(cfg);
  rcfg["index_base"] = a.index_base;
  rcfg["locate_tol"] = a.locate_tol;
  rcfg["adaptive"] = a.adaptive;
  if (a.adaptive) rcfg["adaptive_config"] = adaptive_config_json(acfg);
  manifest["config"] = std::move(rcfg);
  manifest["outputs"] = {a.out};
  manifest["timings"] = {
      {"total_seconds",
       std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
  write_json_file(a.out + ".manifest.json", manifest);

  if (!a.quiet) {
    std::cerr << "fit: n=" << fr.n_used << " (" << fr.n_dropped << " outside), lambda="
              << tpst::format_g17(fr.lambda);
    if (a.adaptive) std::cerr << ", C=" << tpst::format_g17(fr.c_value);
    std::cerr << ", edf=" << tpst::format_g17(fr.edf) << ", gcv="
              << tpst::format_g17(fr.gcv) << " -> " << a.out << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string fit, points, out;
  std::string nodes, elems;  // optional overrides
  double locate_tol = 1e-9;
  bool quiet = false;
};

int run_predict(const PredictArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  tpst::FitDocument doc = tpst::load_fit_document(a.fit);
  const std::string nodes =
      a.nodes.empty() ? tpst::resolve_sibling_path(a.fit, doc.mesh.nodes_path) : a.nodes;
  const std::string elems =
      a.elems.empty() ? tpst::resolve_sibling_path(a.fit, doc.mesh.elems_path) : a.elems;
  const std::uint64_t nsum = tpst::file_checksum(nodes);
  const std::uint64_t esum = tpst::file_checksum(elems);
  if (nsum != doc.mesh.nodes_checksum || esum != doc.mesh.elems_checksum) {
    throw tpst::DataError("mesh checksum mismatch: the fit was produced on different mesh "
                          "files (expected " +
                          tpst::checksum_string(doc.mesh.nodes_checksum) + "/" +
                          tpst::checksum_string(doc.mesh.elems_checksum) + ", got " +
                          tpst::checksum_string(nsum) + "/" + tpst::checksum_string(esum) + ")");
  }
  tpst::TetMesh mesh = tpst::load_mesh(nodes, elems, doc.mesh.index_base);
  if (mesh.num_tets() != doc.num_tets || mesh.num_nodes() != doc.num_nodes) {
    throw tpst::DataError("mesh shape does not match the fit document");
  }
  tpst::SplineField field{&mesh, doc.degree, doc.smoothness, doc.coeffs};
  std::vector<tpst::Point3> pts = tpst::load_points(a.points);
  auto preds = tpst::predict(field, pts, a.locate_tol);

  std::ofstream out(a.out);
  if (!out) throw tpst::DataError("cannot write " + a.out);
  out << "x,y,z,prediction\n";
  int outside = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    out << tpst::format_g17(pts[i].x) << ',' << tpst::format_g17(pts[i].y) << ','
        << tpst::format_g17(pts[i].z) << ',';
    if (preds[i]) {
      out << tpst::format_g17(*preds[i]);
    } else {
      ++outside;  // exterior point: empty prediction field
    }
    out << '\n';
  }
  out.close();

  ordered_json manifest;
  manifest["tool"] = tool_stamp();
  manifest["command"] = "predict";
  manifest["inputs"] = {{"fit", input_stamp(a.fit, tpst::file_checksum(a.fit))},
                        {"points", input_stamp(a.points, tpst::file_checksum(a.points))},
                        {"nodes", input_stamp(nodes, nsum)},
                        {"elems", input_stamp(elems, esum)}};
  manifest["config"] = {{"locate_tol", a.locate_tol}};
  manifest["outputs"] = {a.out};
  manifest["timings"] = {
      {"total_seconds",
       std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
  write_json_file(a.out + ".manifest.json", manifest);

  if (!a.quiet) {
    std::cerr << "predict: " << pts.size() << " points (" << outside << " outside) -> "
              << a.out << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string config, out;
  bool quiet = false;
};

int run_simulate(const SimulateArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  tpst::SimConfig cfg = tpst::load_sim_config(a.config);
  fs::create_directories(a.out);
  tpst::SimReport report = tpst::run_experiment(cfg, a.quiet ? nullptr : &std::cerr);
  const std::string report_path = (fs::path(a.out) / "report.csv").string();
  const std::string summary_path = (fs::path(a.out) / "summary.json").string();
  tpst::write_report_csv(report, report_path);
  tpst::write_summary_json(report, summary_path);

  ordered_json manifest;
  manifest["tool"] = tool_stamp();
  manifest["command"] = "simulate";
  manifest["seed"] = cfg.seed;
  manifest["inputs"] = {{"config", input_stamp(a.config, tpst::file_checksum(a.config))}};
  ordered_json scenarios = ordered_json::array();
  for (const auto& sc : cfg.scenarios) scenarios.push_back(scenario_json(sc));
  manifest["config"] = {{"seed", cfg.seed}, {"scenarios", std::move(scenarios)}};
  manifest["outputs"] = {report_path, summary_path};
  ordered_json timing_records = ordered_json::array();
  for (const auto& r : report.records) {
    timing_records.push_back({{"scenario", r.scenario}, {"method", r.method},
                              {"replication", r.replication}, {"seconds", r.seconds}});
  }
  manifest["timings"] = {
      {"total_seconds",
       std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
      {"records", std::move(timing_records)}};
  write_json_file((fs::path(a.out) / "manifest.json").string(), manifest);

  if (!a.quiet) {
    std::cerr << "simulate: " << report.records.size() << " records -> " << a.out << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trivariate penalized spline smoothing over tetrahedral partitions"};
  app.set_version_flag("--version", std::string(tpst::kVersion));
  app.fallthrough();
  app.require_subcommand(1);
  int threads = 0;
  bool quiet = false;
  app.add_option("--threads", threads, "Worker thread budget (0 = all cores)")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("--quiet", quiet, "Suppress informational output");

  MeshCheckArgs mc;
  CLI::App* mesh_check =
      app.add_subcommand("mesh-check", "Validate a partition and report quality metrics");
  mesh_check->add_option("nodes", mc.nodes, "Nodes file: x,y,z per line")->required();
  mesh_check->add_option("elems", mc.elems, "Elements file: 4 node ids per line")->required();
  mesh_check->add_option("--index-base", mc.index_base, "Node ids are 0- or 1-based")
      ->check(CLI::IsMember({0, 1}));
  mesh_check->add_option("--vol-tol", mc.vol_tol,
                         "Degeneracy volume tolerance (0 = 1e-12 * diameter^3)");
  mesh_check->add_flag("--per-tet", mc.per_tet, "Include per-tet shape metrics");

  FitArgs fa;
  CLI::App* fit = app.add_subcommand("fit", "Fit a penalized spline to scattered data");
  fit->add_option("--nodes", fa.nodes, "Nodes file")->required();
  fit->add_option("--elems", fa.elems, "Elements file")->required();
  fit->add_option("--data", fa.data, "Observations file: x,y,z,value per line")->required();
  fit->add_option("--out", fa.out, "Output fit document (JSON)")->required();
  fit->add_option("--index-base", fa.index_base, "Node ids are 0- or 1-based")
      ->check(CLI::IsMember({0, 1}));
  fit->add_option("--degree", fa.degree, "Spline degree d >= 2");
  fit->add_option("--smoothness", fa.smoothness, "Continuity order r, 0 <= r < d");
  fit->add_option("--select", fa.select, "Penalty selection: gcv, cv, or fixed")
      ->check(CLI::IsMember({"gcv", "cv", "fixed"}));
  fit->add_option("--lambda", fa.lambda, "Penalty value for --select fixed");
  fit->add_option("--lambda-grid", fa.lambda_grid,
                  "Candidate grid \"lo:hi:count\", log-spaced (default: auto-scaled)");
  fit->add_option("--folds", fa.folds, "Cross-validation fold count");
  fit->add_option("--seed", fa.seed, "Master seed (fold shuffling, trace probes)");
  fit->add_option("--rank-tol", fa.rank_tol,
                  "Relative QR rank tolerance (0 = default 1e-10)");
  fit->add_option("--locate-tol", fa.locate_tol, "Barycentric point-location tolerance");
  fit->add_flag("--hutchinson", fa.hutchinson, "Estimate tr(S) with random probes");
  fit->add_option("--probes", fa.probes, "Probe count for --hutchinson");
  fit->add_flag("--adaptive", fa.adaptive, "Adaptive fit with per-tet penalty weights");
  fit->add_option("--tau", fa.tau, "Adaptive weight exponent");
  fit->add_option("--c-grid", fa.c_grid,
                  "Adaptive C grid \"lo:hi:count\", linear (default: 1.25:3:8)");
  fit->add_option("--tv-quad-order", fa.tv_quad_order, "Quadrature order for total variation");

  PredictArgs pa;
  CLI::App* predict = app.add_subcommand("predict", "Evaluate a fitted spline at points");
  predict->add_option("--fit", pa.fit, "Fit document from the fit subcommand")->required();
  predict->add_option("--points", pa.points, "Points file: x,y,z per line")->required();
  predict->add_option("--out", pa.out, "Output predictions CSV")->required();
  predict->add_option("--nodes", pa.nodes, "Override the recorded nodes file path");
  predict->add_option("--elems", pa.elems, "Override the recorded elements file path");
  predict->add_option("--locate-tol", pa.locate_tol, "Barycentric point-location tolerance");

  SimulateArgs sa;
  CLI::App* simulate = app.add_subcommand("simulate", "Run a seeded simulation study");
  simulate->add_option("--config", sa.config, "Simulation config (JSON)")->required();
  simulate->add_option("--out", sa.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  tpst::set_thread_budget(threads);
  fa.quiet = quiet;
  pa.quiet = quiet;
  sa.quiet = quiet;

  const std::string sub = app.get_subcommands().front()->get_name();
  try {
    if (*mesh_check) return run_mesh_check(mc);
    if (*fit) return run_fit(fa);
    if (*predict) return run_predict(pa);
    if (*simulate) return run_simulate(sa);
    throw tpst::UsageError("no subcommand given");
  } catch (const tpst::UsageError& e) {
    std::cerr << "tpst " << sub << ": usage error: " << e.what() << '\n';
    return 1;
  } catch (const tpst::DataError& e) {
    std::cerr << "tpst " << sub << ": data error: " << e.what() << '\n';
    return 2;
  } catch (const tpst::NumericalError& e) {
    std::cerr << "tpst " << sub << ": numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "tpst " << sub << ": internal error: " << e.what() << '\n';
    return 3;
  }
}
