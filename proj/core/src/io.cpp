#include "tpst/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "tpst/bernstein.hpp"
#include "tpst/types.hpp"

namespace tpst {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string line_error(const std::string& path, int line, const std::string& what) {
  return path + ": line " + std::to_string(line) + ": " + what;
}

/// Strip comments, split a line on commas and whitespace. Returns false for
/// blank/comment-only lines.
bool tokenize(const std::string& raw, std::vector<std::string>& tokens) {
  std::string line = raw;
  if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
  for (char& c : line) {
    if (c == ',' || c == '\t' || c == '\r') c = ' ';
  }
  tokens.clear();
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) tokens.push_back(tok);
  return !tokens.empty();
}

bool parse_double(const std::string& tok, double& out) {
  char* end = nullptr;
  out = std::strtod(tok.c_str(), &end);
  return end != tok.c_str() && *end == '\0';
}

bool parse_int(const std::string& tok, long& out) {
  char* end = nullptr;
  out = std::strtol(tok.c_str(), &end, 10);
  return end != tok.c_str() && *end == '\0';
}

/// Read a numeric table with exactly `cols` fields per line. One leading
/// non-numeric line (a header) is tolerated and skipped.
std::vector<std::vector<double>> read_table(const std::string& path, std::size_t cols) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::vector<std::string> tokens;
  std::string line;
  int lineno = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!tokenize(line, tokens)) continue;
    std::vector<double> row(tokens.size());
    bool ok = tokens.size() == cols;
    for (std::size_t i = 0; ok && i < tokens.size(); ++i) {
      ok = parse_double(tokens[i], row[i]);
    }
    if (!ok) {
      if (first_content) {  // header line
        first_content = false;
        continue;
      }
      throw DataError(line_error(path, lineno, "expected " + std::to_string(cols) +
                                                   " numeric fields"));
    }
    first_content = false;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::uint64_t h = 14695981039346656037ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  return h;
}

std::string checksum_string(std::uint64_t sum) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a:%016llx", static_cast<unsigned long long>(sum));
  return buf;
}

TetMesh load_mesh(const std::string& nodes_path, const std::string& elems_path,
                  int index_base, bool allow_duplicates) {
  if (index_base != 0 && index_base != 1) {
    throw UsageError("index base must be 0 or 1");
  }
  auto node_rows = read_table(nodes_path, 3);
  if (node_rows.empty()) throw DataError(nodes_path + ": no nodes");
  std::vector<Point3> nodes;
  nodes.reserve(node_rows.size());
  for (const auto& r : node_rows) nodes.push_back({r[0], r[1], r[2]});

  std::ifstream in(elems_path);
  if (!in) throw DataError("cannot open " + elems_path);
  std::vector<std::array<int, 4>> tets;
  std::set<std::array<int, 4>> seen;  // sorted node ids, to reject duplicates
  std::vector<std::string> tokens;
  std::string line;
  int lineno = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!tokenize(line, tokens)) continue;
    std::array<long, 4> ids{};
    bool ok = tokens.size() == 4;
    for (std::size_t i = 0; ok && i < 4; ++i) ok = parse_int(tokens[i], ids[i]);
    if (!ok) {
      if (first_content) {
        first_content = false;
        continue;
      }
      throw DataError(line_error(elems_path, lineno, "expected 4 integer node ids"));
    }
    first_content = false;
    std::array<int, 4> tet{};
    for (std::size_t i = 0; i < 4; ++i) {
      const long id = ids[i] - index_base;
      if (id < 0 || id >= static_cast<long>(nodes.size())) {
        throw DataError(line_error(elems_path, lineno,
                                   "node id " + std::to_string(ids[i]) +
                                       " out of range for " + std::to_string(nodes.size()) +
                                       " nodes (index base " + std::to_string(index_base) + ")"));
      }
      tet[i] = static_cast<int>(id);
    }
    std::array<int, 4> key = tet;
    std::sort(key.begin(), key.end());
    if (!seen.insert(key).second && !allow_duplicates) {
      throw DataError(line_error(elems_path, lineno, "duplicate tetrahedron"));
    }
    tets.push_back(tet);
  }
  if (tets.empty()) throw DataError(elems_path + ": no tetrahedra");
  return TetMesh(nodes, tets);
}

void save_mesh(const TetMesh& mesh, const std::string& nodes_path,
               const std::string& elems_path) {
  std::ofstream nf(nodes_path);
  if (!nf) throw DataError("cannot write " + nodes_path);
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    const Point3& p = mesh.node(i);
    nf << format_g17(p.x) << ',' << format_g17(p.y) << ',' << format_g17(p.z) << '\n';
  }
  std::ofstream ef(elems_path);
  if (!ef) throw DataError("cannot write " + elems_path);
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const auto& tet = mesh.tet(t);
    ef << tet[0] << ',' << tet[1] << ',' << tet[2] << ',' << tet[3] << '\n';
  }
}

std::vector<Point3> load_points(const std::string& path) {
  auto rows = read_table(path, 3);
  std::vector<Point3> pts;
  pts.reserve(rows.size());
  for (const auto& r : rows) pts.push_back({r[0], r[1], r[2]});
  return pts;
}

Observations load_observations(const std::string& path) {
  auto rows = read_table(path, 4);
  Observations obs;
  obs.points.reserve(rows.size());
  obs.values.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    obs.points.push_back({rows[i][0], rows[i][1], rows[i][2]});
    obs.values[static_cast<Eigen::Index>(i)] = rows[i][3];
  }
  return obs;
}

namespace {

std::string coefficients_name(const std::string& json_path) {
  std::filesystem::path p(json_path);
  std::string stem = p.filename().string();
  if (auto dot = stem.rfind(".json"); dot != std::string::npos && dot == stem.size() - 5) {
    stem.erase(dot);
  }
  return stem + "_coefficients.csv";
}

}  // namespace

void save_fit_document(const std::string& json_path, const FitResult& fit,
                       const MeshSource& mesh_src, const FitInvocation& inv) {
  if (fit.field.mesh == nullptr) throw UsageError("fit result has no field to save");
  const std::string coef_name = coefficients_name(json_path);
  const std::filesystem::path coef_path =
      std::filesystem::path(json_path).parent_path() / coef_name;

  ordered_json doc;
  doc["tool"] = {{"name", "tpst"}, {"version", kVersion}};
  doc["degree"] = fit.field.degree;
  doc["smoothness"] = fit.field.smoothness;
  doc["block_size"] = basis_dim(fit.field.degree);
  doc["num_nodes"] = fit.field.mesh->num_nodes();
  doc["num_tets"] = fit.field.mesh->num_tets();
  doc["mesh"] = {{"nodes", mesh_src.nodes_path},
                 {"elems", mesh_src.elems_path},
                 {"index_base", mesh_src.index_base},
                 {"nodes_checksum", checksum_string(mesh_src.nodes_checksum)},
                 {"elems_checksum", checksum_string(mesh_src.elems_checksum)}};
  doc["coefficients"] = coef_name;
  ordered_json fitj;
  fitj["select"] = inv.select;
  fitj["seed"] = inv.seed;
  fitj["lambda"] = fit.lambda;
  fitj["rss"] = fit.rss;
  fitj["edf"] = fit.edf;
  fitj["gcv"] = fit.gcv;
  fitj["nullspace_dim"] = fit.nullspace_dim;
  fitj["rank_H"] = fit.rank_H;
  fitj["nullspace_residual"] = fit.nullspace_residual;
  fitj["constraint_residual"] = fit.constraint_residual;
  fitj["n_used"] = fit.n_used;
  fitj["n_dropped"] = fit.n_dropped;
  ordered_json path_arr = ordered_json::array();
  for (const LambdaScore& s : fit.path) {
    path_arr.push_back({{"lambda", s.lambda}, {"score", s.score}, {"rss", s.rss},
                        {"edf", s.edf}});
  }
  fitj["lambda_path"] = std::move(path_arr);
  doc["fit"] = std::move(fitj);
  if (inv.adaptive) {
    ordered_json adj;
    adj["c"] = fit.c_value;
    adj["tau"] = inv.tau;
    adj["tv_quad_order"] = inv.tv_quad_order;
    ordered_json cp = ordered_json::array();
    for (const auto& [c, score] : fit.c_path) cp.push_back({{"c", c}, {"gcv", score}});
    adj["c_path"] = std::move(cp);
    adj["omega"] = fit.omega;
    adj["tv"] = fit.tv;
    doc["adaptive"] = std::move(adj);
  }

  std::ofstream jf(json_path);
  if (!jf) throw DataError("cannot write " + json_path);
  jf << doc.dump(2) << '\n';

  std::ofstream cf(coef_path);
  if (!cf) throw DataError("cannot write " + coef_path.string());
  for (Eigen::Index i = 0; i < fit.field.coeffs.size(); ++i) {
    cf << format_g17(fit.field.coeffs[i]) << '\n';
  }
}

std::string resolve_sibling_path(const std::string& document_path,
                                 const std::string& recorded) {
  if (std::filesystem::exists(recorded)) return recorded;
  std::filesystem::path alt = std::filesystem::path(document_path).parent_path() / recorded;
  return alt.string();
}

FitDocument load_fit_document(const std::string& json_path) {
  std::ifstream in(json_path);
  if (!in) throw DataError("cannot open " + json_path);
  ordered_json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw DataError(json_path + ": invalid JSON (" + e.what() + ")");
  }
  FitDocument out;
  try {
    out.degree = doc.at("degree").get<int>();
    out.smoothness = doc.at("smoothness").get<int>();
    out.num_nodes = doc.at("num_nodes").get<int>();
    out.num_tets = doc.at("num_tets").get<int>();
    const auto& m = doc.at("mesh");
    out.mesh.nodes_path = m.at("nodes").get<std::string>();
    out.mesh.elems_path = m.at("elems").get<std::string>();
    out.mesh.index_base = m.at("index_base").get<int>();
    // Checksums are kept as recorded strings for comparison; parse the hex.
    auto parse_sum = [&](const std::string& s) {
      const auto colon = s.find(':');
      return std::strtoull(s.c_str() + (colon == std::string::npos ? 0 : colon + 1),
                           nullptr, 16);
    };
    out.mesh.nodes_checksum = parse_sum(m.at("nodes_checksum").get<std::string>());
    out.mesh.elems_checksum = parse_sum(m.at("elems_checksum").get<std::string>());

    const std::string coef_rec = doc.at("coefficients").get<std::string>();
    const std::string coef_path = resolve_sibling_path(json_path, coef_rec);
    auto rows = read_table(coef_path, 1);
    out.coeffs.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.coeffs[static_cast<Eigen::Index>(i)] = rows[i][0];
    }
  } catch (const ordered_json::exception& e) {
    throw DataError(json_path + ": missing or malformed field (" + e.what() + ")");
  }
  const Eigen::Index expect =
      static_cast<Eigen::Index>(out.num_tets) * basis_dim(out.degree);
  if (out.coeffs.size() != expect) {
    throw DataError(json_path + ": coefficient count " + std::to_string(out.coeffs.size()) +
                    " does not match num_tets * block_size = " + std::to_string(expect));
  }
  return out;
}

}  // namespace tpst
