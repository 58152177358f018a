#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "tpst/mesh.hpp"
#include "tpst/solver.hpp"

namespace tpst {

/// Round-trip-safe decimal formatting ("%.17g"); all numeric file output
/// goes through this so reruns are byte-identical.
std::string format_g17(double v);

/// 64-bit FNV-1a over the raw bytes of a file. Throws DataError when the file
/// cannot be read.
std::uint64_t file_checksum(const std::string& path);

/// "fnv1a:" + 16 lowercase hex digits.
std::string checksum_string(std::uint64_t sum);

/// Where a mesh came from, for manifests and fit documents.
struct MeshSource {
  std::string nodes_path;
  std::string elems_path;
  int index_base = 0;
  std::uint64_t nodes_checksum = 0;
  std::uint64_t elems_checksum = 0;
};

/// Nodes file: one point per line, 3 decimal fields, comma or whitespace
/// separated, '#' starts a comment. Elems file: 4 integer node ids per line,
/// `index_base` (0 or 1) subtracted. A single leading non-numeric header line
/// is tolerated in either file. Errors carry path and line number.
/// A repeated element (same four nodes in any order) is an error unless
/// `allow_duplicates`; the mesh checker loads leniently so it can report the
/// duplicate as a violation instead of dying on it.
TetMesh load_mesh(const std::string& nodes_path, const std::string& elems_path,
                  int index_base = 0, bool allow_duplicates = false);

/// Write mesh files in the format load_mesh reads (0-based indices).
void save_mesh(const TetMesh& mesh, const std::string& nodes_path,
               const std::string& elems_path);

/// Points file: x,y,z per line (same tokenization as the nodes file).
std::vector<Point3> load_points(const std::string& path);

struct Observations {
  std::vector<Point3> points;
  Eigen::VectorXd values;
};

/// Data file: x,y,z,value per line.
Observations load_observations(const std::string& path);

/// How a fit was produced; echoed into the fit document.
struct FitInvocation {
  std::string select = "gcv";
  std::uint64_t seed = 0;
  bool adaptive = false;
  double tau = 2.0;
  int tv_quad_order = 4;
};

/// Write fit.json plus a sibling "<stem>_coefficients.csv" holding the
/// coefficient vector one value per line, tet-block then lexicographic order.
void save_fit_document(const std::string& json_path, const FitResult& fit,
                       const MeshSource& mesh_src, const FitInvocation& inv);

struct FitDocument {
  int degree = 0;
  int smoothness = 0;
  Eigen::VectorXd coeffs;
  MeshSource mesh;
  int num_nodes = 0;
  int num_tets = 0;
};

/// Read a fit document back. Mesh paths stored relative survive directory
/// moves: they are retried relative to the document's own directory.
FitDocument load_fit_document(const std::string& json_path);

/// Resolve a path recorded inside a document: as given if it exists,
/// otherwise relative to the document's directory.
std::string resolve_sibling_path(const std::string& document_path,
                                 const std::string& recorded);

}  // namespace tpst
