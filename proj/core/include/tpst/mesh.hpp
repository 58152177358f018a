#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "tpst/types.hpp"

namespace tpst {

/// Barycentric coordinates (or directional coordinates, which sum to 0)
/// relative to a tetrahedron's four vertices, in vertex-slot order.
using Bary = std::array<double, 4>;

/// One triangular face of the partition. Interior faces have two incident
/// tets, boundary faces one. `opp[s]` is the local slot (0..3) of the vertex
/// of `tets[s]` that is not on the face.
struct FaceRec {
  std::array<int, 3> nodes{};       // global node ids, ascending
  std::array<int, 2> tets{-1, -1};  // incident tet ids, ascending; -1 if none
  std::array<int, 2> opp{-1, -1};
  int count = 0;  // incident tets seen; >2 only in broken meshes

  bool interior() const { return count == 2; }
};

struct Location {
  int tet = -1;
  Bary bary{};
};

/// Tetrahedral partition of a 3D domain. Construction wires up the face
/// registry, per-tet barycentric transforms, and a uniform spatial hash for
/// point location. Geometric degeneracy does not throw here; it is reported
/// by validate_partition so that broken inputs can be diagnosed in one pass.
class TetMesh {
 public:
  TetMesh() = default;
  TetMesh(std::vector<Point3> nodes, std::vector<std::array<int, 4>> tets);

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int num_tets() const { return static_cast<int>(tets_.size()); }
  const Point3& node(int i) const { return nodes_[i]; }
  const std::array<int, 4>& tet(int t) const { return tets_[t]; }
  const std::vector<Point3>& nodes() const { return nodes_; }
  const std::vector<std::array<int, 4>>& tets() const { return tets_; }
  const Point3& vertex(int t, int slot) const { return nodes_[tets_[t][slot]]; }

  const std::vector<FaceRec>& faces() const { return faces_; }
  const std::vector<int>& interior_faces() const { return interior_faces_; }

  Box3 bounding_box() const { return bbox_; }
  double diameter() const { return bbox_.diagonal(); }

  /// Unsigned volume |det M|/6 of tet t.
  double volume(int t) const { return std::abs(signed_volume_[t]); }
  double signed_volume(int t) const { return signed_volume_[t]; }

  /// Barycentric coordinates of p relative to tet t (Cramer's rule; the
  /// cofactor transform is cached per tet). Components sum to 1.
  Bary barycentric(int t, const Point3& p) const;

  /// Directional coordinates of direction u relative to tet t: the difference
  /// of the barycentric coordinates of any two points q, q+u. Components sum
  /// to 0.
  Bary direction_coords(int t, const Point3& u) const;

  /// Find a tet whose barycentric coordinates of p are all >= -tol. Ties
  /// (points on shared faces) resolve to the lowest tet id. Returns nullopt
  /// for points outside the partition.
  std::optional<Location> locate(const Point3& p, double tol = 1e-9) const;

 private:
  void build_faces();
  void build_transforms();
  void build_grid();

  std::vector<Point3> nodes_;
  std::vector<std::array<int, 4>> tets_;
  std::vector<FaceRec> faces_;
  std::vector<int> interior_faces_;
  std::vector<double> signed_volume_;
  // Row i holds the affine coefficients of b_i: b_i(p) = c0 + c1 x + c2 y + c3 z.
  std::vector<std::array<std::array<double, 4>, 4>> bary_coef_;
  Box3 bbox_{};

  // Uniform spatial hash over tet bounding boxes.
  std::array<int, 3> grid_dim_{1, 1, 1};
  Point3 grid_origin_{}, grid_step_{1, 1, 1};
  std::vector<std::vector<int>> grid_cells_;
  std::array<int, 3> cell_of(const Point3& p) const;
};

struct Violation {
  std::string kind;    // "degenerate_tet", "duplicate_tet", ...
  std::vector<int> tets;
  std::vector<int> nodes;
  std::string detail;
};

struct ValidationReport {
  bool valid = true;
  std::vector<Violation> violations;
  double vol_tol = 0;
};

/// Check that the tets form a proper partition: no degenerate or duplicated
/// tets, every face shared by at most two tets with the off-face vertices on
/// opposite sides, no vertex of one tet inside another (hanging nodes), and
/// no edge of one tet crossing an edge or face of another. vol_tol <= 0
/// selects the default 1e-12 * diameter^3.
ValidationReport validate_partition(const TetMesh& mesh, double vol_tol = 0);

struct TetShape {
  double volume = 0;
  double longest_edge = 0;
  double rho = 0;   // 3 * volume / surface area
  double beta = 0;  // longest_edge / rho; >= 2*sqrt(6) for every tet
};

struct MeshQualityReport {
  std::vector<TetShape> per_tet;
  double diameter = 0;      // max longest_edge over the partition
  double beta = 0;          // diameter / min rho: smallest quasi-uniformity bound
  double min_volume = 0;
  double total_volume = 0;
};

MeshQualityReport shape_metrics(const TetMesh& mesh);

/// Build a box partition: the box is split into resolution[0] x [1] x [2]
/// grid cells, cells fully inside a hole box are removed, and each remaining
/// cell is cut into six tets around its main diagonal (so neighbouring cells
/// always agree on the face diagonals). Hole boundaries must lie on grid
/// planes. Throws DataError for empty domains or misaligned holes.
TetMesh generate_box_mesh(const Box3& box, const std::array<int, 3>& resolution,
                          const std::vector<Box3>& holes = {});

}  // namespace tpst
