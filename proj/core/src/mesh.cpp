#include "tpst/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

namespace tpst {

namespace {

double axis(const Point3& p, int a) { return a == 0 ? p.x : (a == 1 ? p.y : p.z); }
double& axis(Point3& p, int a) { return a == 0 ? p.x : (a == 1 ? p.y : p.z); }

double det3(double a, double b, double c, double d, double e, double f, double g,
            double h, double i) {
  return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
}

// Cofactor of the 4x4 barycentric matrix M (rows: ones, x, y, z; columns:
// the four vertices) with row r and column c struck out.
double cofactor(const std::array<Point3, 4>& v, int r, int c) {
  double m[3][3];
  int ri = 0;
  for (int row = 0; row < 4; ++row) {
    if (row == r) continue;
    int ci = 0;
    for (int col = 0; col < 4; ++col) {
      if (col == c) continue;
      m[ri][ci] = row == 0 ? 1.0 : axis(v[col], row - 1);
      ++ci;
    }
    ++ri;
  }
  double minor = det3(m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0],
                      m[2][1], m[2][2]);
  return ((r + c) % 2 == 0) ? minor : -minor;
}

double signed_volume_of(const std::array<Point3, 4>& v) {
  Point3 a = v[1] - v[0], b = v[2] - v[0], c = v[3] - v[0];
  return a.dot(b.cross(c)) / 6.0;
}

// Closest-approach parameters of segments p0+s*(p1-p0), q0+t*(q1-q0).
// Returns false for (near-)parallel segments.
bool segment_closest(const Point3& p0, const Point3& p1, const Point3& q0,
                     const Point3& q1, double& s, double& t, double& dist) {
  Point3 u = p1 - p0, v = q1 - q0, w = p0 - q0;
  double a = u.dot(u), b = u.dot(v), c = v.dot(v), d = u.dot(w), e = v.dot(w);
  double denom = a * c - b * b;
  if (denom <= 1e-14 * a * c) return false;
  s = (b * e - c * d) / denom;
  t = (a * e - b * d) / denom;
  Point3 diff = w + u * s - v * t;
  dist = diff.norm();
  return true;
}

}  // namespace

TetMesh::TetMesh(std::vector<Point3> nodes, std::vector<std::array<int, 4>> tets)
    : nodes_(std::move(nodes)), tets_(std::move(tets)) {
  for (const auto& t : tets_)
    for (int vid : t)
      if (vid < 0 || vid >= num_nodes())
        throw DataError("tet references node " + std::to_string(vid) +
                        " outside 0.." + std::to_string(num_nodes() - 1));
  if (!nodes_.empty()) {
    bbox_.lo = bbox_.hi = nodes_[0];
    for (const auto& p : nodes_) {
      bbox_.lo.x = std::min(bbox_.lo.x, p.x);
      bbox_.lo.y = std::min(bbox_.lo.y, p.y);
      bbox_.lo.z = std::min(bbox_.lo.z, p.z);
      bbox_.hi.x = std::max(bbox_.hi.x, p.x);
      bbox_.hi.y = std::max(bbox_.hi.y, p.y);
      bbox_.hi.z = std::max(bbox_.hi.z, p.z);
    }
  }
  build_transforms();
  build_faces();
  build_grid();
}

void TetMesh::build_transforms() {
  signed_volume_.resize(tets_.size());
  bary_coef_.resize(tets_.size());
  for (std::size_t t = 0; t < tets_.size(); ++t) {
    std::array<Point3, 4> v;
    for (int s = 0; s < 4; ++s) v[s] = nodes_[tets_[t][s]];
    double det = 6.0 * signed_volume_of(v);  // det M = 6 V_T (signed)
    signed_volume_[t] = det / 6.0;
    // Cramer's rule: b_i(p) = det(M with column i replaced by (1,p)) / det M,
    // expanded along the replaced column into an affine form in p.
    for (int i = 0; i < 4; ++i)
      for (int r = 0; r < 4; ++r) bary_coef_[t][i][r] = cofactor(v, r, i) / det;
  }
}

Bary TetMesh::barycentric(int t, const Point3& p) const {
  const auto& c = bary_coef_[t];
  Bary b;
  for (int i = 0; i < 4; ++i)
    b[i] = c[i][0] + c[i][1] * p.x + c[i][2] * p.y + c[i][3] * p.z;
  return b;
}

Bary TetMesh::direction_coords(int t, const Point3& u) const {
  const auto& c = bary_coef_[t];
  Bary a;
  for (int i = 0; i < 4; ++i) a[i] = c[i][1] * u.x + c[i][2] * u.y + c[i][3] * u.z;
  return a;
}

void TetMesh::build_faces() {
  // (sorted node triple, tet id, local slot of the off-face vertex)
  std::vector<std::tuple<std::array<int, 3>, int, int>> raw;
  raw.reserve(tets_.size() * 4);
  for (std::size_t t = 0; t < tets_.size(); ++t) {
    for (int s = 0; s < 4; ++s) {
      std::array<int, 3> tri;
      int k = 0;
      for (int j = 0; j < 4; ++j)
        if (j != s) tri[k++] = tets_[t][j];
      std::sort(tri.begin(), tri.end());
      raw.emplace_back(tri, static_cast<int>(t), s);
    }
  }
  std::sort(raw.begin(), raw.end());
  for (std::size_t i = 0; i < raw.size();) {
    std::size_t j = i;
    FaceRec f;
    f.nodes = std::get<0>(raw[i]);
    while (j < raw.size() && std::get<0>(raw[j]) == f.nodes) {
      if (f.count < 2) {
        f.tets[f.count] = std::get<1>(raw[j]);
        f.opp[f.count] = std::get<2>(raw[j]);
      }
      ++f.count;
      ++j;
    }
    if (f.interior()) interior_faces_.push_back(static_cast<int>(faces_.size()));
    faces_.push_back(f);
    i = j;
  }
}

std::array<int, 3> TetMesh::cell_of(const Point3& p) const {
  std::array<int, 3> c;
  const double pos[3] = {p.x - grid_origin_.x, p.y - grid_origin_.y,
                         p.z - grid_origin_.z};
  const double step[3] = {grid_step_.x, grid_step_.y, grid_step_.z};
  for (int a = 0; a < 3; ++a) {
    int i = static_cast<int>(std::floor(pos[a] / step[a]));
    c[a] = std::clamp(i, 0, grid_dim_[a] - 1);
  }
  return c;
}

void TetMesh::build_grid() {
  if (tets_.empty()) return;
  grid_origin_ = bbox_.lo;
  Point3 ext = bbox_.extent();
  // Aim for a handful of tets per cell; cells per axis proportional to extent.
  double target = std::cbrt(static_cast<double>(tets_.size()));
  double scale = std::max({ext.x, ext.y, ext.z, 1e-300});
  for (int a = 0; a < 3; ++a) {
    double e = axis(ext, a);
    int n = std::max(1, static_cast<int>(std::floor(target * e / scale)));
    grid_dim_[a] = std::min(n, 128);
    axis(grid_step_, a) = e > 0 ? e / grid_dim_[a] : 1.0;
  }
  grid_cells_.assign(static_cast<std::size_t>(grid_dim_[0]) * grid_dim_[1] *
                         grid_dim_[2],
                     {});
  double pad = 1e-9 * std::max(diameter(), 1e-300);
  for (int t = 0; t < static_cast<int>(tets_.size()); ++t) {
    Point3 lo = vertex(t, 0), hi = vertex(t, 0);
    for (int s = 1; s < 4; ++s) {
      const Point3& v = vertex(t, s);
      lo.x = std::min(lo.x, v.x); lo.y = std::min(lo.y, v.y); lo.z = std::min(lo.z, v.z);
      hi.x = std::max(hi.x, v.x); hi.y = std::max(hi.y, v.y); hi.z = std::max(hi.z, v.z);
    }
    auto clo = cell_of(lo - Point3{pad, pad, pad});
    auto chi = cell_of(hi + Point3{pad, pad, pad});
    for (int i = clo[0]; i <= chi[0]; ++i)
      for (int j = clo[1]; j <= chi[1]; ++j)
        for (int k = clo[2]; k <= chi[2]; ++k)
          grid_cells_[(static_cast<std::size_t>(i) * grid_dim_[1] + j) * grid_dim_[2] +
                      k]
              .push_back(t);
  }
}

std::optional<Location> TetMesh::locate(const Point3& p, double tol) const {
  if (tets_.empty()) return std::nullopt;
  auto c = cell_of(p);
  const auto& cand = grid_cells_[(static_cast<std::size_t>(c[0]) * grid_dim_[1] +
                                  c[1]) * grid_dim_[2] + c[2]];
  // Candidates are stored in ascending id order, so the first hit is the
  // deterministic lowest-id answer for points on shared faces.
  for (int t : cand) {
    Bary b = barycentric(t, p);
    if (b[0] >= -tol && b[1] >= -tol && b[2] >= -tol && b[3] >= -tol)
      return Location{t, b};
  }
  return std::nullopt;
}

ValidationReport validate_partition(const TetMesh& mesh, double vol_tol) {
  ValidationReport rep;
  double diam = std::max(mesh.diameter(), 1e-300);
  if (vol_tol <= 0) vol_tol = 1e-12 * diam * diam * diam;
  rep.vol_tol = vol_tol;
  auto flag = [&rep](Violation v) {
    rep.valid = false;
    rep.violations.push_back(std::move(v));
  };

  const int n = mesh.num_tets();
  for (int t = 0; t < n; ++t)
    if (std::abs(mesh.signed_volume(t)) <= vol_tol)
      flag({"degenerate_tet", {t}, {}, "volume below tolerance"});

  {
    std::vector<std::pair<std::array<int, 4>, int>> keys(n);
    for (int t = 0; t < n; ++t) {
      keys[t].first = mesh.tet(t);
      std::sort(keys[t].first.begin(), keys[t].first.end());
      keys[t].second = t;
    }
    std::sort(keys.begin(), keys.end());
    for (int t = 0; t + 1 < n; ++t)
      if (keys[t].first == keys[t + 1].first)
        flag({"duplicate_tet", {keys[t].second, keys[t + 1].second}, {},
              "same vertex set"});
  }

  for (const auto& f : mesh.faces()) {
    if (f.count > 2)
      flag({"face_multiplicity", {f.tets[0], f.tets[1]},
            {f.nodes[0], f.nodes[1], f.nodes[2]},
            "face incident to " + std::to_string(f.count) + " tets"});
    if (f.interior()) {
      // The two off-face vertices must lie strictly on opposite sides.
      const Point3 &a = mesh.node(f.nodes[0]), &b = mesh.node(f.nodes[1]),
                   &c = mesh.node(f.nodes[2]);
      Point3 nrm = (b - a).cross(c - a);
      double s0 = nrm.dot(mesh.vertex(f.tets[0], f.opp[0]) - a);
      double s1 = nrm.dot(mesh.vertex(f.tets[1], f.opp[1]) - a);
      if (s0 * s1 >= 0)
        flag({"same_side_face", {f.tets[0], f.tets[1]},
              {f.nodes[0], f.nodes[1], f.nodes[2]},
              "tets overlap across a shared face"});
    }
  }

  // Pairwise geometric checks (hanging vertices, crossing edges, edges
  // piercing faces) over bbox-overlapping tet pairs.
  std::vector<Box3> boxes(n);
  for (int t = 0; t < n; ++t) {
    Box3 bb{mesh.vertex(t, 0), mesh.vertex(t, 0)};
    for (int s = 1; s < 4; ++s) {
      const Point3& v = mesh.vertex(t, s);
      bb.lo.x = std::min(bb.lo.x, v.x); bb.lo.y = std::min(bb.lo.y, v.y);
      bb.lo.z = std::min(bb.lo.z, v.z);
      bb.hi.x = std::max(bb.hi.x, v.x); bb.hi.y = std::max(bb.hi.y, v.y);
      bb.hi.z = std::max(bb.hi.z, v.z);
    }
    boxes[t] = bb;
  }
  const double pad = 1e-9 * diam;
  const double bary_eps = 1e-9;
  const double param_eps = 1e-7;
  static const int kEdges[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};

  auto vertex_in_tet = [&](int host, int other) {
    for (int s = 0; s < 4; ++s) {
      int vid = mesh.tet(other)[s];
      bool shared = false;
      for (int j = 0; j < 4; ++j) shared |= mesh.tet(host)[j] == vid;
      if (shared) continue;
      Bary bc = mesh.barycentric(host, mesh.node(vid));
      double m = std::min(std::min(bc[0], bc[1]), std::min(bc[2], bc[3]));
      if (std::isfinite(m) && m >= -bary_eps)
        flag({"vertex_in_tet", {host, other}, {vid},
              "vertex of one tet inside or on another"});
    }
  };

  auto edges_cross = [&](int ta, int tb) {
    for (auto ea : kEdges)
      for (auto eb : kEdges) {
        int a0 = mesh.tet(ta)[ea[0]], a1 = mesh.tet(ta)[ea[1]];
        int b0 = mesh.tet(tb)[eb[0]], b1 = mesh.tet(tb)[eb[1]];
        if (a0 == b0 || a0 == b1 || a1 == b0 || a1 == b1) continue;
        double s, t, dist;
        if (!segment_closest(mesh.node(a0), mesh.node(a1), mesh.node(b0),
                             mesh.node(b1), s, t, dist))
          continue;
        if (dist < pad && s > param_eps && s < 1 - param_eps && t > param_eps &&
            t < 1 - param_eps)
          flag({"edge_edge_cross", {ta, tb}, {a0, a1, b0, b1},
                "edges cross away from shared vertices"});
      }
  };

  auto edge_through_face = [&](int host, int other) {
    for (int s = 0; s < 4; ++s) {  // face of `host` opposite slot s
      std::array<int, 3> tri;
      int k = 0;
      for (int j = 0; j < 4; ++j)
        if (j != s) tri[k++] = mesh.tet(host)[j];
      const Point3 &p = mesh.node(tri[0]), &q = mesh.node(tri[1]),
                   &r = mesh.node(tri[2]);
      Point3 nrm = (q - p).cross(r - p);
      double nn = nrm.norm();
      if (nn <= 0) continue;
      for (auto e : kEdges) {
        int e0 = mesh.tet(other)[e[0]], e1 = mesh.tet(other)[e[1]];
        const Point3 &u0 = mesh.node(e0), &u1 = mesh.node(e1);
        double d0 = nrm.dot(u0 - p), d1 = nrm.dot(u1 - p);
        double denom = d0 - d1;
        if (std::abs(denom) <= 1e-12 * nn * diam) continue;  // parallel/coplanar
        double t = d0 / denom;
        if (t <= param_eps || t >= 1 - param_eps) continue;
        Point3 hit = u0 + (u1 - u0) * t;
        // 2D barycentric of the hit point within the triangle.
        Point3 v0 = q - p, v1 = r - p, w = hit - p;
        double d00 = v0.dot(v0), d01 = v0.dot(v1), d11 = v1.dot(v1),
               dw0 = w.dot(v0), dw1 = w.dot(v1);
        double den = d00 * d11 - d01 * d01;
        if (den <= 0) continue;
        double bu = (d11 * dw0 - d01 * dw1) / den, bv = (d00 * dw1 - d01 * dw0) / den;
        if (bu > bary_eps && bv > bary_eps && 1 - bu - bv > bary_eps)
          flag({"edge_through_face", {host, other}, {e0, e1},
                "edge passes through the interior of another tet's face"});
      }
    }
  };

  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      if (boxes[a].lo.x > boxes[b].hi.x + pad || boxes[b].lo.x > boxes[a].hi.x + pad ||
          boxes[a].lo.y > boxes[b].hi.y + pad || boxes[b].lo.y > boxes[a].hi.y + pad ||
          boxes[a].lo.z > boxes[b].hi.z + pad || boxes[b].lo.z > boxes[a].hi.z + pad)
        continue;
      int shared = 0;
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) shared += mesh.tet(a)[i] == mesh.tet(b)[j];
      if (shared == 4) continue;  // duplicate, already flagged
      vertex_in_tet(a, b);
      vertex_in_tet(b, a);
      edges_cross(a, b);
      edge_through_face(a, b);
      edge_through_face(b, a);
    }
  return rep;
}

MeshQualityReport shape_metrics(const TetMesh& mesh) {
  MeshQualityReport rep;
  rep.per_tet.resize(mesh.num_tets());
  double min_rho = std::numeric_limits<double>::infinity();
  double min_vol = std::numeric_limits<double>::infinity();
  static const int kEdges[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  for (int t = 0; t < mesh.num_tets(); ++t) {
    TetShape& s = rep.per_tet[t];
    s.volume = mesh.volume(t);
    for (auto e : kEdges)
      s.longest_edge =
          std::max(s.longest_edge, (mesh.vertex(t, e[0]) - mesh.vertex(t, e[1])).norm());
    double area = 0;
    for (int f = 0; f < 4; ++f) {
      std::array<Point3, 3> tri;
      int k = 0;
      for (int j = 0; j < 4; ++j)
        if (j != f) tri[k++] = mesh.vertex(t, j);
      area += 0.5 * (tri[1] - tri[0]).cross(tri[2] - tri[0]).norm();
    }
    s.rho = area > 0 ? 3.0 * s.volume / area : 0.0;  // inradius
    s.beta = s.rho > 0 ? s.longest_edge / s.rho
                       : std::numeric_limits<double>::infinity();
    rep.diameter = std::max(rep.diameter, s.longest_edge);
    min_rho = std::min(min_rho, s.rho);
    min_vol = std::min(min_vol, s.volume);
    rep.total_volume += s.volume;
  }
  rep.beta = (mesh.num_tets() > 0 && min_rho > 0)
                 ? rep.diameter / min_rho
                 : std::numeric_limits<double>::infinity();
  rep.min_volume = mesh.num_tets() > 0 ? min_vol : 0.0;
  return rep;
}

TetMesh generate_box_mesh(const Box3& box, const std::array<int, 3>& resolution,
                          const std::vector<Box3>& holes) {
  Point3 ext = box.extent();
  if (ext.x <= 0 || ext.y <= 0 || ext.z <= 0)
    throw DataError("box mesh: domain box has non-positive extent");
  for (int a = 0; a < 3; ++a)
    if (resolution[a] < 1)
      throw DataError("box mesh: resolution must be >= 1 per axis");
  const int nx = resolution[0], ny = resolution[1], nz = resolution[2];
  const double sx = ext.x / nx, sy = ext.y / ny, sz = ext.z / nz;

  // Hole boundaries that fall strictly inside the box must lie on grid planes.
  auto check_aligned = [&](double v, double lo, double hi, double step) {
    if (v <= lo + 1e-9 * step || v >= hi - 1e-9 * step) return;
    double f = (v - lo) / step;
    if (std::abs(f - std::round(f)) > 1e-6)
      throw DataError("box mesh: hole boundary is not aligned with the cell grid");
  };
  for (const auto& h : holes) {
    check_aligned(h.lo.x, box.lo.x, box.hi.x, sx);
    check_aligned(h.hi.x, box.lo.x, box.hi.x, sx);
    check_aligned(h.lo.y, box.lo.y, box.hi.y, sy);
    check_aligned(h.hi.y, box.lo.y, box.hi.y, sy);
    check_aligned(h.lo.z, box.lo.z, box.hi.z, sz);
    check_aligned(h.hi.z, box.lo.z, box.hi.z, sz);
  }

  auto cell_removed = [&](int i, int j, int k) {
    Box3 cell{{box.lo.x + i * sx, box.lo.y + j * sy, box.lo.z + k * sz},
              {box.lo.x + (i + 1) * sx, box.lo.y + (j + 1) * sy,
               box.lo.z + (k + 1) * sz}};
    double tol = 1e-9 * std::min({sx, sy, sz});
    for (const auto& h : holes)
      if (h.contains(cell.lo, tol) && h.contains(cell.hi, tol)) return true;
    return false;
  };

  auto node_id = [&](int i, int j, int k) {
    return (i * (ny + 1) + j) * (nz + 1) + k;
  };

  // Six tets per cell around the main diagonal: walk from the low corner to
  // the high corner one axis at a time, one tet per axis permutation.
  static const int kPerm[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                  {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  std::vector<std::array<int, 4>> tets;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      for (int k = 0; k < nz; ++k) {
        if (cell_removed(i, j, k)) continue;
        for (auto perm : kPerm) {
          std::array<int, 3> c = {i, j, k};
          std::array<int, 4> tet;
          tet[0] = node_id(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            ++c[perm[s]];
            tet[s + 1] = node_id(c[0], c[1], c[2]);
          }
          tets.push_back(tet);
        }
      }
  if (tets.empty()) throw DataError("box mesh: holes removed every cell");

  // Compact away nodes that belong only to removed cells.
  std::vector<int> remap((nx + 1) * (ny + 1) * (nz + 1), -1);
  std::vector<Point3> nodes;
  for (const auto& t : tets)
    for (int vid : t) remap[vid] = 0;
  for (int i = 0; i <= nx; ++i)
    for (int j = 0; j <= ny; ++j)
      for (int k = 0; k <= nz; ++k) {
        int raw = node_id(i, j, k);
        if (remap[raw] == 0) {
          remap[raw] = static_cast<int>(nodes.size());
          nodes.push_back({box.lo.x + i * sx, box.lo.y + j * sy, box.lo.z + k * sz});
        }
      }
  for (auto& t : tets)
    for (int& vid : t) vid = remap[vid];
  return TetMesh(std::move(nodes), std::move(tets));
}

}  // namespace tpst
