#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tpst/bernstein.hpp"
#include "tpst/mesh.hpp"

namespace tpst::testing {

// Single reference tetrahedron with unit legs along the axes.
inline TetMesh unit_tet_mesh() {
  return TetMesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}},
                 {{{0, 1, 2, 3}}});
}

// Two tets mirrored across the x = 0 plane, sharing the triangle
// (0,0,0)-(0,1,0)-(0,0,1). The smallest mesh with an interior face.
inline TetMesh two_tet_mesh() {
  return TetMesh({{0, 0, 0},
                  {1, 0, 0},
                  {0, 1, 0},
                  {0, 0, 1},
                  {-1, 0, 0}},
                 {{{1, 0, 2, 3}}, {{4, 0, 3, 2}}});
}

// Dense random polynomial of exactly the given total degree bound.
inline Polynomial random_polynomial(int degree, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  Polynomial f;
  for (int px = 0; px <= degree; ++px)
    for (int py = 0; py + px <= degree; ++py)
      for (int pz = 0; pz + py + px <= degree; ++pz)
        f.terms.push_back({px, py, pz, coef(rng)});
  return f;
}

// Random barycentric point with all components at least `margin`.
inline Bary random_interior_bary(std::mt19937_64& rng, double margin = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Bary b;
  double s = 0;
  for (int i = 0; i < 4; ++i) {
    b[i] = -std::log(u(rng) + 1e-300);
    s += b[i];
  }
  for (int i = 0; i < 4; ++i) b[i] = margin + (1 - 4 * margin) * b[i] / s;
  return b;
}

// Uniform point inside the box.
inline Point3 random_box_point(const Box3& box, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ux(box.lo.x, box.hi.x),
      uy(box.lo.y, box.hi.y), uz(box.lo.z, box.hi.z);
  return {ux(rng), uy(rng), uz(rng)};
}

// Fresh per-test scratch directory under the test working directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
  std::filesystem::path dir = std::filesystem::current_path() / "scratch" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace tpst::testing
