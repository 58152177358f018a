#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tpst {

inline constexpr const char* kVersion = "0.1.0";

/// Error taxonomy mirrored by the CLI exit codes:
///   UsageError -> 1, DataError -> 2, NumericalError -> 3.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable/malformed inputs, inconsistent mesh/data combinations.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Singular systems, failed factorizations, degenerate geometry at solve time.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Point3 {
  double x = 0, y = 0, z = 0;

  Point3() = default;
  Point3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  Point3 operator+(const Point3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Point3 operator-(const Point3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Point3 operator*(double s) const { return {x * s, y * s, z * s}; }

  double dot(const Point3& o) const { return x * o.x + y * o.y + z * o.z; }
  Point3 cross(const Point3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
};

inline Point3 operator*(double s, const Point3& p) { return p * s; }

/// Axis-aligned box, used for domains, holes and missing-data blocks.
struct Box3 {
  Point3 lo, hi;

  bool contains(const Point3& p, double tol = 0.0) const {
    return p.x >= lo.x - tol && p.x <= hi.x + tol && p.y >= lo.y - tol &&
           p.y <= hi.y + tol && p.z >= lo.z - tol && p.z <= hi.z + tol;
  }
  Point3 extent() const { return hi - lo; }
  double diagonal() const { return extent().norm(); }
};

}  // namespace tpst
