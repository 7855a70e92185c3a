#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace biotwin::geom {

using Point3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;

/// True when `r` is orthonormal and proper (det = +1), both within `tol`.
bool is_rotation(const Matrix3& r, double tol = 1e-10);

/// Throws InvalidArgument unless `r` passes is_rotation.
void require_rotation(const Matrix3& r, const char* what = "rotation");

/// x -> scale * rotation * x + translation
struct Similarity {
  double scale = 1.0;
  Matrix3 rotation = Matrix3::Identity();
  Point3 translation = Point3::Zero();

  static Similarity identity() { return {}; }

  Point3 operator()(const Point3& p) const { return scale * (rotation * p) + translation; }
};

/// Checks scale > 0 (finite), proper rotation, finite translation.
void validate(const Similarity& t);

/// Closed-form least-squares similarity (Umeyama) mapping `source` onto
/// `target`. With `with_scale == false` the scale is pinned to 1.
///
/// Requires at least 3 correspondences. Fails with ErrorCode::Degenerate
/// when the cross-covariance has rank < 2 (second singular value below
/// 1e-12 of the first), which covers collinear and coincident point sets.
Similarity umeyama_fit(std::span<const Point3> source, std::span<const Point3> target,
                       bool with_scale = true);

/// Sum of squared residuals ||T(source_i) - target_i||^2.
double alignment_cost(const Similarity& t, std::span<const Point3> source,
                      std::span<const Point3> target);

std::vector<Point3> apply_transform(const Similarity& t, std::span<const Point3> points);

/// apply(compose(outer, inner), p) == apply(outer, apply(inner, p))
Similarity compose(const Similarity& outer, const Similarity& inner);

Similarity inverse(const Similarity& t);

/// Rotation of `angle` radians about `axis` (normalized internally).
Matrix3 axis_angle(const Point3& axis, double angle);

struct Pixel {
  double x = 0.0;
  double y = 0.0;
};

/// Axis-aligned image box in pixels; strictly positive extent.
struct Box2 {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  /// Builds a box from two opposite corners given in any order.
  static Box2 from_corners(Pixel a, Pixel b);

  bool contains(Pixel p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
};

void validate(const Box2& b);

Pixel box_centroid(const Box2& b);

}  // namespace biotwin::geom
