#include "biotwin/geom.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "biotwin/error.hpp"

namespace biotwin::geom {

namespace {

bool finite(const Point3& p) { return p.allFinite(); }

}  // namespace

bool is_rotation(const Matrix3& r, double tol) {
  if (!r.allFinite()) return false;
  const Matrix3 gram = r.transpose() * r;
  if (((gram - Matrix3::Identity()).cwiseAbs().array() > tol).any()) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

void require_rotation(const Matrix3& r, const char* what) {
  if (!is_rotation(r)) {
    throw Error(ErrorCode::InvalidArgument, "matrix is not a proper rotation", what);
  }
}

void validate(const Similarity& t) {
  if (!(std::isfinite(t.scale) && t.scale > 0.0)) {
    throw Error(ErrorCode::InvalidArgument,
                "scale must be positive and finite (got " + std::to_string(t.scale) + ")",
                "scale");
  }
  require_rotation(t.rotation);
  if (!finite(t.translation)) {
    throw Error(ErrorCode::InvalidArgument, "non-finite translation", "translation");
  }
}

Similarity umeyama_fit(std::span<const Point3> source, std::span<const Point3> target,
                       bool with_scale) {
  if (source.size() != target.size()) {
    throw Error(ErrorCode::InvalidArgument,
                "correspondence length mismatch (" + std::to_string(source.size()) + " vs " +
                    std::to_string(target.size()) + ")");
  }
  const std::size_t n = source.size();
  if (n < 3) {
    throw Error(ErrorCode::InvalidArgument,
                "at least 3 correspondences required (got " + std::to_string(n) + ")");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!finite(source[i]) || !finite(target[i])) {
      throw Error(ErrorCode::InvalidArgument, "non-finite coordinate",
                  "point " + std::to_string(i));
    }
  }

  Point3 mean_src = Point3::Zero();
  Point3 mean_dst = Point3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mean_src += source[i];
    mean_dst += target[i];
  }
  mean_src /= static_cast<double>(n);
  mean_dst /= static_cast<double>(n);

  Matrix3 cov = Matrix3::Zero();
  double src_var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point3 a = source[i] - mean_src;
    const Point3 b = target[i] - mean_dst;
    cov.noalias() += b * a.transpose();
    src_var += a.squaredNorm();
  }
  cov /= static_cast<double>(n);
  src_var /= static_cast<double>(n);

  const Eigen::JacobiSVD<Matrix3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Point3 sigma = svd.singularValues();
  if (!(sigma(0) > 0.0) || sigma(1) < 1e-12 * sigma(0)) {
    throw Error(ErrorCode::Degenerate,
                "point configuration is degenerate (collinear or coincident)");
  }

  // Flip the weakest direction when U*V^T would be a reflection.
  Point3 sign = Point3::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) sign(2) = -1.0;

  Similarity result;
  result.rotation = svd.matrixU() * sign.asDiagonal() * svd.matrixV().transpose();
  result.scale = with_scale ? sigma.dot(sign) / src_var : 1.0;
  result.translation = mean_dst - result.scale * (result.rotation * mean_src);
  if (!(result.scale > 0.0)) {
    throw Error(ErrorCode::Degenerate, "fitted scale is not positive");
  }
  return result;
}

double alignment_cost(const Similarity& t, std::span<const Point3> source,
                      std::span<const Point3> target) {
  if (source.size() != target.size()) {
    throw Error(ErrorCode::InvalidArgument, "correspondence length mismatch");
  }
  double cost = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) cost += (t(source[i]) - target[i]).squaredNorm();
  return cost;
}

std::vector<Point3> apply_transform(const Similarity& t, std::span<const Point3> points) {
  validate(t);
  std::vector<Point3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(t(p));
  return out;
}

Similarity compose(const Similarity& outer, const Similarity& inner) {
  validate(outer);
  validate(inner);
  Similarity r;
  r.scale = outer.scale * inner.scale;
  r.rotation = outer.rotation * inner.rotation;
  r.translation = outer.scale * (outer.rotation * inner.translation) + outer.translation;
  return r;
}

Similarity inverse(const Similarity& t) {
  validate(t);
  Similarity r;
  r.scale = 1.0 / t.scale;
  r.rotation = t.rotation.transpose();
  r.translation = -(r.rotation * t.translation) / t.scale;
  return r;
}

Matrix3 axis_angle(const Point3& axis, double angle) {
  const double norm = axis.norm();
  if (!(norm > 0.0) || !std::isfinite(angle)) {
    throw Error(ErrorCode::InvalidArgument, "rotation axis must be non-zero and angle finite");
  }
  return Eigen::AngleAxisd(angle, axis / norm).toRotationMatrix();
}

Box2 Box2::from_corners(Pixel a, Pixel b) {
  return Box2{std::min(a.x, b.x), std::min(a.y, b.y), std::max(a.x, b.x), std::max(a.y, b.y)};
}

void validate(const Box2& b) {
  if (!std::isfinite(b.x_min) || !std::isfinite(b.y_min) || !std::isfinite(b.x_max) ||
      !std::isfinite(b.y_max)) {
    throw Error(ErrorCode::InvalidArgument, "non-finite box coordinate", "box");
  }
  if (!(b.x_min < b.x_max) || !(b.y_min < b.y_max)) {
    throw Error(ErrorCode::InvalidArgument, "inverted or empty box", "box");
  }
}

Pixel box_centroid(const Box2& b) {
  validate(b);
  return {(b.x_min + b.x_max) / 2.0, (b.y_min + b.y_max) / 2.0};
}

}  // namespace biotwin::geom
