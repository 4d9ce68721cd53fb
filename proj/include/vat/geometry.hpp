#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>

namespace vat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Camera frame convention: optical axis along -x, image plane at x = -f,
// +y is image right and +z is image up. Angles in radians, distances in
// meters, image coordinates in (real-valued) pixels.

/// Focal length in pixels of a pinhole camera with horizontal field of view
/// `fov`. Throws std::invalid_argument unless 0 < fov < pi and the result is
/// non-degenerate.
double focal_length(double width, double fov);

struct CameraIntrinsics {
  double width = 84.0;
  double height = 84.0;
  double fov = 1.0;
  double focal = 0.0;

  /// Validates the inputs and derives `focal`.
  static CameraIntrinsics make(double width, double height, double fov);

  /// Centered sub-image of size (lambda*W, lambda*H) sharing this camera's
  /// optical center and focal length.
  CameraIntrinsics cropped(double lambda) const;
};

class RigidTransform {
 public:
  RigidTransform() = default;

  /// Throws std::invalid_argument unless `rotation` is orthonormal with
  /// determinant 1 (both within 1e-9).
  RigidTransform(const Mat3& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  RigidTransform inverse() const;
  Mat4 matrix() const;

  RigidTransform operator*(const RigidTransform& rhs) const;

 private:
  Mat3 rotation_ = Mat3::Identity();
  Vec3 translation_ = Vec3::Zero();
};

/// Plane n.x + d = 0 with unit normal n.
struct PlaneCoeffs {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;

  /// Normalizes (a, b, c, d) so that |(a, b, c)| = 1.
  static PlaneCoeffs make(double a, double b, double c, double d);
  static PlaneCoeffs make(const Vec3& normal, double offset) {
    return make(normal.x(), normal.y(), normal.z(), offset);
  }

  /// World ground plane z = h.
  static PlaneCoeffs ground(double h) { return make(0.0, 0.0, 1.0, -h); }

  double signed_distance(const Vec3& p) const { return normal.dot(p) + offset; }
};

/// Re-expresses plane `p0` (given in frame 0) in frame 1, where `t01` maps
/// frame-0 coordinates to frame-1 coordinates: n1 = R01 n0, D1 = D0 - n1.t01.
PlaneCoeffs plane_in_frame(const PlaneCoeffs& p0, const RigidTransform& t01);

/// Directions from the optical center through the image corners and center.
struct CornerRays {
  Vec3 lu, ld, ru, rd, center;
};

CornerRays corner_rays(const CameraIntrinsics& intr);

/// Ground intersections of the corner rays and the center ray, in camera frame.
struct GroundProjection {
  Vec3 lu, ld, ru, rd, cg;

  /// Corners in boundary order lu -> ru -> rd -> ld.
  std::array<Vec3, 4> boundary() const { return {lu, ru, rd, ld}; }
};

/// Intersects the five rays of `intr` with the camera-frame ground plane.
/// Throws InvalidViewpoint when any ray parameter is non-positive or its
/// denominator is within 1e-9 of zero (horizon in view, or the camera faces
/// away from or lies on the ground).
GroundProjection project_frustum(const CameraIntrinsics& intr, const PlaneCoeffs& ground_c);

/// p_cam = T_cw^-1 p_world, with T_cw the camera pose in the world frame.
Vec3 world_to_camera(const RigidTransform& t_cw, const Vec3& p_world);
Vec3 camera_to_world(const RigidTransform& t_cw, const Vec3& p_cam);

struct ImagePoint {
  double u = 0.0;
  double v = 0.0;
  bool visible = false;
};

/// Pinhole projection onto x = -f: u = s*y, v = s*z with s = -f/x. Visible iff
/// |u| <= W/2 and |v| <= H/2 (up to a 1e-12 relative slack). Throws BehindCamera when x >= 0.
ImagePoint project_to_image(const CameraIntrinsics& intr, const Vec3& p_cam);

}  // namespace vat
