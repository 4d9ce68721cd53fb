#include "vat/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "vat/errors.hpp"

namespace vat {

namespace {

constexpr double kOrthoTol = 1e-9;
constexpr double kDenomTol = 1e-9;
// Relative slack so that projected corners land inside the image.
constexpr double kPixelTol = 1e-12;

}  // namespace

double focal_length(double width, double fov) {
  if (!(width > 0.0)) throw std::invalid_argument("focal_length: width must be positive");
  if (!(fov > 0.0 && fov < std::numbers::pi)) {
    throw std::invalid_argument("focal_length: fov must lie in (0, pi), got " + std::to_string(fov));
  }
  const double f = width / (2.0 * std::tan(0.5 * fov));
  if (!std::isfinite(f) || f < 1e-9 * width) {
    throw std::invalid_argument("focal_length: degenerate field of view " + std::to_string(fov));
  }
  return f;
}

CameraIntrinsics CameraIntrinsics::make(double width, double height, double fov) {
  if (!(height > 0.0)) throw std::invalid_argument("CameraIntrinsics: height must be positive");
  CameraIntrinsics intr;
  intr.width = width;
  intr.height = height;
  intr.fov = fov;
  intr.focal = focal_length(width, fov);
  return intr;
}

CameraIntrinsics CameraIntrinsics::cropped(double lambda) const {
  if (!(lambda > 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("CameraIntrinsics::cropped: lambda must lie in (0, 1]");
  }
  CameraIntrinsics out;
  out.width = lambda * width;
  out.height = lambda * height;
  out.fov = 2.0 * std::atan(lambda * std::tan(0.5 * fov));
  out.focal = focal;
  return out;
}

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  const Mat3 gram = rotation * rotation.transpose();
  if (!((gram - Mat3::Identity()).cwiseAbs().maxCoeff() <= kOrthoTol)) {
    throw std::invalid_argument("RigidTransform: rotation is not orthonormal");
  }
  if (std::abs(rotation.determinant() - 1.0) > kOrthoTol) {
    throw std::invalid_argument("RigidTransform: rotation determinant is not 1");
  }
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation_ = rotation_.transpose();
  inv.translation_ = -(inv.rotation_ * translation_);
  return inv;
}

Mat4 RigidTransform::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  RigidTransform out;
  out.rotation_ = rotation_ * rhs.rotation_;
  out.translation_ = rotation_ * rhs.translation_ + translation_;
  return out;
}

PlaneCoeffs PlaneCoeffs::make(double a, double b, double c, double d) {
  const double norm = std::sqrt(a * a + b * b + c * c);
  if (!(norm > 0.0) || !std::isfinite(norm) || !std::isfinite(d)) {
    throw std::invalid_argument("PlaneCoeffs: normal must be finite and nonzero");
  }
  PlaneCoeffs p;
  p.normal = Vec3(a, b, c) / norm;
  p.offset = d / norm;
  return p;
}

PlaneCoeffs plane_in_frame(const PlaneCoeffs& p0, const RigidTransform& t01) {
  const Vec3 n1 = t01.rotation() * p0.normal;
  return PlaneCoeffs::make(n1, p0.offset - n1.dot(t01.translation()));
}

CornerRays corner_rays(const CameraIntrinsics& intr) {
  const double f = intr.focal;
  const double hw = 0.5 * intr.width;
  const double hh = 0.5 * intr.height;
  return {
      .lu = Vec3(-f, -hw, hh),
      .ld = Vec3(-f, -hw, -hh),
      .ru = Vec3(-f, hw, hh),
      .rd = Vec3(-f, hw, -hh),
      .center = Vec3(-f, 0.0, 0.0),
  };
}

GroundProjection project_frustum(const CameraIntrinsics& intr, const PlaneCoeffs& ground_c) {
  // Orient the plane so that the optical center sits on its positive side;
  // every ray parameter then has the form t = D / denom with D > 0.
  PlaneCoeffs plane = ground_c;
  if (plane.offset < 0.0) {
    plane.normal = -plane.normal;
    plane.offset = -plane.offset;
  }
  if (plane.offset < kDenomTol) {
    throw InvalidViewpoint("project_frustum: optical center lies on the ground plane");
  }

  const CornerRays rays = corner_rays(intr);
  auto hit = [&](const Vec3& dir, const char* name) -> Vec3 {
    // For LU this denominator is A f + B W/2 - C H/2, and so on.
    const double denom = -plane.normal.dot(dir);
    if (!(denom > kDenomTol)) {
      throw InvalidViewpoint(std::string("project_frustum: ray ") + name +
                             " does not reach the ground (denominator " + std::to_string(denom) +
                             ")");
    }
    const double t = plane.offset / denom;
    if (!std::isfinite(t)) throw InvalidViewpoint(std::string("project_frustum: ray ") + name);
    return dir * t;
  };

  GroundProjection proj;
  proj.lu = hit(rays.lu, "LU");
  proj.ld = hit(rays.ld, "LD");
  proj.ru = hit(rays.ru, "RU");
  proj.rd = hit(rays.rd, "RD");
  proj.cg = hit(rays.center, "C");
  return proj;
}

Vec3 world_to_camera(const RigidTransform& t_cw, const Vec3& p_world) {
  return t_cw.rotation().transpose() * (p_world - t_cw.translation());
}

Vec3 camera_to_world(const RigidTransform& t_cw, const Vec3& p_cam) { return t_cw.apply(p_cam); }

ImagePoint project_to_image(const CameraIntrinsics& intr, const Vec3& p_cam) {
  if (!(p_cam.x() < 0.0)) throw BehindCamera("project_to_image: point is not in front of the camera");
  const double s = -intr.focal / p_cam.x();
  ImagePoint ip;
  ip.u = s * p_cam.y();
  ip.v = s * p_cam.z();
  ip.visible = std::abs(ip.u) <= 0.5 * intr.width * (1.0 + kPixelTol) &&
               std::abs(ip.v) <= 0.5 * intr.height * (1.0 + kPixelTol);
  return ip;
}

}  // namespace vat
