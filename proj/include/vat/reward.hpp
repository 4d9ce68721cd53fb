#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "vat/geometry.hpp"

namespace vat {

struct RewardConfig {
  double alpha = 4.0;
  double lambda_clip = 0.7;

  /// Throws std::invalid_argument unless alpha > 0 and 0 < lambda_clip <= 1.
  void validate() const;
};

/// Tolerance (in deviation units) for counting a point as inside a quad.
inline constexpr double kInsideTol = 1e-9;

struct Deviation {
  double phi = 0.0;
  /// Exit point of the ray cg -> p_g through the quad boundary. Empty when p_g
  /// coincides with cg (|p_g - cg| < 1e-12), in which case phi is 0.
  std::optional<Vec3> boundary_point;
};

/// Deviation of a ground point from the image-center projection:
/// phi = |p_g - cg| / |e_g - cg|. p_g must lie on the ground plane of `proj`.
Deviation deviation(const Vec3& p_g, const GroundProjection& proj);

/// Half-plane form of the same quantity: max over edges of the ratio between
/// the signed edge distance of p and that of cg. Equals `deviation(...).phi`
/// for a convex quad around cg.
double quad_gauge(const Vec3& p_g, const GroundProjection& proj);

/// Boundary counts as inside (gauge <= 1 + kInsideTol).
bool in_quad(const Vec3& p_g, const GroundProjection& proj);

/// Everything the per-step rewards need for one camera pose.
struct RewardView {
  CameraIntrinsics intr;
  PlaneCoeffs ground;       // camera frame
  GroundProjection full;    // full image
  GroundProjection clip;    // centered lambda_clip sub-image
};

/// Throws InvalidViewpoint when the pose shows the horizon.
RewardView make_reward_view(const CameraIntrinsics& intr, const PlaneCoeffs& ground_c,
                            const RewardConfig& cfg);

/// tanh(alpha (1 - phi)^3) inside the clipped region, 0 elsewhere.
double goal_centered_reward(const Vec3& p_g, const RewardView& view, const RewardConfig& cfg);

/// 1 iff p_g lies in the full projected image quad.
int sparse_reward(const Vec3& p_g, const GroundProjection& proj);

/// Linear Euclidean falloff max(0, 1 - |p_g - cg| / c). Throws
/// std::invalid_argument for c <= 0.
double distance_reward(const Vec3& p_g, const GroundProjection& proj, double c);

/// Largest distance from cg to a point of the quad (attained at a corner).
double max_offset_distance(const GroundProjection& proj);

struct Counterexample {
  Vec3 p1, p2;
  double phi1 = 0.0, phi2 = 0.0;
  double d1 = 0.0, d2 = 0.0;
};

/// Draws up to `samples` uniform point pairs inside the quad and returns the
/// first with phi1 < phi2 but d(p1, cg) > d(p2, cg).
std::optional<Counterexample> find_counterexample(const GroundProjection& proj, std::uint64_t seed,
                                                  std::size_t samples);

/// Uniform sample inside the quad (area-weighted triangle split).
class QuadSampler {
 public:
  explicit QuadSampler(const GroundProjection& proj);
  template <class R>
  Vec3 operator()(R& rng) const {
    const double pick = rng.uniform();
    const double a = rng.uniform();
    const double b = rng.uniform();
    return sample(pick, a, b);
  }
  Vec3 sample(double pick, double a, double b) const;

 private:
  std::array<Vec3, 4> corners_;
  double first_weight_;
};

enum class Field { deviation, goal_centered, distance };

std::optional<Field> parse_field(std::string_view name);
std::string_view field_name(Field f);

/// Regular grid over the (y, z) bounding box of the full quad, in the camera
/// frame. Ground points are recovered from the plane equation. `values` is
/// row-major (z outer, y inner) and NaN outside the full quad.
struct ContourGrid {
  Field field = Field::deviation;
  int ny = 0, nz = 0;
  std::vector<double> y, z;
  std::vector<double> values;
  std::vector<double> phi;
  std::vector<char> inside;
  std::vector<char> in_clip;

  std::size_t index(int iy, int iz) const { return static_cast<std::size_t>(iz) * ny + iy; }
};

/// Throws std::invalid_argument when either resolution is below 2.
ContourGrid contour_grid(const RewardView& view, Field which, int ny, int nz,
                         const RewardConfig& cfg);

/// CSV with header `y,z,value`, row-major, `NaN` outside the quad.
void write_csv(std::ostream& os, const ContourGrid& grid);

}  // namespace vat
