#include "vat/reward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "vat/errors.hpp"
#include "vat/rng.hpp"

namespace vat {

namespace {

constexpr double kCenterEps = 1e-12;

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Orthonormal 2D coordinates on the quad's plane, origin at cg. Isometric
/// for points on that plane.
struct QuadFrame {
  Vec3 origin;
  Vec3 e1, e2;
  std::array<Vec2, 4> corners;

  explicit QuadFrame(const GroundProjection& proj) : origin(proj.cg) {
    const auto b = proj.boundary();
    const Vec3 n = (b[1] - b[0]).cross(b[3] - b[0]).normalized();
    e1 = (b[1] - b[0]).normalized();
    e2 = n.cross(e1);
    for (std::size_t i = 0; i < 4; ++i) corners[i] = local(b[i]);
  }

  Vec2 local(const Vec3& p) const {
    const Vec3 d = p - origin;
    return {d.dot(e1), d.dot(e2)};
  }
};

}  // namespace

void RewardConfig::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("RewardConfig: alpha must be positive");
  if (!(lambda_clip > 0.0 && lambda_clip <= 1.0)) {
    throw std::invalid_argument("RewardConfig: lambda_clip must lie in (0, 1]");
  }
}

Deviation deviation(const Vec3& p_g, const GroundProjection& proj) {
  const Vec3 offset = p_g - proj.cg;
  if (offset.norm() < kCenterEps) return {0.0, std::nullopt};

  const QuadFrame frame(proj);
  const Vec2 dir = frame.local(p_g);

  // cg + s*dir meets edge A + w (B - A); keep the nearest positive crossing.
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec2& a = frame.corners[i];
    const Vec2 edge = frame.corners[(i + 1) % 4] - a;
    const double denom = cross2(dir, edge);
    if (denom == 0.0) continue;
    const double s = cross2(a, edge) / denom;
    const double w = cross2(a, dir) / denom;
    if (s > 0.0 && w >= -1e-12 && w <= 1.0 + 1e-12) best = std::min(best, s);
  }
  if (!std::isfinite(best)) {
    throw std::logic_error("deviation: ray from the center does not leave the quad");
  }
  return {1.0 / best, proj.cg + best * offset};
}

double quad_gauge(const Vec3& p_g, const GroundProjection& proj) {
  const QuadFrame frame(proj);
  const Vec2 p = frame.local(p_g);
  double gauge = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec2& a = frame.corners[i];
    const Vec2 edge = frame.corners[(i + 1) % 4] - a;
    // Signed edge functions of the center (the origin) and of p.
    const double at_center = cross2(edge, -a);
    const double at_p = cross2(edge, p - a);
    gauge = std::max(gauge, (at_center - at_p) / at_center);
  }
  return gauge;
}

bool in_quad(const Vec3& p_g, const GroundProjection& proj) {
  return quad_gauge(p_g, proj) <= 1.0 + kInsideTol;
}

RewardView make_reward_view(const CameraIntrinsics& intr, const PlaneCoeffs& ground_c,
                            const RewardConfig& cfg) {
  cfg.validate();
  RewardView view;
  view.intr = intr;
  view.ground = ground_c;
  view.full = project_frustum(intr, ground_c);
  view.clip = project_frustum(intr.cropped(cfg.lambda_clip), ground_c);
  return view;
}

double goal_centered_reward(const Vec3& p_g, const RewardView& view, const RewardConfig& cfg) {
  if (!in_quad(p_g, view.clip)) return 0.0;
  const double phi = deviation(p_g, view.full).phi;
  const double slack = 1.0 - phi;
  return std::tanh(cfg.alpha * slack * slack * slack);
}

int sparse_reward(const Vec3& p_g, const GroundProjection& proj) { return in_quad(p_g, proj) ? 1 : 0; }

double distance_reward(const Vec3& p_g, const GroundProjection& proj, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("distance_reward: scale must be positive");
  return std::max(0.0, 1.0 - (p_g - proj.cg).norm() / c);
}

double max_offset_distance(const GroundProjection& proj) {
  double best = 0.0;
  for (const Vec3& corner : proj.boundary()) best = std::max(best, (corner - proj.cg).norm());
  return best;
}

QuadSampler::QuadSampler(const GroundProjection& proj) : corners_(proj.boundary()) {
  const double a0 = (corners_[1] - corners_[0]).cross(corners_[2] - corners_[0]).norm();
  const double a1 = (corners_[2] - corners_[0]).cross(corners_[3] - corners_[0]).norm();
  first_weight_ = a0 / (a0 + a1);
}

Vec3 QuadSampler::sample(double pick, double a, double b) const {
  // Triangles (0,1,2) and (0,2,3), then reflect the unit square onto a triangle.
  if (a + b > 1.0) {
    a = 1.0 - a;
    b = 1.0 - b;
  }
  const Vec3& o = corners_[0];
  if (pick < first_weight_) return o + a * (corners_[1] - o) + b * (corners_[2] - o);
  return o + a * (corners_[2] - o) + b * (corners_[3] - o);
}

std::optional<Counterexample> find_counterexample(const GroundProjection& proj, std::uint64_t seed,
                                                  std::size_t samples) {
  Rng rng(seed);
  const QuadSampler sampler(proj);
  for (std::size_t i = 0; i < samples; ++i) {
    Counterexample c;
    c.p1 = sampler(rng);
    c.p2 = sampler(rng);
    c.phi1 = deviation(c.p1, proj).phi;
    c.phi2 = deviation(c.p2, proj).phi;
    c.d1 = (c.p1 - proj.cg).norm();
    c.d2 = (c.p2 - proj.cg).norm();
    if (c.phi1 > c.phi2) {
      std::swap(c.p1, c.p2);
      std::swap(c.phi1, c.phi2);
      std::swap(c.d1, c.d2);
    }
    if (c.phi1 < c.phi2 && c.d1 > c.d2) return c;
  }
  return std::nullopt;
}

std::optional<Field> parse_field(std::string_view name) {
  if (name == "deviation") return Field::deviation;
  if (name == "goal-centered" || name == "goal_centered") return Field::goal_centered;
  if (name == "distance") return Field::distance;
  return std::nullopt;
}

std::string_view field_name(Field f) {
  switch (f) {
    case Field::deviation: return "deviation";
    case Field::goal_centered: return "goal-centered";
    case Field::distance: return "distance";
  }
  return "unknown";
}

ContourGrid contour_grid(const RewardView& view, Field which, int ny, int nz,
                         const RewardConfig& cfg) {
  if (ny < 2 || nz < 2) throw std::invalid_argument("contour_grid: resolution must be at least 2x2");
  const auto corners = view.full.boundary();
  double ymin = corners[0].y(), ymax = ymin, zmin = corners[0].z(), zmax = zmin;
  for (const Vec3& c : corners) {
    ymin = std::min(ymin, c.y());
    ymax = std::max(ymax, c.y());
    zmin = std::min(zmin, c.z());
    zmax = std::max(zmax, c.z());
  }

  PlaneCoeffs plane = view.ground;
  const double scale = max_offset_distance(view.full);

  ContourGrid grid;
  grid.field = which;
  grid.ny = ny;
  grid.nz = nz;
  grid.y.resize(ny);
  grid.z.resize(nz);
  // Coordinates measured from the box center so that a box symmetric about
  // y = 0 yields exactly mirrored columns.
  auto fill = [](std::vector<double>& axis, double lo, double hi) {
    const int n = static_cast<int>(axis.size());
    const double mid = 0.5 * (lo + hi);
    const double step = (hi - lo) / (n - 1);
    for (int i = 0; i < n; ++i) axis[i] = mid + step * (i - 0.5 * (n - 1));
  };
  fill(grid.y, ymin, ymax);
  fill(grid.z, zmin, zmax);

  const std::size_t n = static_cast<std::size_t>(ny) * nz;
  grid.values.assign(n, std::numeric_limits<double>::quiet_NaN());
  grid.phi.assign(n, std::numeric_limits<double>::quiet_NaN());
  grid.inside.assign(n, 0);
  grid.in_clip.assign(n, 0);

  for (int iz = 0; iz < nz; ++iz) {
    for (int iy = 0; iy < ny; ++iy) {
      const double y = grid.y[iy];
      const double z = grid.z[iz];
      // Ground point with these (y, z) camera coordinates.
      const double x = -(plane.offset + plane.normal.y() * y + plane.normal.z() * z) / plane.normal.x();
      const Vec3 p(x, y, z);
      const std::size_t k = grid.index(iy, iz);
      const double phi = deviation(p, view.full).phi;
      grid.phi[k] = phi;
      if (!in_quad(p, view.full)) continue;
      grid.inside[k] = 1;
      grid.in_clip[k] = in_quad(p, view.clip) ? 1 : 0;
      switch (which) {
        case Field::deviation: grid.values[k] = phi; break;
        case Field::goal_centered: grid.values[k] = goal_centered_reward(p, view, cfg); break;
        case Field::distance: grid.values[k] = distance_reward(p, view.full, scale); break;
      }
    }
  }
  return grid;
}

void write_csv(std::ostream& os, const ContourGrid& grid) {
  const auto old_precision = os.precision(17);
  os << "y,z,value\n";
  for (int iz = 0; iz < grid.nz; ++iz) {
    for (int iy = 0; iy < grid.ny; ++iy) {
      const double v = grid.values[grid.index(iy, iz)];
      os << grid.y[iy] << ',' << grid.z[iz] << ',';
      if (std::isnan(v)) {
        os << "NaN";
      } else {
        os << v;
      }
      os << '\n';
    }
  }
  os.precision(old_precision);
}

}  // namespace vat
