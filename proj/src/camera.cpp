#include "cpsim/camera.hpp"

#include <cmath>

#include "cpsim/error.hpp"

namespace cpsim::calib {

namespace {
constexpr double kSingularRcond = 1e-12;

Vec2 dehomogenize(const Vec3& p) { return {p.x() / p.z(), p.y() / p.z()}; }
}  // namespace

Mat3 Intrinsics::matrix() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Mat3 Intrinsics::inverse() const {
  Mat3 inv;
  inv << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
  return inv;
}

void Intrinsics::validate() const {
  require(fx > 0.0, ErrorCode::kValidation, "fx", "must be positive");
  require(fy > 0.0, ErrorCode::kValidation, "fy", "must be positive");
}

Mat34 Extrinsics::matrix() const {
  Mat34 m;
  m.leftCols<3>() = rotation;
  m.col(3) = translation;
  return m;
}

bool Extrinsics::is_valid(double tol) const {
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

Mat34 CameraModel::projection() const { return intrinsics.matrix() * extrinsics.matrix(); }

Mat3 CameraModel::ground_matrix() const {
  const Mat34 p = projection();
  Mat3 g;
  g.col(0) = p.col(0);
  g.col(1) = p.col(1);
  g.col(2) = p.col(3);
  return g;
}

bool CameraModel::in_image(const Vec2& pixel) const {
  return pixel.x() >= 0.0 && pixel.y() >= 0.0 && pixel.x() < image_width_px &&
         pixel.y() < image_height_px;
}

double CameraModel::depth(const Vec3& world) const {
  return extrinsics.rotation.row(2).dot(world) + extrinsics.translation.z();
}

CameraModel look_at(const Intrinsics& k, int width, int height, const Vec3& position,
                    const Vec3& target) {
  const Vec3 forward = (target - position).normalized();
  Vec3 right = forward.cross(Vec3::UnitZ());
  require(right.norm() > 1e-9, ErrorCode::kValidation, "look_at",
          "view direction must not be vertical");
  right.normalize();
  // Image y grows downwards.
  const Vec3 down = forward.cross(right);
  CameraModel cam;
  cam.intrinsics = k;
  cam.image_width_px = width;
  cam.image_height_px = height;
  cam.extrinsics.rotation.row(0) = right.transpose();
  cam.extrinsics.rotation.row(1) = down.transpose();
  cam.extrinsics.rotation.row(2) = forward.transpose();
  cam.extrinsics.translation = -cam.extrinsics.rotation * position;
  return cam;
}

Vec2 project(const CameraModel& camera, const Vec3& world) {
  if (camera.depth(world) <= 0.0) {
    throw Error(ErrorCode::kBehindCamera, "point is not in front of the camera", "world_point");
  }
  return dehomogenize(camera.projection() * world.homogeneous());
}

double ground_conditioning(const CameraModel& camera) {
  const Eigen::JacobiSVD<Mat3> svd(camera.ground_matrix());
  const auto& s = svd.singularValues();
  return s(0) > 0.0 ? s(2) / s(0) : 0.0;
}

Vec2 project_ground(const CameraModel& camera, const Vec2& ground) {
  if (ground_conditioning(camera) < kSingularRcond) {
    throw Error(ErrorCode::kDegenerate, "ground-plane matrix is singular", "camera");
  }
  return project(camera, Vec3(ground.x(), ground.y(), 0.0));
}

Vec2 ground_from_image(const CameraModel& camera, const Vec2& pixel) {
  if (ground_conditioning(camera) < kSingularRcond) {
    throw Error(ErrorCode::kDegenerate, "ground-plane matrix is singular", "camera");
  }
  const Vec3 g = camera.ground_matrix().inverse() * pixel.homogeneous();
  return dehomogenize(g);
}

std::optional<Vec2> visible_pixel(const CameraModel& camera, const Vec2& ground) {
  const Vec3 world(ground.x(), ground.y(), 0.0);
  if (camera.depth(world) <= 0.0) return std::nullopt;
  const Vec2 px = dehomogenize(camera.projection() * world.homogeneous());
  if (!camera.in_image(px)) return std::nullopt;
  return px;
}

}  // namespace cpsim::calib
