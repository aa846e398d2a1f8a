#pragma once

#include <optional>

#include <Eigen/Dense>

// Pinhole camera with ground-plane (z = 0) homography.
namespace cpsim::calib {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  Mat3 matrix() const;
  Mat3 inverse() const;
  void validate() const;
  bool operator==(const Intrinsics&) const = default;
};

struct Extrinsics {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Mat34 matrix() const;
  // R^T R = I and det R = +1 within tol.
  bool is_valid(double tol = 1e-9) const;
  // World position of the optical centre, -R^T t.
  Vec3 centre() const { return -rotation.transpose() * translation; }
};

struct CameraModel {
  Intrinsics intrinsics;
  Extrinsics extrinsics;
  int image_width_px = 1920;
  int image_height_px = 1080;

  // P = K [R | t].
  Mat34 projection() const;
  // P with its third column removed: maps [x, y, 1] on the ground to pixels.
  Mat3 ground_matrix() const;
  bool in_image(const Vec2& pixel) const;
  // Depth of a world point along the optical axis.
  double depth(const Vec3& world) const;
};

// Camera at `position` looking at `target`, with world +z as up.
CameraModel look_at(const Intrinsics& k, int width, int height, const Vec3& position,
                    const Vec3& target);

// Throws kBehindCamera for non-positive depth.
Vec2 project(const CameraModel& camera, const Vec3& world);

// Throws kDegenerate when the ground matrix is singular and kBehindCamera for
// ground points behind the camera.
Vec2 project_ground(const CameraModel& camera, const Vec2& ground);

// Inverse of project_ground through the inverse ground matrix.
Vec2 ground_from_image(const CameraModel& camera, const Vec2& pixel);

// Pixel of a ground point when it lies in front of the camera and inside the
// image; nullopt otherwise. Never throws.
std::optional<Vec2> visible_pixel(const CameraModel& camera, const Vec2& ground);

// Reciprocal condition number of the ground matrix (0 for singular).
double ground_conditioning(const CameraModel& camera);

}  // namespace cpsim::calib
