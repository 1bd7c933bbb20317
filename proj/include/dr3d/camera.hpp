// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include "dr3d/rng.hpp"
#include "dr3d/tensor.hpp"

namespace dr3d {

// Orbit camera on a sphere around the origin, +y world up, right-handed.
// yaw in [-pi, pi], pitch in (-pi/2, pi/2), fov is the full vertical angle
// in radians. Camera center:
//   c = radius * (sin(yaw)cos(pitch), sin(pitch), cos(yaw)cos(pitch))
// so yaw = 0, pitch = 0 places the camera on +z looking down -z.
struct CameraPose {
  double yaw = 0.0;
  double pitch = 0.0;
  double radius = 2.7;
  double fov = 12.0 * kPi / 180.0;
};

struct PosePrior {
  double yaw_min = -0.5, yaw_max = 0.5;
  double pitch_min = -0.3, pitch_max = 0.3;
};

// Camera-to-world transform: R columns are the camera x/y/z axes in world
// coordinates, t is the camera center. View direction is -z.
struct Extrinsics {
  Eigen::Matrix3d R;
  Eigen::Vector3d t;
};

struct RayBundle {
  int h = 0, w = 0;
  // Row-major per pixel; origins are all the camera center but kept per-ray
  // for downstream uniformity.
  std::vector<Eigen::Vector3d> origin;
  std::vector<Eigen::Vector3d> dir;  // unit length, world frame
};

Eigen::Vector3d camera_center(const CameraPose& pose);
Extrinsics pose_to_extrinsics(const CameraPose& pose);

// Inverse of pose_to_extrinsics. Throws ConfigError if the matrix is not
// orthonormal, does not look at the origin, or is not +y-up consistent.
CameraPose extrinsics_to_pose(const Extrinsics& ext, double fov,
                              double tol = 1e-6);

// Pinhole rays through pixel centers, square pixels, principal point at the
// image center. Row 0 is the top of the image; camera y is up.
RayBundle generate_rays(const CameraPose& pose, int h, int w);

// Direction through pixel (ix, iy) in the camera frame (unit, z < 0).
Eigen::Vector3d pixel_dir_camera(const CameraPose& pose, int h, int w, int iy,
                                 int ix);

CameraPose sample_pose_prior(const PosePrior& prior, Rng& rng,
                             double radius, double fov);

}  // namespace dr3d
