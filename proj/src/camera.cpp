// SPDX-License-Identifier: Apache-2.0
#include "dr3d/camera.hpp"

#include <cmath>

namespace dr3d {

Eigen::Vector3d camera_center(const CameraPose& pose) {
  const double cy = std::cos(pose.yaw), sy = std::sin(pose.yaw);
  const double cp = std::cos(pose.pitch), sp = std::sin(pose.pitch);
  return pose.radius * Eigen::Vector3d(sy * cp, sp, cy * cp);
}

Extrinsics pose_to_extrinsics(const CameraPose& pose) {
  const Eigen::Vector3d c = camera_center(pose);
  // Look-at-origin: camera z points away from the origin (view dir is -z).
  const Eigen::Vector3d z = c.normalized();
  const Eigen::Vector3d up(0.0, 1.0, 0.0);
  Eigen::Vector3d x = up.cross(z);
  const double n = x.norm();
  if (n < 1e-12) {
    throw ConfigError("pose_to_extrinsics: pitch too close to +-pi/2, up axis degenerate");
  }
  x /= n;
  const Eigen::Vector3d y = z.cross(x);
  Extrinsics ext;
  ext.R.col(0) = x;
  ext.R.col(1) = y;
  ext.R.col(2) = z;
  ext.t = c;
  return ext;
}

CameraPose extrinsics_to_pose(const Extrinsics& ext, double fov, double tol) {
  const Eigen::Matrix3d& R = ext.R;
  if ((R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol) {
    throw ConfigError("extrinsics_to_pose: rotation is not orthonormal");
  }
  const double r = ext.t.norm();
  if (r < 1e-9) {
    throw ConfigError("extrinsics_to_pose: camera center at the origin");
  }
  // Origin must lie on the -z ray: camera z axis parallel to the center.
  if ((R.col(2) - ext.t / r).norm() > tol) {
    throw ConfigError("extrinsics_to_pose: camera does not look at the origin");
  }
  CameraPose pose;
  pose.radius = r;
  pose.fov = fov;
  pose.pitch = std::asin(clamp(ext.t.y() / r, -1.0, 1.0));
  pose.yaw = std::atan2(ext.t.x(), ext.t.z());
  // Roll-free check: the reconstructed frame must match, otherwise the input
  // was rolled about the view axis and the (yaw, pitch) pair cannot encode it.
  const Extrinsics re = pose_to_extrinsics(pose);
  if ((re.R - R).cwiseAbs().maxCoeff() > std::max(tol, 1e-9) * 10.0) {
    throw ConfigError("extrinsics_to_pose: frame has roll, not representable");
  }
  return pose;
}

Eigen::Vector3d pixel_dir_camera(const CameraPose& pose, int h, int w, int iy,
                                 int ix) {
  const double tanv = std::tan(0.5 * pose.fov);
  const double aspect = double(w) / double(h);
  // Pixel centers; y flips because row 0 is the image top and camera y is up.
  const double u = ((ix + 0.5) / w * 2.0 - 1.0) * tanv * aspect;
  const double v = (1.0 - (iy + 0.5) / h * 2.0) * tanv;
  return Eigen::Vector3d(u, v, -1.0).normalized();
}

RayBundle generate_rays(const CameraPose& pose, int h, int w) {
  const Extrinsics ext = pose_to_extrinsics(pose);
  RayBundle rays;
  rays.h = h;
  rays.w = w;
  rays.origin.assign(std::size_t(h) * w, ext.t);
  rays.dir.resize(std::size_t(h) * w);
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      rays.dir[std::size_t(iy) * w + ix] =
          ext.R * pixel_dir_camera(pose, h, w, iy, ix);
    }
  }
  return rays;
}

CameraPose sample_pose_prior(const PosePrior& prior, Rng& rng, double radius,
                             double fov) {
  CameraPose pose;
  pose.yaw = rng.uniform(prior.yaw_min, prior.yaw_max);
  pose.pitch = rng.uniform(prior.pitch_min, prior.pitch_max);
  pose.radius = radius;
  pose.fov = fov;
  return pose;
}

}  // namespace dr3d
