#pragma once

#include <Eigen/Dense>

#include "occtool/geometry.hpp"

namespace occtool {

// Constant-velocity Kalman filter over the (cx, cy, aspect, height) box state
// plus velocities. Process and measurement noise scale with box height, the
// usual tracking-by-detection convention.
class KalmanBoxFilter {
 public:
  using Vec8 = Eigen::Matrix<double, 8, 1>;
  using Mat8 = Eigen::Matrix<double, 8, 8>;
  using Vec4 = Eigen::Matrix<double, 4, 1>;

  void initiate(const Box& box);
  void predict();
  void update(const Box& box);

  Box box() const;
  const Vec8& mean() const { return mean_; }
  const Mat8& covariance() const { return cov_; }

  static Vec4 box_to_measurement(const Box& box);
  static Box measurement_to_box(const Vec4& z);
  static Mat8 transition_matrix();

 private:
  Vec8 mean_ = Vec8::Zero();
  Mat8 cov_ = Mat8::Identity();

  static constexpr double kStdWeightPosition = 1.0 / 20.0;
  static constexpr double kStdWeightVelocity = 1.0 / 160.0;
};

}  // namespace occtool
