#include "occtool/kalman.hpp"

namespace occtool {

KalmanBoxFilter::Vec4 KalmanBoxFilter::box_to_measurement(const Box& box) {
  Vec4 z;
  z << box.cx(), box.cy(), box.w / box.h, box.h;
  return z;
}

Box KalmanBoxFilter::measurement_to_box(const Vec4& z) {
  Box b;
  b.h = z(3);
  b.w = z(2) * z(3);
  b.x = z(0) - b.w / 2.0;
  b.y = z(1) - b.h / 2.0;
  return b;
}

KalmanBoxFilter::Mat8 KalmanBoxFilter::transition_matrix() {
  Mat8 f = Mat8::Identity();
  for (int i = 0; i < 4; ++i) f(i, i + 4) = 1.0;
  return f;
}

void KalmanBoxFilter::initiate(const Box& box) {
  const Vec4 z = box_to_measurement(box);
  mean_.setZero();
  mean_.head<4>() = z;

  const double h = z(3);
  Vec8 std;
  std << 2 * kStdWeightPosition * h, 2 * kStdWeightPosition * h, 1e-2,
      2 * kStdWeightPosition * h, 10 * kStdWeightVelocity * h, 10 * kStdWeightVelocity * h,
      1e-5, 10 * kStdWeightVelocity * h;
  cov_ = std.array().square().matrix().asDiagonal();
}

void KalmanBoxFilter::predict() {
  const double h = mean_(3);
  Vec8 std;
  std << kStdWeightPosition * h, kStdWeightPosition * h, 1e-2, kStdWeightPosition * h,
      kStdWeightVelocity * h, kStdWeightVelocity * h, 1e-5, kStdWeightVelocity * h;
  const Mat8 q = std.array().square().matrix().asDiagonal();
  const Mat8 f = transition_matrix();

  mean_ = f * mean_;
  cov_ = f * cov_ * f.transpose() + q;
  cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
}

void KalmanBoxFilter::update(const Box& box) {
  const Vec4 z = box_to_measurement(box);
  const double h = mean_(3);
  Vec4 std;
  std << kStdWeightPosition * h, kStdWeightPosition * h, 1e-1, kStdWeightPosition * h;
  const Eigen::Matrix4d r = std.array().square().matrix().asDiagonal();

  Eigen::Matrix<double, 4, 8> hm = Eigen::Matrix<double, 4, 8>::Zero();
  for (int i = 0; i < 4; ++i) hm(i, i) = 1.0;

  const Eigen::Matrix4d s = hm * cov_ * hm.transpose() + r;
  const Eigen::Matrix<double, 8, 4> k = cov_ * hm.transpose() * s.inverse();
  mean_ += k * (z - hm * mean_);

  // Joseph form keeps the covariance symmetric PSD under roundoff.
  const Mat8 ikh = Mat8::Identity() - k * hm;
  cov_ = ikh * cov_ * ikh.transpose() + k * r * k.transpose();
  cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
}

Box KalmanBoxFilter::box() const { return measurement_to_box(mean_.head<4>()); }

}  // namespace occtool
