#pragma once

#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "sawt/qap/rng.hpp"

namespace sawt::nn {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// A trainable matrix with its gradient slot and Adam moments.
template <typename Scalar>
struct Parameter {
  std::string name;
  Mat<Scalar> value;
  Mat<Scalar> grad;
  Mat<Scalar> adam_m;
  Mat<Scalar> adam_v;
  /// Set when a backward pass flushed into `grad`; cleared by zero_grad().
  bool has_grad = false;

  Parameter(std::string n, Mat<Scalar> v)
      : name(std::move(n)),
        value(std::move(v)),
        grad(Mat<Scalar>::Zero(value.rows(), value.cols())),
        adam_m(Mat<Scalar>::Zero(value.rows(), value.cols())),
        adam_v(Mat<Scalar>::Zero(value.rows(), value.cols())) {}

  Eigen::Index count() const { return value.size(); }
};

/// Owns parameters with stable addresses, in registration order.
template <typename Scalar>
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  Parameter<Scalar>& add(std::string name, Mat<Scalar> value) {
    for (const auto& p : params_)
      if (p.name == name) throw std::invalid_argument("duplicate parameter name: " + name);
    return params_.emplace_back(std::move(name), std::move(value));
  }

  /// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation.
  Parameter<Scalar>& add_uniform(std::string name, Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in,
                                 Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Mat<Scalar> v(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) v(i, j) = static_cast<Scalar>(rng.uniform(-bound, bound));
    return add(std::move(name), std::move(v));
  }

  Parameter<Scalar>* find(const std::string& name) {
    for (auto& p : params_)
      if (p.name == name) return &p;
    return nullptr;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

  Eigen::Index total_count() const {
    Eigen::Index total = 0;
    for (const auto& p : params_) total += p.count();
    return total;
  }

  void zero_grad() {
    for (auto& p : params_) {
      p.grad.setZero();
      p.has_grad = false;
    }
  }

  bool grads_populated() const {
    for (const auto& p : params_)
      if (p.has_grad) return true;
    return false;
  }

  /// Number of Adam steps taken so far (bias-correction exponent).
  long adam_step = 0;

 private:
  std::deque<Parameter<Scalar>> params_;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update on every parameter, then zeroes the grads.
/// Throws std::logic_error if no backward pass populated gradients.
template <typename Scalar>
void adam_step(ParameterSet<Scalar>& params, const AdamOptions& opt = {}) {
  if (!params.grads_populated()) throw std::logic_error("adam_step: gradients were not populated by backward()");
  ++params.adam_step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(params.adam_step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(params.adam_step));
  const auto b1 = static_cast<Scalar>(opt.beta1);
  const auto b2 = static_cast<Scalar>(opt.beta2);
  for (auto& p : params) {
    p.adam_m = b1 * p.adam_m + (Scalar(1) - b1) * p.grad;
    p.adam_v = b2 * p.adam_v + (Scalar(1) - b2) * p.grad.cwiseAbs2();
    const auto m_hat = p.adam_m.array() / static_cast<Scalar>(c1);
    const auto v_hat = p.adam_v.array() / static_cast<Scalar>(c2);
    p.value.array() -= static_cast<Scalar>(opt.lr) * m_hat / (v_hat.sqrt() + static_cast<Scalar>(opt.eps));
  }
  params.zero_grad();
}

}  // namespace sawt::nn
