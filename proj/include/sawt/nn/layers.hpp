#pragma once

#include <string>

#include "sawt/nn/ops.hpp"

namespace sawt::nn {

/// y = x W (+ b), W: in x out, b: 1 x out.
template <typename Scalar>
class Linear {
 public:
  Linear() = default;
  Linear(ParameterSet<Scalar>& params, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng,
         bool bias = true)
      : weight_(&params.add_uniform(name + ".weight", in, out, in, rng)),
        bias_(bias ? &params.add_uniform(name + ".bias", 1, out, in, rng) : nullptr) {}

  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const {
    if (x.cols() != weight_->value.rows()) {
      std::ostringstream os;
      os << weight_->name << ": input has " << x.cols() << " columns, expected " << weight_->value.rows();
      throw std::invalid_argument(os.str());
    }
    Var<Scalar> y = matmul(x, tape.param(*weight_));
    return bias_ ? add_row(y, tape.param(*bias_)) : y;
  }

  Parameter<Scalar>& weight() const { return *weight_; }
  Parameter<Scalar>* bias() const { return bias_; }
  Eigen::Index in_features() const { return weight_->value.rows(); }
  Eigen::Index out_features() const { return weight_->value.cols(); }

 private:
  Parameter<Scalar>* weight_ = nullptr;
  Parameter<Scalar>* bias_ = nullptr;
};

template <typename Scalar>
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterSet<Scalar>& params, const std::string& name, Eigen::Index width)
      : gamma_(&params.add(name + ".gamma", Mat<Scalar>::Ones(1, width))),
        beta_(&params.add(name + ".beta", Mat<Scalar>::Zero(1, width))) {}

  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const {
    return layer_norm_rows(x, tape.param(*gamma_), tape.param(*beta_));
  }

 private:
  Parameter<Scalar>* gamma_ = nullptr;
  Parameter<Scalar>* beta_ = nullptr;
};

}  // namespace sawt::nn
