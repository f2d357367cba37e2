#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sawt/errors.hpp"
#include "sawt/nn/tape.hpp"

// Differentiable primitives over 2-D matrices. Row vectors are 1 x c.

namespace sawt::nn {

namespace detail {

template <typename Scalar>
[[noreturn]] void shape_error(const char* op, const Var<Scalar>& a, const Var<Scalar>& b) {
  std::ostringstream os;
  os << op << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x" << b.cols();
  throw std::invalid_argument(os.str());
}

template <typename Scalar>
void same_shape(const char* op, const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error(op, a, b);
}

/// Row-wise log-softmax of `x` with masked entries forced to -inf.
template <typename Scalar>
Mat<Scalar> log_softmax_values(const Mat<Scalar>& x, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>* mask) {
  constexpr Scalar ninf = -std::numeric_limits<Scalar>::infinity();
  Mat<Scalar> out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Scalar mx = ninf;
    bool open = false, finite = true;
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      if (!mask || !(*mask)(r, c)) {
        open = true;
        finite = finite && std::isfinite(x(r, c));
        mx = std::max(mx, x(r, c));
      }
    if (!open) throw std::invalid_argument("softmax: every entry of a row is masked");
    if (!finite) throw NumericalError("softmax: non-finite logit in row " + std::to_string(r));
    Scalar sum = 0;
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      if (!mask || !(*mask)(r, c)) sum += std::exp(x(r, c) - mx);
    const Scalar lse = mx + std::log(sum);
    for (Eigen::Index c = 0; c < x.cols(); ++c) out(r, c) = (mask && (*mask)(r, c)) ? ninf : x(r, c) - lse;
  }
  return out;
}

/// exp() per entry through std::exp so that -inf maps to exactly 0 (Eigen's
/// packet exp clamps its argument).
template <typename Derived>
auto exact_exp(const Eigen::MatrixBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return x.unaryExpr([](S v) { return std::exp(v); }).eval();
}

}  // namespace detail

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.cols() != b.rows()) detail::shape_error("matmul", a, b);
  Mat<Scalar> out;
  out.noalias() = a.value() * b.value();
  const int ia = a.id(), ib = b.id();
  return a.tape().op(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, const Mat<Scalar>& g) {
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

/// a * b^T
template <typename Scalar>
Var<Scalar> matmul_nt(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.cols() != b.cols()) detail::shape_error("matmul_nt", a, b);
  Mat<Scalar> out;
  out.noalias() = a.value() * b.value().transpose();
  const int ia = a.id(), ib = b.id();
  return a.tape().op(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, const Mat<Scalar>& g) {
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib));
    if (t.requires_grad(ib)) t.accumulate(ib, g.transpose() * t.value(ia));
  });
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::same_shape("add", a, b);
  const int ia = a.id(), ib = b.id();
  return a.tape().op(a.value() + b.value(), {a, b}, [ia, ib](Tape<Scalar>& t, const Mat<Scalar>& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::same_shape("sub", a, b);
  const int ia = a.id(), ib = b.id();
  return a.tape().op(a.value() - b.value(), {a, b}, [ia, ib](Tape<Scalar>& t, const Mat<Scalar>& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, -g);
  });
}

/// a + row, with the 1 x c `row` broadcast over every row of a.
template <typename Scalar>
Var<Scalar> add_row(const Var<Scalar>& a, const Var<Scalar>& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) detail::shape_error("add_row", a, row);
  const int ia = a.id(), ir = row.id();
  Mat<Scalar> out = a.value().rowwise() + row.value().row(0);
  return a.tape().op(std::move(out), {a, row}, [ia, ir](Tape<Scalar>& t, const Mat<Scalar>& g) {
    t.accumulate(ia, g);
    if (t.requires_grad(ir)) t.accumulate(ir, g.colwise().sum());
  });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  const int ia = a.id();
  return a.tape().op(a.value() * s, {a}, [ia, s](Tape<Scalar>& t, const Mat<Scalar>& g) { t.accumulate(ia, g * s); });
}

template <typename Scalar>
Var<Scalar> hadamard(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::same_shape("hadamard", a, b);
  const int ia = a.id(), ib = b.id();
  Mat<Scalar> out = a.value().cwiseProduct(b.value());
  return a.tape().op(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, const Mat<Scalar>& g) {
    if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
    if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
  });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& a) {
  const int ia = a.id();
  Mat<Scalar> out = a.value().cwiseMax(Scalar(0));
  return a.tape().op(std::move(out), {a}, [ia](Tape<Scalar>& t, const Mat<Scalar>& g) {
    t.accumulate(ia, (t.value(ia).array() > Scalar(0)).select(g, Scalar(0)).matrix());
  });
}

template <typename Scalar>
Var<Scalar> square(const Var<Scalar>& a) {
  const int ia = a.id();
  return a.tape().op(a.value().cwiseAbs2(), {a}, [ia](Tape<Scalar>& t, const Mat<Scalar>& g) {
    t.accumulate(ia, Scalar(2) * g.cwiseProduct(t.value(ia)));
  });
}

template <typename Scalar>
Var<Scalar> transpose(const Var<Scalar>& a) {
  const int ia = a.id();
  Mat<Scalar> out = a.value().transpose();
  return a.tape().op(std::move(out), {a},
                     [ia](Tape<Scalar>& t, const Mat<Scalar>& g) { t.accumulate(ia, g.transpose()); });
}

/// Column-major reshape (Eigen storage order).
template <typename Scalar>
Var<Scalar> reshape(const Var<Scalar>& a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) throw std::invalid_argument("reshape: element count mismatch");
  const int ia = a.id();
  const Eigen::Index r0 = a.rows(), c0 = a.cols();
  Mat<Scalar> out = a.value().reshaped(rows, cols);
  return a.tape().op(std::move(out), {a}, [ia, r0, c0](Tape<Scalar>& t, const Mat<Scalar>& g) {
    t.accumulate(ia, g.reshaped(r0, c0));
  });
}

/// Row-wise softmax with max subtraction; masked entries are exactly zero.
template <typename Scalar>
Var<Scalar> softmax_rows(const Var<Scalar>& a, const Mask* mask = nullptr) {
  Mat<Scalar> p = detail::exact_exp(detail::log_softmax_values(a.value(), mask));
  const int ia = a.id();
  const int self_hint = static_cast<int>(a.tape().size());
  return a.tape().op(std::move(p), {a}, [ia, self_hint](Tape<Scalar>& t, const Mat<Scalar>& g) {
    const Mat<Scalar>& p = t.value(self_hint);
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dot = g.cwiseProduct(p).rowwise().sum();
    t.accumulate(ia, p.cwiseProduct(g.colwise() - dot));
  });
}

/// Row-wise log-softmax; masked entries are -inf and receive no gradient.
template <typename Scalar>
Var<Scalar> log_softmax_rows(const Var<Scalar>& a, const Mask* mask = nullptr) {
  Mat<Scalar> lp = detail::log_softmax_values(a.value(), mask);
  const int ia = a.id();
  const int self_hint = static_cast<int>(a.tape().size());
  std::optional<Mask> keep_out;
  if (mask) keep_out = *mask;
  return a.tape().op(std::move(lp), {a}, [ia, self_hint, keep_out](Tape<Scalar>& t, const Mat<Scalar>& g) {
    const Mat<Scalar> lpv = t.value(self_hint);
    // Masked entries hold -inf and take no part in the normaliser.
    const Mat<Scalar> gm = keep_out ? Mat<Scalar>(keep_out->select(Scalar(0), g.array())) : g;
    const Mat<Scalar> p = keep_out ? Mat<Scalar>(keep_out->select(Scalar(0), detail::exact_exp(lpv).array()))
                                   : detail::exact_exp(lpv);
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> total = gm.rowwise().sum();
    t.accumulate(ia, gm - p.cwiseProduct(total.replicate(1, p.cols())));
  });
}

/// Shannon entropy of softmax(row) for every row, as a column (rows x 1).
template <typename Scalar>
Var<Scalar> entropy_rows(const Var<Scalar>& a, const Mask* mask = nullptr) {
  const Mat<Scalar> lp = detail::log_softmax_values(a.value(), mask);
  const Mat<Scalar> p = detail::exact_exp(lp);
  Mat<Scalar> h(a.rows(), 1);
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    Scalar s = 0;
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      if (p(r, c) > Scalar(0)) s -= p(r, c) * lp(r, c);
    h(r, 0) = s;
  }
  const int ia = a.id();
  return a.tape().op(std::move(h), {a}, [ia, p, lp](Tape<Scalar>& t, const Mat<Scalar>& g) {
    // dH/dx_k = -p_k (log p_k + H)
    Mat<Scalar> d = Mat<Scalar>::Zero(p.rows(), p.cols());
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      Scalar hr = 0;
      for (Eigen::Index c = 0; c < p.cols(); ++c)
        if (p(r, c) > Scalar(0)) hr -= p(r, c) * lp(r, c);
      for (Eigen::Index c = 0; c < p.cols(); ++c)
        if (p(r, c) > Scalar(0)) d(r, c) = -g(r, 0) * p(r, c) * (lp(r, c) + hr);
    }
    t.accumulate(ia, d);
  });
}

/// Row-wise layer normalisation followed by the affine map gamma, beta (1 x c).
template <typename Scalar>
Var<Scalar> layer_norm_rows(const Var<Scalar>& x, const Var<Scalar>& gamma, const Var<Scalar>& beta,
                            Scalar eps = Scalar(1e-5)) {
  if (gamma.rows() != 1 || gamma.cols() != x.cols()) detail::shape_error("layer_norm gamma", x, gamma);
  if (beta.rows() != 1 || beta.cols() != x.cols()) detail::shape_error("layer_norm beta", x, beta);
  const Eigen::Index c = x.cols();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean = x.value().rowwise().mean();
  Mat<Scalar> centered = x.value().colwise() - mean;
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std =
      ((centered.cwiseAbs2().rowwise().sum() / static_cast<Scalar>(c)).array() + eps).rsqrt().matrix();
  Mat<Scalar> xhat = centered.array().colwise() * inv_std.array();
  Mat<Scalar> out = (xhat.array().rowwise() * gamma.value().row(0).array()).matrix();
  out.rowwise() += beta.value().row(0);
  const int ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.tape().op(std::move(out), {x, gamma, beta},
                     [ix, ig, ib, xhat, inv_std, c](Tape<Scalar>& t, const Mat<Scalar>& g) {
                       if (t.requires_grad(ig)) t.accumulate(ig, g.cwiseProduct(xhat).colwise().sum());
                       if (t.requires_grad(ib)) t.accumulate(ib, g.colwise().sum());
                       if (t.requires_grad(ix)) {
                         const Mat<Scalar> gx = (g.array().rowwise() * t.value(ig).row(0).array()).matrix();
                         const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> m1 = gx.rowwise().mean();
                         const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> m2 =
                             gx.cwiseProduct(xhat).rowwise().sum() / static_cast<Scalar>(c);
                         Mat<Scalar> dx = gx.colwise() - m1;
                         dx -= xhat.cwiseProduct(m2.replicate(1, c));
                         t.accumulate(ix, (dx.array().colwise() * inv_std.array()).matrix());
                       }
                     });
}

/// [a_0 | a_1 | ...] side by side; all parts share the row count.
template <typename Scalar>
Var<Scalar> concat_cols(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != parts[0].rows()) detail::shape_error("concat_cols", parts[0], p);
    cols += p.cols();
  }
  Mat<Scalar> out(parts[0].rows(), cols);
  std::vector<std::pair<int, Eigen::Index>> layout;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    layout.emplace_back(p.id(), at);
    at += p.cols();
  }
  return parts[0].tape().op(std::move(out), parts, [layout](Tape<Scalar>& t, const Mat<Scalar>& g) {
    for (const auto& [id, start] : layout) {
      if (t.requires_grad(id)) t.accumulate(id, g.middleCols(start, t.value(id).cols()));
    }
  });
}

template <typename Scalar>
Var<Scalar> slice_cols(const Var<Scalar>& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::invalid_argument("slice_cols: out of range");
  const int ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  Mat<Scalar> out = a.value().middleCols(start, count);
  return a.tape().op(std::move(out), {a}, [ia, start, count, r, c](Tape<Scalar>& t, const Mat<Scalar>& g) {
    Mat<Scalar> full = Mat<Scalar>::Zero(r, c);
    full.middleCols(start, count) = g;
    t.accumulate(ia, full);
  });
}

/// out.row(k) = a.row(index[k]); indices may repeat.
template <typename Scalar>
Var<Scalar> gather_rows(const Var<Scalar>& a, const std::vector<int>& index) {
  Mat<Scalar> out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] < 0 || index[k] >= a.rows()) throw std::invalid_argument("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(k)) = a.value().row(index[k]);
  }
  const int ia = a.id();
  const Eigen::Index r = a.rows();
  return a.tape().op(std::move(out), {a}, [ia, index, r](Tape<Scalar>& t, const Mat<Scalar>& g) {
    Mat<Scalar> full = Mat<Scalar>::Zero(r, g.cols());
    for (std::size_t k = 0; k < index.size(); ++k) full.row(index[k]) += g.row(static_cast<Eigen::Index>(k));
    t.accumulate(ia, full);
  });
}

/// Repeats a 1 x c row `n` times.
template <typename Scalar>
Var<Scalar> broadcast_rows(const Var<Scalar>& row, Eigen::Index n) {
  if (row.rows() != 1) throw std::invalid_argument("broadcast_rows: input must be a single row");
  const int ir = row.id();
  Mat<Scalar> out = row.value().replicate(n, 1);
  return row.tape().op(std::move(out), {row},
                       [ir](Tape<Scalar>& t, const Mat<Scalar>& g) { t.accumulate(ir, g.colwise().sum()); });
}

/// Column-wise maximum over rows (1 x c); gradient goes to the first argmax.
template <typename Scalar>
Var<Scalar> max_pool_rows(const Var<Scalar>& a) {
  const Eigen::Index c = a.cols();
  Mat<Scalar> out(1, c);
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(c));
  for (Eigen::Index j = 0; j < c; ++j) out(0, j) = a.value().col(j).maxCoeff(&arg[static_cast<std::size_t>(j)]);
  const int ia = a.id();
  const Eigen::Index r = a.rows();
  return a.tape().op(std::move(out), {a}, [ia, arg, r](Tape<Scalar>& t, const Mat<Scalar>& g) {
    Mat<Scalar> full = Mat<Scalar>::Zero(r, g.cols());
    for (Eigen::Index j = 0; j < g.cols(); ++j) full(arg[static_cast<std::size_t>(j)], j) = g(0, j);
    t.accumulate(ia, full);
  });
}

/// Column-wise mean over rows (1 x c).
template <typename Scalar>
Var<Scalar> mean_pool_rows(const Var<Scalar>& a) {
  const int ia = a.id();
  const Eigen::Index r = a.rows();
  Mat<Scalar> out = a.value().colwise().mean();
  return a.tape().op(std::move(out), {a}, [ia, r](Tape<Scalar>& t, const Mat<Scalar>& g) {
    t.accumulate(ia, g.replicate(r, 1) / static_cast<Scalar>(r));
  });
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  const int ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  Mat<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape().op(std::move(out), {a}, [ia, r, c](Tape<Scalar>& t, const Mat<Scalar>& g) {
    t.accumulate(ia, Mat<Scalar>::Constant(r, c, g(0, 0)));
  });
}

template <typename Scalar>
Var<Scalar> mean(const Var<Scalar>& a) {
  return scale(sum(a), Scalar(1) / static_cast<Scalar>(a.value().size()));
}

/// The single entry a(r, c) as a 1 x 1 node.
template <typename Scalar>
Var<Scalar> pick(const Var<Scalar>& a, Eigen::Index r, Eigen::Index c) {
  if (r < 0 || c < 0 || r >= a.rows() || c >= a.cols()) throw std::invalid_argument("pick: index out of range");
  const int ia = a.id();
  const Eigen::Index rows = a.rows(), cols = a.cols();
  Mat<Scalar> out(1, 1);
  out(0, 0) = a.value()(r, c);
  return a.tape().op(std::move(out), {a}, [ia, r, c, rows, cols](Tape<Scalar>& t, const Mat<Scalar>& g) {
    Mat<Scalar> full = Mat<Scalar>::Zero(rows, cols);
    full(r, c) = g(0, 0);
    t.accumulate(ia, full);
  });
}

}  // namespace sawt::nn
