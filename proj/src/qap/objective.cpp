#include "sawt/qap/objective.hpp"

#include <sstream>
#include <stdexcept>

namespace sawt {
namespace {

void check_sigma(const QapInstance& inst, const Permutation& sigma) {
  if (!is_permutation(sigma, inst.size())) {
    std::ostringstream os;
    os << "assignment of length " << sigma.size() << " is not a permutation of size " << inst.size();
    throw std::invalid_argument(os.str());
  }
}

void check_pair(int n, int i, int j) {
  if (i == j || i < 0 || j < 0 || i >= n || j >= n) {
    std::ostringstream os;
    os << "invalid swap (" << i << ", " << j << ") for size " << n;
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

double objective(const QapInstance& inst, const Permutation& sigma) {
  check_sigma(inst, sigma);
  const auto& f = inst.flow();
  const auto& d = inst.distance();
  const int n = inst.size();
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const int si = sigma[static_cast<std::size_t>(i)];
    for (int j = 0; j < n; ++j) total += f(i, j) * d(si, sigma[static_cast<std::size_t>(j)]);
  }
  return total;
}

double trace_objective(const Eigen::MatrixXd& flow, const Eigen::MatrixXd& distance, const Eigen::MatrixXd& x) {
  if (flow.rows() != x.rows() || x.cols() != distance.rows() || flow.cols() != x.rows()) {
    throw std::invalid_argument("trace_objective: dimension mismatch");
  }
  return (flow * x * distance * x.transpose()).trace();
}

double swap_delta(const QapInstance& inst, const Permutation& p, int r, int s) {
  const int n = inst.size();
  check_pair(n, r, s);
  if (static_cast<int>(p.size()) != n) throw std::invalid_argument("swap_delta: assignment size mismatch");
  const auto& a = inst.flow();
  const auto& b = inst.distance();
  const int pr = p[static_cast<std::size_t>(r)];
  const int ps = p[static_cast<std::size_t>(s)];
  double delta = (a(r, r) - a(s, s)) * (b(ps, ps) - b(pr, pr)) + (a(r, s) - a(s, r)) * (b(ps, pr) - b(pr, ps));
  for (int k = 0; k < n; ++k) {
    if (k == r || k == s) continue;
    const int pk = p[static_cast<std::size_t>(k)];
    delta += (a(k, r) - a(k, s)) * (b(pk, ps) - b(pk, pr)) + (a(r, k) - a(s, k)) * (b(ps, pk) - b(pr, pk));
  }
  return delta;
}

Assignment apply_swap(const Assignment& a, int i, int j, double delta) {
  check_pair(a.size(), i, j);
  Permutation sigma = a.sigma();
  std::swap(sigma[static_cast<std::size_t>(i)], sigma[static_cast<std::size_t>(j)]);
  return Assignment(std::move(sigma), a.cost() + delta);
}

Eigen::MatrixXd solution_aware_matrix(const QapInstance& inst, const Permutation& sigma) {
  check_sigma(inst, sigma);
  const int n = inst.size();
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i) {
    const int si = sigma[static_cast<std::size_t>(i)];
    for (int j = 0; j < n; ++j) m(i, j) = inst.flow()(i, j) * inst.distance()(si, sigma[static_cast<std::size_t>(j)]);
  }
  return m;
}

Eigen::MatrixXd objective_gradient(const QapInstance& inst, const Eigen::MatrixXd& x) {
  const int n = inst.size();
  if (x.rows() != n || x.cols() != n) {
    std::ostringstream os;
    os << "objective_gradient: X is " << x.rows() << "x" << x.cols() << ", instance size " << n;
    throw std::invalid_argument(os.str());
  }
  const auto& f = inst.flow();
  const auto& d = inst.distance();
  return f.transpose() * x * d.transpose() + f * x * d;
}

double gap(double mean, double bks_mean) {
  if (!(bks_mean > 0.0)) throw std::invalid_argument("gap: reference mean must be positive");
  return (mean - bks_mean) / bks_mean;
}

}  // namespace sawt
