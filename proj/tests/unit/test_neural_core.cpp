#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "gradcheck.hpp"
#include "helpers.hpp"
#include "sawt/nn/checkpoint.hpp"
#include "sawt/nn/layers.hpp"

using namespace sawt;
using namespace sawt::nn;
using MatD = Mat<double>;

namespace {

MatD rand_mat(Eigen::Index r, Eigen::Index c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  return test::random_matrix(static_cast<int>(r), static_cast<int>(c), rng, lo, hi);
}

/// Weighted sum with a fixed random matrix so every output entry matters.
Var<double> weigh(Tape<double>& t, const Var<double>& v, std::uint64_t seed) {
  Rng rng(seed);
  return sum(hadamard(v, t.constant(rand_mat(v.rows(), v.cols(), rng))));
}

const std::vector<std::pair<int, int>> kShapes = {{1, 1}, {1, 4}, {3, 1}, {2, 3}, {4, 5}, {6, 2}};

void expect_grads(const test::InputFn<double>& f, const std::vector<MatD>& inputs, double tol = 1e-6) {
  const test::GradReport rep = test::check_input_grads<double>(f, inputs, 1e-5);
  INFO("worst " << rep.worst << " rel " << rep.max_rel);
  CHECK(rep.max_rel < tol);
}

}  // namespace

TEST_CASE("forward semantics") {
  Tape<double> t;
  SUBCASE("softmax of equal logits is uniform") {
    const MatD p = softmax_rows(t.constant(MatD::Zero(1, 3))).value();
    CHECK(p(0, 0) == doctest::Approx(1.0 / 3));
    CHECK(p(0, 2) == doctest::Approx(1.0 / 3));
  }
  SUBCASE("softmax rows sum to one and survive large inputs") {
    Rng rng(1);
    MatD x = rand_mat(4, 6, rng, -5, 5);
    x(0, 0) = 1e4;
    x(1, 3) = -1e4;
    const MatD p = softmax_rows(t.constant(x)).value();
    CHECK(p.allFinite());
    for (int r = 0; r < 4; ++r) CHECK(p.row(r).sum() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(log_softmax_rows(t.constant(x)).value().allFinite());
    CHECK(entropy_rows(t.constant(x)).value().allFinite());
  }
  SUBCASE("masked entries are exactly zero and excluded") {
    Mask m = Mask::Constant(1, 3, false);
    m(0, 1) = true;
    const MatD p = softmax_rows(t.constant(MatD::Zero(1, 3)), &m).value();
    CHECK(p(0, 1) == 0.0);
    CHECK(p(0, 0) == doctest::Approx(0.5));
    CHECK(entropy_rows(t.constant(MatD::Zero(1, 3)), &m).item() == doctest::Approx(std::log(2.0)));
    Mask all = Mask::Constant(1, 3, true);
    CHECK_THROWS_AS(softmax_rows(t.constant(MatD::Zero(1, 3)), &all), std::invalid_argument);
  }
  SUBCASE("relu clips negatives") {
    MatD x(1, 3);
    x << -2.0, 0.5, -0.1;
    const MatD y = relu(t.constant(x)).value();
    CHECK(y(0, 0) == 0.0);
    CHECK(y(0, 1) == 0.5);
    CHECK(y(0, 2) == 0.0);
  }
  SUBCASE("matmul matches a triple loop") {
    Rng rng(2);
    const MatD a = rand_mat(2, 3, rng), b = rand_mat(3, 2, rng);
    const MatD c = matmul(t.constant(a), t.constant(b)).value();
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += a(i, k) * b(k, j);
        CHECK(c(i, j) == doctest::Approx(s).epsilon(1e-12));
      }
  }
  SUBCASE("layer norm rows have zero mean and unit variance before the affine map") {
    Rng rng(3);
    const MatD y = layer_norm_rows(t.constant(rand_mat(5, 8, rng, -3, 7)), t.constant(MatD::Ones(1, 8)),
                                   t.constant(MatD::Zero(1, 8)))
                       .value();
    for (int r = 0; r < 5; ++r) {
      CHECK(std::abs(y.row(r).mean()) < 1e-5);
      CHECK(std::abs((y.row(r).array() - y.row(r).mean()).square().mean() - 1.0) < 1e-4);
    }
  }
  SUBCASE("pooling, concat, gather, slice") {
    MatD x(3, 2);
    x << 1, 6, 5, 2, 3, 4;
    CHECK(max_pool_rows(t.constant(x)).value() == (MatD(1, 2) << 5, 6).finished());
    CHECK(mean_pool_rows(t.constant(x)).value().isApprox((MatD(1, 2) << 3, 4).finished()));
    const MatD cat = concat_cols<double>({t.constant(x), t.constant(x.col(0))}).value();
    CHECK(cat.cols() == 3);
    CHECK(cat(2, 2) == 3.0);
    CHECK(gather_rows(t.constant(x), {2, 0}).value().row(0) == x.row(2));
    CHECK(slice_cols(t.constant(x), 1, 1).value() == x.col(1));
  }
}

TEST_CASE("shape mismatches name both shapes") {
  Tape<double> t;
  try {
    matmul(t.constant(MatD::Zero(2, 3)), t.constant(MatD::Zero(2, 3)));
    FAIL("expected a throw");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
  }
  CHECK_THROWS_AS(add(t.constant(MatD::Zero(2, 3)), t.constant(MatD::Zero(3, 2))), std::invalid_argument);
  CHECK_THROWS_AS(hadamard(t.constant(MatD::Zero(2, 3)), t.constant(MatD::Zero(2, 2))), std::invalid_argument);
  CHECK_THROWS_AS(reshape(t.constant(MatD::Zero(2, 3)), 4, 2), std::invalid_argument);
  CHECK_THROWS_AS(pick(t.constant(MatD::Zero(2, 3)), 2, 0), std::invalid_argument);
}

TEST_CASE("backward contract") {
  SUBCASE("non-scalar loss is rejected") {
    Tape<double> t;
    const Var<double> x = t.leaf(MatD::Ones(2, 2));
    CHECK_THROWS_AS(t.backward(x), std::invalid_argument);
  }
  SUBCASE("an empty Var is a logic error, not a crash") {
    const Var<double> empty;
    CHECK_FALSE(empty.valid());
    CHECK_THROWS_AS(empty.value(), std::logic_error);
    CHECK_THROWS_AS(scale(empty, 2.0), std::logic_error);
  }
  SUBCASE("grad-free tapes refuse backward") {
    Tape<double> t(false);
    CHECK_THROWS_AS(t.backward(sum(t.leaf(MatD::Ones(2, 2)))), std::logic_error);
  }
  SUBCASE("loss = sum(W x): grad W = 1 x^T structure, fp64 and fp32") {
    Rng rng(5);
    ParameterSet<double> pd;
    Parameter<double>& w = pd.add("w", rand_mat(3, 4, rng));
    const MatD x = rand_mat(4, 1, rng);
    {
      Tape<double> t;
      t.backward(sum(matmul(t.param(w), t.constant(x))));
    }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) CHECK(w.grad(i, j) == doctest::Approx(x(j, 0)).epsilon(1e-12));
    Rng r2(6);
    auto loss = [&](Tape<double>& t) { return sum(matmul(t.param(w), t.constant(x))); };
    CHECK(test::check_param_grads<double>(pd, loss, 1e-5, 100, r2).max_rel < 1e-6);

    ParameterSet<float> pf;
    Parameter<float>& wf = pf.add("w", w.value.cast<float>());
    const Mat<float> xf = x.cast<float>();
    auto lossf = [&](Tape<float>& t) { return sum(matmul(t.param(wf), t.constant(xf))); };
    CHECK(test::check_param_grads<float>(pf, lossf, 1e-3, 100, r2).max_rel < 1e-4);
  }
  SUBCASE("a parameter the loss ignores gets exactly zero gradient") {
    ParameterSet<double> ps;
    Parameter<double>& a = ps.add("a", MatD::Ones(2, 2));
    Parameter<double>& b = ps.add("b", MatD::Ones(2, 2));
    Tape<double> t;
    (void)t.param(b);
    t.backward(sum(t.param(a)));
    CHECK(b.grad.isZero());
    CHECK(a.grad == MatD::Ones(2, 2));
  }
  SUBCASE("repeated backward accumulates into parameters") {
    ParameterSet<double> ps;
    Parameter<double>& a = ps.add("a", MatD::Ones(1, 2));
    for (int k = 0; k < 3; ++k) {
      Tape<double> t;
      t.backward(sum(scale(t.param(a), 2.0)));
    }
    CHECK(a.grad == MatD::Constant(1, 2, 6.0));
    ps.zero_grad();
    CHECK(a.grad.isZero());
  }
  SUBCASE("a node reused in several places sums its gradients") {
    Tape<double> t;
    const Var<double> x = t.leaf(MatD::Constant(1, 1, 3.0));
    t.backward(add(hadamard(x, x), x));
    CHECK(x.grad()(0, 0) == doctest::Approx(7.0));
  }
}

TEST_CASE("property: finite-difference checks of every primitive over several shapes") {
  int k = 0;
  for (const auto& [r, c] : kShapes) {
    CAPTURE(r);
    CAPTURE(c);
    Rng rng(100 + static_cast<std::uint64_t>(k++));
    const MatD a = rand_mat(r, c, rng), b = rand_mat(r, c, rng);
    const MatD m = rand_mat(c, 3, rng), row = rand_mat(1, c, rng);
    const auto s = static_cast<std::uint64_t>(k);
    expect_grads([&](auto& t, const auto& v) { return weigh(t, matmul(v[0], v[1]), s); }, {a, m});
    expect_grads([&](auto& t, const auto& v) { return weigh(t, matmul_nt(v[0], v[1]), s); }, {a, b});
    expect_grads([&](auto& t, const auto& v) { return weigh(t, add(v[0], v[1]), s); }, {a, b});
    expect_grads([&](auto& t, const auto& v) { return weigh(t, sub(v[0], v[1]), s); }, {a, b});
    expect_grads([&](auto& t, const auto& v) { return weigh(t, add_row(v[0], v[1]), s); }, {a, row});
    expect_grads([&](auto& t, const auto& v) { return weigh(t, scale(v[0], -1.7), s); }, {a});
    expect_grads([&](auto& t, const auto& v) { return weigh(t, hadamard(v[0], v[1]), s); }, {a, b});
    expect_grads([&](auto& t, const auto& v) { return weigh(t, relu(v[0]), s); }, {a});
    expect_grads([&](auto& t, const auto& v) { return weigh(t, square(v[0]), s); }, {a});
    expect_grads([&](auto& t, const auto& v) { return weigh(t, transpose(v[0]), s); }, {a});
    expect_grads([&](auto& t, const auto& v) { return weigh(t, reshape(v[0], c, r), s); }, {a});
    expect_grads([&](auto& t, const auto& v) { return weigh(t, softmax_rows(v[0]), s); }, {a});
    expect_grads([&](auto& t, const auto& v) { return weigh(t, log_softmax_rows(v[0]), s); }, {a});
    expect_grads([&](auto& t, const auto& v) { return weigh(t, entropy_rows(v[0]), s); }, {a});
    expect_grads([&](auto& t, const auto& v) { return weigh(t, layer_norm_rows(v[0], v[1], v[2]), s); },
                 {a, row, rand_mat(1, c, rng)});
    expect_grads([&](auto& t, const auto& v) { return weigh(t, concat_cols<double>({v[0], v[1], v[0]}), s); },
                 {a, b});
    expect_grads([&](auto& t, const auto& v) { return weigh(t, slice_cols(v[0], c - 1, 1), s); }, {a});
    expect_grads([&](auto& t, const auto& v) { return weigh(t, gather_rows(v[0], {r - 1, 0, r - 1}), s); }, {a});
    expect_grads([&](auto& t, const auto& v) { return weigh(t, broadcast_rows(v[0], 3), s); }, {row});
    expect_grads([&](auto& t, const auto& v) { return weigh(t, max_pool_rows(v[0]), s); }, {a});
    expect_grads([&](auto& t, const auto& v) { return weigh(t, mean_pool_rows(v[0]), s); }, {a});
    expect_grads([&](auto&, const auto& v) { return mean(v[0]); }, {a});
    expect_grads([&](auto&, const auto& v) { return scale(pick(v[0], r - 1, 0), 3.0); }, {a});
  }
}

TEST_CASE("property: masked softmax family") {
  Rng rng(7);
  const MatD a = rand_mat(3, 5, rng);
  Mask m = Mask::Constant(3, 5, false);
  m(0, 0) = m(1, 3) = m(2, 4) = m(2, 0) = true;
  expect_grads([&](auto& t, const auto& v) { return weigh(t, softmax_rows(v[0], &m), 1); }, {a});
  expect_grads([&](auto& t, const auto& v) { return weigh(t, entropy_rows(v[0], &m), 2); }, {a});
  // log-softmax is -inf where masked; check an unmasked entry only
  expect_grads([&](auto&, const auto& v) { return pick(log_softmax_rows(v[0], &m), 1, 2); }, {a});
}

TEST_CASE("linear layer and layer norm parameters pass finite differences") {
  Rng rng(8);
  ParameterSet<double> ps;
  const Linear<double> lin(ps, "lin", 4, 3, rng);
  const Linear<double> nob(ps, "nob", 3, 2, rng, false);
  const LayerNorm<double> ln(ps, "ln", 3);
  CHECK(ps.size() == 5);
  CHECK(lin.weight().value.rows() == 4);
  CHECK(nob.bias() == nullptr);
  // uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init
  CHECK(lin.weight().value.cwiseAbs().maxCoeff() <= 0.5);
  const MatD x = rand_mat(5, 4, rng);
  auto loss = [&](Tape<double>& t) { return weigh(t, nob(t, relu(ln(t, lin(t, t.constant(x))))), 3); };
  Rng r2(9);
  CHECK(test::check_param_grads<double>(ps, loss, 1e-5, 50, r2).max_rel < 1e-6);
  Tape<double> t;
  CHECK_THROWS_AS(lin(t, t.constant(MatD::Zero(2, 5))), std::invalid_argument);
}

TEST_CASE("adam") {
  SUBCASE("first step moves a unit-gradient scalar by about lr") {
    ParameterSet<double> ps;
    Parameter<double>& p = ps.add("p", MatD::Zero(1, 1));
    p.grad(0, 0) = 1.0;
    p.has_grad = true;
    adam_step(ps, AdamOptions{});
    CHECK(p.value(0, 0) <= -0.9e-3);
    CHECK(p.value(0, 0) >= -1.1e-3);
    CHECK(p.grad.isZero());
  }
  SUBCASE("zero gradient leaves the value") {
    ParameterSet<double> ps;
    Parameter<double>& p = ps.add("p", MatD::Constant(1, 1, 2.0));
    p.has_grad = true;
    adam_step(ps, AdamOptions{});
    CHECK(p.value(0, 0) == 2.0);
  }
  SUBCASE("constant gradient moves monotonically against it") {
    ParameterSet<double> ps;
    Parameter<double>& p = ps.add("p", MatD::Zero(1, 1));
    double last = 0.0;
    for (int k = 0; k < 2; ++k) {
      p.grad(0, 0) = -0.5;
      p.has_grad = true;
      adam_step(ps, AdamOptions{});
      CHECK(p.value(0, 0) > last);
      last = p.value(0, 0);
    }
    CHECK(ps.adam_step == 2);
  }
  SUBCASE("missing gradients") {
    ParameterSet<double> ps;
    ps.add("p", MatD::Zero(1, 1));
    CHECK_THROWS_AS(adam_step(ps, AdamOptions{}), std::logic_error);
  }
}

TEST_CASE("parameter set bookkeeping") {
  ParameterSet<float> ps;
  ps.add("a", Mat<float>::Zero(2, 3));
  CHECK_THROWS_AS(ps.add("a", Mat<float>::Zero(1, 1)), std::invalid_argument);
  CHECK(ps.find("a") != nullptr);
  CHECK(ps.find("b") == nullptr);
  CHECK(ps.total_count() == 6);
}

TEST_CASE("determinism: equal seeds give bit-identical forwards") {
  auto run = [] {
    Rng rng(11);
    ParameterSet<float> ps;
    const Linear<float> lin(ps, "l", 6, 4, rng);
    Tape<float> t(false);
    Rng data(12);
    return softmax_rows(lin(t, t.constant(rand_mat(3, 6, data).cast<float>()))).value();
  };
  CHECK(run() == run());
}

TEST_CASE("checkpoints") {
  Rng rng(13);
  ParameterSet<float> ps;
  ps.add_uniform("x.weight", 3, 4, 4, rng);
  ps.add_uniform("x.bias", 1, 4, 4, rng);
  for (auto& p : ps) {
    p.adam_m.setConstant(0.25f);
    p.adam_v.setConstant(0.5f);
  }
  ps.adam_step = 7;
  test::TempDir dir("ckpt");
  const auto path = dir / "a.ckpt";
  write_checkpoint(make_checkpoint(ps, {{"tag", "unit"}}), path);

  SUBCASE("round trip restores values, moments and the step") {
    const Checkpoint c = read_checkpoint(path);
    CHECK(c.meta.at("tag") == "unit");
    Rng other(99);
    ParameterSet<float> fresh;
    fresh.add_uniform("x.weight", 3, 4, 4, other);
    fresh.add_uniform("x.bias", 1, 4, 4, other);
    restore_checkpoint(c, fresh);
    CHECK(fresh.find("x.weight")->value == ps.find("x.weight")->value);
    CHECK(fresh.find("x.bias")->adam_v == ps.find("x.bias")->adam_v);
    CHECK(fresh.adam_step == 7);
  }
  SUBCASE("shape and name mismatches are refused") {
    const Checkpoint c = read_checkpoint(path);
    ParameterSet<float> wrong;
    wrong.add("x.weight", Mat<float>::Zero(4, 3));
    wrong.add("x.bias", Mat<float>::Zero(1, 4));
    CHECK_THROWS_AS(restore_checkpoint(c, wrong), DataError);
    ParameterSet<float> renamed;
    renamed.add("x.weight", Mat<float>::Zero(3, 4));
    renamed.add("y.bias", Mat<float>::Zero(1, 4));
    CHECK_THROWS_AS(restore_checkpoint(c, renamed), DataError);
    ParameterSet<float> fewer;
    fewer.add("x.weight", Mat<float>::Zero(3, 4));
    CHECK_THROWS_AS(restore_checkpoint(c, fewer), DataError);
  }
  SUBCASE("corruption is detected") {
    std::string bytes;
    {
      std::ifstream in(path, std::ios::binary);
      bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    auto write_variant = [&](const std::string& content) {
      std::ofstream out(dir / "bad.ckpt", std::ios::binary | std::ios::trunc);
      out << content;
    };
    std::string flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x10;
    write_variant(flipped);
    CHECK_THROWS_AS(read_checkpoint(dir / "bad.ckpt"), DataError);
    write_variant(bytes.substr(0, bytes.size() - 11));
    CHECK_THROWS_AS(read_checkpoint(dir / "bad.ckpt"), DataError);
    std::string magic = bytes;
    magic[0] = 'X';
    write_variant(magic);
    CHECK_THROWS_AS(read_checkpoint(dir / "bad.ckpt"), DataError);
    std::string version = bytes;
    version[8] = 9;
    write_variant(version);
    CHECK_THROWS_AS(read_checkpoint(dir / "bad.ckpt"), DataError);
    write_variant("");
    CHECK_THROWS_AS(read_checkpoint(dir / "bad.ckpt"), DataError);
    CHECK_THROWS_AS(read_checkpoint(dir / "missing.ckpt"), DataError);
  }
}
