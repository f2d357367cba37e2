#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sawt/errors.hpp"
#include "sawt/nn/layers.hpp"
#include "sawt/qap/instance.hpp"
#include "sawt/qap/objective.hpp"
#include "sawt/qap/rng.hpp"

namespace sawt::policy {

using nn::Mat;
using nn::Tape;
using nn::Var;

struct SawtConfig {
  int d_emb = 64;
  int d_hidden = 64;
  int layers = 3;
  int heads = 8;
  int n_init = 128;
  int gcn_layers = 3;
  int facility_blocks = 2;
  int ffn_mult = 4;
  /// Re-derive sum(M_sigma) = cost on every encoder pass and throw on mismatch.
  bool check_solution_awareness = false;

  void validate() const {
    auto positive = [](int v, const char* what) {
      if (v <= 0) throw std::invalid_argument(std::string("SawtConfig: ") + what + " must be positive");
    };
    positive(d_emb, "d_emb");
    positive(d_hidden, "d_hidden");
    positive(heads, "heads");
    positive(n_init, "n_init");
    positive(ffn_mult, "ffn_mult");
    if (layers < 0 || gcn_layers < 0 || facility_blocks < 1) {
      throw std::invalid_argument("SawtConfig: layer counts out of range");
    }
    if (d_hidden % heads != 0 || d_emb % heads != 0) {
      throw std::invalid_argument("SawtConfig: heads must divide d_hidden and d_emb");
    }
  }
};

inline nlohmann::json to_json(const SawtConfig& c) {
  return {{"d_emb", c.d_emb},         {"d_hidden", c.d_hidden},   {"layers", c.layers},
          {"heads", c.heads},         {"n_init", c.n_init},       {"gcn_layers", c.gcn_layers},
          {"facility_blocks", c.facility_blocks}, {"ffn_mult", c.ffn_mult}};
}

inline SawtConfig sawt_config_from_json(const nlohmann::json& j) {
  SawtConfig c;
  c.d_emb = j.value("d_emb", c.d_emb);
  c.d_hidden = j.value("d_hidden", c.d_hidden);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.n_init = j.value("n_init", c.n_init);
  c.gcn_layers = j.value("gcn_layers", c.gcn_layers);
  c.facility_blocks = j.value("facility_blocks", c.facility_blocks);
  c.ffn_mult = j.value("ffn_mult", c.ffn_mult);
  c.validate();
  return c;
}

/// n distinct one-hot rows of width n_init, drawn without replacement.
inline Eigen::MatrixXd init_facility_onehot(int n, int n_init, Rng& rng) {
  if (n > n_init) {
    throw SizeError("facility count " + std::to_string(n) + " exceeds the one-hot pool of " + std::to_string(n_init));
  }
  std::vector<int> pool(static_cast<std::size_t>(n_init));
  for (int i = 0; i < n_init; ++i) pool[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < n; ++i) {
    const auto j = static_cast<std::size_t>(i) + rng.below(static_cast<std::uint64_t>(n_init - i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
  }
  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, n_init);
  for (int i = 0; i < n; ++i) onehot(i, pool[static_cast<std::size_t>(i)]) = 1.0;
  return onehot;
}

enum class ActionMode { kSample, kGreedy };

/// Distributions emitted by the policy decoder for one state.
struct PolicyOutput {
  Eigen::VectorXd p1;  // over the first index
  Eigen::VectorXd p2;  // over the second index given a1; p2[a1] = 0
  double value = std::numeric_limits<double>::quiet_NaN();
};

template <typename Scalar>
struct ActionSample {
  int a1 = -1;  // sampled order
  int a2 = -1;
  std::pair<int, int> action;  // (min, max)
  Var<Scalar> logprob;         // log p1[a1] + log p2[a2]
  Var<Scalar> entropy;         // joint entropy of the pair distribution, when requested
  PolicyOutput out;
};

struct DecodeOptions {
  ActionMode mode = ActionMode::kSample;
  Rng* rng = nullptr;
  /// Score this ordered pair instead of choosing one.
  std::optional<std::pair<int, int>> forced;
  bool with_entropy = false;
};

/// Solution-aware transformer policy with its value head.
template <typename Scalar>
class SawtPolicy {
 public:
  struct Embedding {
    Var<Scalar> fac;  // n x d_emb
    Var<Scalar> loc;  // n x d_emb
  };

  struct Encoded {
    Var<Scalar> hidden;  // n x d_hidden
    double m_sum = 0.0;  // sum of the solution-aware matrix used
  };

  SawtPolicy(const SawtConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    const int e = cfg_.d_emb, h = cfg_.d_hidden;

    int in = cfg_.n_init;
    for (int b = 0; b < cfg_.facility_blocks; ++b) {
      const std::string p = "fac." + std::to_string(b);
      fac_blocks_.push_back({nn::Linear<Scalar>(params_, p + ".wq", in, e, rng, false),
                             nn::Linear<Scalar>(params_, p + ".wk", in, e, rng, false),
                             nn::Linear<Scalar>(params_, p + ".wv", in, e, rng, false),
                             nn::Linear<Scalar>(params_, p + ".wo", e, e, rng, false)});
      in = e;
    }
    fac_out_ = nn::Linear<Scalar>(params_, "fac.out", e, e, rng);

    loc_in_ = nn::Linear<Scalar>(params_, "loc.in", 2, e, rng);
    for (int l = 0; l < cfg_.gcn_layers; ++l) {
      gcn_.push_back(nn::Linear<Scalar>(params_, "loc.gcn" + std::to_string(l), e, e, rng, false));
    }

    w0_ = nn::Linear<Scalar>(params_, "enc.w0", 2 * e, h, rng, false);
    for (int l = 0; l < cfg_.layers; ++l) {
      const std::string p = "enc." + std::to_string(l);
      enc_blocks_.push_back({nn::Linear<Scalar>(params_, p + ".wq", h, h, rng, false),
                             nn::Linear<Scalar>(params_, p + ".wk", h, h, rng, false),
                             nn::Linear<Scalar>(params_, p + ".wv", h, h, rng, false),
                             nn::Linear<Scalar>(params_, p + ".wo", h, h, rng, false),
                             nn::LayerNorm<Scalar>(params_, p + ".ln1", h),
                             nn::Linear<Scalar>(params_, p + ".ffn1", h, cfg_.ffn_mult * h, rng),
                             nn::Linear<Scalar>(params_, p + ".ffn2", cfg_.ffn_mult * h, h, rng),
                             nn::LayerNorm<Scalar>(params_, p + ".ln2", h)});
    }

    mlp1_ = {nn::Linear<Scalar>(params_, "dec.mlp1.0", 2 * h, h, rng),
             nn::Linear<Scalar>(params_, "dec.mlp1.1", h, h, rng),
             nn::Linear<Scalar>(params_, "dec.mlp1.2", h, 1, rng)};
    mlp2_ = {nn::Linear<Scalar>(params_, "dec.mlp2.0", 3 * h, h, rng),
             nn::Linear<Scalar>(params_, "dec.mlp2.1", h, h, rng),
             nn::Linear<Scalar>(params_, "dec.mlp2.2", h, 1, rng)};
    value1_ = nn::Linear<Scalar>(params_, "val.w1", h, h, rng);
    value2_ = nn::Linear<Scalar>(params_, "val.w2", h, 1, rng);
  }

  SawtPolicy(const SawtPolicy&) = delete;
  SawtPolicy& operator=(const SawtPolicy&) = delete;

  const SawtConfig& config() const { return cfg_; }
  SawtConfig& config() { return cfg_; }
  nn::ParameterSet<Scalar>& params() { return params_; }
  const nn::ParameterSet<Scalar>& params() const { return params_; }

  /// Coordinates are projected to d_emb, then each GCN layer adds
  /// relu(D * Loc * W) to its input.
  Var<Scalar> encode_locations(Tape<Scalar>& tape, const Eigen::MatrixXd& coords,
                               const Eigen::MatrixXd& distance) const {
    if (coords.cols() != 2 || coords.rows() != distance.rows() || distance.rows() != distance.cols()) {
      std::ostringstream os;
      os << "encode_locations: coords " << coords.rows() << "x" << coords.cols() << ", distance "
         << distance.rows() << "x" << distance.cols();
      throw std::invalid_argument(os.str());
    }
    Var<Scalar> loc = loc_in_(tape, tape.constant(coords.cast<Scalar>()));
    const Var<Scalar> d = tape.constant(distance.cast<Scalar>());
    for (const auto& w : gcn_) loc = nn::add(loc, nn::relu(w(tape, nn::matmul(d, loc))));
    return loc;
  }

  /// Mixed-score attention over one-hot facility seeds: every head's scores
  /// QK^T / sqrt(n_init) are multiplied entry-wise by the flow matrix before
  /// the softmax.
  Var<Scalar> encode_facilities(Tape<Scalar>& tape, const Eigen::MatrixXd& flow, const Eigen::MatrixXd& onehot) const {
    if (flow.rows() != flow.cols() || onehot.rows() != flow.rows() || onehot.cols() != cfg_.n_init) {
      std::ostringstream os;
      os << "encode_facilities: flow " << flow.rows() << "x" << flow.cols() << ", one-hot " << onehot.rows() << "x"
         << onehot.cols() << " (n_init " << cfg_.n_init << ")";
      throw std::invalid_argument(os.str());
    }
    const Var<Scalar> f = tape.constant(flow.cast<Scalar>());
    const auto inv_scale = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(cfg_.n_init)));
    Var<Scalar> fac = tape.constant(onehot.cast<Scalar>());
    for (const auto& blk : fac_blocks_) {
      fac = blk.wo(tape, attention(tape, blk.wq(tape, fac), blk.wk(tape, fac), blk.wv(tape, fac), f, inv_scale,
                                   cfg_.heads));
    }
    return fac_out_(tape, fac);
  }

  /// Solution-independent embeddings; QAPLIB instances without coordinates
  /// use zero coordinates.
  Embedding embed(Tape<Scalar>& tape, const QapInstance& inst, const Eigen::MatrixXd& onehot) const {
    const Eigen::MatrixXd coords = inst.coords() ? Eigen::MatrixXd(*inst.coords()) : Eigen::MatrixXd::Zero(inst.size(), 2);
    return {encode_facilities(tape, inst.flow(), onehot), encode_locations(tape, coords, inst.distance())};
  }

  /// H0 = [Fac | Loc_sigma] W0, then the solution-aware encoder blocks.
  Encoded encode(Tape<Scalar>& tape, const Embedding& emb, const QapInstance& inst, const Permutation& sigma) const {
    if (emb.fac.rows() != inst.size() || emb.loc.rows() != inst.size()) {
      throw std::invalid_argument("encode: embeddings do not match the instance size");
    }
    const Eigen::MatrixXd m = solution_aware_matrix(inst, sigma);  // validates sigma
    Encoded result;
    result.m_sum = m.sum();
    if (cfg_.check_solution_awareness) {
      const double cost = objective(inst, sigma);
      if (std::abs(result.m_sum - cost) > 1e-9 * std::max(1.0, std::abs(cost))) {
        std::ostringstream os;
        os.precision(17);
        os << "solution-aware check failed: sum(M) = " << result.m_sum << ", cost = " << cost;
        throw std::logic_error(os.str());
      }
    }
    const Var<Scalar> mvar = tape.constant(m.cast<Scalar>());
    Var<Scalar> h = w0_(tape, nn::concat_cols<Scalar>({emb.fac, nn::gather_rows(emb.loc, sigma)}));
    const int dh = cfg_.d_hidden / cfg_.heads;
    const auto inv_scale = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(dh)));
    for (const auto& blk : enc_blocks_) {
      const Var<Scalar> att =
          blk.wo(tape, attention(tape, blk.wq(tape, h), blk.wk(tape, h), blk.wv(tape, h), mvar, inv_scale, cfg_.heads));
      const Var<Scalar> h1 = blk.ln1(tape, nn::add(h, att));
      const Var<Scalar> ffn = blk.ffn2(tape, nn::relu(blk.ffn1(tape, h1)));
      h = blk.ln2(tape, nn::add(h1, ffn));
    }
    result.hidden = h;
    return result;
  }

  /// Chooses (a1, a2) from p1 = softmax(MLP1[h* | h_i]) and
  /// p2 = softmax(MLP2[h* | h_i | h_a1]) with a1 masked, h* the max-pool of
  /// the best-solution encoding.
  ActionSample<Scalar> decode_action(Tape<Scalar>& tape, const Var<Scalar>& h, const Var<Scalar>& h_best,
                                     const DecodeOptions& opt) const {
    const Eigen::Index n = h.rows();
    if (n < 2) throw std::invalid_argument("decode_action: no legal swap for n < 2");
    if (h_best.rows() != n || h.cols() != h_best.cols()) detail_shape("decode_action", h, h_best);
    if (opt.mode == ActionMode::kSample && !opt.rng && !opt.forced) {
      throw std::invalid_argument("decode_action: sampling needs an rng");
    }
    const Var<Scalar> hv = nn::max_pool_rows(h_best);
    const Var<Scalar> hv_n = nn::broadcast_rows(hv, n);

    const Var<Scalar> logits1 = nn::transpose(mlp(tape, mlp1_, nn::concat_cols<Scalar>({hv_n, h})));
    const Var<Scalar> lp1 = nn::log_softmax_rows(logits1);
    ActionSample<Scalar> s;
    s.out.p1 = nn::detail::exact_exp(lp1.value().row(0).transpose().template cast<double>());
    s.a1 = opt.forced ? opt.forced->first : choose(s.out.p1, opt);
    if (s.a1 < 0 || s.a1 >= n) throw std::invalid_argument("decode_action: forced index out of range");

    Var<Scalar> lp2_row;  // 1 x n
    if (opt.with_entropy) {
      // Second-stage logits for every possible a1 at once: row (a, i) scores i given a1 = a.
      std::vector<int> rows_i, rows_a;
      for (int a = 0; a < n; ++a)
        for (int i = 0; i < n; ++i) {
          rows_i.push_back(i);
          rows_a.push_back(a);
        }
      const Var<Scalar> in2 = nn::concat_cols<Scalar>(
          {nn::broadcast_rows(hv, n * n), nn::gather_rows(h, rows_i), nn::gather_rows(h, rows_a)});
      const Var<Scalar> logits2 = nn::transpose(nn::reshape(mlp(tape, mlp2_, in2), n, n));
      nn::Mask diag = nn::Mask::Constant(n, n, false);
      for (Eigen::Index a = 0; a < n; ++a) diag(a, a) = true;
      const Var<Scalar> lp2 = nn::log_softmax_rows(logits2, &diag);
      lp2_row = nn::gather_rows(lp2, {s.a1});
      const Var<Scalar> h2 = nn::entropy_rows(logits2, &diag);  // n x 1
      const Var<Scalar> p1 = nn::softmax_rows(logits1);
      s.entropy = nn::add(nn::entropy_rows(logits1), nn::matmul(p1, h2));
    } else {
      const Var<Scalar> in2 =
          nn::concat_cols<Scalar>({hv_n, h, nn::broadcast_rows(nn::gather_rows(h, {s.a1}), n)});
      const Var<Scalar> logits2 = nn::transpose(mlp(tape, mlp2_, in2));
      nn::Mask self = nn::Mask::Constant(1, n, false);
      self(0, s.a1) = true;
      lp2_row = nn::log_softmax_rows(logits2, &self);
    }
    Eigen::VectorXd p2 = nn::detail::exact_exp(lp2_row.value().row(0).transpose().template cast<double>());
    p2(s.a1) = 0.0;
    s.out.p2 = std::move(p2);
    s.a2 = opt.forced ? opt.forced->second : choose(s.out.p2, opt);
    if (s.a2 < 0 || s.a2 >= n || s.a2 == s.a1) throw std::invalid_argument("decode_action: invalid forced pair");
    s.logprob = nn::add(nn::pick(lp1, 0, s.a1), nn::pick(lp2_row, 0, s.a2));
    s.action = {std::min(s.a1, s.a2), std::max(s.a1, s.a2)};
    return s;
  }

  /// V = W2 relu(W1 (mean_i h_i + h*) + b1) + b2.
  Var<Scalar> decode_value(Tape<Scalar>& tape, const Var<Scalar>& h, const Var<Scalar>& h_best) const {
    if (h_best.cols() != h.cols()) detail_shape("decode_value", h, h_best);
    const Var<Scalar> pooled = nn::add(nn::mean_pool_rows(h), nn::max_pool_rows(h_best));
    return value2_(tape, nn::relu(value1_(tape, pooled)));
  }

 private:
  struct FacilityBlock {
    nn::Linear<Scalar> wq, wk, wv, wo;
  };
  struct EncoderBlock {
    nn::Linear<Scalar> wq, wk, wv, wo;
    nn::LayerNorm<Scalar> ln1;
    nn::Linear<Scalar> ffn1, ffn2;
    nn::LayerNorm<Scalar> ln2;
  };
  using Mlp = std::vector<nn::Linear<Scalar>>;

  [[noreturn]] static void detail_shape(const char* op, const Var<Scalar>& a, const Var<Scalar>& b) {
    std::ostringstream os;
    os << op << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x" << b.cols();
    throw std::invalid_argument(os.str());
  }

  /// Multi-head attention whose per-head scores are scaled and then
  /// multiplied entry-wise by `modulation` (shared by every head).
  static Var<Scalar> attention(Tape<Scalar>& tape, const Var<Scalar>& q, const Var<Scalar>& k, const Var<Scalar>& v,
                               const Var<Scalar>& modulation, Scalar inv_scale, int heads) {
    (void)tape;
    const Eigen::Index dh = q.cols() / heads;
    std::vector<Var<Scalar>> out;
    out.reserve(static_cast<std::size_t>(heads));
    for (int j = 0; j < heads; ++j) {
      const Var<Scalar> scores = nn::scale(nn::matmul_nt(nn::slice_cols(q, j * dh, dh), nn::slice_cols(k, j * dh, dh)),
                                           inv_scale);
      const Var<Scalar> weights = nn::softmax_rows(nn::hadamard(scores, modulation));
      out.push_back(nn::matmul(weights, nn::slice_cols(v, j * dh, dh)));
    }
    return heads == 1 ? out[0] : nn::concat_cols(out);
  }

  static Var<Scalar> mlp(Tape<Scalar>& tape, const Mlp& layers, Var<Scalar> x) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      x = layers[i](tape, x);
      if (i + 1 < layers.size()) x = nn::relu(x);
    }
    return x;
  }

  static int choose(const Eigen::VectorXd& p, const DecodeOptions& opt) {
    if (opt.mode == ActionMode::kGreedy) {
      Eigen::Index best = 0;
      p.maxCoeff(&best);
      return static_cast<int>(best);
    }
    const double u = opt.rng->uniform();
    double acc = 0.0;
    int last = -1;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      if (p(i) <= 0.0) continue;
      last = static_cast<int>(i);
      acc += p(i);
      if (u < acc) return last;
    }
    return last;
  }

  SawtConfig cfg_;
  nn::ParameterSet<Scalar> params_;
  std::vector<FacilityBlock> fac_blocks_;
  nn::Linear<Scalar> fac_out_;
  nn::Linear<Scalar> loc_in_;
  std::vector<nn::Linear<Scalar>> gcn_;
  nn::Linear<Scalar> w0_;
  std::vector<EncoderBlock> enc_blocks_;
  Mlp mlp1_, mlp2_;
  nn::Linear<Scalar> value1_, value2_;
};

}  // namespace sawt::policy
