#include "sawt/rl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>
#include <thread>

#include "sawt/errors.hpp"
#include "sawt/qap/objective.hpp"

namespace sawt::rl {

using policy::ActionMode;
using policy::DecodeOptions;

double TrainConfig::entropy_coef(int epoch) const { return std::pow(entropy_decay_base, epoch) * beta; }

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("TrainConfig: " + what);
  };
  require(epochs >= 0, "epochs must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(episode_length >= 1, "episode_length must be >= 1");
  require(bootstrap_T >= 1 && bootstrap_T <= episode_length, "bootstrap_T must lie in [1, episode_length]");
  require(rollout_len >= 0, "rollout_len must be >= 0");
  require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
  require(beta >= 0.0 && zeta >= 0.0 && lr > 0.0, "beta, zeta must be >= 0 and lr > 0");
  require(entropy_decay_base > 0.0 && entropy_decay_base <= 1.0, "entropy_decay_base must lie in (0, 1]");
  require(problem_size >= 2, "problem_size must be >= 2");
  require(train_instances >= 1, "train_instances must be >= 1");
  require(sparsity >= 0.0 && sparsity <= 1.0, "sparsity must lie in [0, 1]");
  require(eval_instances >= 0 && eval_steps >= 0 && eval_every >= 0, "eval settings must be >= 0");
  require(checkpoint_every >= 0, "checkpoint_every must be >= 0");
  require(threads >= 1, "threads must be >= 1");
  for (int s : test_steps) require(s >= 0, "test_steps must be >= 0");
  model.validate();
  require(problem_size <= model.n_init, "problem_size exceeds model.n_init");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"episode_length", c.episode_length},
          {"bootstrap_T", c.bootstrap_T},
          {"rollout_len", c.rollout_len},
          {"gamma", c.gamma},
          {"beta", c.beta},
          {"zeta", c.zeta},
          {"lr", c.lr},
          {"entropy_decay_base", c.entropy_decay_base},
          {"init_solution", to_string(c.init)},
          {"problem_size", c.problem_size},
          {"train_instances", c.train_instances},
          {"sparsity", c.sparsity},
          {"eval_instances", c.eval_instances},
          {"eval_steps", c.eval_steps},
          {"eval_every", c.eval_every},
          {"test_steps", c.test_steps},
          {"checkpoint_every", c.checkpoint_every},
          {"seed", c.seed},
          {"threads", c.threads},
          {"model", policy::to_json(c.model)}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  static const char* const known[] = {"epochs", "batch_size", "episode_length", "bootstrap_T", "rollout_len",
                                      "gamma", "beta", "zeta", "lr", "entropy_decay_base", "init_solution",
                                      "problem_size", "train_instances", "sparsity", "eval_instances",
                                      "eval_steps", "eval_every", "test_steps", "checkpoint_every", "seed",
                                      "threads", "model"};
  if (!j.is_object()) throw std::invalid_argument("training config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known)) {
      throw std::invalid_argument("unknown training config key '" + key + "'");
    }
  }
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.episode_length = j.value("episode_length", c.episode_length);
  c.bootstrap_T = j.value("bootstrap_T", c.bootstrap_T);
  c.rollout_len = j.value("rollout_len", c.rollout_len);
  c.gamma = j.value("gamma", c.gamma);
  c.beta = j.value("beta", c.beta);
  c.zeta = j.value("zeta", c.zeta);
  c.lr = j.value("lr", c.lr);
  c.entropy_decay_base = j.value("entropy_decay_base", c.entropy_decay_base);
  if (j.contains("init_solution")) c.init = parse_init_solution(j.at("init_solution").get<std::string>());
  c.problem_size = j.value("problem_size", c.problem_size);
  c.train_instances = j.value("train_instances", c.train_instances);
  c.sparsity = j.value("sparsity", c.sparsity);
  c.eval_instances = j.value("eval_instances", c.eval_instances);
  c.eval_steps = j.value("eval_steps", c.eval_steps);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.test_steps = j.value("test_steps", c.test_steps);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.seed = j.value("seed", c.seed);
  c.threads = j.value("threads", c.threads);
  if (j.contains("model")) {
    nlohmann::json merged = policy::to_json(c.model);
    merged.update(j.at("model"));
    c.model = policy::sawt_config_from_json(merged);
  }
  c.validate();
  return c;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  return Rng::splitmix64(Rng::splitmix64(master + 0x9E3779B97F4A7C15ULL * (a + 1)) + 0xD1B54A32D192ED03ULL * (b + 1));
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  const int workers = std::min(threads, count);
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const int lo = static_cast<int>(static_cast<long>(count) * w / workers);
    const int hi = static_cast<int>(static_cast<long>(count) * (w + 1) / workers);
    pool.emplace_back([&, w, lo, hi] {
      try {
        for (int i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::size_t RolloutBatch::step_count() const {
  std::size_t total = 0;
  for (const auto& item : items) total += item.steps.size();
  return total;
}

double RolloutBatch::total_reward() const {
  double total = 0.0;
  for (const auto& item : items)
    for (const auto& s : item.steps) total += s.reward;
  return total;
}

std::vector<double> compute_returns(const std::vector<double>& rewards, int T, double gamma) {
  if (T < 1) throw std::invalid_argument("compute_returns: T must be >= 1");
  const std::size_t n = rewards.size();
  std::vector<double> g(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double acc = 0.0, w = 1.0;
    for (std::size_t k = 0; k < static_cast<std::size_t>(T) && t + k < n; ++k) {
      acc += w * rewards[t + k];
      w *= gamma;
    }
    g[t] = acc;
  }
  return g;
}

void compute_returns(RolloutBatch& batch, int T, double gamma) {
  batch.returns.clear();
  for (const auto& item : batch.items) {
    std::vector<double> r;
    r.reserve(item.steps.size());
    for (const auto& s : item.steps) r.push_back(s.reward);
    batch.returns.push_back(compute_returns(r, T, gamma));
  }
}

nlohmann::json to_json(const EpochMetrics& m, bool with_wall_ms) {
  nlohmann::json j = {{"epoch", m.epoch},
                      {"mean_return", m.mean_return},
                      {"policy_loss", m.loss.policy_loss},
                      {"value_loss", m.loss.value_loss},
                      {"entropy", m.loss.entropy},
                      {"entropy_coef", m.loss.entropy_coef},
                      {"total_loss", m.loss.total}};
  if (m.eval_gap) j["eval_gap"] = *m.eval_gap;
  if (m.eval_mean) j["eval_mean"] = *m.eval_mean;
  if (with_wall_ms) j["wall_ms"] = m.wall_ms;
  return j;
}

namespace {

/// Runs `steps` policy steps on one episode with grad-free tapes.
template <typename Scalar>
void run_episode(const policy::SawtPolicy<Scalar>& pol, Episode& ep, int steps, ActionMode mode, bool with_entropy,
                 std::vector<RolloutStep>* record) {
  using Mat = nn::Mat<Scalar>;
  if (steps <= 0) return;
  const QapInstance& inst = *ep.inst;
  Mat fac, loc;
  {
    nn::Tape<Scalar> t(false);
    const auto emb = pol.embed(t, inst, ep.onehot);
    fac = emb.fac.value();
    loc = emb.loc.value();
  }
  Permutation cached_sigma;
  Mat cached_h;
  for (int s = 0; s < steps; ++s) {
    nn::Tape<Scalar> t(false);
    const typename policy::SawtPolicy<Scalar>::Embedding emb{t.constant(fac), t.constant(loc)};
    const auto enc = pol.encode(t, emb, inst, ep.state.current.sigma());
    nn::Var<Scalar> hb;
    if (ep.state.best.sigma() == ep.state.current.sigma()) {
      hb = enc.hidden;
    } else if (!cached_sigma.empty() && cached_sigma == ep.state.best.sigma()) {
      hb = t.constant(cached_h);
    } else {
      hb = pol.encode(t, emb, inst, ep.state.best.sigma()).hidden;
    }
    if (cached_sigma != ep.state.best.sigma()) {
      cached_sigma = ep.state.best.sigma();
      cached_h = hb.value();
    }
    DecodeOptions opt;
    opt.mode = mode;
    opt.rng = &ep.rng;
    opt.with_entropy = with_entropy;
    const auto a = pol.decode_action(t, enc.hidden, hb, opt);
    RolloutStep step;
    if (record) {
      step.state = ep.state;
      step.ordered = {a.a1, a.a2};
      step.action = a.action;
      step.logprob = static_cast<double>(a.logprob.item());
      step.value = static_cast<double>(pol.decode_value(t, enc.hidden, hb).item());
      if (with_entropy) step.entropy = static_cast<double>(a.entropy.item());
    }
    StepResult next = env_step(inst, ep.state, a.action);
    ep.state = std::move(next.state);
    if (record) {
      step.reward = next.reward;
      record->push_back(std::move(step));
    }
  }
}

template <typename Scalar>
double matrix_norm(const nn::Mat<Scalar>& m) {
  return static_cast<double>(m.template cast<double>().norm());
}

}  // namespace

template <typename Scalar>
SearchState run_search(const policy::SawtPolicy<Scalar>& pol, const QapInstance& inst, int steps, InitSolution init,
                       std::uint64_t seed, ActionMode mode) {
  if (steps < 0) throw std::invalid_argument("run_search: negative step budget");
  Episode ep;
  ep.inst = &inst;
  ep.rng = Rng(seed);
  ep.onehot = policy::init_facility_onehot(inst.size(), pol.config().n_init, ep.rng);
  ep.state = env_reset(inst, init, ep.rng);
  run_episode(pol, ep, steps, mode, false, nullptr);
  return ep.state;
}

template <typename Scalar>
Trainer<Scalar>::Trainer(Policy& policy, TrainConfig cfg) : policy_(policy), cfg_(std::move(cfg)) {
  cfg_.validate();
  adam_.lr = cfg_.lr;
}

template <typename Scalar>
RolloutBatch Trainer<Scalar>::collect_rollouts(std::vector<Episode>& episodes, int steps, ActionMode mode) const {
  RolloutBatch batch;
  batch.items.resize(episodes.size());
  parallel_for(static_cast<int>(episodes.size()), cfg_.threads, [&](int b) {
    auto& ep = episodes[static_cast<std::size_t>(b)];
    auto& item = batch.items[static_cast<std::size_t>(b)];
    item.inst = ep.inst;
    item.onehot = ep.onehot;
    item.steps.reserve(static_cast<std::size_t>(std::max(steps, 0)));
    run_episode(policy_, ep, steps, mode, true, &item.steps);
  });
  return batch;
}

template <typename Scalar>
LossComponents Trainer<Scalar>::reinforce_update(const RolloutBatch& batch, int epoch) {
  if (batch.returns.size() != batch.items.size()) {
    throw std::logic_error("reinforce_update: compute_returns has not been run on this batch");
  }
  const std::size_t total_steps = batch.step_count();
  if (total_steps == 0) throw std::invalid_argument("reinforce_update: empty batch");
  const double inv_n = 1.0 / static_cast<double>(total_steps);
  const double coef = cfg_.entropy_coef(epoch);

  struct Partial {
    double pg = 0.0, entropy = 0.0, value = 0.0;
  };
  const int count = static_cast<int>(batch.items.size());
  std::vector<Partial> partial(static_cast<std::size_t>(count));
  std::vector<std::unique_ptr<nn::Tape<Scalar>>> tapes(static_cast<std::size_t>(count));

  auto replay = [&](int b) {
    const auto& item = batch.items[static_cast<std::size_t>(b)];
    const auto& ret = batch.returns[static_cast<std::size_t>(b)];
    if (item.steps.empty()) return;
    auto tape = std::make_unique<nn::Tape<Scalar>>(true);
    auto& t = *tape;
    const auto emb = policy_.embed(t, *item.inst, item.onehot);
    Permutation cached_sigma;
    nn::Var<Scalar> cached_h;
    nn::Var<Scalar> loss;
    Partial acc;
    for (std::size_t s = 0; s < item.steps.size(); ++s) {
      const auto& st = item.steps[s];
      const auto enc = policy_.encode(t, emb, *item.inst, st.state.current.sigma());
      nn::Var<Scalar> hb;
      if (st.state.best.sigma() == st.state.current.sigma()) {
        hb = enc.hidden;
      } else if (!cached_sigma.empty() && cached_sigma == st.state.best.sigma()) {
        hb = cached_h;
      } else {
        hb = policy_.encode(t, emb, *item.inst, st.state.best.sigma()).hidden;
      }
      if (cached_sigma != st.state.best.sigma()) {
        cached_sigma = st.state.best.sigma();
        cached_h = hb;
      }
      DecodeOptions opt;
      opt.forced = st.ordered;
      opt.with_entropy = true;
      const auto a = policy_.decode_action(t, enc.hidden, hb, opt);
      const auto v = policy_.decode_value(t, enc.hidden, hb);
      const double g = ret[s];
      const double adv = g - static_cast<double>(v.item());
      const auto target = t.constant(nn::Mat<Scalar>::Constant(1, 1, static_cast<Scalar>(g)));
      const auto err = nn::sub(target, v);
      const auto term = nn::add(nn::add(nn::scale(a.logprob, static_cast<Scalar>(-adv * inv_n)),
                                        nn::scale(a.entropy, static_cast<Scalar>(-coef * inv_n))),
                                nn::scale(nn::square(err), static_cast<Scalar>(cfg_.zeta * inv_n)));
      loss = loss.valid() ? nn::add(loss, term) : term;
      acc.pg -= static_cast<double>(a.logprob.item()) * adv * inv_n;
      acc.entropy += static_cast<double>(a.entropy.item()) * inv_n;
      acc.value += static_cast<double>(err.item()) * static_cast<double>(err.item()) * inv_n;
    }
    t.backward(loss, false);
    partial[static_cast<std::size_t>(b)] = acc;
    tapes[static_cast<std::size_t>(b)] = std::move(tape);
  };

  // Replays run in waves of `threads`; gradients are flushed in instance order.
  const int wave = std::max(1, cfg_.threads);
  for (int lo = 0; lo < count; lo += wave) {
    const int hi = std::min(count, lo + wave);
    parallel_for(hi - lo, cfg_.threads, [&](int k) { replay(lo + k); });
    for (int b = lo; b < hi; ++b) {
      if (tapes[static_cast<std::size_t>(b)]) {
        tapes[static_cast<std::size_t>(b)]->flush_gradients();
        tapes[static_cast<std::size_t>(b)].reset();
      }
    }
  }

  LossComponents out;
  for (const auto& p : partial) {
    out.policy_loss += p.pg;
    out.entropy += p.entropy;
    out.value_loss += p.value;
  }
  out.entropy_coef = coef;
  out.total = out.policy_loss - coef * out.entropy + cfg_.zeta * out.value_loss;

  auto abort = [&](const std::string& what) {
    std::ostringstream os;
    os.precision(6);
    os << what << " at epoch " << epoch << ": policy_loss=" << out.policy_loss << " entropy=" << out.entropy
       << " value_loss=" << out.value_loss << "\n";
    double rmin = INFINITY, rmax = -INFINITY, rsum = 0.0;
    for (const auto& item : batch.items)
      for (const auto& s : item.steps) {
        rmin = std::min(rmin, s.reward);
        rmax = std::max(rmax, s.reward);
        rsum += s.reward;
      }
    os << "rewards: min=" << rmin << " max=" << rmax << " mean=" << rsum * inv_n << "\n";
    for (const auto& p : policy_.params()) {
      os << "  " << p.name << " |w|=" << matrix_norm(p.value) << " |g|=" << matrix_norm(p.grad) << "\n";
    }
    policy_.params().zero_grad();
    throw NumericalError(os.str());
  };

  bool finite = std::isfinite(out.total);
  for (const auto& p : policy_.params()) finite = finite && p.grad.allFinite();
  if (!finite) abort("non-finite loss or gradient");
  nn::adam_step(policy_.params(), adam_);
  for (const auto& p : policy_.params())
    if (!p.value.allFinite()) abort("non-finite parameters after the Adam step");
  return out;
}

template <typename Scalar>
EvalResult Trainer<Scalar>::evaluate(const std::vector<QapInstance>& instances, int steps, std::uint64_t seed,
                                     const std::vector<double>* references, ActionMode mode) const {
  if (references && references->size() != instances.size()) {
    throw std::invalid_argument("evaluate: one reference per instance is required");
  }
  EvalResult out;
  out.best_costs.assign(instances.size(), 0.0);
  parallel_for(static_cast<int>(instances.size()), cfg_.threads, [&](int k) {
    out.best_costs[static_cast<std::size_t>(k)] =
        run_search(policy_, instances[static_cast<std::size_t>(k)], steps, cfg_.init,
                   derive_seed(seed, 6, static_cast<std::uint64_t>(k)), mode)
            .best.cost();
  });
  if (!instances.empty()) {
    out.mean = std::accumulate(out.best_costs.begin(), out.best_costs.end(), 0.0) /
               static_cast<double>(instances.size());
    if (references) {
      const double ref = std::accumulate(references->begin(), references->end(), 0.0) /
                         static_cast<double>(references->size());
      if (ref > 0.0) out.gap = gap(out.mean, ref);
    }
  }
  return out;
}

template <typename Scalar>
EpochMetrics Trainer<Scalar>::train_epoch(const std::vector<QapInstance>& train_set, int epoch) {
  if (train_set.empty()) throw std::invalid_argument("train_epoch: empty training set");
  const auto start = std::chrono::steady_clock::now();
  std::vector<int> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  {
    Rng shuffle(derive_seed(cfg_.seed, 4, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.below(i))]);
    }
  }
  EpochMetrics m;
  m.epoch = epoch;
  int updates = 0;
  double episode_reward = 0.0;
  const int seg = cfg_.resolved_rollout_len();
  for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(cfg_.batch_size)) {
    const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(cfg_.batch_size));
    std::vector<Episode> episodes;
    episodes.reserve(hi - lo);
    for (std::size_t pos = lo; pos < hi; ++pos) {
      const auto& inst = train_set[static_cast<std::size_t>(order[pos])];
      Episode ep;
      ep.inst = &inst;
      ep.rng = Rng(derive_seed(cfg_.seed, 5, static_cast<std::uint64_t>(epoch) * 1000003ULL + pos));
      ep.onehot = policy::init_facility_onehot(inst.size(), policy_.config().n_init, ep.rng);
      ep.state = env_reset(inst, cfg_.init, ep.rng);
      episodes.push_back(std::move(ep));
    }
    for (int done = 0; done < cfg_.episode_length; done += seg) {
      RolloutBatch batch = collect_rollouts(episodes, std::min(seg, cfg_.episode_length - done), ActionMode::kSample);
      compute_returns(batch, cfg_.bootstrap_T, cfg_.gamma);
      episode_reward += batch.total_reward();
      const LossComponents l = reinforce_update(batch, epoch);
      m.loss.policy_loss += l.policy_loss;
      m.loss.entropy += l.entropy;
      m.loss.value_loss += l.value_loss;
      m.loss.total += l.total;
      m.loss.entropy_coef = l.entropy_coef;
      ++updates;
    }
  }
  if (updates > 0) {
    m.loss.policy_loss /= updates;
    m.loss.entropy /= updates;
    m.loss.value_loss /= updates;
    m.loss.total /= updates;
  }
  m.mean_return = episode_reward / static_cast<double>(train_set.size());
  m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return m;
}

template <typename Scalar>
std::vector<EpochMetrics> Trainer<Scalar>::train(const std::vector<QapInstance>& train_set,
                                                 const std::vector<QapInstance>& eval_set,
                                                 const std::vector<double>& eval_refs, int start_epoch,
                                                 const Hooks& hooks) {
  if (start_epoch < 0) throw std::invalid_argument("train: negative start epoch");
  std::vector<EpochMetrics> history;
  std::optional<double> best_gap;
  const bool have_refs = !eval_refs.empty();
  for (int epoch = start_epoch; epoch < cfg_.epochs; ++epoch) {
    EpochMetrics m = train_epoch(train_set, epoch);
    const bool last = epoch + 1 == cfg_.epochs;
    if (!eval_set.empty() && cfg_.eval_every > 0 && ((epoch + 1) % cfg_.eval_every == 0 || last)) {
      const auto start = std::chrono::steady_clock::now();
      const EvalResult r =
          evaluate(eval_set, cfg_.eval_steps, derive_seed(cfg_.seed, 7), have_refs ? &eval_refs : nullptr);
      m.eval_mean = r.mean;
      m.eval_gap = r.gap;
      m.wall_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
    history.push_back(m);
    if (hooks.on_epoch) hooks.on_epoch(m);
    if (hooks.on_checkpoint) {
      if (cfg_.checkpoint_every > 0 && (epoch + 1) % cfg_.checkpoint_every == 0) hooks.on_checkpoint(epoch + 1, "periodic");
      if (m.eval_gap && (!best_gap || *m.eval_gap < *best_gap)) {
        best_gap = m.eval_gap;
        hooks.on_checkpoint(epoch + 1, "best");
      }
    }
  }
  if (hooks.on_checkpoint) hooks.on_checkpoint(std::max(start_epoch, cfg_.epochs), "final");
  return history;
}

template <typename Scalar>
void make_uniform_policy(policy::SawtPolicy<Scalar>& pol) {
  for (const char* name : {"dec.mlp1.2.weight", "dec.mlp1.2.bias", "dec.mlp2.2.weight", "dec.mlp2.2.bias"}) {
    auto* p = pol.params().find(name);
    if (!p) throw std::logic_error(std::string("make_uniform_policy: missing parameter ") + name);
    p->value.setZero();
  }
}

template SearchState run_search(const policy::SawtPolicy<float>&, const QapInstance&, int, InitSolution,
                                std::uint64_t, ActionMode);
template SearchState run_search(const policy::SawtPolicy<double>&, const QapInstance&, int, InitSolution,
                                std::uint64_t, ActionMode);
template class Trainer<float>;
template class Trainer<double>;
template void make_uniform_policy(policy::SawtPolicy<float>&);
template void make_uniform_policy(policy::SawtPolicy<double>&);

}  // namespace sawt::rl
