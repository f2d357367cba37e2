#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sawt/policy/sawt.hpp"
#include "sawt/rl/env.hpp"

namespace sawt::rl {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;
  int episode_length = 64;
  int bootstrap_T = 8;
  /// Steps collected per policy update; 0 means the whole episode.
  int rollout_len = 0;
  double gamma = 0.99;
  double beta = 0.005;
  double zeta = 0.5;
  double lr = 1e-3;
  double entropy_decay_base = 0.99;
  InitSolution init = InitSolution::kIdentity;

  int problem_size = 6;
  int train_instances = 256;
  double sparsity = 0.7;
  int eval_instances = 64;
  int eval_steps = 500;
  /// Evaluate every k epochs (0 disables per-epoch evaluation).
  int eval_every = 1;
  std::vector<int> test_steps{500};
  int checkpoint_every = 10;

  std::uint64_t seed = 1;
  int threads = 1;
  policy::SawtConfig model;

  int resolved_rollout_len() const { return rollout_len > 0 ? rollout_len : episode_length; }
  double entropy_coef(int epoch) const;
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Keys absent from `j` keep the values of `base`.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

/// Independent seed for the labelled purpose (a, b) under a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

/// Runs fn(0..count-1) on up to `threads` workers with a static block split.
/// fn must only write state owned by its index.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

/// One instance in the middle of an episode.
struct Episode {
  const QapInstance* inst = nullptr;
  Eigen::MatrixXd onehot;
  SearchState state;
  Rng rng;
};

struct RolloutStep {
  SearchState state;            // state the action was taken from
  std::pair<int, int> ordered;  // (a1, a2) in sampling order
  std::pair<int, int> action;   // (min, max)
  double logprob = 0.0;
  double reward = 0.0;
  double value = 0.0;
  double entropy = 0.0;
};

struct InstanceRollout {
  const QapInstance* inst = nullptr;
  Eigen::MatrixXd onehot;
  std::vector<RolloutStep> steps;
};

struct RolloutBatch {
  std::vector<InstanceRollout> items;
  /// returns[b][t], filled by compute_returns.
  std::vector<std::vector<double>> returns;

  std::size_t step_count() const;
  double total_reward() const;
};

/// G_t = sum_{k<T} gamma^k r_{t+k}, truncated at the end of `rewards`.
std::vector<double> compute_returns(const std::vector<double>& rewards, int T, double gamma);
void compute_returns(RolloutBatch& batch, int T, double gamma);

struct LossComponents {
  double policy_loss = 0.0;  // -mean(logprob * advantage)
  double entropy = 0.0;      // mean joint entropy of the pair distribution
  double value_loss = 0.0;   // mean (G - V)^2
  double entropy_coef = 0.0;
  double total = 0.0;        // policy_loss - entropy_coef * entropy + zeta * value_loss
};

struct EvalResult {
  std::vector<double> best_costs;
  double mean = 0.0;
  std::optional<double> gap;  // against the mean of the references when given
};

/// Numbers of one training epoch as written to the metrics stream.
struct EpochMetrics {
  int epoch = 0;
  double mean_return = 0.0;
  LossComponents loss;
  std::optional<double> eval_gap;
  std::optional<double> eval_mean;
  double wall_ms = 0.0;
};

nlohmann::json to_json(const EpochMetrics& m, bool with_wall_ms = true);

/// `steps` policy-driven swaps on one instance starting from `init`; the
/// returned state carries the best solution seen. Seeds the one-hot pool and
/// the action sampling from `seed`.
template <typename Scalar>
SearchState run_search(const policy::SawtPolicy<Scalar>& policy, const QapInstance& inst, int steps, InitSolution init,
                       std::uint64_t seed, policy::ActionMode mode = policy::ActionMode::kSample);

template <typename Scalar>
class Trainer {
 public:
  using Policy = policy::SawtPolicy<Scalar>;

  Trainer(Policy& policy, TrainConfig cfg);

  const TrainConfig& config() const { return cfg_; }

  /// Samples `steps` actions for every episode, advancing them in place.
  /// Parameters are only read.
  RolloutBatch collect_rollouts(std::vector<Episode>& episodes, int steps, policy::ActionMode mode) const;

  /// Replays the batch with gradients, forms the combined loss and takes one
  /// Adam step. Requires compute_returns() to have run. Throws NumericalError
  /// on a non-finite loss or gradient.
  LossComponents reinforce_update(const RolloutBatch& batch, int epoch);

  /// Runs `steps` sampled improvement steps per instance from the configured
  /// initial solution; the best cost per instance is reported.
  EvalResult evaluate(const std::vector<QapInstance>& instances, int steps, std::uint64_t seed,
                      const std::vector<double>* references = nullptr,
                      policy::ActionMode mode = policy::ActionMode::kSample) const;

  /// One epoch over `train_set` in shuffled batches.
  EpochMetrics train_epoch(const std::vector<QapInstance>& train_set, int epoch);

  struct Hooks {
    std::function<void(const EpochMetrics&)> on_epoch;
    /// Called with (epoch just finished, tag); tag is "periodic", "best" or "final".
    std::function<void(int, const std::string&)> on_checkpoint;
  };

  /// Epochs [start_epoch, cfg.epochs). Evaluates on `eval_set` against
  /// `eval_refs` every cfg.eval_every epochs.
  std::vector<EpochMetrics> train(const std::vector<QapInstance>& train_set, const std::vector<QapInstance>& eval_set,
                                  const std::vector<double>& eval_refs, int start_epoch, const Hooks& hooks);

 private:
  Policy& policy_;
  TrainConfig cfg_;
  nn::AdamOptions adam_;
};

extern template class Trainer<float>;
extern template class Trainer<double>;

/// Zeroes the last layer of both decoder MLPs so every legal pair starts
/// equally likely.
template <typename Scalar>
void make_uniform_policy(policy::SawtPolicy<Scalar>& policy);

}  // namespace sawt::rl
