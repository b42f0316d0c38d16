#ifndef MDR_PPO_HPP_
#define MDR_PPO_HPP_

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdr/environment.hpp"
#include "mdr/policy_net.hpp"

namespace mdr {

struct PpoConfig {
  int episodes = 10000;
  double lr = 3e-4;
  int batch_size = 1024;  // transitions per update, gathered from whole episodes
  double gamma = 0.99;
  double clip = 0.2;
  int epochs_per_batch = 4;
  double entropy_coef = 0.0;
  int eval_window = 20;
  int minibatch_size = 64;  // <= 0: the whole batch in one step
  bool normalize_advantages = true;
  // Multiplier applied to rewards before learning; unset means 1 / MP.
  std::optional<double> reward_scale;
  // Redraw due dates (same r, R, MP) for every training episode.
  bool resample_due_dates = true;
  // Write a checkpoint every N episodes (0: only the final one).
  int checkpoint_every = 0;

  void validate() const;
};

struct TransitionRecord {
  Observation obs;
  int action = 0;
  double log_prob = 0.0;
  double reward = 0.0;  // scaled
  double value = 0.0;
  double next_value = 0.0;  // 0 when done
  bool done = false;
};

struct RolloutBuffer {
  std::vector<TransitionRecord> records;
  std::vector<double> advantages;
  // Raw total tardiness of every completed episode, in collection order.
  std::vector<double> episode_tardiness;
};

/// Supplies the environment for the k-th episode of a run.
using EnvironmentSource = std::function<const Environment&(std::size_t episode)>;

/// Runs whole episodes until at least `min_transitions` records exist (or
/// `max_episodes` have run). Actions are sampled from the actor; log-probs and
/// critic values are those at collection time. `first_episode` is passed on to
/// `source`.
RolloutBuffer collect_rollout(const EnvironmentSource& source, Agent& agent, const GraphContext& ctx,
                              std::size_t min_transitions, double reward_scale, Rng& rng,
                              std::size_t first_episode = 0,
                              std::size_t max_episodes = std::numeric_limits<std::size_t>::max());

/// One-step advantages A = r + gamma * V(s') * (1 - done) - V(s).
void compute_advantages(RolloutBuffer& buffer, double gamma);

struct UpdateStats {
  // Means over the first epoch, each minibatch evaluated before its step.
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

/// Raised when a loss turns non-finite; the message carries a dump of the
/// offending record.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Holds the two Adam states of a training run.
struct Optimizers {
  ad::Adam<double> actor;
  ad::Adam<double> critic;
  explicit Optimizers(double lr) : actor(lr), critic(lr) {}
};

/// Clipped-surrogate and value updates over `epochs_per_batch` passes.
/// Minibatches are drawn from a per-epoch shuffle using `rng`.
UpdateStats ppo_update(RolloutBuffer& buffer, Agent& agent, Optimizers& optimizers, const PpoConfig& config,
                       const GraphContext& ctx, Rng& rng);

/// Advantages as used by the update: standardized over the whole buffer when
/// `normalize` is set (left as is for a batch of one or zero spread).
std::vector<double> update_advantages(const RolloutBuffer& buffer, bool normalize);

struct PolicyLossTerms {
  double entropy = 0.0;        // mean categorical entropy
  double clip_fraction = 0.0;  // share of records with |ratio - 1| > clip
};

/// -mean_i min(ratio_i A_i, clamp(ratio_i, 1-eps, 1+eps) A_i) - entropy_coef * mean entropy
/// over the records named by `indices`, recorded on `tape`.
Var policy_loss(Tape& tape, const RolloutBuffer& buffer, std::span<const std::size_t> indices,
                std::span<const double> advantages, ActorNet& actor, const PpoConfig& config,
                const GraphContext& ctx, PolicyLossTerms* terms = nullptr);

/// mean_i (V(s_i) - (r_i + gamma V(s'_i) (1 - done_i)))^2 with the target
/// taken from the stored next_value, hence fixed.
Var value_loss(Tape& tape, const RolloutBuffer& buffer, std::span<const std::size_t> indices, CriticNet& critic,
               const PpoConfig& config, const GraphContext& ctx);

struct CurvePoint {
  int episode = 0;  // 1-based
  double total_tardiness = 0.0;
  double running_avg = 0.0;  // mean over the last eval_window episodes
};

struct TrainOptions {
  std::uint64_t seed = 0;
  std::string out_dir;  // empty: nothing written
  std::function<void(const CurvePoint&)> on_episode;
  std::function<void(const UpdateStats&)> on_update;
};

struct TrainResult {
  std::unique_ptr<Agent> agent;
  std::vector<CurvePoint> curve;
};

/// Collect, advantage, update until `config.episodes` episodes have run. With
/// an out_dir, writes curve.csv (`episode,total_tardiness,running_avg_20`) and
/// checkpoints (final.json, plus ckpt_<episode>.json when enabled).
TrainResult train(const Instance& instance, const ModelConfig& model, const PpoConfig& config,
                  const TrainOptions& options);

void write_curve(const std::vector<CurvePoint>& curve, const std::string& path);

}  // namespace mdr

#endif  // MDR_PPO_HPP_
