#include "mdr/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mdr/text.hpp"

namespace mdr {

void PpoConfig::validate() const {
  if (episodes < 1) throw std::invalid_argument("ppo: episodes must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("ppo: lr must be positive");
  if (batch_size < 1) throw std::invalid_argument("ppo: batch_size must be >= 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("ppo: gamma must lie in (0,1]");
  if (!(clip > 0.0 && clip < 1.0)) throw std::invalid_argument("ppo: clip must lie in (0,1)");
  if (epochs_per_batch < 1) throw std::invalid_argument("ppo: epochs_per_batch must be >= 1");
  if (entropy_coef < 0.0) throw std::invalid_argument("ppo: entropy_coef must be >= 0");
  if (eval_window < 1) throw std::invalid_argument("ppo: eval_window must be >= 1");
  if (reward_scale && !(*reward_scale > 0.0)) throw std::invalid_argument("ppo: reward_scale must be positive");
  if (checkpoint_every < 0) throw std::invalid_argument("ppo: checkpoint_every must be >= 0");
}

RolloutBuffer collect_rollout(const EnvironmentSource& source, Agent& agent, const GraphContext& ctx,
                              std::size_t min_transitions, double reward_scale, Rng& rng, std::size_t first_episode,
                              std::size_t max_episodes) {
  if (min_transitions < 1) throw std::invalid_argument("collect_rollout: min_transitions must be >= 1");
  RolloutBuffer buffer;
  for (std::size_t k = 0; buffer.records.size() < min_transitions && k < max_episodes; ++k) {
    const Environment& env = source(first_episode + k);
    SimState state = env.reset(rng());
    const std::size_t episode_start = buffer.records.size();
    while (state.phase != Phase::Done) {
      const std::vector<Action> legal = env.legal_actions(state);
      TransitionRecord rec;
      rec.obs = observe(env, state, legal, ctx);
      const Eigen::VectorXd probs = agent.actor.probabilities(rec.obs, ctx);
      rec.action = static_cast<int>(sample_index(probs, rng));
      rec.log_prob = std::log(probs(rec.action));
      rec.value = agent.critic.value(rec.obs, ctx);
      auto [next, outcome] = env.step(state, legal[static_cast<std::size_t>(rec.action)]);
      rec.reward = outcome.reward * reward_scale;
      rec.done = outcome.done;
      buffer.records.push_back(std::move(rec));
      state = std::move(next);
    }
    for (std::size_t i = episode_start; i + 1 < buffer.records.size(); ++i) {
      buffer.records[i].next_value = buffer.records[i + 1].value;
    }
    buffer.episode_tardiness.push_back(total_tardiness(state));
  }
  return buffer;
}

void compute_advantages(RolloutBuffer& buffer, double gamma) {
  buffer.advantages.resize(buffer.records.size());
  for (std::size_t i = 0; i < buffer.records.size(); ++i) {
    const TransitionRecord& r = buffer.records[i];
    buffer.advantages[i] = r.reward + gamma * r.next_value * (r.done ? 0.0 : 1.0) - r.value;
  }
}

std::vector<double> update_advantages(const RolloutBuffer& buffer, bool normalize) {
  if (buffer.advantages.size() != buffer.records.size()) {
    throw std::invalid_argument("ppo: advantages not computed for this buffer");
  }
  std::vector<double> adv = buffer.advantages;
  if (!normalize || adv.size() < 2) return adv;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);
  for (double& a : adv) a = sd > 1e-12 ? (a - mean) / sd : a - mean;
  return adv;
}

namespace {

// Left-to-right sum of [1x1] terms scaled by 1/n.
Var mean_of(const std::vector<Var>& terms) {
  if (terms.empty()) throw std::invalid_argument("ppo: empty minibatch");
  Var total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(total, terms[i]);
  return ad::scale(total, 1.0 / static_cast<double>(terms.size()));
}

}  // namespace

Var policy_loss(Tape& tape, const RolloutBuffer& buffer, std::span<const std::size_t> indices,
                std::span<const double> advantages, ActorNet& actor, const PpoConfig& config,
                const GraphContext& ctx, PolicyLossTerms* terms) {
  std::vector<Var> per_record;
  per_record.reserve(indices.size());
  double entropy_sum = 0.0;
  int clipped = 0;
  for (std::size_t i : indices) {
    const TransitionRecord& rec = buffer.records.at(i);
    const double a = advantages[i];
    Var logp = actor.log_probs(tape, rec.obs, ctx);
    Var ratio = ad::exp(ad::add(ad::pick(logp, 0, rec.action), tape.constant(Tensor::Constant(1, 1, -rec.log_prob))));
    Var surrogate = ad::minimum(ad::scale(ratio, a), ad::scale(ad::clamp(ratio, 1.0 - config.clip, 1.0 + config.clip), a));
    Var loss = ad::scale(surrogate, -1.0);
    if (std::abs(ratio.item() - 1.0) > config.clip) ++clipped;
    if (config.entropy_coef > 0.0 || terms) {
      Var entropy = ad::scale(ad::sum_all(ad::mul(ad::exp(logp), logp)), -1.0);
      entropy_sum += entropy.item();
      if (config.entropy_coef > 0.0) loss = ad::sub(loss, ad::scale(entropy, config.entropy_coef));
    }
    per_record.push_back(loss);
  }
  if (terms) {
    terms->entropy = entropy_sum / static_cast<double>(indices.size());
    terms->clip_fraction = static_cast<double>(clipped) / static_cast<double>(indices.size());
  }
  return mean_of(per_record);
}

Var value_loss(Tape& tape, const RolloutBuffer& buffer, std::span<const std::size_t> indices, CriticNet& critic,
               const PpoConfig& config, const GraphContext& ctx) {
  std::vector<Var> per_record;
  per_record.reserve(indices.size());
  for (std::size_t i : indices) {
    const TransitionRecord& rec = buffer.records.at(i);
    const double target = rec.reward + config.gamma * rec.next_value * (rec.done ? 0.0 : 1.0);
    per_record.push_back(ad::mse(critic.value(tape, rec.obs, ctx), Tensor(Tensor::Constant(1, 1, target))));
  }
  return mean_of(per_record);
}

namespace {

std::string dump_minibatch(const RolloutBuffer& buffer, std::span<const std::size_t> indices,
                           std::span<const double> advantages) {
  std::ostringstream out;
  for (std::size_t i : indices) {
    const TransitionRecord& r = buffer.records[i];
    if (std::isfinite(r.reward) && std::isfinite(r.value) && std::isfinite(r.next_value) &&
        std::isfinite(r.log_prob) && std::isfinite(advantages[i])) {
      continue;
    }
    out << "\n  record " << i << ": action=" << r.action << " log_prob=" << format_real(r.log_prob)
        << " reward=" << format_real(r.reward) << " value=" << format_real(r.value)
        << " next_value=" << format_real(r.next_value) << " advantage=" << format_real(advantages[i])
        << " tokens=" << r.obs.tokens.size();
  }
  const std::string s = out.str();
  return s.empty() ? " (all record fields finite; parameters diverged)" : s;
}

void zero_grads(std::span<Param* const> params) {
  for (Param* p : params) p->zero_grad();
}

}  // namespace

UpdateStats ppo_update(RolloutBuffer& buffer, Agent& agent, Optimizers& optimizers, const PpoConfig& config,
                       const GraphContext& ctx, Rng& rng) {
  const std::vector<double> adv = update_advantages(buffer, config.normalize_advantages);
  const std::size_t n = buffer.records.size();
  if (n == 0) throw std::invalid_argument("ppo_update: empty buffer");
  const std::size_t mb = config.minibatch_size <= 0 ? n : std::min<std::size_t>(n, config.minibatch_size);
  const std::vector<Param*> actor_params = agent.actor.parameters();
  const std::vector<Param*> critic_params = agent.critic.parameters();

  std::vector<std::size_t> order(n);
  UpdateStats stats;
  int first_epoch_batches = 0;
  for (int epoch = 0; epoch < config.epochs_per_batch; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Fisher-Yates with the portable index draw.
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    for (std::size_t start = 0; start < n; start += mb) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(mb, n - start));

      zero_grads(actor_params);
      PolicyLossTerms terms;
      double pl = 0.0;
      {
        Tape tape;
        Var loss = policy_loss(tape, buffer, idx, adv, agent.actor, config, ctx, &terms);
        pl = loss.item();
        if (!std::isfinite(pl)) {
          throw TrainingDiverged("ppo_update: non-finite policy loss in epoch " + std::to_string(epoch) +
                                 dump_minibatch(buffer, idx, adv));
        }
        tape.backward(loss);
      }
      optimizers.actor.step(actor_params);

      zero_grads(critic_params);
      double vl = 0.0;
      {
        Tape tape;
        Var loss = value_loss(tape, buffer, idx, agent.critic, config, ctx);
        vl = loss.item();
        if (!std::isfinite(vl)) {
          throw TrainingDiverged("ppo_update: non-finite value loss in epoch " + std::to_string(epoch) +
                                 dump_minibatch(buffer, idx, adv));
        }
        tape.backward(loss);
      }
      optimizers.critic.step(critic_params);

      if (epoch == 0) {
        stats.policy_loss += pl;
        stats.value_loss += vl;
        stats.entropy += terms.entropy;
        stats.clip_fraction += terms.clip_fraction;
        ++first_epoch_batches;
      }
    }
  }
  const double k = static_cast<double>(first_epoch_batches);
  stats.policy_loss /= k;
  stats.value_loss /= k;
  stats.entropy /= k;
  stats.clip_fraction /= k;
  return stats;
}

void write_curve(const std::vector<CurvePoint>& curve, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write curve file '" + path + "'");
  out << "episode,total_tardiness,running_avg_20\n";
  for (const CurvePoint& p : curve) {
    out << p.episode << ',' << format_real(p.total_tardiness) << ',' << format_real(p.running_avg) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing curve file '" + path + "'");
}

TrainResult train(const Instance& instance, const ModelConfig& model, const PpoConfig& config,
                  const TrainOptions& options) {
  config.validate();
  model.validate();
  auto graph = std::make_shared<const WarehouseGraph>(instance.layout);
  const GraphContext ctx = make_context(*graph, instance.mp);
  const double reward_scale = config.reward_scale.value_or(instance.mp > 0.0 ? 1.0 / instance.mp : 1.0);

  TrainResult result;
  result.agent = std::make_unique<Agent>(model, options.seed);
  Agent& agent = *result.agent;
  Optimizers optimizers(config.lr);
  Rng rng(derive_seed({options.seed, 0x726f6c6cULL}));

  std::optional<Environment> current;
  const Environment fixed(graph, instance);
  EnvironmentSource source = [&](std::size_t episode) -> const Environment& {
    if (!config.resample_due_dates) return fixed;
    const std::uint64_t s = derive_seed({options.seed, static_cast<std::uint64_t>(episode)});
    current.emplace(graph, generate_instance(*graph, instance.config, s, instance.mp));
    return *current;
  };

  const bool writing = !options.out_dir.empty();
  if (writing) std::filesystem::create_directories(options.out_dir);
  const std::filesystem::path dir(options.out_dir);

  std::vector<double> history;
  std::size_t done = 0;
  const std::size_t total = static_cast<std::size_t>(config.episodes);
  while (done < total) {
    RolloutBuffer buffer = collect_rollout(source, agent, ctx, static_cast<std::size_t>(config.batch_size),
                                           reward_scale, rng, done, total - done);
    for (double tt : buffer.episode_tardiness) {
      history.push_back(tt);
      const std::size_t w = std::min<std::size_t>(history.size(), static_cast<std::size_t>(config.eval_window));
      const double avg = std::accumulate(history.end() - static_cast<std::ptrdiff_t>(w), history.end(), 0.0) /
                         static_cast<double>(w);
      CurvePoint p{static_cast<int>(history.size()), tt, avg};
      result.curve.push_back(p);
      if (options.on_episode) options.on_episode(p);
    }
    const std::size_t before = done;
    done += buffer.episode_tardiness.size();

    compute_advantages(buffer, config.gamma);
    const UpdateStats stats = ppo_update(buffer, agent, optimizers, config, ctx, rng);
    if (options.on_update) options.on_update(stats);

    if (writing && config.checkpoint_every > 0) {
      const std::size_t every = static_cast<std::size_t>(config.checkpoint_every);
      if (done / every > before / every && done < total) {
        save_checkpoint(agent, (dir / ("ckpt_" + std::to_string(done / every * every) + ".json")).string());
      }
    }
  }
  if (writing) {
    write_curve(result.curve, (dir / "curve.csv").string());
    save_checkpoint(agent, (dir / "final.json").string());
  }
  return result;
}

}  // namespace mdr
