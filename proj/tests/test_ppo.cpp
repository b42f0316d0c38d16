#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "mdr/ppo.hpp"
#include "reference_net.hpp"

using namespace mdr;

namespace {

struct Setup {
  std::shared_ptr<const WarehouseGraph> graph;
  Instance instance;
  std::unique_ptr<Environment> env;
  GraphContext ctx;

  explicit Setup(LayoutParams p, std::uint64_t seed = 1)
      : graph(std::make_shared<const WarehouseGraph>(p)),
        instance(generate_instance(*graph, DueDateConfig{}, seed)),
        env(std::make_unique<Environment>(graph, instance)),
        ctx(make_context(*graph, instance.mp)) {}

  EnvironmentSource source() const {
    return [this](std::size_t) -> const Environment& { return *env; };
  }
};

// Five records from a (2,1,6) rollout with a small model.
RolloutBuffer toy_buffer(Setup& s, Agent& agent, std::uint64_t seed) {
  Rng rng(seed);
  RolloutBuffer buf = collect_rollout(s.source(), agent, s.ctx, 1, 1.0 / s.instance.mp, rng);
  buf.records.resize(5);
  buf.records.back().done = true;
  buf.records.back().next_value = 0.0;
  buf.episode_tardiness.clear();
  return buf;
}

std::vector<double> flat(const std::vector<Param*>& ps) {
  std::vector<double> out;
  for (const Param* p : ps) out.insert(out.end(), p->value.data(), p->value.data() + p->value.size());
  return out;
}

}  // namespace

TEST_CASE("a two-item instance yields one episode of four records") {
  Setup s(LayoutParams{1, 1, 2});
  REQUIRE(s.instance.num_items() == 2);
  Agent agent(fixture::small_model(), 3);
  Rng rng(5);
  const RolloutBuffer buf = collect_rollout(s.source(), agent, s.ctx, 1, 1.0, rng);
  CHECK(buf.records.size() == 4);
  CHECK(buf.episode_tardiness.size() == 1);
  CHECK(buf.records.back().done);
  CHECK(buf.records.back().next_value == 0.0);
  for (std::size_t i = 0; i + 1 < buf.records.size(); ++i) {
    CHECK_FALSE(buf.records[i].done);
    CHECK(buf.records[i].next_value == buf.records[i + 1].value);
  }
  for (const TransitionRecord& r : buf.records) {
    CHECK(r.action >= 0);
    CHECK(static_cast<std::size_t>(r.action) < r.obs.tokens.size());
  }
}

TEST_CASE("rollouts are reproducible and log-probs match recomputation") {
  Setup s(LayoutParams{2, 1, 6});
  Agent a(fixture::small_model(), 8), b(fixture::small_model(), 8);
  Rng r1(21), r2(21);
  const RolloutBuffer x = collect_rollout(s.source(), a, s.ctx, 60, 0.01, r1);
  const RolloutBuffer y = collect_rollout(s.source(), b, s.ctx, 60, 0.01, r2);
  REQUIRE(x.records.size() == y.records.size());
  CHECK(x.records.size() >= 60);
  CHECK(x.records.size() % 24 == 0);
  for (std::size_t i = 0; i < x.records.size(); ++i) {
    CHECK(x.records[i].action == y.records[i].action);
    CHECK(x.records[i].log_prob == y.records[i].log_prob);
    CHECK(x.records[i].reward == y.records[i].reward);
    CHECK(x.records[i].value == y.records[i].value);
    CHECK(x.records[i].obs.features == y.records[i].obs.features);
    Tape tape;
    const double lp = a.actor.log_probs(tape, x.records[i].obs, s.ctx).value()(0, x.records[i].action);
    CHECK(std::abs(lp - x.records[i].log_prob) <= 1e-10);
  }
  CHECK(x.episode_tardiness == y.episode_tardiness);
}

TEST_CASE("one-step advantages") {
  RolloutBuffer buf;
  TransitionRecord r;
  r.reward = 1.0;
  r.value = 2.0;
  r.next_value = 3.0;
  buf.records.push_back(r);
  r.reward = -0.5;
  r.value = 0.25;
  r.next_value = 0.0;
  r.done = true;
  buf.records.push_back(r);
  r.reward = 0.125;
  r.value = -1.0;
  r.next_value = 4.0;
  r.done = false;
  buf.records.push_back(r);
  compute_advantages(buf, 0.99);
  REQUIRE(buf.advantages.size() == 3);
  CHECK(buf.advantages[0] == doctest::Approx(1.97).epsilon(1e-15));
  CHECK(buf.advantages[1] == -0.75);
  CHECK(buf.advantages[2] == doctest::Approx(0.125 + 0.99 * 4.0 + 1.0).epsilon(1e-15));

  const auto norm = update_advantages(buf, true);
  double mean = 0.0, var = 0.0;
  for (double a : norm) mean += a / 3.0;
  for (double a : norm) var += (a - mean) * (a - mean) / 3.0;
  CHECK(std::abs(mean) <= 1e-12);
  CHECK(std::abs(var - 1.0) <= 1e-12);
  CHECK(update_advantages(buf, false) == buf.advantages);
}

TEST_CASE("first epoch at unchanged parameters has zero surrogate loss") {
  Setup s(LayoutParams{2, 1, 6});
  Agent agent(fixture::small_model(), 4);
  Rng rng(2);
  RolloutBuffer buf = collect_rollout(s.source(), agent, s.ctx, 48, 1.0 / s.instance.mp, rng);
  compute_advantages(buf, 0.99);
  PpoConfig cfg;
  cfg.minibatch_size = 0;
  cfg.epochs_per_batch = 1;
  Optimizers opt(cfg.lr);
  const UpdateStats st = ppo_update(buf, agent, opt, cfg, s.ctx, rng);
  CHECK(std::abs(st.policy_loss) <= 1e-12);
  CHECK(st.clip_fraction == 0.0);
  CHECK(st.entropy > 0.0);
  CHECK(st.value_loss >= 0.0);
}

TEST_CASE("clipped records pass no gradient") {
  Setup s(LayoutParams{2, 1, 6});
  Agent agent(fixture::small_model(), 6);
  RolloutBuffer buf = toy_buffer(s, agent, 3);
  buf.records.resize(1);
  buf.records[0].log_prob -= 0.5;  // ratio = e^0.5 > 1.2
  const std::vector<double> adv{1.0};
  const std::size_t idx[] = {0};
  PpoConfig cfg;
  auto params = agent.actor.parameters();
  for (Param* p : params) p->zero_grad();
  Tape tape;
  PolicyLossTerms terms;
  Var loss = policy_loss(tape, buf, idx, adv, agent.actor, cfg, s.ctx, &terms);
  tape.backward(loss);
  CHECK(loss.item() == doctest::Approx(-1.2));
  CHECK(terms.clip_fraction == 1.0);
  for (const Param* p : params) CHECK(p->grad.isZero(0.0));
}

TEST_CASE("PPO losses match finite differences on a frozen five-record buffer") {
  for (Architecture a : {Architecture::Full, Architecture::GnnOnly, Architecture::TransformerOnly}) {
    CAPTURE(architecture_name(a));
    Setup s(LayoutParams{2, 1, 6});
    Agent agent(fixture::small_model(a), 12);
    RolloutBuffer buf = toy_buffer(s, agent, 9);
    // Move stored log-probs so some ratios sit inside and some outside the clip range.
    const double shifts[] = {0.05, -0.1, 0.4, -0.35, 0.0};
    for (std::size_t i = 0; i < 5; ++i) buf.records[i].log_prob += shifts[i];
    compute_advantages(buf, 0.99);
    const std::vector<double> adv{0.7, -1.3, 0.4, -0.2, 1.1};
    const std::size_t idx[] = {0, 1, 2, 3, 4};
    for (double ent : {0.0, 0.01}) {
      PpoConfig cfg;
      cfg.entropy_coef = ent;
      const auto actor_params = agent.actor.parameters();
      for (Param* p : actor_params) p->zero_grad();
      {
        Tape tape;
        tape.backward(policy_loss(tape, buf, idx, adv, agent.actor, cfg, s.ctx));
      }
      const auto pf = [&](const refnet::ParamMap& p) {
        return refnet::policy_loss(p, agent.config, buf, adv, cfg, s.ctx);
      };
      CHECK(refnet::max_rel_error(pf, actor_params) <= 1e-4);
    }
    PpoConfig cfg;
    const auto critic_params = agent.critic.parameters();
    for (Param* p : critic_params) p->zero_grad();
    {
      Tape tape;
      tape.backward(value_loss(tape, buf, idx, agent.critic, cfg, s.ctx));
    }
    const auto vf = [&](const refnet::ParamMap& p) { return refnet::value_loss(p, agent.config, buf, cfg, s.ctx); };
    CHECK(refnet::max_rel_error(vf, critic_params) <= 1e-4);
  }
}

TEST_CASE("value loss falls over repeated updates on one buffer") {
  Setup s(LayoutParams{2, 1, 6});
  Agent agent(ModelConfig{}, 14);
  Rng rng(6);
  RolloutBuffer buf = collect_rollout(s.source(), agent, s.ctx, 48, 1.0 / s.instance.mp, rng);
  compute_advantages(buf, 0.99);
  PpoConfig cfg;
  cfg.minibatch_size = 0;
  cfg.epochs_per_batch = 1;
  Optimizers opt(cfg.lr);
  std::vector<std::size_t> all(buf.records.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto vloss = [&] {
    Tape tape;
    return value_loss(tape, buf, all, agent.critic, cfg, s.ctx).item();
  };
  int decreases = 0;
  double prev = vloss();
  for (int k = 0; k < 30; ++k) {
    ppo_update(buf, agent, opt, cfg, s.ctx, rng);
    const double now = vloss();
    if (now < prev) ++decreases;
    prev = now;
  }
  CHECK(decreases >= 25);
}

TEST_CASE("zero advantages leave the actor in place") {
  Setup s(LayoutParams{2, 1, 6});
  Agent agent(fixture::small_model(), 15);
  Rng rng(7);
  RolloutBuffer buf = collect_rollout(s.source(), agent, s.ctx, 24, 1.0 / s.instance.mp, rng);
  buf.advantages.assign(buf.records.size(), 0.0);
  PpoConfig cfg;
  cfg.normalize_advantages = false;
  cfg.epochs_per_batch = 1;
  cfg.minibatch_size = 0;
  Optimizers opt(cfg.lr);
  const auto before = flat(agent.actor.parameters());
  ppo_update(buf, agent, opt, cfg, s.ctx, rng);
  const auto after = flat(agent.actor.parameters());
  double sq = 0.0;
  for (std::size_t i = 0; i < before.size(); ++i) sq += (after[i] - before[i]) * (after[i] - before[i]);
  CHECK(std::sqrt(sq) < 1e-6);
}

TEST_CASE("non-finite losses abort with a dump") {
  Setup s(LayoutParams{2, 1, 6});
  Agent agent(fixture::small_model(), 16);
  RolloutBuffer buf = toy_buffer(s, agent, 1);
  buf.records[2].reward = std::nan("");
  compute_advantages(buf, 0.99);
  PpoConfig cfg;
  cfg.minibatch_size = 0;
  Optimizers opt(cfg.lr);
  Rng rng(0);
  try {
    ppo_update(buf, agent, opt, cfg, s.ctx, rng);
    FAIL("expected TrainingDiverged");
  } catch (const TrainingDiverged& e) {
    CHECK(std::string(e.what()).find("record 2") != std::string::npos);
  }
}

TEST_CASE("configuration validation") {
  PpoConfig c;
  CHECK_NOTHROW(c.validate());
  c.gamma = 0.0;
  CHECK_THROWS(c.validate());
  c = PpoConfig{};
  c.clip = 1.0;
  CHECK_THROWS(c.validate());
  c = PpoConfig{};
  c.reward_scale = 0.0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("training curve rows and reproducibility") {
  const WarehouseGraph g(LayoutParams{1, 1, 2});
  const Instance inst = generate_instance(g, DueDateConfig{}, 2);
  PpoConfig cfg;
  cfg.batch_size = 16;
  cfg.episodes = 1;
  TrainOptions opt;
  opt.seed = 3;
  CHECK(train(inst, fixture::small_model(), cfg, opt).curve.size() == 1);

  cfg.episodes = 25;
  cfg.checkpoint_every = 10;
  const auto dir = std::filesystem::temp_directory_path() / "mdr_train_test";
  std::filesystem::remove_all(dir);
  opt.out_dir = (dir / "a").string();
  const TrainResult a = train(inst, fixture::small_model(), cfg, opt);
  opt.out_dir = (dir / "b").string();
  const TrainResult b = train(inst, fixture::small_model(), cfg, opt);
  CHECK(a.curve.size() == 25);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string ca = slurp(dir / "a" / "curve.csv");
  CHECK(ca == slurp(dir / "b" / "curve.csv"));
  CHECK(std::count(ca.begin(), ca.end(), '\n') == 26);
  CHECK(ca.rfind("episode,total_tardiness,running_avg_20\n", 0) == 0);
  CHECK(slurp(dir / "a" / "final.json") == slurp(dir / "b" / "final.json"));
  CHECK(std::filesystem::exists(dir / "a" / "ckpt_10.json"));
  CHECK(std::filesystem::exists(dir / "a" / "ckpt_20.json"));
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    const std::size_t lo = i + 1 > 20 ? i + 1 - 20 : 0;
    double sum = 0.0;
    for (std::size_t k = lo; k <= i; ++k) sum += a.curve[k].total_tardiness;
    CHECK(a.curve[i].running_avg == doctest::Approx(sum / static_cast<double>(i + 1 - lo)));
    CHECK(a.curve[i].episode == static_cast<int>(i + 1));
  }
  std::filesystem::remove_all(dir);
}
