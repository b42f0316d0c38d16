// Acceptance run. Prints one PASS/FAIL line per criterion and exits non-zero
// when any of them fails. `mdr_acceptance <substring>` runs only the checks
// whose name contains the substring.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "mdr/bench.hpp"
#include "mdr/ppo.hpp"
#include "mdr/text.hpp"
#include "oracles.hpp"
#include "reference_net.hpp"

using namespace mdr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream b;
  b << in.rdbuf();
  return b.str();
}

const DueDateConfig kConfigs[] = {{0.125, 0.75}, {0.125, 1.0}, {0.25, 0.75}, {0.25, 1.0}};

// ---------------------------------------------------------------------------

Outcome reward_identity() {
  const auto layouts = validation_layouts();
  Rng rng(2024);
  RulePolicy random(DispatchRule::Random);
  double worst = 0.0;
  int episodes = 0, zero_tt = 0;
  for (int e = 0; e < 240; ++e) {
    auto graph = std::make_shared<const WarehouseGraph>(layouts[uniform_index(rng, layouts.size())]);
    Instance inst = generate_instance(*graph, kConfigs[uniform_index(rng, 4)], rng());
    // Every eighth episode has unreachable due dates, so the bonus branch runs.
    if (e % 8 == 0) {
      for (auto& [node, due] : inst.due_dates) due = 1e6;
    }
    const Environment env(graph, inst);
    SimState s = env.reset(rng());
    double sum = 0.0;
    while (s.phase != Phase::Done) {
      const auto legal = env.legal_actions(s);
      auto [next, out] = env.step(s, random.decide(env, s, legal, rng));
      sum += out.reward;
      s = std::move(next);
    }
    const double tt = oracle::completion_tardiness(s);
    if (tt == 0.0) ++zero_tt;
    worst = std::max(worst, std::abs((sum - (tt == 0.0 ? kOptimalBonus : 0.0)) + tt));
    ++episodes;
  }
  return {worst <= 1e-9 && episodes >= 200,
          std::to_string(episodes) + " episodes (" + std::to_string(zero_tt) + " with TT=0), max |error| " +
              fmt("%.3g", worst)};
}

Outcome item_counts() {
  // Item column of the latency table, in (D_L, N_A, N_L) order.
  const int table[32] = {12, 16, 20, 24, 24, 32, 40, 48,  18, 24, 30, 36, 36, 48, 60, 72,
                         24, 32, 40, 48, 48, 64, 80, 96,  30, 40, 50, 60, 60, 80, 100, 120};
  const auto layouts = validation_layouts();
  if (layouts.size() != 32) return {false, std::to_string(layouts.size()) + " layouts instead of 32"};
  int bad = 0;
  for (std::size_t i = 0; i < layouts.size(); ++i) {
    const LayoutParams& p = layouts[i];
    const WarehouseGraph g(p);
    const int n = static_cast<int>(g.storage_nodes().size());
    if (n != p.lanes_per_aisle * p.lane_depth * p.num_aisles || n != table[i]) ++bad;
  }
  return {bad == 0, "32 layouts, " + std::to_string(bad) + " mismatches"};
}

Outcome routing_oracle() {
  Rng rng(99);
  const LayoutParams layouts[] = {{2, 1, 6}, {3, 2, 10}, {4, 1, 8}, {5, 2, 12}, {2, 2, 12}};
  int compared = 0, reachable = 0, wrong = 0;
  for (int q = 0; q < 2500; ++q) {
    const WarehouseGraph g(layouts[q % 5]);
    const Occupancy occ = oracle::random_occupancy(g, rng, uniform01(rng));
    const auto from = static_cast<NodeId>(uniform_index(rng, g.num_nodes()));
    const auto to = static_cast<NodeId>(uniform_index(rng, g.num_nodes()));
    std::optional<NodeId> exempt;
    if (g.is_storage(to) && uniform01(rng) < 0.5) exempt = to;
    const int expect = oracle::bfs_distance(g, occ, from, to, exempt);
    const auto got = shortest_path(g, occ, from, to, exempt);
    ++compared;
    if (expect < 0) {
      if (got) ++wrong;
      continue;
    }
    ++reachable;
    if (!got || got->distance != expect) ++wrong;
  }
  int states = 0, set_wrong = 0;
  for (int s = 0; s < 600; ++s) {
    const WarehouseGraph g(layouts[s % 5]);
    const Occupancy occ = oracle::random_occupancy(g, rng, uniform01(rng));
    if (accessible_items(g, occ) != oracle::brute_force_accessible(g, occ)) ++set_wrong;
    ++states;
  }
  return {wrong == 0 && set_wrong == 0 && reachable >= 1000 && states >= 500,
          std::to_string(reachable) + " reachable of " + std::to_string(compared) + " distance queries, " +
              std::to_string(wrong) + " wrong; " + std::to_string(states) + " accessible sets, " +
              std::to_string(set_wrong) + " wrong"};
}

Outcome sequence_anchor() {
  const auto t0 = Clock::now();
  const SequenceCount c = sequence_count(LayoutParams{5, 2, 12});
  const double secs = seconds_since(t0);
  const double diff = std::abs(c.printed_log10 - std::log10(7.28e79));
  return {diff <= 0.005 && secs < 1.0, "10^" + fmt("%.4f", c.printed_log10) + " = " +
                                           fmt("%.3e", std::pow(10.0, c.printed_log10)) + ", |dlog10| " +
                                           fmt("%.2g", diff) + ", " + fmt("%.4f", secs) + " s"};
}

Outcome mp_anchor() {
  const auto t0 = Clock::now();
  const double mp = compute_mp(WarehouseGraph(LayoutParams{3, 2, 10}));
  const double secs = seconds_since(t0);
  return {mp >= 808 && mp <= 1094 && secs < 5.0, "MP " + format_real(mp) + ", " + fmt("%.3f", secs) + " s"};
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  int checks = 0;
  auto note = [&](double e) {
    worst = std::max(worst, e);
    ++checks;
  };
  for (int n : {2, 3, 5}) {
    const auto toy = fixture::toy_state(n, 10 + static_cast<std::uint64_t>(n));
    for (Architecture a : {Architecture::Full, Architecture::GnnOnly, Architecture::TransformerOnly}) {
      Agent agent(fixture::small_model(a), 40 + static_cast<std::uint64_t>(n));
      const auto actor = agent.actor.parameters();
      for (Param* p : actor) p->zero_grad();
      {
        Tape tape;
        tape.backward(ad::pick(agent.actor.log_probs(tape, toy.obs, toy.ctx), 0, n - 1));
      }
      note(refnet::max_rel_error(
          [&](const refnet::ParamMap& p) {
            return refnet::actor_log_probs(p, agent.config, toy.obs, toy.ctx)[static_cast<std::size_t>(n - 1)];
          },
          actor));
      const auto critic = agent.critic.parameters();
      for (Param* p : critic) p->zero_grad();
      {
        Tape tape;
        tape.backward(agent.critic.value(tape, toy.obs, toy.ctx));
      }
      note(refnet::max_rel_error(
          [&](const refnet::ParamMap& p) { return refnet::critic_value(p, agent.config, toy.obs, toy.ctx); }, critic));
    }
  }

  // Full PPO losses on a frozen buffer whose records hold 2, 3 and 5 tokens.
  for (Architecture a : {Architecture::Full, Architecture::GnnOnly, Architecture::TransformerOnly}) {
    Agent agent(fixture::small_model(a), 17);
    RolloutBuffer buf;
    GraphContext ctx;
    const int sizes[] = {2, 3, 5, 3, 2};
    const double shifts[] = {0.05, -0.1, 0.4, -0.35, 0.0};
    for (int k = 0; k < 5; ++k) {
      const auto toy = fixture::toy_state(sizes[k], 30 + static_cast<std::uint64_t>(k));
      ctx = toy.ctx;
      TransitionRecord r;
      r.obs = toy.obs;
      r.action = k % sizes[k];
      const Eigen::VectorXd probs = agent.actor.probabilities(r.obs, ctx);
      r.log_prob = std::log(probs(r.action)) + shifts[k];
      r.reward = -0.1 * k;
      r.value = agent.critic.value(r.obs, ctx);
      r.next_value = 0.3 - 0.05 * k;
      r.done = k == 4;
      if (r.done) r.next_value = 0.0;
      buf.records.push_back(r);
    }
    compute_advantages(buf, 0.99);
    const std::vector<double> adv{0.7, -1.3, 0.4, -0.2, 1.1};
    const std::size_t idx[] = {0, 1, 2, 3, 4};
    for (double ent : {0.0, 0.01}) {
      PpoConfig cfg;
      cfg.entropy_coef = ent;
      const auto actor = agent.actor.parameters();
      for (Param* p : actor) p->zero_grad();
      {
        Tape tape;
        tape.backward(policy_loss(tape, buf, idx, adv, agent.actor, cfg, ctx));
      }
      note(refnet::max_rel_error(
          [&](const refnet::ParamMap& p) { return refnet::policy_loss(p, agent.config, buf, adv, cfg, ctx); }, actor));
    }
    PpoConfig cfg;
    const auto critic = agent.critic.parameters();
    for (Param* p : critic) p->zero_grad();
    {
      Tape tape;
      tape.backward(value_loss(tape, buf, idx, agent.critic, cfg, ctx));
    }
    note(refnet::max_rel_error(
        [&](const refnet::ParamMap& p) { return refnet::value_loss(p, agent.config, buf, cfg, ctx); }, critic));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs < 60.0, std::to_string(checks) + " gradient checks, max relative error " +
                                            fmt("%.2e", worst) + ", " + fmt("%.1f", secs) + " s"};
}

Outcome permutation_laws() {
  double worst_p = 0.0, worst_v = 0.0;
  int argmax_moves = 0;
  for (int n : {2, 3, 5, 6}) {
    const auto toy = fixture::toy_state(n, 50 + static_cast<std::uint64_t>(n));
    Agent agent(ModelConfig{}, 123);
    const Eigen::VectorXd base = agent.actor.probabilities(toy.obs, toy.ctx);
    const double v = agent.critic.value(toy.obs, toy.ctx);
    Rng rng(static_cast<std::uint64_t>(n) * 7);
    for (int t = 0; t < 100; ++t) {
      const auto perm = oracle::random_permutation(n, rng);
      Observation o = toy.obs;
      for (int k = 0; k < n; ++k) {
        o.tokens[static_cast<std::size_t>(k)] = toy.obs.tokens[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])];
      }
      const Eigen::VectorXd p = agent.actor.probabilities(o, toy.ctx);
      for (int k = 0; k < n; ++k) worst_p = std::max(worst_p, std::abs(p(k) - base(perm[static_cast<std::size_t>(k)])));
      worst_v = std::max(worst_v, std::abs(agent.critic.value(o, toy.ctx) - v));
      if (perm[argmax_index(p)] != static_cast<int>(argmax_index(base))) ++argmax_moves;
    }
  }
  return {worst_p <= 1e-12 && worst_v <= 1e-12 && argmax_moves == 0,
          "400 permutations, max |dp| " + fmt("%.2g", worst_p) + ", max |dV| " + fmt("%.2g", worst_v)};
}

Outcome heuristic_pattern() {
  const auto t0 = Clock::now();
  BenchmarkSpec spec;
  spec.layouts = {{5, 2, 12}};
  spec.configs = {{0.125, 0.75}};
  spec.repetitions = 10;
  spec.policies = {"stt", "edd", "lst", "random"};
  spec.base_seed = 11;
  const auto summary = summarize(run_benchmark(spec));
  const double secs = seconds_since(t0);
  double random = 0.0;
  for (const auto& s : summary) {
    if (s.policy == "random") random = s.mean;
  }
  bool ok = secs < 60.0;
  std::string detail;
  for (const auto& s : summary) {
    detail += s.policy + " " + fmt("%.1f", s.mean) + ", ";
    if (s.policy != "random" && !(random >= 2.0 * s.mean)) ok = false;
  }
  return {ok, detail + fmt("%.1f", secs) + " s"};
}

Outcome desk_training() {
  const auto t0 = Clock::now();
  const WarehouseGraph graph(LayoutParams{2, 1, 6});
  const DueDateConfig config{0.125, 0.75};
  const Instance reference = generate_instance(graph, config, 1);
  PpoConfig ppo;
  ppo.episodes = 3000;
  TrainOptions opts;
  opts.seed = 0;
  const TrainResult trained = train(reference, ModelConfig{}, ppo, opts);
  const double final_avg = trained.curve.back().running_avg;

  // Held-out evaluation episodes: 20 fresh due-date draws.
  BenchmarkSpec spec;
  spec.layouts = {graph.params()};
  spec.configs = {config};
  spec.repetitions = 20;
  spec.policies = {"stt", "edd", "lst", "random"};
  spec.base_seed = 7;
  const auto summary = summarize(run_benchmark(spec));
  double random = 0.0, best = 1e300;
  for (const auto& s : summary) {
    if (s.policy == "random") {
      random = s.mean;
    } else {
      best = std::min(best, s.mean);
    }
  }

  // Greedy play of the trained actor on the same held-out instances, for the log.
  NetworkPolicy greedy(trained.agent->actor, true);
  auto g = std::make_shared<const WarehouseGraph>(graph.params());
  double greedy_sum = 0.0;
  for (int rep = 0; rep < spec.repetitions; ++rep) {
    const std::uint64_t seed = cell_seed(spec.base_seed, graph.params(), config, rep);
    const Environment env(g, generate_instance(graph, config, seed, reference.mp));
    greedy_sum += run_episode(greedy, env, episode_seed(seed)).total_tardiness;
  }
  const double secs = seconds_since(t0);

  const bool ok = final_avg <= 0.5 * random && final_avg <= 1.5 * best;
  return {ok, "final avg20 " + fmt("%.2f", final_avg) + " vs random/2 " + fmt("%.2f", 0.5 * random) +
                  " and 1.5 x best heuristic " + fmt("%.2f", 1.5 * best) + "; greedy held-out mean " +
                  fmt("%.2f", greedy_sum / spec.repetitions) + "; " + std::to_string(trained.curve.size()) +
                  " episodes, " + fmt("%.0f", secs) + " s"};
}

Outcome latency() {
  auto graph = std::make_shared<const WarehouseGraph>(LayoutParams{5, 2, 12});
  const Environment env(graph, generate_instance(*graph, DueDateConfig{0.125, 0.75}, 3));
  Agent agent(ModelConfig{}, 5);
  NetworkPolicy greedy(agent.actor, true);
  const EpisodeResult r = run_episode(greedy, env, 1);
  return {r.wall_ms_per_decision <= 150.0, fmt("%.2f", r.wall_ms_per_decision) + " ms per decision over " +
                                               std::to_string(r.decisions) + " decisions"};
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "mdr_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::vector<std::string> broken;

  // Instance files.
  for (const LayoutParams& p : {LayoutParams{2, 1, 6}, LayoutParams{3, 2, 10}, LayoutParams{5, 2, 12}}) {
    const WarehouseGraph g(p);
    save_instance(generate_instance(g, DueDateConfig{0.25, 1.0}, 77), (dir / "a.json").string());
    save_instance(generate_instance(g, DueDateConfig{0.25, 1.0}, 77), (dir / "b.json").string());
    if (slurp(dir / "a.json") != slurp(dir / "b.json")) broken.push_back("instance " + p.to_string());
  }

  // Rollouts.
  auto graph = std::make_shared<const WarehouseGraph>(LayoutParams{2, 1, 6});
  const Environment env(graph, generate_instance(*graph, DueDateConfig{}, 4));
  const GraphContext ctx = make_context(*graph, env.instance().mp);
  const EnvironmentSource source = [&](std::size_t) -> const Environment& { return env; };
  auto rollout_text = [&]() {
    Agent agent(ModelConfig{}, 31);
    Rng rng(8);
    const RolloutBuffer b = collect_rollout(source, agent, ctx, 200, 1.0 / env.instance().mp, rng);
    std::ostringstream out;
    for (const auto& r : b.records) {
      out << r.action << ' ' << format_real(r.log_prob) << ' ' << format_real(r.reward) << ' ' << format_real(r.value)
          << ' ' << format_real(r.next_value) << ' ' << r.done << '\n';
    }
    return out.str();
  };
  if (rollout_text() != rollout_text()) broken.push_back("rollout");

  // Benchmark reports, timing columns excluded.
  BenchmarkSpec spec;
  spec.layouts = {{2, 1, 6}, {3, 1, 8}};
  spec.configs = {{0.125, 0.75}, {0.25, 1.0}};
  spec.repetitions = 3;
  spec.policies = {"stt", "edd", "lst", "random"};
  spec.base_seed = 5;
  std::string reports[2];
  for (int k = 0; k < 2; ++k) {
    const auto rows = run_benchmark(spec);
    const fs::path out = dir / ("bench" + std::to_string(k));
    emit_report(rows, out.string());
    reports[k] = results_csv(rows, false) + slurp(out / "summary.csv") + slurp(out / "improvement.csv") +
                 slurp(out / "summary_table.tsv");
  }
  if (reports[0] != reports[1]) broken.push_back("benchmark");
  fs::remove_all(dir);

  std::string detail = "instance files, rollouts and benchmark CSVs";
  if (!broken.empty()) {
    detail += "; differing:";
    for (const auto& b : broken) detail += " " + b;
  }
  return {broken.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string only = argc > 1 ? argv[1] : "";
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks = {
      {"reward_identity", reward_identity},   {"item_counts", item_counts},
      {"routing_oracle", routing_oracle},     {"sequence_count_anchor", sequence_anchor},
      {"mp_anchor", mp_anchor},               {"gradient_suite", gradient_suite},
      {"permutation_laws", permutation_laws}, {"heuristic_pattern", heuristic_pattern},
      {"desk_training", desk_training},       {"latency", latency},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, run] : checks) {
    if (!only.empty() && name.find(only) == std::string::npos) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
