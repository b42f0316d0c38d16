// mdr: command-line front end for instance generation, solving, training and
// benchmarking.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>

#include "mdr/bench.hpp"
#include "mdr/environment.hpp"
#include "mdr/instance.hpp"
#include "mdr/layout.hpp"
#include "mdr/ppo.hpp"
#include "mdr/text.hpp"

namespace {

using namespace mdr;

int cmd_gen(const std::string& layout_text, const std::string& config_text, std::uint64_t seed,
            const std::string& out) {
  const WarehouseGraph graph(LayoutParams::parse(layout_text));
  const Instance inst = generate_instance(graph, DueDateConfig::parse(config_text), seed);
  if (out.empty() || out == "-") {
    std::cout << instance_to_json(inst);
  } else {
    save_instance(inst, out);
    std::cerr << "wrote " << out << " (" << inst.num_items() << " items, MP " << format_real(inst.mp) << ")\n";
  }
  return 0;
}

int cmd_mp(const std::string& layout_text) {
  const WarehouseGraph graph(LayoutParams::parse(layout_text));
  std::cout << format_real(compute_mp(graph)) << '\n';
  return 0;
}

int cmd_solve(const std::string& policy_spec, const std::string& instance_path, std::uint64_t seed,
              const std::string& log_path) {
  auto policy = make_policy(policy_spec);
  const Instance inst = load_instance(instance_path);
  const Environment env(std::make_shared<const WarehouseGraph>(inst.layout), inst);
  const EpisodeResult r = run_episode(*policy, env, seed);
  if (!log_path.empty()) {
    // Replay the completions as a log of unload events.
    std::ofstream out(log_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write log '" + log_path + "'");
    out << "item,completion,due,tardiness\n";
    for (const Completion& c : r.final_state.completions) {
      out << c.item << ',' << c.time << ',' << format_real(c.due) << ','
          << format_real(std::max(0.0, static_cast<double>(c.time) - c.due)) << '\n';
    }
  }
  std::cout << "policy=" << policy->name() << " total_tardiness=" << format_real(r.total_tardiness)
            << " makespan=" << r.final_state.clock << " decisions=" << r.decisions
            << " ms_per_decision=" << format_real(r.wall_ms_per_decision) << '\n';
  return 0;
}

struct TrainArgs {
  std::string layout = "2,1,6";
  std::string config = "0.125,0.75";
  std::string out;
  std::string arch = "full";
  std::uint64_t seed = 0;
  std::uint64_t instance_seed = 1;
  PpoConfig ppo;
  double reward_scale = 0.0;
  bool fixed_due_dates = false;
  bool quiet = false;
};

int cmd_train(TrainArgs& a) {
  const WarehouseGraph graph(LayoutParams::parse(a.layout));
  const Instance inst = generate_instance(graph, DueDateConfig::parse(a.config), a.instance_seed);
  ModelConfig model;
  model.variant = parse_architecture(a.arch);
  if (a.reward_scale > 0.0) a.ppo.reward_scale = a.reward_scale;
  a.ppo.resample_due_dates = !a.fixed_due_dates;
  TrainOptions opts;
  opts.seed = a.seed;
  opts.out_dir = a.out;
  if (!a.quiet) {
    opts.on_episode = [&](const CurvePoint& p) {
      if (p.episode % 50 == 0 || p.episode == a.ppo.episodes) {
        std::cerr << "episode " << p.episode << " tt " << format_real(p.total_tardiness) << " avg"
                  << a.ppo.eval_window << ' ' << format_real(p.running_avg) << '\n';
      }
    };
  }
  const TrainResult result = train(inst, model, a.ppo, opts);
  std::cout << "episodes=" << result.curve.size()
            << " final_running_avg=" << format_real(result.curve.back().running_avg) << '\n';
  return 0;
}

int cmd_bench(const std::string& spec_path, const std::string& out) {
  const BenchmarkSpec spec = BenchmarkSpec::load(spec_path);
  const auto rows = run_benchmark(spec);
  emit_report(rows, out);
  std::cout << summary_table_tsv(summarize(rows));
  return 0;
}

int cmd_count(const std::string& layout_text) {
  const SequenceCount c = sequence_count(LayoutParams::parse(layout_text));
  char buf[128];
  std::snprintf(buf, sizeof buf, "printed_log10=%.6f (%.4e)\noracle_log10=%.6f\n", c.printed_log10,
                std::pow(10.0, c.printed_log10), c.oracle_log10);
  std::cout << buf;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-deep storage retrieval: instances, heuristics, PPO agent, benchmarks"};
  app.require_subcommand(1);

  std::string layout, config, out, policy, instance, log, spec;
  std::uint64_t seed = 0;

  auto* gen = app.add_subcommand("gen", "Generate an instance file");
  gen->add_option("--layout", layout, "dl,na,nl")->required();
  gen->add_option("--config", config, "r,R")->required();
  gen->add_option("--seed", seed, "due-date seed");
  gen->add_option("--out", out, "output file (stdout when omitted)");

  auto* mp = app.add_subcommand("mp", "Print MP for a layout");
  mp->add_option("--layout", layout, "dl,na,nl")->required();

  auto* solve = app.add_subcommand("solve", "Run one episode with a policy");
  solve->add_option("--policy", policy, "stt|edd|lst|random|ckpt:<path>")->required();
  solve->add_option("--instance", instance, "instance file")->required()->check(CLI::ExistingFile);
  solve->add_option("--seed", seed, "episode seed");
  solve->add_option("--log", log, "write the completion log as CSV");

  TrainArgs targs;
  auto* train_cmd = app.add_subcommand("train", "Train the actor-critic with PPO");
  train_cmd->add_option("--layout", targs.layout, "dl,na,nl")->capture_default_str();
  train_cmd->add_option("--config", targs.config, "r,R")->capture_default_str();
  train_cmd->add_option("--episodes", targs.ppo.episodes)->capture_default_str();
  train_cmd->add_option("--out", targs.out, "directory for curve.csv and checkpoints")->required();
  train_cmd->add_option("--seed", targs.seed, "network and rollout seed")->capture_default_str();
  train_cmd->add_option("--instance-seed", targs.instance_seed, "seed of the reference instance")
      ->capture_default_str();
  train_cmd->add_option("--arch", targs.arch, "full|gnn_only|transformer_only")->capture_default_str();
  train_cmd->add_option("--lr", targs.ppo.lr)->capture_default_str();
  train_cmd->add_option("--batch-size", targs.ppo.batch_size)->capture_default_str();
  train_cmd->add_option("--minibatch-size", targs.ppo.minibatch_size, "<= 0 for full batch")->capture_default_str();
  train_cmd->add_option("--epochs", targs.ppo.epochs_per_batch)->capture_default_str();
  train_cmd->add_option("--gamma", targs.ppo.gamma)->capture_default_str();
  train_cmd->add_option("--clip", targs.ppo.clip)->capture_default_str();
  train_cmd->add_option("--entropy-coef", targs.ppo.entropy_coef)->capture_default_str();
  train_cmd->add_option("--reward-scale", targs.reward_scale, "0 means 1/MP")->capture_default_str();
  train_cmd->add_option("--checkpoint-every", targs.ppo.checkpoint_every)->capture_default_str();
  train_cmd->add_flag("--fixed-due-dates", targs.fixed_due_dates, "train on the reference instance only");
  train_cmd->add_flag("--quiet", targs.quiet);

  auto* bench = app.add_subcommand("bench", "Run a benchmark grid");
  bench->add_option("--spec", spec, "benchmark JSON")->required()->check(CLI::ExistingFile);
  bench->add_option("--out", out, "output directory")->required();

  auto* count = app.add_subcommand("count", "Retrieval sequence counts for a layout");
  count->add_option("--layout", layout, "dl,na,nl")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(layout, config, seed, out);
    if (mp->parsed()) return cmd_mp(layout);
    if (solve->parsed()) return cmd_solve(policy, instance, seed, log);
    if (train_cmd->parsed()) return cmd_train(targs);
    if (bench->parsed()) return cmd_bench(spec, out);
    if (count->parsed()) return cmd_count(layout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
