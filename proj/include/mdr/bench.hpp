#ifndef MDR_BENCH_HPP_
#define MDR_BENCH_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mdr/environment.hpp"
#include "mdr/heuristics.hpp"
#include "mdr/instance.hpp"
#include "mdr/layout.hpp"
#include "mdr/policy_net.hpp"

namespace mdr {

/// Benchmark grid, read from JSON:
///
///   {"layouts": [[dl, na, nl], ...], "configs": [[r, R], ...],
///    "repetitions": 10, "policies": ["stt", "edd", "lst", "random", "ckpt:<path>"],
///    "base_seed": 42}
///
/// `repetitions` and `base_seed` are optional (10 and 0).
struct BenchmarkSpec {
  std::vector<LayoutParams> layouts;
  std::vector<DueDateConfig> configs;
  int repetitions = 10;
  std::vector<std::string> policies;
  std::uint64_t base_seed = 0;

  void validate() const;
  static BenchmarkSpec from_json(const std::string& text);
  static BenchmarkSpec load(const std::string& path);
};

struct ResultRow {
  LayoutParams layout;
  DueDateConfig config;
  int rep = 0;
  std::string policy;
  std::uint64_t seed = 0;  // due-date seed, shared by every policy of the cell
  std::uint64_t instance_hash = 0;
  double total_tardiness = 0.0;
  double wall_ms_total = 0.0;
  double wall_ms_per_decision = 0.0;
};

struct EpisodeResult {
  double total_tardiness = 0.0;
  int decisions = 0;
  double wall_ms_total = 0.0;
  double wall_ms_per_decision = 0.0;  // mean time inside Policy::decide
  SimState final_state;
};

/// Drives one episode from reset(seed) to Done. Rule and network policies draw
/// from an rng derived from `seed`. An illegal action raises ContractViolation.
EpisodeResult run_episode(Policy& policy, const Environment& env, std::uint64_t seed);

/// "stt" | "edd" | "lst" | "random" | "ckpt:<path>" (greedy actor). Loading a
/// checkpoint happens here, so a bad path fails before anything runs.
std::unique_ptr<Policy> make_policy(const std::string& spec);

/// Due-date seed of one (layout, config, repetition) cell.
std::uint64_t cell_seed(std::uint64_t base_seed, const LayoutParams& layout, const DueDateConfig& config, int rep);
/// Reset seed used for every policy's episode in a cell.
std::uint64_t episode_seed(std::uint64_t cell);

/// Runs the grid in (layout, config, repetition, policy) order.
std::vector<ResultRow> run_benchmark(const BenchmarkSpec& spec);

struct SummaryRow {
  LayoutParams layout;
  DueDateConfig config;
  std::string policy;
  int count = 0;
  double mean = 0.0;
  double min = 0.0;
};

/// Mean and min per (layout, config, policy), in first-appearance order.
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

/// (min(edd, stt) - agent) / min(edd, stt) * 100; nullopt when the denominator is 0.
std::optional<double> improvement_ratio(double tt_agent, double tt_edd, double tt_stt);

struct SequenceCount {
  double printed_log10 = 0.0;  // N! / ((N_A N_L)!)^{D_L}
  double oracle_log10 = 0.0;   // N! / (D_L!)^{N_A N_L}
};

SequenceCount sequence_count(const LayoutParams& layout);

/// log10 of the number of ways to interleave lanes that must each be emptied
/// in a fixed order: (sum n_i)! / prod n_i!.
double lifo_interleavings_log10(std::span<const int> lane_sizes);

/// Writes results.csv, summary.csv, improvement.csv and summary_table.tsv into `dir`.
void emit_report(const std::vector<ResultRow>& rows, const std::string& dir);

std::string results_csv(const std::vector<ResultRow>& rows, bool include_timing = true);
std::string summary_csv(const std::vector<SummaryRow>& summary);
std::string improvement_csv(const std::vector<SummaryRow>& summary);
std::string summary_table_tsv(const std::vector<SummaryRow>& summary);

}  // namespace mdr

#endif  // MDR_BENCH_HPP_
