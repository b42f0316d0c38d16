#ifndef MDR_ENVIRONMENT_HPP_
#define MDR_ENVIRONMENT_HPP_

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "mdr/core.hpp"
#include "mdr/instance.hpp"
#include "mdr/layout.hpp"
#include "mdr/routing.hpp"

namespace mdr {

enum class Phase { SelectItem, SelectIO, Done };

const char* phase_name(Phase phase);

struct Action {
  enum class Kind { SelectItem, SelectIO };
  Kind kind = Kind::SelectItem;
  NodeId target = kNoNode;

  static Action item(NodeId node) { return {Kind::SelectItem, node}; }
  static Action io(NodeId node) { return {Kind::SelectIO, node}; }

  friend bool operator==(const Action&, const Action&) = default;
};

struct Completion {
  ItemId item = kNoItem;
  Clock time = 0;  // C_i, the unload instant
  double due = 0.0;

  friend bool operator==(const Completion&, const Completion&) = default;
};

/// Dynamic state of one episode. A plain value: copy it to branch.
///
/// Items are identified by the storage node they occupied at reset.
struct SimState {
  Occupancy occupancy;
  NodeId shuttle_node = kNoNode;
  std::optional<ItemId> carried;
  Clock clock = 0;
  Phase phase = Phase::SelectItem;
  std::vector<Completion> completions;
  double frozen_tardiness = 0.0;
  double last_tt = 0.0;
  int stored = 0;

  friend bool operator==(const SimState&, const SimState&) = default;
};

/// Node features, one row per graph node:
///   0 storage, 1 aisle, 2 I/O indicator, 3 y, 4 x,
///   5 due date of the item at the node (0 if none),
///   6 shuttle status (+1 loaded, -1 empty, 0 absent), 7 clock.
inline constexpr int kFeatureDim = 8;
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, kFeatureDim, Eigen::RowMajor>;

struct StepInfo {
  Clock clock_delta = 0;
  int travel_distance = 0;
};

struct StepOutcome {
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

/// Terminal bonus granted when an episode finishes with zero total tardiness.
inline constexpr double kOptimalBonus = 100.0;

/// The retrieval MDP over one graph and one set of due dates.
///
/// Transitions are deterministic; only reset() consumes randomness (the start
/// I/O point). Safe to share across threads: all methods are const.
class Environment {
 public:
  Environment(std::shared_ptr<const WarehouseGraph> graph, Instance instance);

  const WarehouseGraph& graph() const { return *graph_; }
  const std::shared_ptr<const WarehouseGraph>& graph_ptr() const { return graph_; }
  const Instance& instance() const { return instance_; }
  double due_date(ItemId item) const { return due_.at(static_cast<std::size_t>(item)); }

  /// Fully occupied tier; shuttle at a uniformly drawn I/O point.
  SimState reset(std::uint64_t seed) const;
  SimState reset_at(NodeId start_io) const;
  /// Arbitrary occupancy (items keyed by their node). Used for partial states.
  SimState reset_with(Occupancy occupancy, NodeId start) const;

  /// SelectItem: accessible items by node id. SelectIO: all I/O nodes by id.
  /// Throws ContractViolation once Done.
  std::vector<Action> legal_actions(const SimState& state) const;

  /// Applies a legal action. Throws ContractViolation for an illegal one; the
  /// input state is never modified.
  std::pair<SimState, StepOutcome> step(const SimState& state, const Action& action) const;

  FeatureMatrix encode(const SimState& state) const;

  /// Frozen tardiness of completed items plus the tardiness accrued so far by
  /// every outstanding item (stored or carried) at the current clock.
  double tardiness_now(const SimState& state) const;

 private:
  std::shared_ptr<const WarehouseGraph> graph_;
  Instance instance_;
  std::vector<double> due_;
};

/// Sum over completions of max(0, C_i - d_i). Requires phase Done.
double total_tardiness(const SimState& state);

/// Episode log: one CSV line per decision with columns
/// `clock,phase,action,reward`, where clock is the post-action clock, phase the
/// phase in which the decision was taken, and action `item:<node>` or
/// `io:<node>`.
class EpisodeLog {
 public:
  explicit EpisodeLog(std::ostream& out);
  void record(const SimState& before, const Action& action, const SimState& after, const StepOutcome& outcome);

 private:
  std::ostream& out_;
};

}  // namespace mdr

#endif  // MDR_ENVIRONMENT_HPP_
