#include "mdr/environment.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

#include "mdr/rng.hpp"
#include "mdr/text.hpp"

namespace mdr {

const char* phase_name(Phase phase) {
  switch (phase) {
    case Phase::SelectItem: return "select_item";
    case Phase::SelectIO: return "select_io";
    case Phase::Done: return "done";
  }
  return "?";
}

Environment::Environment(std::shared_ptr<const WarehouseGraph> graph, Instance instance)
    : graph_(std::move(graph)), instance_(std::move(instance)) {
  if (!graph_) throw std::invalid_argument("environment: null graph");
  if (!(graph_->params().lane_depth == instance_.layout.lane_depth &&
        graph_->params().num_aisles == instance_.layout.num_aisles &&
        graph_->params().lanes_per_aisle == instance_.layout.lanes_per_aisle)) {
    throw std::invalid_argument("environment: instance layout " + instance_.layout.to_string() +
                                " does not match graph layout " + graph_->params().to_string());
  }
  due_.assign(graph_->num_nodes(), 0.0);
  for (NodeId s : graph_->storage_nodes()) {
    auto it = instance_.due_dates.find(s);
    if (it == instance_.due_dates.end()) {
      throw std::invalid_argument("environment: storage node " + std::to_string(s) + " has no due date");
    }
    due_[static_cast<std::size_t>(s)] = it->second;
  }
}

SimState Environment::reset(std::uint64_t seed) const {
  Rng rng(seed);
  const auto& io = graph_->io_nodes();
  return reset_at(io[uniform_index(rng, io.size())]);
}

SimState Environment::reset_at(NodeId start_io) const {
  Occupancy occupancy(graph_->num_nodes(), kNoItem);
  for (NodeId s : graph_->storage_nodes()) occupancy[static_cast<std::size_t>(s)] = s;
  return reset_with(std::move(occupancy), start_io);
}

SimState Environment::reset_with(Occupancy occupancy, NodeId start) const {
  if (occupancy.size() != graph_->num_nodes()) throw std::invalid_argument("reset_with: occupancy size mismatch");
  if (!graph_->contains(start)) throw std::invalid_argument("reset_with: unknown start node");
  SimState s;
  s.occupancy = std::move(occupancy);
  for (std::size_t v = 0; v < s.occupancy.size(); ++v) {
    const ItemId item = s.occupancy[v];
    if (item == kNoItem) continue;
    if (!graph_->is_storage(static_cast<NodeId>(v)) || !graph_->contains(item) ||
        !graph_->is_storage(item)) {
      throw std::invalid_argument("reset_with: item placed on a non-storage node");
    }
    ++s.stored;
  }
  if (graph_->is_storage(start) && s.occupancy[static_cast<std::size_t>(start)] != kNoItem) {
    throw std::invalid_argument("reset_with: shuttle cannot start on an occupied cell");
  }
  s.shuttle_node = start;
  s.phase = s.stored > 0 ? Phase::SelectItem : Phase::Done;
  return s;
}

std::vector<Action> Environment::legal_actions(const SimState& state) const {
  std::vector<Action> out;
  switch (state.phase) {
    case Phase::SelectItem:
      for (NodeId v : accessible_items(*graph_, state.occupancy)) out.push_back(Action::item(v));
      break;
    case Phase::SelectIO:
      for (NodeId v : graph_->io_nodes()) out.push_back(Action::io(v));
      break;
    case Phase::Done:
      throw ContractViolation("legal_actions: episode is done");
  }
  return out;
}

double Environment::tardiness_now(const SimState& state) const {
  double outstanding = 0.0;
  const double t = static_cast<double>(state.clock);
  for (std::size_t v = 0; v < state.occupancy.size(); ++v) {
    const ItemId item = state.occupancy[v];
    if (item != kNoItem) outstanding += std::max(0.0, t - due_[static_cast<std::size_t>(item)]);
  }
  if (state.carried) outstanding += std::max(0.0, t - due_[static_cast<std::size_t>(*state.carried)]);
  return state.frozen_tardiness + outstanding;
}

std::pair<SimState, StepOutcome> Environment::step(const SimState& state, const Action& action) const {
  const auto legal = legal_actions(state);
  if (std::find(legal.begin(), legal.end(), action) == legal.end()) {
    throw ContractViolation(std::string("step: illegal action ") +
                            (action.kind == Action::Kind::SelectItem ? "item:" : "io:") +
                            std::to_string(action.target) + " in phase " + phase_name(state.phase));
  }

  SimState next = state;
  StepOutcome outcome;
  const std::optional<NodeId> exempt =
      action.kind == Action::Kind::SelectItem ? std::optional<NodeId>(action.target) : std::nullopt;
  const auto path = shortest_path(*graph_, state.occupancy, state.shuttle_node, action.target, exempt);
  if (!path) throw std::logic_error("step: legal target unreachable");

  outcome.info.travel_distance = path->distance;
  outcome.info.clock_delta = path->distance + 1;
  next.clock += outcome.info.clock_delta;
  next.shuttle_node = action.target;

  if (action.kind == Action::Kind::SelectItem) {
    auto& cell = next.occupancy[static_cast<std::size_t>(action.target)];
    next.carried = cell;
    cell = kNoItem;
    --next.stored;
    next.phase = Phase::SelectIO;
  } else {
    const ItemId item = *next.carried;
    const double due = due_[static_cast<std::size_t>(item)];
    next.completions.push_back(Completion{item, next.clock, due});
    next.frozen_tardiness += std::max(0.0, static_cast<double>(next.clock) - due);
    next.carried.reset();
    next.phase = next.stored > 0 ? Phase::SelectItem : Phase::Done;
  }

  const double tt = tardiness_now(next);
  outcome.reward = -(tt - next.last_tt);
  next.last_tt = tt;
  outcome.done = next.phase == Phase::Done;
  if (outcome.done && tt == 0.0) outcome.reward += kOptimalBonus;
  return {std::move(next), outcome};
}

FeatureMatrix Environment::encode(const SimState& state) const {
  const auto n = static_cast<Eigen::Index>(graph_->num_nodes());
  FeatureMatrix f = FeatureMatrix::Zero(n, kFeatureDim);
  for (const Node& node : graph_->nodes()) {
    const Eigen::Index r = node.id;
    f(r, static_cast<int>(node.kind)) = 1.0;
    f(r, 3) = node.y;
    f(r, 4) = node.x;
    const ItemId item = state.occupancy[static_cast<std::size_t>(node.id)];
    if (item != kNoItem) f(r, 5) = due_[static_cast<std::size_t>(item)];
    f(r, 7) = static_cast<double>(state.clock);
  }
  const Eigen::Index r = state.shuttle_node;
  f(r, 6) = state.carried ? 1.0 : -1.0;
  if (state.carried) f(r, 5) = due_[static_cast<std::size_t>(*state.carried)];
  return f;
}

double total_tardiness(const SimState& state) {
  if (state.phase != Phase::Done) throw ContractViolation("total_tardiness: episode is not done");
  double tt = 0.0;
  for (const Completion& c : state.completions) tt += std::max(0.0, static_cast<double>(c.time) - c.due);
  return tt;
}

EpisodeLog::EpisodeLog(std::ostream& out) : out_(out) { out_ << "clock,phase,action,reward\n"; }

void EpisodeLog::record(const SimState& before, const Action& action, const SimState& after,
                        const StepOutcome& outcome) {
  out_ << after.clock << ',' << phase_name(before.phase) << ','
       << (action.kind == Action::Kind::SelectItem ? "item:" : "io:") << action.target << ',' << format_real(outcome.reward) << '\n';
}

}  // namespace mdr
