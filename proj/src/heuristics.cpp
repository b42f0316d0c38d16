#include "mdr/heuristics.hpp"

#include <limits>
#include <stdexcept>

#include "mdr/routing.hpp"

namespace mdr {
namespace {

// Index minimizing (key(action), target).
template <typename Key>
std::size_t argmin(std::span<const Action> legal, Key key) {
  std::size_t best = 0;
  double best_key = key(legal[0]);
  for (std::size_t k = 1; k < legal.size(); ++k) {
    const double v = key(legal[k]);
    if (v < best_key || (v == best_key && legal[k].target < legal[best].target)) {
      best_key = v;
      best = k;
    }
  }
  return best;
}

double unreachable_guard(int d) {
  return d < 0 ? std::numeric_limits<double>::max() : static_cast<double>(d);
}

Action nearest(const Environment& env, const SimState& state, std::span<const Action> legal) {
  const auto field = distances_from(env.graph(), state.occupancy, state.shuttle_node);
  return legal[argmin(legal, [&](const Action& a) {
    return unreachable_guard(distance_to(env.graph(), field, a.target));
  })];
}

}  // namespace

std::string rule_name(DispatchRule rule) {
  switch (rule) {
    case DispatchRule::STT: return "stt";
    case DispatchRule::EDD: return "edd";
    case DispatchRule::LST: return "lst";
    case DispatchRule::Random: return "random";
  }
  return "?";
}

DispatchRule parse_rule(const std::string& name) {
  if (name == "stt") return DispatchRule::STT;
  if (name == "edd") return DispatchRule::EDD;
  if (name == "lst") return DispatchRule::LST;
  if (name == "random") return DispatchRule::Random;
  throw std::invalid_argument("unknown dispatch rule '" + name + "' (expected stt, edd, lst or random)");
}

Action decide(DispatchRule rule, const Environment& env, const SimState& state, std::span<const Action> legal,
              Rng& rng) {
  if (legal.empty()) throw ContractViolation("decide: no legal actions");
  if (rule == DispatchRule::Random) return legal[uniform_index(rng, legal.size())];
  if (rule == DispatchRule::STT || state.phase == Phase::SelectIO) return nearest(env, state, legal);

  if (rule == DispatchRule::EDD) {
    return legal[argmin(legal, [&](const Action& a) {
      return env.due_date(state.occupancy[static_cast<std::size_t>(a.target)]);
    })];
  }

  const auto io_field = distances_from_io(env.graph(), state.occupancy);
  const double speed = env.graph().params().shuttle_speed;
  return legal[argmin(legal, [&](const Action& a) {
    const ItemId item = state.occupancy[static_cast<std::size_t>(a.target)];
    return slack_time(env.due_date(item), state.clock, distance_to(env.graph(), io_field, a.target), speed);
  })];
}

}  // namespace mdr
