#ifndef MDR_HEURISTICS_HPP_
#define MDR_HEURISTICS_HPP_

#include <memory>
#include <span>
#include <string>

#include "mdr/environment.hpp"
#include "mdr/rng.hpp"

namespace mdr {

enum class DispatchRule { STT, EDD, LST, Random };

/// "stt", "edd", "lst", "random".
std::string rule_name(DispatchRule rule);
DispatchRule parse_rule(const std::string& name);

/// Anything that picks one of the legal actions at a decision point.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual Action decide(const Environment& env, const SimState& state, std::span<const Action> legal,
                        Rng& rng) = 0;
  virtual std::string name() const = 0;
};

/// Slack of an item: d - (t + l / v).
inline double slack_time(double due, Clock now, int distance, double speed) {
  return due - (static_cast<double>(now) + static_cast<double>(distance) / speed);
}

/// Rule-based choice. All argmins break ties by the lowest node id.
///
///  STT    nearest target in both phases.
///  EDD    earliest due date; nearest I/O when loaded.
///  LST    smallest slack, with l the distance from the item to its nearest
///         I/O point under current occupancy; nearest I/O when loaded.
///  Random uniform over the legal actions (the only rule that draws from rng).
Action decide(DispatchRule rule, const Environment& env, const SimState& state, std::span<const Action> legal,
              Rng& rng);

class RulePolicy final : public Policy {
 public:
  explicit RulePolicy(DispatchRule rule) : rule_(rule) {}
  Action decide(const Environment& env, const SimState& state, std::span<const Action> legal,
                Rng& rng) override {
    return mdr::decide(rule_, env, state, legal, rng);
  }
  std::string name() const override { return rule_name(rule_); }
  DispatchRule rule() const { return rule_; }

 private:
  DispatchRule rule_;
};

}  // namespace mdr

#endif  // MDR_HEURISTICS_HPP_
