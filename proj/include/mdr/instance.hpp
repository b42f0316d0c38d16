#ifndef MDR_INSTANCE_HPP_
#define MDR_INSTANCE_HPP_

#include <cstdint>
#include <map>
#include <string>

#include "mdr/core.hpp"
#include "mdr/layout.hpp"
#include "mdr/routing.hpp"

namespace mdr {

/// Due-date tightness r and range R of the uniform due-date distribution.
struct DueDateConfig {
  double tightness = 0.125;
  double range = 0.75;

  void validate() const;
  /// "r,R" form used on the command line.
  static DueDateConfig parse(const std::string& text);

  double lower_bound(double mp) const;
  double upper_bound(double mp) const;

  friend bool operator==(const DueDateConfig&, const DueDateConfig&) = default;
};

struct Instance {
  LayoutParams layout;
  std::map<NodeId, double> due_dates;  // one entry per storage node
  double mp = 0.0;
  DueDateConfig config;
  std::uint64_t seed = 0;

  std::size_t num_items() const { return due_dates.size(); }
  /// FNV-1a over layout, mp, config and due-date bit patterns.
  std::uint64_t hash() const;

  friend bool operator==(const Instance&, const Instance&) = default;
};

/// Makespan of an STT rollout from `start` over the given occupancy, with
/// lowest-id tie-breaking. Due dates play no role.
Clock stt_makespan(const WarehouseGraph& graph, const Occupancy& occupancy, NodeId start);

/// MP: STT makespan of the fully occupied tier starting at io_nodes[0].
double compute_mp(const WarehouseGraph& graph);

/// Draws d_i ~ U(MP(1-r-R/2), MP(1-r+R/2)) i.i.d. per storage node (ascending
/// id order), clamped below at 0.
Instance generate_instance(const WarehouseGraph& graph, const DueDateConfig& config, std::uint64_t seed, double mp);
Instance generate_instance(const WarehouseGraph& graph, const DueDateConfig& config, std::uint64_t seed);

/// JSON round-trip. load_instance throws ParseError with the offending field
/// on malformed input, or when a due date names a non-storage node.
std::string instance_to_json(const Instance& instance);
Instance instance_from_json(const std::string& text);
void save_instance(const Instance& instance, const std::string& path);
Instance load_instance(const std::string& path);

}  // namespace mdr

#endif  // MDR_INSTANCE_HPP_
