#ifndef MDR_ROUTING_HPP_
#define MDR_ROUTING_HPP_

#include <optional>
#include <vector>

#include "mdr/core.hpp"
#include "mdr/layout.hpp"

namespace mdr {

// Item stored at each node, kNoItem when empty. Indexed by node id; entries of
// non-storage nodes are always kNoItem.
using Occupancy = std::vector<ItemId>;

struct PathResult {
  int distance = 0;
  std::vector<NodeId> path;  // source..target inclusive
};

/// Occupancy-aware shortest path under unit edge weights (Dijkstra).
///
/// Aisle and I/O nodes are always traversable. A storage node is traversable
/// iff it is empty or equals `exempt` (the pickup target). The source is always
/// allowed. Ties are broken by expanding the lowest (distance, id) first, so the
/// returned path is deterministic. Returns nullopt when unreachable.
std::optional<PathResult> shortest_path(const WarehouseGraph& graph, const Occupancy& occupancy, NodeId from,
                                        NodeId to, std::optional<NodeId> exempt = std::nullopt);

/// Distances from `source` to every traversable node (no exemption); -1 where
/// unreachable or blocked.
std::vector<int> distances_from(const WarehouseGraph& graph, const Occupancy& occupancy, NodeId source);

/// Multi-source variant seeded at every I/O node.
std::vector<int> distances_from_io(const WarehouseGraph& graph, const Occupancy& occupancy);

/// Distance to `target` given a distance field from `distances_from*`, treating
/// `target` as exempt. Equals the shortest_path distance with exempt=target.
/// Returns -1 when unreachable.
int distance_to(const WarehouseGraph& graph, const std::vector<int>& field, NodeId target);

/// Occupied storage nodes that can be reached from an aisle without crossing
/// another occupied cell: the front item at each open end of every lane.
/// Sorted by node id.
std::vector<NodeId> accessible_items(const WarehouseGraph& graph, const Occupancy& occupancy);

}  // namespace mdr

#endif  // MDR_ROUTING_HPP_
