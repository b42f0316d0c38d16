#include "mdr/routing.hpp"

#include <algorithm>
#include <functional>
#include <queue>
#include <stdexcept>
#include <utility>

namespace mdr {
namespace {

using QueueEntry = std::pair<int, NodeId>;
using MinQueue = std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>>;

void check_occupancy(const WarehouseGraph& graph, const Occupancy& occupancy) {
  if (occupancy.size() != graph.num_nodes()) {
    throw std::invalid_argument("routing: occupancy size " + std::to_string(occupancy.size()) +
                                " does not match node count " + std::to_string(graph.num_nodes()));
  }
}

bool traversable(const WarehouseGraph& graph, const Occupancy& occupancy, NodeId v, std::optional<NodeId> exempt) {
  if (!graph.is_storage(v)) return true;
  return occupancy[static_cast<std::size_t>(v)] == kNoItem || (exempt && *exempt == v);
}

// Dijkstra from one or more sources; fills dist and pred.
void run_dijkstra(const WarehouseGraph& graph, const Occupancy& occupancy, const std::vector<NodeId>& sources,
                  std::optional<NodeId> exempt, std::optional<NodeId> stop_at, std::vector<int>& dist,
                  std::vector<NodeId>& pred) {
  const std::size_t n = graph.num_nodes();
  dist.assign(n, -1);
  pred.assign(n, kNoNode);
  std::vector<bool> settled(n, false);
  MinQueue queue;
  for (NodeId s : sources) {
    dist[static_cast<std::size_t>(s)] = 0;
    queue.emplace(0, s);
  }
  while (!queue.empty()) {
    auto [d, u] = queue.top();
    queue.pop();
    const auto ui = static_cast<std::size_t>(u);
    if (settled[ui]) continue;
    settled[ui] = true;
    if (stop_at && *stop_at == u) return;
    for (NodeId v : graph.neighbors(u)) {
      const auto vi = static_cast<std::size_t>(v);
      if (settled[vi] || !traversable(graph, occupancy, v, exempt)) continue;
      const int nd = d + 1;
      if (dist[vi] < 0 || nd < dist[vi]) {
        dist[vi] = nd;
        pred[vi] = u;
        queue.emplace(nd, v);
      }
    }
  }
}

}  // namespace

std::optional<PathResult> shortest_path(const WarehouseGraph& graph, const Occupancy& occupancy, NodeId from,
                                        NodeId to, std::optional<NodeId> exempt) {
  check_occupancy(graph, occupancy);
  if (!graph.contains(from) || !graph.contains(to) || (exempt && !graph.contains(*exempt))) {
    throw std::invalid_argument("shortest_path: unknown node id (from=" + std::to_string(from) +
                                ", to=" + std::to_string(to) + ")");
  }
  if (from == to) return PathResult{0, {from}};
  if (!traversable(graph, occupancy, to, exempt)) return std::nullopt;

  std::vector<int> dist;
  std::vector<NodeId> pred;
  run_dijkstra(graph, occupancy, {from}, exempt, to, dist, pred);
  const int d = dist[static_cast<std::size_t>(to)];
  if (d < 0) return std::nullopt;

  PathResult result;
  result.distance = d;
  result.path.resize(static_cast<std::size_t>(d) + 1);
  NodeId cur = to;
  for (int k = d; k >= 0; --k) {
    result.path[static_cast<std::size_t>(k)] = cur;
    cur = pred[static_cast<std::size_t>(cur)];
  }
  return result;
}

std::vector<int> distances_from(const WarehouseGraph& graph, const Occupancy& occupancy, NodeId source) {
  check_occupancy(graph, occupancy);
  if (!graph.contains(source)) throw std::invalid_argument("distances_from: unknown node id " + std::to_string(source));
  std::vector<int> dist;
  std::vector<NodeId> pred;
  run_dijkstra(graph, occupancy, {source}, std::nullopt, std::nullopt, dist, pred);
  return dist;
}

std::vector<int> distances_from_io(const WarehouseGraph& graph, const Occupancy& occupancy) {
  check_occupancy(graph, occupancy);
  std::vector<int> dist;
  std::vector<NodeId> pred;
  run_dijkstra(graph, occupancy, graph.io_nodes(), std::nullopt, std::nullopt, dist, pred);
  return dist;
}

int distance_to(const WarehouseGraph& graph, const std::vector<int>& field, NodeId target) {
  const int direct = field.at(static_cast<std::size_t>(target));
  if (direct >= 0) return direct;
  int best = -1;
  for (NodeId v : graph.neighbors(target)) {
    const int d = field[static_cast<std::size_t>(v)];
    if (d >= 0 && (best < 0 || d + 1 < best)) best = d + 1;
  }
  return best;
}

std::vector<NodeId> accessible_items(const WarehouseGraph& graph, const Occupancy& occupancy) {
  check_occupancy(graph, occupancy);
  std::vector<NodeId> out;
  auto occupied = [&](NodeId v) { return occupancy[static_cast<std::size_t>(v)] != kNoItem; };
  for (const Lane& lane : graph.lanes()) {
    auto front = std::find_if(lane.cells.begin(), lane.cells.end(), occupied);
    if (front == lane.cells.end()) continue;
    out.push_back(*front);
    if (lane.open_both_ends) {
      auto back = std::find_if(lane.cells.rbegin(), lane.cells.rend(), occupied);
      if (*back != *front) out.push_back(*back);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace mdr
