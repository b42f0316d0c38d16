#ifndef MDR_LAYOUT_HPP_
#define MDR_LAYOUT_HPP_

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mdr/core.hpp"

namespace mdr {

/// Dimensions of one warehouse tier.
///
/// Lanes run horizontally and cross-aisles vertically. Each aisle serves
/// `lanes_per_aisle / 2` lane rows on each side; lanes on the outer side of the
/// first and last aisle are dead-ends of `lane_depth` cells, lanes between two
/// adjacent aisles are open at both ends and hold `2 * lane_depth` cells.
struct LayoutParams {
  int lane_depth = 3;
  int num_aisles = 2;
  int lanes_per_aisle = 10;
  double shuttle_speed = 1.0;

  int lane_rows() const { return lanes_per_aisle / 2; }
  int num_items() const { return lane_depth * num_aisles * lanes_per_aisle; }

  /// Throws std::invalid_argument on zero, negative or odd-lane parameters.
  void validate() const;

  /// "dl,na,nl" form used on the command line.
  static LayoutParams parse(const std::string& text);
  std::string to_string() const;

  friend bool operator==(const LayoutParams&, const LayoutParams&) = default;
};

enum class NodeKind { Storage, Aisle, IO };

struct Node {
  NodeId id = kNoNode;
  NodeKind kind = NodeKind::Storage;
  int y = 0;
  int x = 0;
  std::optional<int> lane_id;
};

struct Lane {
  int id = 0;
  // Dead-end lanes: entrance to deepest. Open lanes: left end to right end.
  std::vector<NodeId> cells;
  // Aisle node(s) adjacent to the lane ends; same order as the cell ends.
  std::vector<NodeId> entrances;
  bool open_both_ends = false;
};

/// Static structure of a tier. Immutable after construction.
///
/// Node ids are assigned row-major over the full (y, x) grid. Rows
/// 1..lane_rows hold lanes and aisle nodes; rows 0 and height-1 are connector
/// rows (Aisle kind) joining the aisle columns, with the four I/O points at
/// their ends, i.e. at the corners of the tier.
class WarehouseGraph {
 public:
  explicit WarehouseGraph(const LayoutParams& params);

  const LayoutParams& params() const { return params_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const std::vector<Lane>& lanes() const { return lanes_; }
  const std::vector<std::pair<NodeId, NodeId>>& edges() const { return edges_; }
  // Sorted ascending per node.
  const std::vector<NodeId>& neighbors(NodeId id) const {
    return adjacency_.at(static_cast<std::size_t>(id));
  }
  const std::vector<NodeId>& io_nodes() const { return io_nodes_; }
  const std::vector<NodeId>& aisle_nodes() const { return aisle_nodes_; }
  const std::vector<NodeId>& storage_nodes() const { return storage_nodes_; }

  std::size_t num_nodes() const { return nodes_.size(); }
  bool contains(NodeId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < nodes_.size();
  }
  bool is_storage(NodeId id) const { return node(id).kind == NodeKind::Storage; }

  int height() const { return height_; }
  int width() const { return width_; }
  std::optional<NodeId> at(int y, int x) const;

 private:
  LayoutParams params_;
  int height_ = 0;
  int width_ = 0;
  std::vector<Node> nodes_;
  std::vector<Lane> lanes_;
  std::vector<std::pair<NodeId, NodeId>> edges_;
  std::vector<std::vector<NodeId>> adjacency_;
  std::vector<NodeId> io_nodes_;
  std::vector<NodeId> aisle_nodes_;
  std::vector<NodeId> storage_nodes_;
  std::vector<NodeId> grid_;
};

WarehouseGraph build_layout(const LayoutParams& params);

/// The 32 layouts of the generalization grid: D_L in {2..5}, N_A in {1,2},
/// N_L in {6,8,10,12}, ordered by D_L, then N_A, then N_L.
std::vector<LayoutParams> validation_layouts();

}  // namespace mdr

#endif  // MDR_LAYOUT_HPP_
