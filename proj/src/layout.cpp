#include "mdr/layout.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <stdexcept>

namespace mdr {

void LayoutParams::validate() const {
  if (lane_depth < 1 || num_aisles < 1 || lanes_per_aisle < 2) {
    throw std::invalid_argument("layout: lane_depth, num_aisles must be >= 1 and lanes_per_aisle >= 2, got " +
                                to_string());
  }
  if (lanes_per_aisle % 2 != 0) {
    throw std::invalid_argument("layout: lanes_per_aisle must be even, got " + to_string());
  }
  if (!(shuttle_speed > 0.0)) {
    throw std::invalid_argument("layout: shuttle_speed must be positive");
  }
}

LayoutParams LayoutParams::parse(const std::string& text) {
  LayoutParams p;
  int* fields[] = {&p.lane_depth, &p.num_aisles, &p.lanes_per_aisle};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  for (int k = 0; k < 3; ++k) {
    auto [ptr, ec] = std::from_chars(first, last, *fields[k]);
    if (ec != std::errc{}) throw std::invalid_argument("layout: expected 'dl,na,nl', got '" + text + "'");
    first = ptr;
    if (k < 2) {
      if (first == last || *first != ',') throw std::invalid_argument("layout: expected 'dl,na,nl', got '" + text + "'");
      ++first;
    }
  }
  if (first != last) throw std::invalid_argument("layout: trailing characters in '" + text + "'");
  p.validate();
  return p;
}

std::string LayoutParams::to_string() const {
  std::ostringstream os;
  os << lane_depth << ',' << num_aisles << ',' << lanes_per_aisle;
  return os.str();
}

WarehouseGraph::WarehouseGraph(const LayoutParams& params) : params_(params) {
  params_.validate();
  const int depth = params_.lane_depth;
  const int rows = params_.lane_rows();
  height_ = rows + 2;
  width_ = params_.num_aisles * (2 * depth + 1);

  std::vector<int> aisle_x(static_cast<std::size_t>(params_.num_aisles));
  for (int a = 0; a < params_.num_aisles; ++a) aisle_x[static_cast<std::size_t>(a)] = depth + a * (2 * depth + 1);
  auto is_aisle_column = [&](int x) { return std::find(aisle_x.begin(), aisle_x.end(), x) != aisle_x.end(); };

  // Rows 0 and height-1 are perimeter connector rows spanning the full width;
  // their two end cells are the I/O points at the tier's corners.
  grid_.assign(static_cast<std::size_t>(height_ * width_), kNoNode);
  for (int y = 0; y < height_; ++y) {
    const bool perimeter = (y == 0 || y == height_ - 1);
    for (int x = 0; x < width_; ++x) {
      Node n;
      n.id = static_cast<NodeId>(nodes_.size());
      n.y = y;
      n.x = x;
      if (perimeter) {
        n.kind = (x == 0 || x == width_ - 1) ? NodeKind::IO : NodeKind::Aisle;
      } else {
        n.kind = is_aisle_column(x) ? NodeKind::Aisle : NodeKind::Storage;
      }
      grid_[static_cast<std::size_t>(y * width_ + x)] = n.id;
      switch (n.kind) {
        case NodeKind::IO: io_nodes_.push_back(n.id); break;
        case NodeKind::Aisle: aisle_nodes_.push_back(n.id); break;
        case NodeKind::Storage: storage_nodes_.push_back(n.id); break;
      }
      nodes_.push_back(n);
    }
  }

  adjacency_.resize(nodes_.size());
  auto connect = [&](NodeId a, NodeId b) {
    edges_.emplace_back(std::min(a, b), std::max(a, b));
    adjacency_[static_cast<std::size_t>(a)].push_back(b);
    adjacency_[static_cast<std::size_t>(b)].push_back(a);
  };
  auto id_at = [&](int y, int x) { return grid_[static_cast<std::size_t>(y * width_ + x)]; };

  auto add_lane = [&](std::vector<NodeId> cells, std::vector<NodeId> entrances, bool open) {
    Lane lane;
    lane.id = static_cast<int>(lanes_.size());
    for (std::size_t k = 0; k + 1 < cells.size(); ++k) connect(cells[k], cells[k + 1]);
    connect(cells.front(), entrances.front());
    if (open) connect(cells.back(), entrances.back());
    for (NodeId c : cells) nodes_[static_cast<std::size_t>(c)].lane_id = lane.id;
    lane.cells = std::move(cells);
    lane.entrances = std::move(entrances);
    lane.open_both_ends = open;
    lanes_.push_back(std::move(lane));
  };

  for (int y = 1; y <= rows; ++y) {
    std::vector<NodeId> left;
    for (int x = depth - 1; x >= 0; --x) left.push_back(id_at(y, x));
    add_lane(std::move(left), {id_at(y, aisle_x.front())}, false);

    for (std::size_t a = 0; a + 1 < aisle_x.size(); ++a) {
      std::vector<NodeId> cells;
      for (int x = aisle_x[a] + 1; x < aisle_x[a + 1]; ++x) cells.push_back(id_at(y, x));
      add_lane(std::move(cells), {id_at(y, aisle_x[a]), id_at(y, aisle_x[a + 1])}, true);
    }

    std::vector<NodeId> right;
    for (int x = aisle_x.back() + 1; x < width_; ++x) right.push_back(id_at(y, x));
    add_lane(std::move(right), {id_at(y, aisle_x.back())}, false);
  }

  for (int ax : aisle_x) {
    for (int y = 0; y + 1 < height_; ++y) connect(id_at(y, ax), id_at(y + 1, ax));
  }
  for (int y : {0, height_ - 1}) {
    for (int x = 0; x + 1 < width_; ++x) connect(id_at(y, x), id_at(y, x + 1));
  }

  std::sort(edges_.begin(), edges_.end());
  for (auto& adj : adjacency_) std::sort(adj.begin(), adj.end());
}

std::optional<NodeId> WarehouseGraph::at(int y, int x) const {
  if (y < 0 || y >= height_ || x < 0 || x >= width_) return std::nullopt;
  NodeId id = grid_[static_cast<std::size_t>(y * width_ + x)];
  if (id == kNoNode) return std::nullopt;
  return id;
}

WarehouseGraph build_layout(const LayoutParams& params) { return WarehouseGraph(params); }

std::vector<LayoutParams> validation_layouts() {
  std::vector<LayoutParams> out;
  for (int dl : {2, 3, 4, 5}) {
    for (int na : {1, 2}) {
      for (int nl : {6, 8, 10, 12}) {
        out.push_back(LayoutParams{dl, na, nl, 1.0});
      }
    }
  }
  return out;
}

}  // namespace mdr
