#include "mdr/instance.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "mdr/environment.hpp"
#include "mdr/heuristics.hpp"
#include "mdr/rng.hpp"

namespace mdr {

using nlohmann::json;

void DueDateConfig::validate() const {
  if (!(tightness > 0.0 && tightness < 1.0)) throw std::invalid_argument("due dates: tightness r must lie in (0,1)");
  if (!(range >= 0.0 && range < 2.0)) throw std::invalid_argument("due dates: range R must lie in [0,2)");
}

DueDateConfig DueDateConfig::parse(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw std::invalid_argument("due dates: expected 'r,R', got '" + text + "'");
  DueDateConfig c;
  try {
    std::size_t used = 0;
    c.tightness = std::stod(text.substr(0, comma), &used);
    if (used != comma) throw std::invalid_argument("trailing");
    const std::string rest = text.substr(comma + 1);
    c.range = std::stod(rest, &used);
    if (used != rest.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw std::invalid_argument("due dates: expected 'r,R', got '" + text + "'");
  }
  c.validate();
  return c;
}

double DueDateConfig::lower_bound(double mp) const { return mp * (1.0 - tightness - range / 2.0); }
double DueDateConfig::upper_bound(double mp) const { return mp * (1.0 - tightness + range / 2.0); }

std::uint64_t Instance::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint64_t word) {
    for (int b = 0; b < 8; ++b) {
      h ^= (word >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  auto bits = [](double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, sizeof u);
    return u;
  };
  feed(static_cast<std::uint64_t>(layout.lane_depth));
  feed(static_cast<std::uint64_t>(layout.num_aisles));
  feed(static_cast<std::uint64_t>(layout.lanes_per_aisle));
  feed(bits(mp));
  feed(bits(config.tightness));
  feed(bits(config.range));
  for (const auto& [node, d] : due_dates) {
    feed(static_cast<std::uint64_t>(node));
    feed(bits(d));
  }
  return h;
}

Clock stt_makespan(const WarehouseGraph& graph, const Occupancy& occupancy, NodeId start) {
  auto shared = std::shared_ptr<const WarehouseGraph>(&graph, [](const WarehouseGraph*) {});
  Instance blank;
  blank.layout = graph.params();
  for (NodeId s : graph.storage_nodes()) blank.due_dates[s] = 0.0;
  Environment env(shared, blank);
  SimState state = env.reset_with(occupancy, start);
  Rng unused(0);
  while (state.phase != Phase::Done) {
    const auto legal = env.legal_actions(state);
    state = env.step(state, decide(DispatchRule::STT, env, state, legal, unused)).first;
  }
  return state.clock;
}

double compute_mp(const WarehouseGraph& graph) {
  Occupancy full(graph.num_nodes(), kNoItem);
  for (NodeId s : graph.storage_nodes()) full[static_cast<std::size_t>(s)] = s;
  return static_cast<double>(stt_makespan(graph, full, graph.io_nodes().front()));
}

Instance generate_instance(const WarehouseGraph& graph, const DueDateConfig& config, std::uint64_t seed, double mp) {
  config.validate();
  Instance inst;
  inst.layout = graph.params();
  inst.mp = mp;
  inst.config = config;
  inst.seed = seed;
  const double lo = config.lower_bound(mp);
  const double hi = config.upper_bound(mp);
  Rng rng(seed);
  for (NodeId s : graph.storage_nodes()) {
    const double d = lo + (hi - lo) * uniform01(rng);
    inst.due_dates[s] = std::max(0.0, d);
  }
  return inst;
}

Instance generate_instance(const WarehouseGraph& graph, const DueDateConfig& config, std::uint64_t seed) {
  return generate_instance(graph, config, seed, compute_mp(graph));
}

std::string instance_to_json(const Instance& instance) {
  json j;
  j["layout"] = {{"dl", instance.layout.lane_depth},
                 {"na", instance.layout.num_aisles},
                 {"nl", instance.layout.lanes_per_aisle}};
  j["mp"] = instance.mp;
  j["config"] = {{"r", instance.config.tightness}, {"rr", instance.config.range}};
  j["seed"] = instance.seed;
  json dues = json::array();
  for (const auto& [node, d] : instance.due_dates) dues.push_back(json::array({node, d}));
  j["due_dates"] = std::move(dues);
  return j.dump(1) + "\n";
}

namespace {

const json& field(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw ParseError("instance: '" + path + "' must be an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError("instance: missing field '" + path + "." + key + "'");
  return *it;
}

template <typename T>
T get_as(const json& v, const std::string& path) {
  if constexpr (std::is_same_v<T, double>) {
    if (!v.is_number()) throw ParseError("instance: field '" + path + "' must be a number");
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    if (!v.is_number_unsigned()) throw ParseError("instance: field '" + path + "' must be an unsigned integer");
  } else {
    if (!v.is_number_integer()) throw ParseError("instance: field '" + path + "' must be an integer");
  }
  return v.get<T>();
}

}  // namespace

Instance instance_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("instance: malformed JSON: ") + e.what());
  }
  Instance inst;
  const json& layout = field(j, "layout", "$");
  inst.layout.lane_depth = get_as<int>(field(layout, "dl", "$.layout"), "$.layout.dl");
  inst.layout.num_aisles = get_as<int>(field(layout, "na", "$.layout"), "$.layout.na");
  inst.layout.lanes_per_aisle = get_as<int>(field(layout, "nl", "$.layout"), "$.layout.nl");
  try {
    inst.layout.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("instance: $.layout: ") + e.what());
  }
  inst.mp = get_as<double>(field(j, "mp", "$"), "$.mp");
  const json& cfg = field(j, "config", "$");
  inst.config.tightness = get_as<double>(field(cfg, "r", "$.config"), "$.config.r");
  inst.config.range = get_as<double>(field(cfg, "rr", "$.config"), "$.config.rr");
  inst.seed = get_as<std::uint64_t>(field(j, "seed", "$"), "$.seed");

  const WarehouseGraph graph(inst.layout);
  const json& dues = field(j, "due_dates", "$");
  if (!dues.is_array()) throw ParseError("instance: field '$.due_dates' must be an array");
  for (std::size_t k = 0; k < dues.size(); ++k) {
    const std::string path = "$.due_dates[" + std::to_string(k) + "]";
    const json& entry = dues[k];
    if (!entry.is_array() || entry.size() != 2) throw ParseError("instance: '" + path + "' must be [node_id, d]");
    const auto node = get_as<NodeId>(entry[0], path + "[0]");
    const double d = get_as<double>(entry[1], path + "[1]");
    if (!graph.contains(node) || !graph.is_storage(node)) {
      throw ParseError("instance: '" + path + "' names node " + std::to_string(node) + " which is not a storage node");
    }
    if (!inst.due_dates.emplace(node, d).second) {
      throw ParseError("instance: '" + path + "' repeats node " + std::to_string(node));
    }
  }
  if (inst.due_dates.size() != graph.storage_nodes().size()) {
    throw ParseError("instance: '$.due_dates' has " + std::to_string(inst.due_dates.size()) + " entries, expected " +
                     std::to_string(graph.storage_nodes().size()));
  }
  return inst;
}

void save_instance(const Instance& instance, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write instance file '" + path + "'");
  out << instance_to_json(instance);
  if (!out) throw std::runtime_error("failed writing instance file '" + path + "'");
}

Instance load_instance(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read instance file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return instance_from_json(buf.str());
}

}  // namespace mdr
