// Small shared setups for the network and trainer tests.
#ifndef MDR_TESTS_FIXTURES_HPP_
#define MDR_TESTS_FIXTURES_HPP_

#include <memory>

#include "mdr/environment.hpp"
#include "mdr/instance.hpp"
#include "mdr/policy_net.hpp"

namespace fixture {

using namespace mdr;

inline ModelConfig small_model(Architecture variant = Architecture::Full) {
  ModelConfig c;
  c.gnn_layers = 2;
  c.attn_blocks = 2;
  c.hidden_dim = 6;
  c.key_dim = 5;
  c.variant = variant;
  return c;
}

struct Toy {
  std::shared_ptr<const WarehouseGraph> graph;
  std::unique_ptr<Environment> env;
  GraphContext ctx;
  SimState state;
  std::vector<Action> legal;
  Observation obs;
};

// (2,1,6) with items only at the first n lane fronts, shuttle at an I/O point,
// so the item phase has exactly n legal actions (1 <= n <= 6).
inline Toy toy_state(int n, std::uint64_t seed = 1) {
  Toy t;
  t.graph = std::make_shared<const WarehouseGraph>(LayoutParams{2, 1, 6});
  const Instance inst = generate_instance(*t.graph, DueDateConfig{}, seed);
  t.env = std::make_unique<Environment>(t.graph, inst);
  t.ctx = make_context(*t.graph, inst.mp);
  Occupancy occ(t.graph->num_nodes(), kNoItem);
  for (int k = 0; k < n; ++k) {
    const NodeId front = t.graph->lanes()[static_cast<std::size_t>(k)].cells.front();
    occ[static_cast<std::size_t>(front)] = front;
  }
  t.state = t.env->reset_with(occ, t.graph->io_nodes().front());
  t.state.clock = 37;
  t.legal = t.env->legal_actions(t.state);
  t.obs = observe(*t.env, t.state, t.legal, t.ctx);
  return t;
}

}  // namespace fixture

#endif  // MDR_TESTS_FIXTURES_HPP_
