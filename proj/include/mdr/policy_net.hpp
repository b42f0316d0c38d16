#ifndef MDR_POLICY_NET_HPP_
#define MDR_POLICY_NET_HPP_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mdr/autodiff.hpp"
#include "mdr/environment.hpp"
#include "mdr/heuristics.hpp"

namespace mdr {

using Tensor = ad::Tensor<double>;
using Param = ad::Parameter<double>;
using Tape = ad::Tape<double>;
using Var = ad::Var<double>;

enum class Architecture { Full, GnnOnly, TransformerOnly };

std::string architecture_name(Architecture a);
Architecture parse_architecture(const std::string& name);

struct ModelConfig {
  int gnn_layers = 3;
  int attn_blocks = 4;
  int hidden_dim = 64;
  int key_dim = 64;
  bool l2_normalize_embeddings = false;
  Architecture variant = Architecture::Full;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Per-graph data the networks need besides node features: neighbor lists for
/// mean aggregation and the scales used to normalize raw features.
struct GraphContext {
  std::shared_ptr<const ad::Segments> neighborhoods;
  double y_extent = 1.0;
  double x_extent = 1.0;
  double time_scale = 1.0;
};

GraphContext make_context(const WarehouseGraph& graph, double mp);

/// Divides coordinates by the grid extent and due dates / clock by MP.
Tensor scale_features(const FeatureMatrix& raw, const GraphContext& ctx);

/// Network input at one decision point: scaled node features plus the node of
/// every legal action, in legal-action order.
struct Observation {
  Tensor features;
  std::vector<int> tokens;
};

Observation observe(const Environment& env, const SimState& state, std::span<const Action> legal,
                    const GraphContext& ctx);

struct SageLayerParams {
  Param weight;  // [2*in x out], applied to (self || neighbor mean)
};

struct AttnBlockParams {
  Param wq, wk, wv;                // [hidden x key], [hidden x key], [hidden x hidden]
  Param ff_in, ff_in_bias;         // per-token feed-forward
  Param ff_out, ff_out_bias;
};

/// h^l = ReLU((h^{l-1} || mean_{N(i)} h^{l-1}) W^l) over every node, with
/// optional row L2 normalization of the final layer.
Var gnn_embed(Var features, const std::shared_ptr<const ad::Segments>& neighborhoods,
              std::span<SageLayerParams> layers, bool normalize);

/// One block: y = x + softmax(q k^T / sqrt(d_k)) v, then y + FF(y), with
/// q, k, v = x W^Q, x W^K, x W^V. Single head, no positional encoding.
Var attention_block(Var tokens, AttnBlockParams& block);
Var attention_stack(Var tokens, std::span<AttnBlockParams> blocks);

/// Layers shared in shape (not in values) by actor and critic.
struct Trunk {
  ModelConfig config;
  Param input_embedding;  // TransformerOnly: [8 x hidden]
  Param input_bias;
  std::vector<SageLayerParams> sage;
  std::vector<AttnBlockParams> blocks;

  Trunk(const ModelConfig& config, const std::string& prefix, Rng& rng);
  /// Token embeddings, one row per legal action.
  Var forward(Tape& tape, const Observation& obs, const GraphContext& ctx);
  void collect(std::vector<Param*>& out);
};

/// Policy network: priorities p = y W^Prio, probabilities softmax(p).
class ActorNet {
 public:
  ActorNet(const ModelConfig& config, Rng& rng);

  /// [1 x n] log-probabilities over the observation's tokens.
  Var log_probs(Tape& tape, const Observation& obs, const GraphContext& ctx);
  /// [1 x n] raw priorities.
  Var priorities(Tape& tape, const Observation& obs, const GraphContext& ctx);
  Eigen::VectorXd probabilities(const Observation& obs, const GraphContext& ctx);

  std::vector<Param*> parameters();
  const ModelConfig& config() const { return trunk_.config; }
  Param& priority_head() { return priority_; }
  Trunk& trunk() { return trunk_; }

 private:
  Trunk trunk_;
  Param priority_;
};

/// Value network: column-wise sum of token embeddings through a two-layer MLP.
class CriticNet {
 public:
  CriticNet(const ModelConfig& config, Rng& rng);

  Var value(Tape& tape, const Observation& obs, const GraphContext& ctx);
  double value(const Observation& obs, const GraphContext& ctx);

  std::vector<Param*> parameters();
  const ModelConfig& config() const { return trunk_.config; }
  Trunk& trunk() { return trunk_; }

 private:
  Trunk trunk_;
  Param hidden_, hidden_bias_, out_, out_bias_;
};

/// Separate actor (theta) and critic (phi) parameter sets.
struct Agent {
  ModelConfig config;
  std::uint64_t seed = 0;
  ActorNet actor;
  CriticNet critic;

  Agent(const ModelConfig& config, std::uint64_t seed);
};

/// Checkpoint JSON: {"config": {...}, "seed": u64,
///   "params": {name: {"shape": [r, c], "values": [...]}}}. Round-trips bit-exactly.
void save_checkpoint(Agent& agent, const std::string& path);
std::unique_ptr<Agent> load_checkpoint(const std::string& path);
std::string checkpoint_to_json(Agent& agent);
std::unique_ptr<Agent> checkpoint_from_json(const std::string& text);

/// Actor wrapped as a dispatch policy: greedy argmax (lowest index on ties) or
/// sampled from the categorical distribution.
class NetworkPolicy final : public Policy {
 public:
  NetworkPolicy(ActorNet& actor, bool greedy, std::string name = "agent");
  Action decide(const Environment& env, const SimState& state, std::span<const Action> legal, Rng& rng) override;
  std::string name() const override { return name_; }

 private:
  ActorNet& actor_;
  bool greedy_;
  std::string name_;
  const WarehouseGraph* cached_graph_ = nullptr;
  double cached_mp_ = 0.0;
  GraphContext ctx_;
};

/// Index drawn from a categorical distribution by inverse CDF on one uniform01 draw.
std::size_t sample_index(const Eigen::VectorXd& probs, Rng& rng);
std::size_t argmax_index(const Eigen::VectorXd& probs);

}  // namespace mdr

#endif  // MDR_POLICY_NET_HPP_
