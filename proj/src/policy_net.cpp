#include "mdr/policy_net.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mdr {

using nlohmann::json;

namespace {

Tensor glorot(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t(rows, cols);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = (2.0 * uniform01(rng) - 1.0) * bound;
  return t;
}

Param make_weight(const std::string& name, Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  return Param(name, glorot(rows, cols, rng));
}

Param make_bias(const std::string& name, Eigen::Index cols) { return Param(name, Tensor::Zero(1, cols)); }

}  // namespace

std::string architecture_name(Architecture a) {
  switch (a) {
    case Architecture::Full: return "full";
    case Architecture::GnnOnly: return "gnn_only";
    case Architecture::TransformerOnly: return "transformer_only";
  }
  return "?";
}

Architecture parse_architecture(const std::string& name) {
  if (name == "full") return Architecture::Full;
  if (name == "gnn_only") return Architecture::GnnOnly;
  if (name == "transformer_only") return Architecture::TransformerOnly;
  throw std::invalid_argument("unknown architecture '" + name + "' (expected full, gnn_only, transformer_only)");
}

void ModelConfig::validate() const {
  if (gnn_layers < 1 || attn_blocks < 1 || hidden_dim < 1 || key_dim < 1) {
    throw std::invalid_argument("model config: all layer counts and widths must be >= 1");
  }
}

GraphContext make_context(const WarehouseGraph& graph, double mp) {
  auto segments = std::make_shared<ad::Segments>();
  std::vector<int> members;
  for (std::size_t v = 0; v < graph.num_nodes(); ++v) {
    members.assign(graph.neighbors(static_cast<NodeId>(v)).begin(), graph.neighbors(static_cast<NodeId>(v)).end());
    segments->push(members);
  }
  GraphContext ctx;
  ctx.neighborhoods = std::move(segments);
  ctx.y_extent = std::max(1, graph.height() - 1);
  ctx.x_extent = std::max(1, graph.width() - 1);
  ctx.time_scale = mp > 0.0 ? mp : 1.0;
  return ctx;
}

Tensor scale_features(const FeatureMatrix& raw, const GraphContext& ctx) {
  Tensor x = raw;
  x.col(3) /= ctx.y_extent;
  x.col(4) /= ctx.x_extent;
  x.col(5) /= ctx.time_scale;
  x.col(7) /= ctx.time_scale;
  return x;
}

Observation observe(const Environment& env, const SimState& state, std::span<const Action> legal,
                    const GraphContext& ctx) {
  Observation obs;
  obs.features = scale_features(env.encode(state), ctx);
  obs.tokens.reserve(legal.size());
  for (const Action& a : legal) obs.tokens.push_back(a.target);
  return obs;
}

Var gnn_embed(Var features, const std::shared_ptr<const ad::Segments>& neighborhoods,
              std::span<SageLayerParams> layers, bool normalize) {
  if (static_cast<Eigen::Index>(neighborhoods->count()) != features.rows()) {
    throw std::invalid_argument("gnn_embed: " + std::to_string(features.rows()) + " feature rows for " +
                                std::to_string(neighborhoods->count()) + " graph nodes");
  }
  Tape& tape = *features.tape();
  Var h = features;
  for (SageLayerParams& layer : layers) {
    Var agg = ad::concat_cols(h, ad::segment_mean(h, neighborhoods));
    h = ad::relu(ad::matmul(agg, tape.parameter(layer.weight)));
  }
  if (normalize) h = ad::normalize_rows(h);
  return h;
}

Var attention_block(Var tokens, AttnBlockParams& block) {
  Tape& tape = *tokens.tape();
  Var q = ad::matmul(tokens, tape.parameter(block.wq));
  Var k = ad::matmul(tokens, tape.parameter(block.wk));
  Var v = ad::matmul(tokens, tape.parameter(block.wv));
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(block.wk.value.cols()));
  Var weights = ad::softmax_rows(ad::scale(ad::matmul_nt(q, k), inv_sqrt_dk));
  Var y = ad::add(tokens, ad::matmul(weights, v));
  Var hidden = ad::relu(ad::add_row(ad::matmul(y, tape.parameter(block.ff_in)), tape.parameter(block.ff_in_bias)));
  Var ff = ad::add_row(ad::matmul(hidden, tape.parameter(block.ff_out)), tape.parameter(block.ff_out_bias));
  return ad::add(y, ff);
}

Var attention_stack(Var tokens, std::span<AttnBlockParams> blocks) {
  if (tokens.rows() == 0) throw ContractViolation("attention_stack: empty token set");
  for (AttnBlockParams& b : blocks) tokens = attention_block(tokens, b);
  return tokens;
}

Trunk::Trunk(const ModelConfig& cfg, const std::string& prefix, Rng& rng) : config(cfg) {
  config.validate();
  const int h = config.hidden_dim;
  auto add_sage = [&](int count) {
    int in = kFeatureDim;
    for (int l = 0; l < count; ++l) {
      sage.push_back({make_weight(prefix + ".sage" + std::to_string(l) + ".weight", 2 * in, h, rng)});
      in = h;
    }
  };
  auto add_blocks = [&]() {
    for (int b = 0; b < config.attn_blocks; ++b) {
      const std::string p = prefix + ".block" + std::to_string(b);
      AttnBlockParams block;
      block.wq = make_weight(p + ".wq", h, config.key_dim, rng);
      block.wk = make_weight(p + ".wk", h, config.key_dim, rng);
      block.wv = make_weight(p + ".wv", h, h, rng);
      block.ff_in = make_weight(p + ".ff_in", h, h, rng);
      block.ff_in_bias = make_bias(p + ".ff_in_bias", h);
      block.ff_out = make_weight(p + ".ff_out", h, h, rng);
      block.ff_out_bias = make_bias(p + ".ff_out_bias", h);
      blocks.push_back(std::move(block));
    }
  };
  switch (config.variant) {
    case Architecture::Full:
      add_sage(config.gnn_layers);
      add_blocks();
      break;
    case Architecture::GnnOnly:
      add_sage(config.gnn_layers + config.attn_blocks);
      break;
    case Architecture::TransformerOnly:
      input_embedding = make_weight(prefix + ".input_embedding", kFeatureDim, h, rng);
      input_bias = make_bias(prefix + ".input_bias", h);
      add_blocks();
      break;
  }
}

Var Trunk::forward(Tape& tape, const Observation& obs, const GraphContext& ctx) {
  if (obs.tokens.empty()) throw ContractViolation("network forward: empty legal action list");
  Var x = tape.constant(obs.features);
  if (config.variant == Architecture::TransformerOnly) {
    Var tokens = ad::gather_rows(x, obs.tokens);
    tokens = ad::add_row(ad::matmul(tokens, tape.parameter(input_embedding)), tape.parameter(input_bias));
    return attention_stack(tokens, blocks);
  }
  Var z = gnn_embed(x, ctx.neighborhoods, sage, config.l2_normalize_embeddings);
  Var tokens = ad::gather_rows(z, obs.tokens);
  if (config.variant == Architecture::GnnOnly) return tokens;
  return attention_stack(tokens, blocks);
}

void Trunk::collect(std::vector<Param*>& out) {
  if (config.variant == Architecture::TransformerOnly) {
    out.push_back(&input_embedding);
    out.push_back(&input_bias);
  }
  for (auto& s : sage) out.push_back(&s.weight);
  for (auto& b : blocks) {
    for (Param* p : {&b.wq, &b.wk, &b.wv, &b.ff_in, &b.ff_in_bias, &b.ff_out, &b.ff_out_bias}) out.push_back(p);
  }
}

ActorNet::ActorNet(const ModelConfig& config, Rng& rng)
    : trunk_(config, "actor", rng), priority_(make_weight("actor.priority", config.hidden_dim, 1, rng)) {}

Var ActorNet::priorities(Tape& tape, const Observation& obs, const GraphContext& ctx) {
  Var tokens = trunk_.forward(tape, obs, ctx);
  return ad::transpose(ad::matmul(tokens, tape.parameter(priority_)));
}

Var ActorNet::log_probs(Tape& tape, const Observation& obs, const GraphContext& ctx) {
  return ad::log_softmax_rows(priorities(tape, obs, ctx));
}

Eigen::VectorXd ActorNet::probabilities(const Observation& obs, const GraphContext& ctx) {
  Tape tape;
  Var p = ad::softmax_rows(priorities(tape, obs, ctx));
  return p.value().row(0).transpose();
}

std::vector<Param*> ActorNet::parameters() {
  std::vector<Param*> out;
  trunk_.collect(out);
  out.push_back(&priority_);
  return out;
}

CriticNet::CriticNet(const ModelConfig& config, Rng& rng)
    : trunk_(config, "critic", rng),
      hidden_(make_weight("critic.value_hidden", config.hidden_dim, config.hidden_dim, rng)),
      hidden_bias_(make_bias("critic.value_hidden_bias", config.hidden_dim)),
      out_("critic.value_out", Tensor::Zero(config.hidden_dim, 1)),
      out_bias_(make_bias("critic.value_out_bias", 1)) {}

Var CriticNet::value(Tape& tape, const Observation& obs, const GraphContext& ctx) {
  Var pooled = ad::sum_rows(trunk_.forward(tape, obs, ctx));
  Var h = ad::relu(ad::add_row(ad::matmul(pooled, tape.parameter(hidden_)), tape.parameter(hidden_bias_)));
  return ad::add_row(ad::matmul(h, tape.parameter(out_)), tape.parameter(out_bias_));
}

double CriticNet::value(const Observation& obs, const GraphContext& ctx) {
  Tape tape;
  return value(tape, obs, ctx).item();
}

std::vector<Param*> CriticNet::parameters() {
  std::vector<Param*> out;
  trunk_.collect(out);
  for (Param* p : {&hidden_, &hidden_bias_, &out_, &out_bias_}) out.push_back(p);
  return out;
}

Agent::Agent(const ModelConfig& cfg, std::uint64_t s)
    : config(cfg), seed(s), actor([&]() {
        Rng rng(s);
        return ActorNet(cfg, rng);
      }()),
      critic([&]() {
        Rng rng(derive_seed({s, 0x63726974ULL}));
        return CriticNet(cfg, rng);
      }()) {}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

json config_to_json(const ModelConfig& c) {
  return {{"gnn_layers", c.gnn_layers},
          {"attn_blocks", c.attn_blocks},
          {"hidden_dim", c.hidden_dim},
          {"key_dim", c.key_dim},
          {"l2_normalize_embeddings", c.l2_normalize_embeddings},
          {"variant", architecture_name(c.variant)}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  try {
    c.gnn_layers = j.at("gnn_layers").get<int>();
    c.attn_blocks = j.at("attn_blocks").get<int>();
    c.hidden_dim = j.at("hidden_dim").get<int>();
    c.key_dim = j.at("key_dim").get<int>();
    c.l2_normalize_embeddings = j.at("l2_normalize_embeddings").get<bool>();
    c.variant = parse_architecture(j.at("variant").get<std::string>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: bad config: ") + e.what());
  }
  return c;
}

}  // namespace

std::string checkpoint_to_json(Agent& agent) {
  json params = json::object();
  std::vector<Param*> all = agent.actor.parameters();
  for (Param* p : agent.critic.parameters()) all.push_back(p);
  for (Param* p : all) {
    json values = json::array();
    for (Eigen::Index i = 0; i < p->value.size(); ++i) values.push_back(p->value.data()[i]);
    params[p->name] = {{"shape", {p->value.rows(), p->value.cols()}}, {"values", std::move(values)}};
  }
  json j;
  j["config"] = config_to_json(agent.config);
  j["seed"] = agent.seed;
  j["params"] = std::move(params);
  return j.dump() + "\n";
}

std::unique_ptr<Agent> checkpoint_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint: malformed JSON: ") + e.what());
  }
  if (!j.contains("config") || !j.contains("seed") || !j.contains("params")) {
    throw ParseError("checkpoint: expected fields 'config', 'seed', 'params'");
  }
  const ModelConfig config = config_from_json(j["config"]);
  auto agent = std::make_unique<Agent>(config, j["seed"].get<std::uint64_t>());
  std::vector<Param*> all = agent->actor.parameters();
  for (Param* p : agent->critic.parameters()) all.push_back(p);
  const json& params = j["params"];
  if (params.size() != all.size()) {
    throw ParseError("checkpoint: " + std::to_string(params.size()) + " tensors, model expects " +
                     std::to_string(all.size()));
  }
  for (Param* p : all) {
    auto it = params.find(p->name);
    if (it == params.end()) throw ParseError("checkpoint: missing tensor '" + p->name + "'");
    const json& shape = it->at("shape");
    const json& values = it->at("values");
    if (shape.size() != 2 || shape[0].get<Eigen::Index>() != p->value.rows() ||
        shape[1].get<Eigen::Index>() != p->value.cols() || static_cast<Eigen::Index>(values.size()) != p->value.size()) {
      throw ParseError("checkpoint: tensor '" + p->name + "' has shape " + shape.dump() + ", expected " +
                       ad::shape_string(p->value));
    }
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      p->value.data()[i] = values[static_cast<std::size_t>(i)].get<double>();
    }
    p->zero_grad();
  }
  return agent;
}

void save_checkpoint(Agent& agent, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  out << checkpoint_to_json(agent);
  if (!out) throw std::runtime_error("failed writing checkpoint '" + path + "'");
}

std::unique_ptr<Agent> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str());
}

// ---------------------------------------------------------------------------

std::size_t sample_index(const Eigen::VectorXd& probs, Rng& rng) {
  const double u = uniform01(rng);
  double cum = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    cum += probs(i);
    if (u < cum) return static_cast<std::size_t>(i);
  }
  return static_cast<std::size_t>(probs.size() - 1);
}

std::size_t argmax_index(const Eigen::VectorXd& probs) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < probs.size(); ++i) {
    if (probs(i) > probs(best)) best = i;
  }
  return static_cast<std::size_t>(best);
}

NetworkPolicy::NetworkPolicy(ActorNet& actor, bool greedy, std::string name)
    : actor_(actor), greedy_(greedy), name_(std::move(name)) {}

Action NetworkPolicy::decide(const Environment& env, const SimState& state, std::span<const Action> legal, Rng& rng) {
  if (legal.empty()) throw ContractViolation("decide: no legal actions");
  if (cached_graph_ != &env.graph() || cached_mp_ != env.instance().mp) {
    ctx_ = make_context(env.graph(), env.instance().mp);
    cached_graph_ = &env.graph();
    cached_mp_ = env.instance().mp;
  }
  const Eigen::VectorXd probs = actor_.probabilities(observe(env, state, legal, ctx_), ctx_);
  return legal[greedy_ ? argmax_index(probs) : sample_index(probs, rng)];
}

}  // namespace mdr
