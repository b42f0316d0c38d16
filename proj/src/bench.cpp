#include "mdr/bench.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "mdr/rng.hpp"
#include "mdr/text.hpp"

namespace mdr {

using nlohmann::json;

void BenchmarkSpec::validate() const {
  if (layouts.empty()) throw std::invalid_argument("benchmark: no layouts");
  if (configs.empty()) throw std::invalid_argument("benchmark: no due-date configs");
  if (policies.empty()) throw std::invalid_argument("benchmark: no policies");
  if (repetitions < 1) throw std::invalid_argument("benchmark: repetitions must be >= 1");
  for (const auto& l : layouts) l.validate();
  for (const auto& c : configs) c.validate();
}

BenchmarkSpec BenchmarkSpec::from_json(const std::string& text) {
  BenchmarkSpec spec;
  try {
    const json j = json::parse(text);
    for (const json& l : j.at("layouts")) {
      if (!l.is_array() || l.size() != 3) throw ParseError("benchmark: each layout must be [dl, na, nl]");
      spec.layouts.push_back({l[0].get<int>(), l[1].get<int>(), l[2].get<int>()});
    }
    for (const json& c : j.at("configs")) {
      if (!c.is_array() || c.size() != 2) throw ParseError("benchmark: each config must be [r, R]");
      spec.configs.push_back({c[0].get<double>(), c[1].get<double>()});
    }
    spec.repetitions = j.value("repetitions", 10);
    spec.policies = j.at("policies").get<std::vector<std::string>>();
    spec.base_seed = j.value("base_seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw ParseError(std::string("benchmark spec: ") + e.what());
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("benchmark spec: ") + e.what());
  }
  return spec;
}

BenchmarkSpec BenchmarkSpec::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read benchmark spec '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

EpisodeResult run_episode(Policy& policy, const Environment& env, std::uint64_t seed) {
  using ms = std::chrono::duration<double, std::milli>;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(derive_seed({seed, 0x706f6c6963790000ULL}));
  EpisodeResult result;
  SimState state = env.reset(seed);
  double decide_ms = 0.0;
  while (state.phase != Phase::Done) {
    const std::vector<Action> legal = env.legal_actions(state);
    const auto d0 = std::chrono::steady_clock::now();
    const Action action = policy.decide(env, state, legal, rng);
    decide_ms += ms(std::chrono::steady_clock::now() - d0).count();
    // step() rejects anything outside `legal` with ContractViolation.
    state = env.step(state, action).first;
    ++result.decisions;
  }
  result.total_tardiness = total_tardiness(state);
  result.wall_ms_total = ms(std::chrono::steady_clock::now() - t0).count();
  result.wall_ms_per_decision = result.decisions > 0 ? decide_ms / result.decisions : 0.0;
  result.final_state = std::move(state);
  return result;
}

namespace {

class CheckpointPolicy final : public Policy {
 public:
  CheckpointPolicy(std::unique_ptr<Agent> agent, std::string name)
      : agent_(std::move(agent)), inner_(agent_->actor, /*greedy=*/true, std::move(name)) {}
  Action decide(const Environment& env, const SimState& state, std::span<const Action> legal, Rng& rng) override {
    return inner_.decide(env, state, legal, rng);
  }
  std::string name() const override { return inner_.name(); }

 private:
  std::unique_ptr<Agent> agent_;
  NetworkPolicy inner_;
};

}  // namespace

std::unique_ptr<Policy> make_policy(const std::string& spec) {
  constexpr std::string_view prefix = "ckpt:";
  if (spec.rfind(prefix, 0) == 0) {
    const std::string path = spec.substr(prefix.size());
    if (path.empty()) throw std::invalid_argument("policy 'ckpt:' needs a checkpoint path");
    return std::make_unique<CheckpointPolicy>(load_checkpoint(path), spec);
  }
  return std::make_unique<RulePolicy>(parse_rule(spec));
}

namespace {

std::uint64_t bits(double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, sizeof u);
  return u;
}

}  // namespace

std::uint64_t cell_seed(std::uint64_t base_seed, const LayoutParams& layout, const DueDateConfig& config, int rep) {
  return derive_seed({base_seed, static_cast<std::uint64_t>(layout.lane_depth),
                      static_cast<std::uint64_t>(layout.num_aisles), static_cast<std::uint64_t>(layout.lanes_per_aisle),
                      bits(config.tightness), bits(config.range), static_cast<std::uint64_t>(rep)});
}

std::uint64_t episode_seed(std::uint64_t cell) { return derive_seed({cell, 1}); }

std::vector<ResultRow> run_benchmark(const BenchmarkSpec& spec) {
  spec.validate();
  std::vector<std::unique_ptr<Policy>> policies;
  for (const std::string& p : spec.policies) policies.push_back(make_policy(p));

  std::vector<ResultRow> rows;
  for (const LayoutParams& layout : spec.layouts) {
    auto graph = std::make_shared<const WarehouseGraph>(layout);
    const double mp = compute_mp(*graph);
    for (const DueDateConfig& config : spec.configs) {
      for (int rep = 0; rep < spec.repetitions; ++rep) {
        const std::uint64_t seed = cell_seed(spec.base_seed, layout, config, rep);
        const Environment env(graph, generate_instance(*graph, config, seed, mp));
        const std::uint64_t hash = env.instance().hash();
        for (std::size_t k = 0; k < policies.size(); ++k) {
          const EpisodeResult r = run_episode(*policies[k], env, episode_seed(seed));
          rows.push_back({layout, config, rep, spec.policies[k], seed, hash, r.total_tardiness, r.wall_ms_total,
                          r.wall_ms_per_decision});
        }
      }
    }
  }
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  using Key = std::tuple<int, int, int, std::uint64_t, std::uint64_t, std::string>;
  std::map<Key, std::size_t> index;
  std::vector<SummaryRow> out;
  std::vector<double> sums;
  for (const ResultRow& r : rows) {
    const Key key{r.layout.lane_depth, r.layout.num_aisles, r.layout.lanes_per_aisle,
                  bits(r.config.tightness), bits(r.config.range), r.policy};
    auto [it, fresh] = index.emplace(key, out.size());
    if (fresh) {
      out.push_back({r.layout, r.config, r.policy, 0, 0.0, r.total_tardiness});
      sums.push_back(0.0);
    }
    SummaryRow& s = out[it->second];
    sums[it->second] += r.total_tardiness;
    ++s.count;
    s.min = std::min(s.min, r.total_tardiness);
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].mean = sums[i] / out[i].count;
  return out;
}

std::optional<double> improvement_ratio(double tt_agent, double tt_edd, double tt_stt) {
  const double best = std::min(tt_edd, tt_stt);
  if (best == 0.0) return std::nullopt;
  return (best - tt_agent) / best * 100.0;
}

double lifo_interleavings_log10(std::span<const int> lane_sizes) {
  double total = 0.0;
  double log_den = 0.0;
  for (int n : lane_sizes) {
    if (n < 0) throw std::invalid_argument("lifo_interleavings_log10: negative lane size");
    total += n;
    log_den += std::lgamma(n + 1.0);
  }
  return (std::lgamma(total + 1.0) - log_den) / std::log(10.0);
}

SequenceCount sequence_count(const LayoutParams& layout) {
  layout.validate();
  const double n = layout.num_items();
  const double lanes = static_cast<double>(layout.num_aisles) * layout.lanes_per_aisle;
  SequenceCount c;
  c.printed_log10 = (std::lgamma(n + 1.0) - layout.lane_depth * std::lgamma(lanes + 1.0)) / std::log(10.0);
  const std::vector<int> sizes(static_cast<std::size_t>(lanes), layout.lane_depth);
  c.oracle_log10 = lifo_interleavings_log10(sizes);
  return c;
}

namespace {

std::string layout_cols(const LayoutParams& l) {
  return std::to_string(l.lane_depth) + ',' + std::to_string(l.num_aisles) + ',' + std::to_string(l.lanes_per_aisle);
}

std::string config_cols(const DueDateConfig& c) { return format_real(c.tightness) + ',' + format_real(c.range); }

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

bool is_baseline(const std::string& policy) { return policy == "stt" || policy == "edd"; }

}  // namespace

std::string results_csv(const std::vector<ResultRow>& rows, bool include_timing) {
  std::ostringstream out;
  out << "dl,na,nl,r,rr,rep,policy,seed,total_tardiness";
  if (include_timing) out << ",wall_ms_total,wall_ms_per_decision";
  out << '\n';
  for (const ResultRow& r : rows) {
    out << layout_cols(r.layout) << ',' << config_cols(r.config) << ',' << r.rep << ',' << r.policy << ','
        << r.seed << ',' << format_real(r.total_tardiness);
    if (include_timing) out << ',' << format_real(r.wall_ms_total) << ',' << format_real(r.wall_ms_per_decision);
    out << '\n';
  }
  return out.str();
}

std::string summary_csv(const std::vector<SummaryRow>& summary) {
  std::ostringstream out;
  out << "dl,na,nl,r,rr,policy,count,mean_tt,min_tt\n";
  for (const SummaryRow& s : summary) {
    out << layout_cols(s.layout) << ',' << config_cols(s.config) << ',' << s.policy << ',' << s.count << ','
        << format_real(s.mean) << ',' << format_real(s.min) << '\n';
  }
  return out.str();
}

std::string improvement_csv(const std::vector<SummaryRow>& summary) {
  std::ostringstream out;
  out << "dl,na,nl,r,rr,policy,mean_tt,mean_tt_edd,mean_tt_stt,improvement_pct\n";
  for (const SummaryRow& s : summary) {
    if (is_baseline(s.policy)) continue;
    const SummaryRow* edd = nullptr;
    const SummaryRow* stt = nullptr;
    for (const SummaryRow& o : summary) {
      if (o.layout == s.layout && o.config == s.config) {
        if (o.policy == "edd") edd = &o;
        if (o.policy == "stt") stt = &o;
      }
    }
    if (!edd || !stt) continue;
    const auto ratio = improvement_ratio(s.mean, edd->mean, stt->mean);
    out << layout_cols(s.layout) << ',' << config_cols(s.config) << ',' << s.policy << ',' << format_real(s.mean)
        << ',' << format_real(edd->mean) << ',' << format_real(stt->mean) << ','
        << (ratio ? format_real(*ratio) : std::string("undefined")) << '\n';
  }
  return out.str();
}

std::string summary_table_tsv(const std::vector<SummaryRow>& summary) {
  std::vector<std::string> policies;
  for (const SummaryRow& s : summary) {
    if (std::find(policies.begin(), policies.end(), s.policy) == policies.end()) policies.push_back(s.policy);
  }
  std::ostringstream out;
  out << "layout\tr\tR";
  for (const auto& p : policies) out << '\t' << p << "_mean\t" << p << "_min";
  out << '\n';
  std::vector<std::pair<LayoutParams, DueDateConfig>> cells;
  for (const SummaryRow& s : summary) {
    const std::pair<LayoutParams, DueDateConfig> cell{s.layout, s.config};
    if (std::find(cells.begin(), cells.end(), cell) == cells.end()) cells.push_back(cell);
  }
  for (const auto& [layout, config] : cells) {
    out << '(' << layout_cols(layout) << ")\t" << format_real(config.tightness) << '\t' << format_real(config.range);
    for (const auto& p : policies) {
      const SummaryRow* hit = nullptr;
      for (const SummaryRow& s : summary) {
        if (s.layout == layout && s.config == config && s.policy == p) hit = &s;
      }
      if (hit) {
        out << '\t' << format_real(hit->mean) << '\t' << format_real(hit->min);
      } else {
        out << "\t-\t-";
      }
    }
    out << '\n';
  }
  return out.str();
}

void emit_report(const std::vector<ResultRow>& rows, const std::string& dir) {
  if (rows.empty()) throw std::invalid_argument("emit_report: no rows");
  const std::filesystem::path base(dir);
  std::filesystem::create_directories(base);
  const auto summary = summarize(rows);
  write_file(base / "results.csv", results_csv(rows));
  write_file(base / "summary.csv", summary_csv(summary));
  write_file(base / "improvement.csv", improvement_csv(summary));
  write_file(base / "summary_table.tsv", summary_table_tsv(summary));
}

}  // namespace mdr
