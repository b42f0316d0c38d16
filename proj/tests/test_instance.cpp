#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mdr/instance.hpp"
#include "mdr/layout.hpp"
#include "mdr/routing.hpp"
#include "mdr/text.hpp"

using namespace mdr;

TEST_CASE("due dates stay inside the uniform bounds") {
  const WarehouseGraph g(LayoutParams{3, 2, 10});
  const Instance a = generate_instance(g, DueDateConfig{0.125, 0.75}, 11, 951.0);
  CHECK(a.num_items() == 60);
  for (const auto& [node, d] : a.due_dates) {
    CHECK(g.is_storage(node));
    CHECK(d >= 475.5);
    CHECK(d <= 1188.75);
  }
  const Instance b = generate_instance(g, DueDateConfig{0.25, 1.0}, 12, 100.0);
  for (const auto& [node, d] : b.due_dates) {
    CHECK(d >= 25.0);
    CHECK(d <= 125.0);
  }
  CHECK(DueDateConfig({0.125, 0.75}).lower_bound(951.0) == doctest::Approx(475.5));
  CHECK(DueDateConfig({0.125, 0.75}).upper_bound(951.0) == doctest::Approx(1188.75));
}

TEST_CASE("zero range gives a constant due date") {
  const WarehouseGraph g(LayoutParams{2, 2, 8});
  const Instance inst = generate_instance(g, DueDateConfig{0.25, 0.0}, 3, 200.0);
  for (const auto& [node, d] : inst.due_dates) CHECK(d == 150.0);
}

TEST_CASE("pooled due-date mean is MP(1 - r) within 1%") {
  const WarehouseGraph g(LayoutParams{3, 2, 10});
  const double mp = 951.0;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::uint64_t seed = 0; n < 100000; ++seed) {
    for (const auto& [node, d] : generate_instance(g, DueDateConfig{0.125, 0.75}, seed, mp).due_dates) {
      sum += d;
      ++n;
    }
  }
  CHECK(sum / static_cast<double>(n) == doctest::Approx(mp * 0.875).epsilon(0.01));
}

TEST_CASE("MP anchors") {
  // Training layout: a published lower bound of 475.5 = MP (1 - 0.125 - 0.375) gives MP ~ 951.
  const double mp = compute_mp(WarehouseGraph(LayoutParams{3, 2, 10}));
  CHECK(mp >= 808.0);
  CHECK(mp <= 1094.0);
  for (const auto& p : validation_layouts()) {
    const WarehouseGraph g(p);
    CHECK(compute_mp(g) >= 2.0 * static_cast<double>(p.num_items()));
  }
}

TEST_CASE("STT makespan of a single item at distance k is 2k + 2") {
  const WarehouseGraph g(LayoutParams{3, 1, 2});
  const NodeId io = g.io_nodes().front();
  for (NodeId s : g.storage_nodes()) {
    Occupancy occ(g.num_nodes(), kNoItem);
    occ[static_cast<std::size_t>(s)] = s;
    const auto field = distances_from(g, occ, io);
    const int k = distance_to(g, field, s);
    // Nothing else is stored, so the way back is the way there.
    if (k < 0) continue;
    CHECK(stt_makespan(g, occ, io) == 2 * k + 2);
  }
}

TEST_CASE("generation is deterministic and seed sensitive") {
  const WarehouseGraph g(LayoutParams{2, 1, 6});
  const auto a = generate_instance(g, DueDateConfig{}, 99);
  const auto b = generate_instance(g, DueDateConfig{}, 99);
  const auto c = generate_instance(g, DueDateConfig{}, 100);
  CHECK(a == b);
  CHECK(instance_to_json(a) == instance_to_json(b));
  CHECK(a.hash() == b.hash());
  CHECK_FALSE(a == c);
  CHECK(a.hash() != c.hash());
}

TEST_CASE("instance files round-trip and reject bad input") {
  const WarehouseGraph g(LayoutParams{4, 2, 8});
  const Instance inst = generate_instance(g, DueDateConfig{0.25, 0.5}, 5);
  const auto dir = std::filesystem::temp_directory_path() / "mdr_instance_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "inst.json").string();
  save_instance(inst, path);
  CHECK(load_instance(path) == inst);

  const std::string text = instance_to_json(inst);
  CHECK_THROWS_AS(instance_from_json(text.substr(0, text.size() / 2)), ParseError);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text.substr(0, text.size() - 5);
  }
  CHECK_THROWS_AS(load_instance(path), ParseError);

  // Move one due date onto an aisle node.
  Instance bad = inst;
  const NodeId aisle = g.aisle_nodes().front();
  const NodeId moved = g.storage_nodes().front();
  bad.due_dates[aisle] = bad.due_dates.at(moved);
  bad.due_dates.erase(moved);
  CHECK_THROWS_AS(instance_from_json(instance_to_json(bad)), ParseError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("configuration parsing") {
  CHECK(DueDateConfig::parse("0.25,1.0") == DueDateConfig{0.25, 1.0});
  CHECK_THROWS(DueDateConfig::parse("0.25"));
  CHECK_THROWS(DueDateConfig{-0.1, 0.5}.validate());
}
