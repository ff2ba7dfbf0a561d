// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "minicase/error.hpp"
#include "minicase/examples.hpp"
#include "minicase/schedule_eval.hpp"

#include <random>

using namespace minicase;

namespace {

Graph matmul_graph(std::int64_t m, std::int64_t k, std::int64_t n) {
  GraphBuilder b;
  auto a = b.input("A", TensorType(DataType::F32, {m, k}));
  auto w = b.input("B", TensorType(DataType::F32, {k, n}));
  b.output(b.matmul(a, w));
  return b.build();
}

Graph mm_exp_mm() {
  GraphBuilder b;
  auto a = b.input("A", TensorType(DataType::F32, {8, 16}));
  auto w = b.input("B", TensorType(DataType::F32, {16, 8}));
  auto f = b.input("F", TensorType(DataType::F32, {8, 4}));
  b.output(b.matmul(b.unary(UnaryFn::Exp, b.matmul(a, w)), f));
  return b.build();
}

Graph add_neg() {
  GraphBuilder b;
  auto x = b.input("X", TensorType(DataType::F32, {8, 8}));
  auto y = b.input("Y", TensorType(DataType::F32, {8, 8}));
  b.output(b.unary(UnaryFn::Neg, b.binary(BinaryFn::Add, x, y)));
  return b.build();
}

MinlpModel model_of(const TieredTileGraph &s, const HardwareSpec &hw = HardwareSpec::desk()) {
  return build_model(s, hw, UKernelModel::defaults(hw));
}

double worst_error(const std::vector<TensorValue> &a, const std::vector<TensorValue> &b) {
  REQUIRE(a.size() == b.size());
  double e = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    e = std::max(e, max_relative_error(a[i], b[i]));
  return e;
}

// Innermost copy of every private buffer directly under its full tensor.
std::vector<std::vector<BufferCopy>> flat_placement(const MinlpModel &m, int level, int entry) {
  std::vector<std::vector<BufferCopy>> p;
  for (const auto &b : m.buffers) {
    if (b.fused)
      p.push_back({BufferCopy{b.fusion_level, 0, 0}});
    else
      p.push_back({BufferCopy{m.top(), 0, m.top()}, BufferCopy{level, entry, 0}});
  }
  return p;
}

} // namespace

TEST_CASE("solved single matmul schedules reproduce the dense result") {
  std::mt19937_64 rng(11);
  auto g = example_tile_mm();
  auto in = random_inputs(g, rng);
  auto ref = eval(g, in);
  auto m = model_of(init_tile_graph(g, 3));
  for (const auto &lvl1 : std::vector<std::vector<std::int64_t>>{{2, 32, 8}, {4, 1, 16}, {64, 64, 64}}) {
    SolveOptions o;
    o.fixed_tiles = single_op_tiles(m.ttg, {lvl1});
    auto sol = solve(m, o);
    auto run = eval_scheduled(m, sol, in);
    CHECK(worst_error(run.outputs, ref) <= 1e-4);
  }
}

TEST_CASE("split reductions keep the dense summation order") {
  std::mt19937_64 rng(5);
  auto g = matmul_graph(16, 8, 16);
  auto in = random_inputs(g, rng);
  auto ref = eval(g, in);
  auto m = model_of(init_tile_graph(g, 3));
  for (const auto &lvl1 : std::vector<std::vector<std::int64_t>>{{4, 1, 2}, {1, 8, 1}, {2, 2, 16}}) {
    auto tiles = single_op_tiles(m.ttg, {lvl1});
    auto run = eval_scheduled(m, tiles, flat_placement(m, 0, 0), in);
    REQUIRE(run.outputs.size() == 1);
    CHECK(run.outputs[0].data == ref[0].data);
  }
}

TEST_CASE("fused schedules compute the unfused result") {
  std::mt19937_64 rng(3);
  auto g = mm_exp_mm();
  auto in = random_inputs(g, rng);
  auto ref = eval(g, in);
  auto base = init_tile_graph(g, 3);
  auto once = merge(base, 1, 2, 2);
  auto twice = merge(once, 1, 2, 1);
  for (const auto *s : {&base, &once, &twice}) {
    auto m = model_of(*s);
    auto sol = solve(m);
    auto run = eval_scheduled(m, sol, in);
    CHECK(worst_error(run.outputs, ref) <= 1e-4);
  }
}

TEST_CASE("elementwise chains run tile by tile") {
  std::mt19937_64 rng(9);
  auto g = add_neg();
  auto in = random_inputs(g, rng);
  auto ref = eval(g, in);
  auto s = merge(init_tile_graph(g, 3), 0, 1, 2);
  auto m = model_of(s);
  auto sol = solve(m);
  auto run = eval_scheduled(m, sol, in);
  CHECK(run.outputs[0].data == ref[0].data);
}

TEST_CASE("a single whole tile reads inputs and writes outputs once") {
  std::mt19937_64 rng(1);
  auto g = matmul_graph(8, 8, 8);
  auto in = random_inputs(g, rng);
  auto m = model_of(init_tile_graph(g, 3));
  auto tiles = single_op_tiles(m.ttg, {{8, 8, 8}});
  auto run = eval_scheduled(m, tiles, flat_placement(m, 2, 0), in);
  const double bytes = 8 * 8 * 4;
  CHECK(run.reads[2] == 2 * bytes);
  CHECK(run.writes[2] == bytes);
  CHECK(run.reads[1] == 2 * bytes);
  CHECK(run.writes[1] == bytes);
  CHECK(run.reads[0] == 0.0);
}

TEST_CASE("counted traffic stays within twice the modeled traffic") {
  std::mt19937_64 rng(2);
  for (auto [mm, kk, nn] : {std::tuple{8, 8, 8}, std::tuple{16, 4, 8}, std::tuple{64, 64, 64}}) {
    auto g = matmul_graph(mm, kk, nn);
    auto in = random_inputs(g, rng);
    auto m = model_of(init_tile_graph(g, 3));
    auto sol = solve(m);
    auto run = eval_scheduled(m, sol, in);
    for (std::size_t l = 1; l < run.reads.size(); ++l) {
      double modeled = sol.cost.reads[l] + sol.cost.writes[l];
      double counted = run.reads[l] + run.writes[l];
      CHECK(counted >= modeled);
      CHECK(counted <= 2 * modeled);
    }
    for (std::size_t l = 0; l < run.peak_live.size(); ++l)
      CHECK(run.peak_live[l] <= sol.cost.used[l]);
  }
}

TEST_CASE("small level-one tiles cost more outer traffic") {
  std::mt19937_64 rng(4);
  auto g = example_tile_mm();
  auto in = random_inputs(g, rng);
  auto m = model_of(init_tile_graph(g, 3));
  auto outer = [&](std::vector<std::int64_t> trips) {
    SolveOptions o;
    o.fixed_tiles = single_op_tiles(m.ttg, {trips});
    return eval_scheduled(m, solve(m, o), in).outer_traffic();
  };
  CHECK(outer({2, 32, 8}) < outer({1, 1, 1}));
}

TEST_CASE("too many live innermost copies are rejected") {
  std::mt19937_64 rng(6);
  auto g = example_tile_mm();
  auto in = random_inputs(g, rng);
  auto m = model_of(init_tile_graph(g, 3));
  auto tiles = single_op_tiles(m.ttg, {{1, 1, 1}});
  auto p = flat_placement(m, 2, 0);
  auto cost = evaluate_schedule(m, tiles, p);
  REQUIRE(cost.has_value());
  CHECK_FALSE(cost->fits);
  CHECK_THROWS_AS(eval_scheduled(m, tiles, p, in), Error);
}

TEST_CASE("tiles that miss the iteration domain are rejected") {
  std::mt19937_64 rng(8);
  auto g = matmul_graph(8, 8, 8);
  auto in = random_inputs(g, rng);
  auto m = model_of(init_tile_graph(g, 3));
  auto tiles = single_op_tiles(m.ttg, {{2, 2, 2}});
  tiles.begin()->second = 3;
  CHECK_THROWS_AS(eval_scheduled(m, tiles, flat_placement(m, 0, 0), in), Error);
}
