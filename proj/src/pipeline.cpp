// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#include "minicase/pipeline.hpp"

#include "minicase/distribution.hpp"
#include "minicase/egraph.hpp"
#include "minicase/examples.hpp"
#include "minicase/extraction.hpp"
#include "minicase/graph_json.hpp"
#include "minicase/interpreter.hpp"
#include "minicase/log.hpp"
#include "minicase/mcts.hpp"
#include "minicase/memory_planner.hpp"
#include "minicase/rewrite_rules.hpp"
#include "minicase/schedule_eval.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <sstream>

namespace minicase {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kRunTolerance = 1e-4;

void check_graph(const Graph &g, const std::string &what) {
  auto v = validate_graph(g);
  if (!v.empty())
    throw Error(ErrorCode::Internal, what + " fails validation at node " + std::to_string(v.front().node) + ": " +
                                         v.front().message);
}

std::string read_text(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::Validation, "cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorCode::Validation, "cannot write '" + path.string() + "'");
  out << text;
}

StageResult finish(const PipelineConfig &c, const std::string &stage, json artifact, std::string report) {
  fs::create_directories(c.out);
  write_text(fs::path(c.out) / (stage + ".json"), artifact.dump(2) + "\n");
  write_text(fs::path(c.out) / (stage + ".txt"), report);
  return StageResult{stage, std::move(artifact), std::move(report)};
}

// Previous artifact of `stage`, unless it was produced from another graph.
std::optional<json> read_artifact(const PipelineConfig &c, const std::string &stage) {
  fs::path p = fs::path(c.out) / (stage + ".json");
  if (!fs::exists(p))
    return std::nullopt;
  json j = load_json(p.string());
  if (!c.graph.empty() && j.value("source", std::string()) != c.graph)
    return std::nullopt;
  return j;
}

[[noreturn]] void missing(const std::string &stage, const std::string &needs) {
  throw Error(ErrorCode::Validation,
              "stage " + stage + " needs the " + needs + " artifact; run it first or pass --graph");
}

std::map<std::string, int> op_counts(const Graph &g) {
  std::map<std::string, int> out;
  for (const auto &n : g.nodes)
    ++out[op_name(n.kind.op)];
  return out;
}

int layout_count(const Graph &g) { return static_cast<int>(g.count(Op::Pack) + g.count(Op::Unpack)); }

std::string source_of(const PipelineConfig &c, const std::optional<json> &upstream) {
  if (!c.graph.empty())
    return c.graph;
  return upstream ? upstream->value("source", std::string()) : std::string();
}

struct Logical {
  std::string source;
  Graph raw;
  Graph graph;
};

Logical logical_input(const PipelineConfig &c, const HardwareSpec &hw, const std::string &stage) {
  if (auto opt = read_artifact(c, "optimize"))
    return {source_of(c, opt), graph_from_json(opt->at("input_graph")), graph_from_json(opt->at("graph"))};
  if (c.graph.empty())
    missing(stage, "optimize");
  Graph raw = pipeline_graph(c.graph);
  return {c.graph, raw, optimize_graph(raw, hw, c.rules, c.extract).graph};
}

struct Distributed {
  Logical logical;
  Graph graph;
  Placement placement;
};

Distributed distributed_input(const PipelineConfig &c, const HardwareSpec &hw, const std::string &stage) {
  if (auto d = read_artifact(c, "distribute")) {
    Placement p;
    p.dims = d->at("mesh").get<std::vector<std::int64_t>>();
    return {{source_of(c, d), graph_from_json(d->at("input_graph")), graph_from_json(d->at("logical"))},
            graph_from_json(d->at("graph")),
            p};
  }
  if (c.graph.empty())
    missing(stage, "distribute");
  auto logical = logical_input(c, hw, stage);
  auto placement = pipeline_mesh(c, hw);
  auto dr = distribute(logical.graph, placement, hw);
  return {logical, dr.graph, placement};
}

// Defaults for `hw`, overridden by the entries of --ukernels. Accepts a bare
// table or the artifact of the calibrate stage.
UKernelModel pipeline_ukernels(const PipelineConfig &c, const HardwareSpec &hw) {
  auto model = UKernelModel::defaults(hw);
  if (c.ukernels.empty())
    return model;
  json j = load_json(c.ukernels);
  auto loaded = UKernelModel::from_json(j.contains("ukernels") ? j.at("ukernels") : j);
  for (const auto &[key, entry] : loaded.entries)
    model.entries[key] = entry;
  return model;
}

json action_json(const ScheduleAction &a) {
  if (a.kind == ScheduleAction::Kind::Merge)
    return {{"kind", "merge"}, {"src", a.src}, {"dst", a.dst}, {"level", a.level}};
  return {{"kind", "reorder"}, {"node", a.node}, {"level", a.level}, {"loops", a.loops}};
}

ScheduleAction action_from_json(const json &j) {
  ScheduleAction a;
  a.level = j.at("level").get<int>();
  if (j.at("kind") == "merge") {
    a.kind = ScheduleAction::Kind::Merge;
    a.src = j.at("src").get<int>();
    a.dst = j.at("dst").get<int>();
  } else {
    a.kind = ScheduleAction::Kind::Reorder;
    a.node = j.at("node").get<int>();
    a.loops = j.at("loops").get<std::vector<int>>();
  }
  return a;
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

} // namespace

int exit_status(ErrorCode code) {
  switch (code) {
  case ErrorCode::Infeasible:
  case ErrorCode::NoStrategy:
  case ErrorCode::CapacityViolation:
    return 3;
  case ErrorCode::Internal:
    return 4;
  default:
    return 2;
  }
}

HardwareSpec pipeline_hardware(const PipelineConfig &c) {
  HardwareSpec hw = c.hw.empty() ? HardwareSpec::desk() : HardwareSpec::load(c.hw);
  hw.validate();
  return hw;
}

Placement pipeline_mesh(const PipelineConfig &c, const HardwareSpec &hw) {
  Placement p;
  if (c.mesh.empty())
    p.dims = hw.mesh.empty() ? Shape{hw.device_count} : hw.mesh;
  else
    p = Placement::parse(c.mesh);
  if (p.device_count() > hw.device_count)
    throw Error(ErrorCode::Validation, "mesh needs " + std::to_string(p.device_count()) +
                                           " devices but the hardware has " + std::to_string(hw.device_count));
  return p;
}

Graph pipeline_graph(const std::string &graph) {
  if (graph.empty())
    throw Error(ErrorCode::Validation, "no graph given");
  auto names = example_names();
  Graph g = std::find(names.begin(), names.end(), graph) != names.end() ? example_by_name(graph)
                                                                         : load_graph(graph);
  auto v = validate_graph(g);
  if (!v.empty())
    throw Error(ErrorCode::Validation,
                "graph '" + graph + "' is invalid at node " + std::to_string(v.front().node) + ": " + v.front().message);
  return g;
}

OptimizeOutcome optimize_graph(const Graph &g, const HardwareSpec &hw, const std::string &rules,
                               const std::string &extract_mode) {
  auto cost = roofline_node_cost(hw);
  auto roots_of = [&](const std::vector<EClassId> &ids) {
    std::vector<EClassId> roots;
    for (auto o : g.outputs)
      roots.push_back(ids[static_cast<std::size_t>(o)]);
    return roots;
  };

  EGraph plain;
  auto plain_roots = roots_of(plain.add_graph(g));
  ExtractionProblem base{&plain, plain_roots, cost};
  double cost_before = extract(base).cost;

  OptimizeOutcome out;
  EGraph eg;
  auto roots = roots_of(eg.add_graph(g));
  SaturationReport sat;
  if (!rules.empty())
    sat = saturate(eg, rules_by_name(rules));
  int layout_nodes = 0;
  for (auto id : eg.class_ids())
    for (const auto &n : eg.eclass(id).nodes)
      if (n.kind.op == Op::Pack || n.kind.op == Op::Unpack)
        ++layout_nodes;

  double cost_after = cost_before;
  bool optimal = true;
  if (extract_mode == "exact") {
    auto r = extract(ExtractionProblem{&eg, roots, cost});
    out.graph = r.graph;
    cost_after = r.cost;
    optimal = r.optimal;
  } else if (extract_mode == "greedy") {
    auto sel = tree_cost_selection(eg, cost);
    out.graph = selection_to_graph(eg, sel, roots);
    cost_after = selection_cost(eg, sel, roots, cost);
    optimal = false;
  } else if (extract_mode == "none") {
    out.graph = g;
  } else {
    throw Error(ErrorCode::Validation, "unknown extraction mode '" + extract_mode + "'");
  }
  check_graph(out.graph, "optimized graph");

  out.stats = {{"saturation",
                {{"iterations", sat.iterations},
                 {"classes", eg.class_count()},
                 {"enodes", eg.node_count()},
                 {"saturated", sat.saturated}}},
               {"layout_enodes", layout_nodes},
               {"ops_before", op_counts(g)},
               {"ops_after", op_counts(out.graph)},
               {"transposes", {g.count(Op::Transpose), out.graph.count(Op::Transpose)}},
               {"pack_unpack", {layout_count(g), layout_count(out.graph)}},
               {"cost", {cost_before, cost_after}},
               {"optimal", optimal}};
  return out;
}

Graph schedulable_subgraph(const Graph &g, std::map<std::string, NodeId> *bindings) {
  auto supported = [&](const GraphNode &n) {
    if (n.kind.op != Op::MatMul && n.kind.op != Op::Unary && n.kind.op != Op::Binary)
      return false;
    if (n.type.is_packed())
      return false;
    return std::none_of(n.inputs.begin(), n.inputs.end(),
                        [&](NodeId i) { return g.node(i).type.is_packed(); });
  };
  std::vector<bool> in_sub(g.size(), false);
  for (const auto &n : g.nodes)
    in_sub[static_cast<std::size_t>(n.id)] = supported(n);

  GraphBuilder b;
  std::map<NodeId, NodeId> mapped;
  auto value = [&](NodeId id) {
    auto it = mapped.find(id);
    if (it != mapped.end())
      return it->second;
    const auto &n = g.node(id);
    std::string name = n.kind.op == Op::Input ? n.kind.name : "n" + std::to_string(id);
    NodeId x = b.input(name, n.type);
    mapped[id] = x;
    if (bindings)
      (*bindings)[name] = id;
    return x;
  };
  for (const auto &n : g.nodes) {
    if (!in_sub[static_cast<std::size_t>(n.id)])
      continue;
    std::vector<NodeId> ins;
    for (auto i : n.inputs)
      ins.push_back(value(i));
    mapped[n.id] = b.add(n.kind, ins);
  }
  auto users = g.users();
  std::set<NodeId> outputs(g.outputs.begin(), g.outputs.end());
  for (const auto &n : g.nodes) {
    auto id = static_cast<std::size_t>(n.id);
    if (!in_sub[id])
      continue;
    bool escapes = outputs.count(n.id) > 0 || users[id].empty() ||
                   std::any_of(users[id].begin(), users[id].end(),
                               [&](NodeId u) { return !in_sub[static_cast<std::size_t>(u)]; });
    if (escapes)
      b.output(mapped[n.id]);
  }
  return b.build();
}

StageResult stage_optimize(const PipelineConfig &c) {
  auto hw = pipeline_hardware(c);
  Graph raw = pipeline_graph(c.graph);
  auto res = optimize_graph(raw, hw, c.rules, c.extract);
  const auto &st = res.stats;

  std::ostringstream r;
  r << "== optimize ==\n";
  r << "graph: " << c.graph << " (" << raw.size() << " nodes -> " << res.graph.size() << " nodes)\n";
  r << "rules: " << (c.rules.empty() ? "none" : c.rules) << ", extraction: " << c.extract << "\n";
  r << "saturation: " << st["saturation"]["iterations"] << " iterations, " << st["saturation"]["classes"]
    << " classes, " << st["saturation"]["enodes"] << " e-nodes, "
    << (st["saturation"]["saturated"].get<bool>() ? "saturated" : "stopped at a limit") << "\n";
  r << "transposes: " << st["transposes"][0] << " -> " << st["transposes"][1] << "\n";
  r << "pack/unpack: " << st["layout_enodes"] << " e-node candidates, " << st["pack_unpack"][0] << " -> "
    << st["pack_unpack"][1] << " in the graph\n";
  r << "roofline cost: " << format_double(st["cost"][0].get<double>()) << " s -> "
    << format_double(st["cost"][1].get<double>()) << " s" << (st["optimal"].get<bool>() ? "" : " (not proven optimal)")
    << "\n";
  r << graph_to_text(res.graph);

  json a = {{"stage", "optimize"},         {"source", c.graph},   {"rules", c.rules},
            {"extract", c.extract},        {"stats", res.stats},  {"input_graph", graph_to_json(raw)},
            {"graph", graph_to_json(res.graph)}};
  return finish(c, "optimize", std::move(a), r.str());
}

StageResult stage_distribute(const PipelineConfig &c) {
  auto hw = pipeline_hardware(c);
  auto logical = logical_input(c, hw, "distribute");
  auto placement = pipeline_mesh(c, hw);
  auto dr = distribute(logical.graph, placement, hw);
  check_graph(dr.graph, "distributed graph");

  std::ostringstream r;
  r << "== distribute ==\n";
  r << "mesh: " << placement.device_count() << " devices [";
  for (std::size_t i = 0; i < placement.dims.size(); ++i)
    r << (i ? "," : "") << placement.dims[i];
  r << "], e-graph " << dr.classes << " classes / " << dr.nodes << " e-nodes\n";
  r << "modeled cost: " << format_double(dr.cost) << " s\n";
  r << "per-device peak: " << (dr.memory.device_peak.empty() ? 0 : dr.memory.device_peak.front()) << " B of "
    << dr.memory.capacity << " B" << (dr.memory.fits ? "" : " (does not fit)") << "\n";
  r << strategy_table(dr.graph, placement, hw);

  json a = {{"stage", "distribute"},
            {"source", logical.source},
            {"mesh", placement.dims},
            {"cost", dr.cost},
            {"classes", dr.classes},
            {"enodes", dr.nodes},
            {"memory",
             {{"device_peak", dr.memory.device_peak},
              {"cluster_sum", dr.memory.cluster_sum},
              {"capacity", dr.memory.capacity},
              {"fits", dr.memory.fits}}},
            {"input_graph", graph_to_json(logical.raw)},
            {"logical", graph_to_json(logical.graph)},
            {"graph", graph_to_json(dr.graph)}};
  return finish(c, "distribute", std::move(a), r.str());
}

StageResult stage_schedule(const PipelineConfig &c) {
  auto hw = pipeline_hardware(c);
  auto logical = logical_input(c, hw, "schedule");
  std::map<std::string, NodeId> bindings;
  Graph sub = schedulable_subgraph(logical.graph, &bindings);
  std::string from = "optimized";
  std::ostringstream r;
  r << "== schedule ==\n";
  if (sub.size() == sub.inputs.size()) {
    // Every compute node runs on packed tensors; tile the dense form instead.
    bindings.clear();
    sub = schedulable_subgraph(logical.raw, &bindings);
    from = "input";
    r << "the optimized graph computes on packed tensors only; scheduling the dense input graph\n";
  }
  const auto ops = sub.size() - sub.inputs.size();

  json a = {{"stage", "schedule"},   {"source", logical.source}, {"levels", c.levels},
            {"iterations", c.iters}, {"seed", c.seed},           {"scheduled_from", from},
            {"bindings", bindings},  {"scheduled", ops > 0},     {"subgraph", graph_to_json(sub)}};
  if (ops == 0) {
    r << "no MatMul, Unary or Binary operators on unpacked tensors; nothing to schedule\n";
    return finish(c, "schedule", std::move(a), r.str());
  }
  auto root = init_tile_graph(sub, c.levels);
  auto uk = pipeline_ukernels(c, hw);
  MctsOptions o;
  o.iterations = c.iters;
  o.seed = c.seed;
  o.threads = c.threads;
  auto res = mcts_search(root, hw, uk, o);
  auto m = build_model(res.best, hw, uk);

  json actions = json::array();
  for (const auto &act : res.actions)
    actions.push_back(action_json(act));
  a["actions"] = actions;
  a["root"] = root.to_string();
  a["best"] = res.best.to_string();
  a["objective"] = res.objective;
  a["root_objective"] = res.root_objective;
  a["states"] = res.states;
  a["evaluated"] = res.evaluated;
  a["solution"] = res.solution.to_json(m);

  r << "subgraph: " << ops << " operators, " << c.levels << " tile levels\n";
  r << "search: " << c.iters << " iterations, seed " << c.seed << ", " << res.states << " states, "
    << res.evaluated << " solved\n";
  r << "objective: " << format_double(res.root_objective) << " s (unfused) -> " << format_double(res.objective)
    << " s\n";
  r << "actions:";
  if (res.actions.empty())
    r << " none";
  for (const auto &act : res.actions)
    r << " " << act.to_string();
  r << "\n" << res.best.to_string() << res.solution.table(m);
  return finish(c, "schedule", std::move(a), r.str());
}

namespace {

json plan_json(const std::vector<BufferRecord> &buffers, const MemoryPlan &p) {
  json offsets = json::array();
  for (const auto &[id, off] : p.offsets)
    offsets.push_back({id, off});
  return {{"buffers", buffers.size()},
          {"footprint", p.footprint},
          {"peak_live", peak_live_bytes(buffers)},
          {"optimal", p.optimal},
          {"offsets", offsets}};
}

MemoryPlan checked_plan(const std::vector<BufferRecord> &buffers, const std::string &what) {
  auto p = plan(buffers, PlanMode::Auto);
  if (!plan_is_valid(buffers, p))
    throw Error(ErrorCode::Internal, what + " plan overlaps interfering buffers");
  return p;
}

} // namespace

StageResult stage_plan(const PipelineConfig &c) {
  auto hw = pipeline_hardware(c);
  auto d = distributed_input(c, hw, "plan");
  auto dev_buffers = liveness(d.graph, d.placement);
  auto dev_plan = checked_plan(dev_buffers, "per-device");
  auto log_buffers = liveness(d.logical.graph);
  auto log_plan = checked_plan(log_buffers, "logical");
  auto consts = plan_constants(d.graph, d.placement);

  std::ostringstream r;
  r << "== plan ==\n";
  r << "per-device arena: " << dev_plan.footprint << " B (peak live " << peak_live_bytes(dev_buffers) << " B, "
    << (dev_plan.optimal ? "exact" : "first fit") << ")\n";
  r << plan_report(dev_buffers, dev_plan);
  r << "logical arena: " << log_plan.footprint << " B (" << (log_plan.optimal ? "exact" : "first fit") << ")\n";
  r << plan_report(log_buffers, log_plan);
  r << "pinned constants per device:";
  for (auto b : consts.device_bytes)
    r << " " << b;
  r << " B\n";

  json a = {{"stage", "plan"},
            {"source", d.logical.source},
            {"device", plan_json(dev_buffers, dev_plan)},
            {"logical", plan_json(log_buffers, log_plan)},
            {"constant_bytes", consts.device_bytes}};
  return finish(c, "plan", std::move(a), r.str());
}

StageResult stage_run(const PipelineConfig &c) {
  auto hw = pipeline_hardware(c);
  auto d = distributed_input(c, hw, "run");
  std::mt19937_64 rng(c.seed);
  auto inputs = random_inputs(d.logical.raw, rng);
  auto ref = eval(d.logical.raw, inputs);

  json checks = json::array();
  std::vector<std::string> failed;
  auto compare = [&](const std::string &name, const std::vector<TensorValue> &got,
                     const std::vector<TensorValue> &want) {
    double err = got.size() == want.size() ? 0.0 : std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < std::min(got.size(), want.size()); ++i)
      err = std::max(err, max_relative_error(got[i], want[i]));
    bool ok = err <= kRunTolerance;
    if (!ok)
      failed.push_back(name);
    checks.push_back({{"name", name}, {"max_relative_error", err}, {"tolerance", kRunTolerance}, {"pass", ok}});
  };

  compare("optimized", eval(d.logical.graph, inputs), ref);
  auto log_buffers = liveness(d.logical.graph);
  auto layout = arena_layout(log_buffers, checked_plan(log_buffers, "logical"));
  compare("arena", eval_in_arena(d.logical.graph, inputs, layout), ref);
  compare("distributed", eval_distributed(d.graph, d.placement, inputs).outputs, ref);

  auto sched = read_artifact(c, "schedule");
  if (sched && sched->value("scheduled", false)) {
    Graph sub = graph_from_json(sched->at("subgraph"));
    auto values = eval_all(sched->value("scheduled_from", "optimized") == "input" ? d.logical.raw : d.logical.graph,
                           inputs);
    TensorMap sub_inputs;
    for (const auto &[name, id] : sched->at("bindings").get<std::map<std::string, NodeId>>())
      sub_inputs[name] = values.at(static_cast<std::size_t>(id));
    auto state = init_tile_graph(sub, sched->at("levels").get<int>());
    for (const auto &aj : sched->at("actions"))
      state = apply_action(state, action_from_json(aj));
    auto m = build_model(state, hw, pipeline_ukernels(c, hw));
    auto run = eval_scheduled(m, solve(m), sub_inputs);
    compare("scheduled", run.outputs, eval(sub, sub_inputs));
  }

  json sums = json::array();
  for (const auto &t : ref) {
    double s = 0.0;
    for (float x : t.data)
      s += x;
    sums.push_back(s);
  }
  std::ostringstream r;
  r << "== run ==\n";
  r << "inputs: seeded random (seed " << c.seed << "), tolerance " << kRunTolerance << " relative\n";
  for (const auto &ch : checks)
    r << "  " << std::left << std::setw(12) << ch["name"].get<std::string>() << " max rel err "
      << format_double(ch["max_relative_error"].get<double>()) << (ch["pass"].get<bool>() ? "  ok" : "  MISMATCH")
      << "\n";
  json a = {{"stage", "run"}, {"source", d.logical.source}, {"seed", c.seed}, {"checks", checks},
            {"output_sums", sums}};
  auto result = finish(c, "run", std::move(a), r.str());
  if (!failed.empty())
    throw Error(ErrorCode::Internal, "execution '" + failed.front() + "' differs from the raw graph");
  return result;
}

StageResult stage_report(const PipelineConfig &c) {
  std::string text;
  json sections = json::array();
  for (const char *stage : {"optimize", "distribute", "schedule", "plan", "run"}) {
    fs::path p = fs::path(c.out) / (std::string(stage) + ".txt");
    if (!fs::exists(p))
      continue;
    text += read_text(p.string());
    text += "\n";
    sections.push_back(stage);
  }
  if (sections.empty())
    throw Error(ErrorCode::Validation, "stage report: no stage artifacts in '" + c.out + "'");
  return finish(c, "report", json{{"stage", "report"}, {"sections", sections}}, text);
}

StageResult stage_calibrate(const PipelineConfig &c) {
  if (c.samples.empty())
    throw Error(ErrorCode::Validation, "calibrate needs --samples <csv>");
  auto samples = parse_calibration_csv(read_text(c.samples));
  auto model = calibrate(samples);
  std::ostringstream r;
  r << "== calibrate ==\n" << samples.size() << " samples\n";
  for (const auto &[key, e] : model.entries)
    r << "  " << key.first << "/" << unit_name(key.second) << ": base " << format_double(e.base)
      << " s, per element " << format_double(e.per_element) << " s\n";
  json a = {{"stage", "calibrate"}, {"samples", samples.size()}, {"ukernels", model.to_json()}};
  return finish(c, "calibrate", std::move(a), r.str());
}

std::vector<StageResult> run_pipeline(const PipelineConfig &c, std::string *current) {
  std::vector<StageResult> out;
  const std::vector<std::pair<const char *, StageResult (*)(const PipelineConfig &)>> stages{
      {"optimize", stage_optimize}, {"distribute", stage_distribute}, {"schedule", stage_schedule},
      {"plan", stage_plan},         {"run", stage_run},               {"report", stage_report}};
  for (const auto &[name, fn] : stages) {
    if (current)
      *current = name;
    out.push_back(fn(c));
  }
  return out;
}

} // namespace minicase
