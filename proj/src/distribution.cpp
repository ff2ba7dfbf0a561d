// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#include "minicase/distribution.hpp"

#include "minicase/error.hpp"
#include "minicase/log.hpp"
#include "minicase/memory_planner.hpp"

#include <iomanip>
#include <set>
#include <sstream>

namespace minicase {

namespace {

std::vector<Sbp> dim_states(std::size_t rank) {
  std::vector<Sbp> out{Sbp::broadcast()};
  for (std::size_t a = 0; a < rank; ++a)
    out.push_back(Sbp::split(static_cast<int>(a)));
  return out;
}

DimSignature sig(std::vector<Sbp> in, Sbp out) { return {std::move(in), out}; }

// Cartesian product of per-dim choices; dims of size 1 only take `trivial`.
template <typename T, typename Fn>
void for_each_product(const std::vector<std::vector<T>> &choices, Fn &&fn) {
  std::vector<std::size_t> idx(choices.size(), 0);
  for (const auto &c : choices)
    if (c.empty())
      return;
  while (true) {
    std::vector<const T *> pick;
    for (std::size_t d = 0; d < choices.size(); ++d)
      pick.push_back(&choices[d][idx[d]]);
    fn(pick);
    std::size_t d = choices.size();
    while (d > 0) {
      --d;
      if (++idx[d] < choices[d].size())
        break;
      idx[d] = 0;
      if (d == 0)
        return;
    }
    if (choices.empty())
      return;
  }
}

bool divisible(const TensorType &t, const NdSbp &s, const Placement &p) {
  return shard_divisible(t.shape, s, p);
}

TensorType shard_type(const TensorType &t, const std::optional<NdSbp> &s, const Placement &p) {
  if (!s)
    return t;
  TensorType out = t;
  out.shape = shard_shape(t.shape, *s, p);
  return out;
}

} // namespace

std::vector<DimSignature> dim_signatures(const OpKind &kind,
                                         const std::vector<TensorType> &inputs) {
  const Sbp B = Sbp::broadcast(), P = Sbp::partial();
  std::vector<DimSignature> out;
  auto rank = inputs.empty() ? 0 : inputs[0].rank();
  switch (kind.op) {
  case Op::Unary:
    out.push_back(sig({B}, B));
    for (std::size_t a = 0; a < rank; ++a)
      out.push_back(sig({Sbp::split(static_cast<int>(a))}, Sbp::split(static_cast<int>(a))));
    if (kind.unary == UnaryFn::Neg)
      out.push_back(sig({P}, P));
    break;
  case Op::Binary:
    out.push_back(sig({B, B}, B));
    for (std::size_t a = 0; a < rank; ++a) {
      auto s = Sbp::split(static_cast<int>(a));
      out.push_back(sig({s, s}, s));
    }
    if (kind.binary == BinaryFn::Mul) {
      out.push_back(sig({P, B}, P));
      out.push_back(sig({B, P}, P));
    } else {
      out.push_back(sig({P, P}, P));
    }
    break;
  case Op::MatMul:
    out.push_back(sig({Sbp::split(0), B}, Sbp::split(0)));
    out.push_back(sig({B, Sbp::split(1)}, Sbp::split(1)));
    out.push_back(sig({Sbp::split(1), Sbp::split(0)}, P));
    out.push_back(sig({B, B}, B));
    break;
  case Op::Transpose:
    out.push_back(sig({B}, B));
    out.push_back(sig({P}, P));
    for (std::size_t i = 0; i < kind.perm.size(); ++i)
      out.push_back(sig({Sbp::split(static_cast<int>(kind.perm[i]))}, Sbp::split(static_cast<int>(i))));
    break;
  case Op::Pack:
  case Op::Unpack:
    out.push_back(sig({B}, B));
    out.push_back(sig({P}, P));
    for (std::size_t a = 0; a < rank; ++a)
      out.push_back(sig({Sbp::split(static_cast<int>(a))}, Sbp::split(static_cast<int>(a))));
    break;
  case Op::Reshape:
  case Op::Slice:
    out.push_back(sig({B}, B));
    break;
  default:
    break;
  }
  return out;
}

std::vector<NdSignature> signatures(const OpKind &kind, const std::vector<TensorType> &inputs,
                                    const Placement &placement) {
  auto per_dim = dim_signatures(kind, inputs);
  std::vector<std::vector<DimSignature>> choices;
  for (auto d : placement.dims) {
    if (d == 1) {
      std::vector<DimSignature> only;
      for (const auto &s : per_dim)
        if (s.output.is_broadcast())
          only.push_back(s);
      choices.push_back(only);
    } else {
      choices.push_back(per_dim);
    }
  }
  TensorType out_type = infer_type(kind, inputs);
  std::vector<NdSignature> out;
  for_each_product(choices, [&](const std::vector<const DimSignature *> &pick) {
    NdSignature s;
    s.inputs.resize(inputs.size());
    for (const auto *d : pick) {
      for (std::size_t i = 0; i < inputs.size(); ++i)
        s.inputs[i].entries.push_back(d->inputs[i]);
      s.output.entries.push_back(d->output);
    }
    for (std::size_t i = 0; i < inputs.size(); ++i)
      if (!divisible(inputs[i], s.inputs[i], placement))
        return;
    if (!divisible(out_type, s.output, placement))
      return;
    out.push_back(std::move(s));
  });
  return out;
}

std::vector<NdSbp> input_candidates(const TensorType &type, const Placement &placement) {
  std::vector<std::vector<Sbp>> choices;
  for (auto d : placement.dims)
    choices.push_back(d == 1 ? std::vector<Sbp>{Sbp::broadcast()} : dim_states(type.rank()));
  std::vector<NdSbp> out;
  for_each_product(choices, [&](const std::vector<const Sbp *> &pick) {
    NdSbp s;
    for (const auto *e : pick)
      s.entries.push_back(*e);
    if (divisible(type, s, placement))
      out.push_back(std::move(s));
  });
  return out;
}

namespace {

class DistBuilder {
public:
  DistBuilder(const Graph &g, const Placement &p) : g_(g) { d_.placement = p; }

  DistEGraph run() {
    for (const auto &node : g_.nodes) {
      if (node.kind.op == Op::Input || node.kind.op == Op::Constant)
        add_input(node);
      else if (node.kind.op == Op::Boxing)
        throw Error(ErrorCode::Validation, "graph is already distributed");
      else
        add_compute(node);
    }
    for (auto o : g_.outputs)
      d_.roots.push_back(add_output(o));
    d_.egraph.rebuild();
    for (auto &r : d_.roots)
      r = d_.egraph.find(r);
    for (auto *c : {&d_.cluster, &d_.reshard})
      for (auto &[id, m] : *c)
        for (auto &[s, cls] : m)
          cls = d_.egraph.find(cls);
    return std::move(d_);
  }

private:
  EGraph &eg() { return d_.egraph; }

  void record(std::map<NdSbp, EClassId> &m, const NdSbp &s, EClassId cls) {
    auto it = m.find(s);
    if (it == m.end())
      m.emplace(s, cls);
    else
      it->second = eg().merge(it->second, cls);
  }

  void add_input(const GraphNode &node) {
    auto host = eg().add(node.kind, {}, std::nullopt);
    d_.host[node.id] = host;
    auto &memo = d_.cluster[node.id];
    for (const auto &s : input_candidates(node.type, d_.placement))
      record(memo, s, eg().add(OpKind::boxing(s), {host}, std::nullopt));
  }

  // One-collective reshards of every materialized state of `id`.
  void gen_reshard(NodeId id) {
    if (!resharded_.insert(id).second)
      return;
    const auto &type = g_.node(id).type;
    auto sources = d_.cluster[id];
    for (const auto &[src, cls] : sources) {
      for (std::size_t d = 0; d < d_.placement.rank(); ++d) {
        if (d_.placement.dims[d] == 1)
          continue;
        for (const auto &e : dim_states(type.rank())) {
          if (e == src[d])
            continue;
          NdSbp t = src;
          t[d] = e;
          if (!divisible(type, t, d_.placement))
            continue;
          auto box = eg().add(OpKind::boxing(t), {eg().find(cls)}, std::nullopt);
          auto memo = d_.cluster[id].find(t);
          if (memo != d_.cluster[id].end())
            memo->second = eg().merge(memo->second, box);
          else
            record(d_.reshard[id], t, box);
        }
      }
    }
  }

  std::optional<EClassId> state_class(NodeId id, const NdSbp &s) {
    for (auto *c : {&d_.cluster, &d_.reshard}) {
      auto it = c->find(id);
      if (it == c->end())
        continue;
      auto jt = it->second.find(s);
      if (jt != it->second.end())
        return eg().find(jt->second);
    }
    return std::nullopt;
  }

  void add_compute(const GraphNode &node) {
    std::vector<TensorType> in_types;
    for (auto i : node.inputs) {
      in_types.push_back(g_.node(i).type);
      gen_reshard(i);
    }
    auto &memo = d_.cluster[node.id];
    std::size_t added = 0;
    for (const auto &s : signatures(node.kind, in_types, d_.placement)) {
      std::vector<EClassId> children;
      for (std::size_t i = 0; i < node.inputs.size(); ++i) {
        auto cls = state_class(node.inputs[i], s.inputs[i]);
        if (!cls)
          break;
        children.push_back(*cls);
      }
      if (children.size() != node.inputs.size())
        continue;
      record(memo, s.output, eg().add(node.kind, children, s.output));
      ++added;
    }
    if (added == 0)
      throw Error(ErrorCode::NoStrategy, "no distributed strategy for node " +
                                             std::to_string(node.id) + " (" +
                                             op_name(node.kind.op) + ") on mesh " +
                                             d_.placement.to_string());
  }

  EClassId add_output(NodeId id) {
    std::optional<EClassId> host;
    for (const auto &[s, cls] : d_.cluster[id]) {
      auto box = eg().add(OpKind::boxing(std::nullopt), {eg().find(cls)}, std::nullopt);
      host = host ? eg().merge(*host, box) : box;
    }
    if (!host)
      throw Error(ErrorCode::NoStrategy, "output " + std::to_string(id) + " has no state");
    return *host;
  }

  const Graph &g_;
  DistEGraph d_;
  std::set<NodeId> resharded_;
};

} // namespace

DistEGraph build_dist_egraph(const Graph &g, const Placement &placement) {
  auto d = DistBuilder(g, placement).run();
  log_info("distributed e-graph: " + std::to_string(d.egraph.class_count()) + " classes, " +
           std::to_string(d.egraph.node_count()) + " nodes");
  return d;
}

double boxing_cost(const TensorType &type, const std::optional<NdSbp> &src,
                   const std::optional<NdSbp> &dst, const Placement &placement,
                   const HardwareSpec &hw) {
  double total = 0.0;
  for (const auto &step : lower_boxing(type, src, dst, placement))
    total += comm_cost(step.kind, step.payload_bytes, step.participants, hw);
  return total;
}

NodeCostFn dist_node_cost(const HardwareSpec &hw, const Placement &placement) {
  return [hw, placement](const EGraph &g, EClassId cls, const ENode &n) {
    if (n.kind.op == Op::Input || n.kind.op == Op::Constant)
      return 0.0;
    if (n.kind.op == Op::Boxing) {
      const auto &child = g.eclass(n.children.at(0));
      return boxing_cost(child.type, child.sbp, n.kind.box_target, placement, hw);
    }
    std::vector<TensorType> in;
    for (auto c : n.children)
      in.push_back(shard_type(g.eclass(c).type, g.eclass(c).sbp, placement));
    auto out = shard_type(g.eclass(cls).type, n.sbp, placement);
    return roofline_cost(n.kind, in, out, hw);
  };
}

MemoryReport memory_check(const Graph &dg, const Placement &placement, const HardwareSpec &hw,
                          std::optional<std::int64_t> capacity) {
  MemoryReport r;
  r.capacity = capacity ? *capacity : hw.levels.back().capacity;
  // Shards divide evenly, so every device holds the same buffer sizes.
  auto peak = peak_live_bytes(dg, placement);
  r.device_peak.assign(static_cast<std::size_t>(placement.device_count()), peak);
  r.cluster_sum = peak * placement.device_count();
  r.fits = peak <= r.capacity;
  return r;
}

DistributionResult distribute(const Graph &g, const Placement &placement, const HardwareSpec &hw,
                              std::optional<std::int64_t> capacity) {
  auto d = build_dist_egraph(g, placement);
  ExtractionProblem p;
  p.egraph = &d.egraph;
  p.roots = d.roots;
  p.cost = dist_node_cost(hw, placement);
  p.memory_limit = capacity ? *capacity : hw.levels.back().capacity;
  p.placement = placement;
  auto ex = extract(p);
  if (!ex.optimal)
    log_warn("distribution search budget exhausted; strategy may be suboptimal");
  DistributionResult r;
  r.graph = std::move(ex.graph);
  r.graph.placement = placement;
  r.cost = ex.cost;
  r.memory = memory_check(r.graph, placement, hw, capacity);
  r.classes = d.egraph.class_count();
  r.nodes = d.egraph.node_count();
  return r;
}

std::string strategy_table(const Graph &dg, const Placement &placement, const HardwareSpec &hw) {
  std::ostringstream os;
  os << std::left << std::setw(5) << "id" << std::setw(12) << "op" << std::setw(14) << "sbp"
     << "cost_s\n";
  for (const auto &n : dg.nodes) {
    std::string sbp = "host";
    double cost = 0.0;
    if (n.kind.op == Op::Boxing) {
      const auto &src = dg.node(n.inputs.at(0));
      std::optional<NdSbp> from =
          src.kind.op == Op::Boxing ? src.kind.box_target : src.sbp;
      cost = boxing_cost(src.type, from, n.kind.box_target, placement, hw);
      sbp = n.kind.box_target ? n.kind.box_target->to_string() : "host";
    } else if (n.kind.op != Op::Input && n.kind.op != Op::Constant) {
      std::vector<TensorType> in;
      for (auto i : n.inputs) {
        const auto &src = dg.node(i);
        std::optional<NdSbp> s = src.kind.op == Op::Boxing ? src.kind.box_target : src.sbp;
        in.push_back(shard_type(src.type, s, placement));
      }
      cost = roofline_cost(n.kind, in, shard_type(n.type, n.sbp, placement), hw);
      sbp = n.sbp ? n.sbp->to_string() : "host";
    }
    os << std::setw(5) << n.id << std::setw(12) << op_name(n.kind.op) << std::setw(14) << sbp
       << cost << "\n";
  }
  return os.str();
}

} // namespace minicase
