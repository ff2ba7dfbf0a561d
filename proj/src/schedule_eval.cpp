// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#include "minicase/schedule_eval.hpp"

#include "minicase/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace minicase {

double ScheduledRun::outer_traffic() const {
  double t = 0.0;
  for (std::size_t s = 1; s < reads.size(); ++s)
    t += reads[s] + writes[s];
  return t;
}

double ScheduledRun::total(int storage) const {
  auto s = static_cast<std::size_t>(storage);
  return reads.at(s) + writes.at(s);
}

namespace {

struct Trigger {
  std::size_t buffer;
  std::size_t copy;
};

class Runner {
public:
  Runner(const MinlpModel &m, const TileAssignment &tiles,
         const std::vector<std::vector<BufferCopy>> &placement, const TensorMap &inputs)
      : m_(m), ttg_(m.ttg), ex_(m.ttg, tiles), placement_(placement) {
    if (!ex_.covers())
      throw Error(ErrorCode::Validation, "tiles do not cover the iteration domains");
    if (placement.size() != m.buffers.size())
      throw Error(ErrorCode::Validation, "placement has " + std::to_string(placement.size()) +
                                             " chains for " + std::to_string(m.buffers.size()) + " buffers");
    const auto levels = static_cast<std::size_t>(ttg_.num_levels);
    run_.reads.assign(levels, 0.0);
    run_.writes.assign(levels, 0.0);
    run_.peak_live.assign(levels, 0);
    live_.assign(levels, 0);
    written_.resize(m.buffers.size());

    const auto &g = ttg_.graph;
    values_.resize(g.nodes.size());
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      const auto &n = g.nodes[i];
      if (n.kind.op == Op::Input) {
        auto it = inputs.find(n.kind.name);
        if (it == inputs.end())
          throw Error(ErrorCode::MissingInput, "input '" + n.kind.name + "' has no bound value");
        values_[i] = it->second;
      } else if (n.kind.op == Op::Constant) {
        values_[i] = apply_op(n.kind, {});
      } else {
        values_[i] = TensorValue::zeros(n.type);
      }
    }

    for (std::size_t b = 0; b < placement.size(); ++b) {
      const auto &chain = placement[b];
      for (std::size_t c = 0; c < chain.size(); ++c) {
        const auto &cp = chain[c];
        if (!m.buffers[b].fused && c == 0) {
          add_live(cp.storage, copy_size(b, cp));
          continue;
        }
        triggers_[{m.buffers[b].owner, cp.level, cp.entry}].push_back({b, c});
      }
    }
  }

  ScheduledRun run() {
    for (int id : top_order())
      exec(ttg_.top(), id, 0, std::vector<std::int64_t>(ttg_.var_extent.size(), 0));
    for (auto o : ttg_.graph.outputs)
      run_.outputs.push_back(values_[static_cast<std::size_t>(o)]);
    return std::move(run_);
  }

private:
  std::int64_t copy_size(std::size_t b, const BufferCopy &cp) const {
    const auto &buf = m_.buffers[b];
    std::int64_t size = buf.elem_bytes;
    for (int v : buf.axes)
      size *= ex_.extent_at(buf.owner, cp.level, cp.entry, v);
    return size;
  }

  void add_live(int storage, std::int64_t bytes) {
    auto s = static_cast<std::size_t>(storage);
    live_[s] += bytes;
    run_.peak_live[s] = std::max(run_.peak_live[s], live_[s]);
    if (live_[s] > m_.capacity(storage))
      throw Error(ErrorCode::CapacityViolation,
                  "storage level " + std::to_string(storage) + " holds " + std::to_string(live_[s]) +
                      " bytes, capacity " + std::to_string(m_.capacity(storage)));
  }

  // Top-level nodes in dependency order.
  std::vector<int> top_order() const {
    const int top = ttg_.top();
    std::vector<int> ids;
    for (const auto &[id, n] : ttg_.levels[static_cast<std::size_t>(top)])
      ids.push_back(id);
    std::map<int, std::set<int>> preds;
    for (int id : ids)
      for (int o : ttg_.ops_under(top, id))
        for (auto in : ttg_.ops[static_cast<std::size_t>(o)].inputs) {
          int p = ttg_.producer_of(in);
          if (p >= 0 && ttg_.node_of(p, top) != id)
            preds[id].insert(ttg_.node_of(p, top));
        }
    std::vector<int> order;
    std::set<int> done;
    while (order.size() < ids.size()) {
      bool progressed = false;
      for (int id : ids) {
        if (done.count(id))
          continue;
        if (std::all_of(preds[id].begin(), preds[id].end(), [&](int p) { return done.count(p) > 0; })) {
          order.push_back(id);
          done.insert(id);
          progressed = true;
        }
      }
      if (!progressed)
        throw Error(ErrorCode::Internal, "cyclic top-level tile nodes");
    }
    return order;
  }

  // Fires the copies whose position is (level, entry) inside the subtree
  // rooted at node `id`. Returns the bytes to release per storage level.
  std::vector<std::pair<int, std::int64_t>> fire(int level, int id, int entry,
                                                 const std::vector<std::int64_t> &offsets) {
    std::vector<std::pair<int, std::int64_t>> held;
    for (int op : under(level, id)) {
      auto it = triggers_.find({op, level, entry});
      if (it == triggers_.end())
        continue;
      for (const auto &t : it->second) {
        const auto &buf = m_.buffers[t.buffer];
        const auto &chain = placement_[t.buffer];
        const auto &cp = chain[t.copy];
        std::int64_t size = copy_size(t.buffer, cp);
        add_live(cp.storage, size);
        held.emplace_back(cp.storage, size);
        if (buf.fused)
          continue;
        int parent = chain[t.copy - 1].storage;
        std::vector<std::int64_t> region;
        for (int v : buf.axes)
          region.push_back(offsets[static_cast<std::size_t>(v)]);
        bool refill = false;
        if (buf.write)
          refill = !written_[t.buffer][t.copy].insert(region).second;
        for (int l = cp.storage + 1; l <= parent; ++l) {
          auto s = static_cast<std::size_t>(l);
          if (buf.write) {
            run_.writes[s] += static_cast<double>(size);
            if (refill)
              run_.reads[s] += static_cast<double>(size);
          } else {
            run_.reads[s] += static_cast<double>(size);
          }
        }
      }
    }
    return held;
  }

  void release(const std::vector<std::pair<int, std::int64_t>> &held) {
    for (const auto &[s, bytes] : held)
      live_[static_cast<std::size_t>(s)] -= bytes;
  }

  const std::vector<int> &under(int level, int id) {
    auto [it, fresh] = under_.try_emplace({level, id});
    if (fresh)
      it->second = ttg_.ops_under(level, id);
    return it->second;
  }

  std::int64_t step(int level, int id, int var) {
    for (int op : under(level, id))
      if (ttg_.ops[static_cast<std::size_t>(op)].uses(var))
        return ex_.extent(op, level - 1, var);
    return 1;
  }

  void exec(int level, int id, std::size_t depth, std::vector<std::int64_t> offsets) {
    if (level == 0) {
      auto held = fire(0, id, 0, offsets);
      compute(id, offsets);
      release(held);
      return;
    }
    const auto &node = ttg_.node(level, id);
    const std::size_t entries = std::max<std::size_t>(1, node.loops.size());
    std::vector<std::pair<int, std::int64_t>> held;
    if (depth < entries)
      held = fire(level, id, static_cast<int>(depth), offsets);
    if (depth >= node.loops.size()) {
      for (int child : node.children)
        exec(level - 1, child, 0, offsets);
    } else {
      int var = node.loops[depth];
      std::int64_t trips = ex_.tile(level, id, var);
      std::int64_t stride = step(level, id, var);
      for (std::int64_t t = 0; t < trips; ++t) {
        auto inner = offsets;
        inner[static_cast<std::size_t>(var)] += t * stride;
        exec(level, id, depth + 1, std::move(inner));
      }
    }
    release(held);
  }

  void compute(int o, const std::vector<std::int64_t> &offsets) {
    const auto &op = ttg_.ops[static_cast<std::size_t>(o)];
    auto &out = values_[static_cast<std::size_t>(op.node)];
    auto lo = [&](int v) { return offsets[static_cast<std::size_t>(v)]; };
    auto hi = [&](int v) { return lo(v) + ex_.extent(o, 0, v); };
    const bool half = out.type.dtype == DataType::F16;

    if (op.kind.op == Op::MatMul) {
      const auto &a = values_[static_cast<std::size_t>(op.inputs[0])];
      const auto &b = values_[static_cast<std::size_t>(op.inputs[1])];
      int vm = op.vars[0], vk = op.vars[1], vn = op.vars[2];
      const std::int64_t K = a.type.shape[1], N = b.type.shape[1];
      const bool first = lo(vk) == 0;
      auto &partial = partials_[o];
      if (partial.empty())
        partial.assign(out.data.size(), 0.0);
      for (std::int64_t i = lo(vm); i < hi(vm); ++i)
        for (std::int64_t j = lo(vn); j < hi(vn); ++j) {
          auto at = static_cast<std::size_t>(i * N + j);
          double acc = first ? 0.0 : partial[at];
          for (std::int64_t k = lo(vk); k < hi(vk); ++k)
            acc += static_cast<double>(a.data[static_cast<std::size_t>(i * K + k)]) *
                   b.data[static_cast<std::size_t>(k * N + j)];
          partial[at] = acc;
          out.data[at] = half ? round_to_f16(static_cast<float>(acc)) : static_cast<float>(acc);
        }
      return;
    }

    // Elementwise: identical shapes, walk the output box.
    const auto &axes = op.out_axes;
    const auto &shape = out.type.shape;
    std::vector<std::int64_t> idx;
    for (int v : axes)
      idx.push_back(lo(v));
    if (std::any_of(axes.begin(), axes.end(), [&](int v) { return hi(v) <= lo(v); }))
      return;
    while (true) {
      std::int64_t flat = 0;
      for (std::size_t d = 0; d < shape.size(); ++d)
        flat = flat * shape[d] + idx[d];
      auto f = static_cast<std::size_t>(flat);
      float x = values_[static_cast<std::size_t>(op.inputs[0])].data[f];
      if (op.kind.op == Op::Unary) {
        switch (op.kind.unary) {
        case UnaryFn::Exp: x = std::exp(x); break;
        case UnaryFn::Neg: x = -x; break;
        case UnaryFn::Abs: x = std::fabs(x); break;
        }
      } else {
        float y = values_[static_cast<std::size_t>(op.inputs[1])].data[f];
        switch (op.kind.binary) {
        case BinaryFn::Add: x += y; break;
        case BinaryFn::Mul: x *= y; break;
        case BinaryFn::Sub: x -= y; break;
        }
      }
      out.data[f] = half ? round_to_f16(x) : x;
      std::size_t d = idx.size();
      while (d > 0) {
        --d;
        if (++idx[d] < hi(axes[d]))
          break;
        idx[d] = lo(axes[d]);
        if (d == 0)
          return;
      }
      if (idx.empty())
        return;
    }
  }

  const MinlpModel &m_;
  const TieredTileGraph &ttg_;
  TileExtents ex_;
  const std::vector<std::vector<BufferCopy>> &placement_;
  std::vector<TensorValue> values_;
  // Running double-precision sums of every matmul, so that split
  // reductions add terms in the same order as the dense interpreter.
  std::map<int, std::vector<double>> partials_;
  std::map<std::tuple<int, int, int>, std::vector<Trigger>> triggers_;
  std::map<std::pair<int, int>, std::vector<int>> under_;
  std::vector<std::int64_t> live_;
  std::vector<std::map<std::size_t, std::set<std::vector<std::int64_t>>>> written_;
  ScheduledRun run_;
};

} // namespace

ScheduledRun eval_scheduled(const MinlpModel &m, const TileAssignment &tiles,
                            const std::vector<std::vector<BufferCopy>> &placement, const TensorMap &inputs) {
  return Runner(m, tiles, placement, inputs).run();
}

ScheduledRun eval_scheduled(const MinlpModel &m, const MinlpSolution &sol, const TensorMap &inputs) {
  return eval_scheduled(m, sol.tiles, sol.placement, inputs);
}

} // namespace minicase
