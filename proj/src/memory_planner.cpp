// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#include "minicase/memory_planner.hpp"

#include "minicase/error.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

namespace minicase {

namespace {

std::int64_t align_up(std::int64_t v, std::int64_t alignment) {
  if (alignment <= 1)
    return v;
  return (v + alignment - 1) / alignment * alignment;
}

std::optional<NdSbp> node_sbp(const GraphNode &n) {
  if (n.kind.op == Op::Boxing)
    return n.kind.box_target;
  return n.sbp;
}

bool interferes(const BufferRecord &a, const BufferRecord &b) {
  return a.first <= b.last && b.first <= a.last;
}

struct Item {
  std::int64_t id;
  std::int64_t size; // aligned
  std::int64_t first, last;
};

std::vector<Item> plan_items(const std::vector<BufferRecord> &buffers, std::int64_t alignment) {
  std::vector<Item> items;
  for (const auto &b : buffers)
    if (!b.alias_of && b.size > 0)
      items.push_back({b.id, align_up(b.size, alignment), b.first, b.last});
  return items;
}

bool overlaps(const Item &a, const Item &b) { return a.first <= b.last && b.first <= a.last; }

// Lowest offset for `item` that avoids every placed, interfering item.
std::int64_t lowest_fit(const Item &item, const std::vector<Item> &items,
                        const std::vector<std::int64_t> &offsets,
                        const std::vector<int> &placed) {
  std::vector<std::pair<std::int64_t, std::int64_t>> busy;
  for (int j : placed)
    if (overlaps(item, items[j]))
      busy.emplace_back(offsets[j], offsets[j] + items[j].size);
  std::sort(busy.begin(), busy.end());
  std::int64_t candidate = 0;
  for (const auto &[lo, hi] : busy) {
    if (candidate + item.size <= lo)
      break;
    candidate = std::max(candidate, hi);
  }
  return candidate;
}

struct ExactSearch {
  const std::vector<Item> &items;
  std::int64_t lower_bound;
  std::int64_t best;
  std::vector<std::int64_t> best_offsets;
  std::vector<std::int64_t> offsets;
  std::vector<int> placed;
  std::vector<bool> used;

  void run(std::int64_t current_end) {
    if (best == lower_bound)
      return;
    if (placed.size() == items.size()) {
      if (current_end < best) {
        best = current_end;
        best_offsets = offsets;
      }
      return;
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (used[i])
        continue;
      auto off = lowest_fit(items[i], items, offsets, placed);
      auto end = std::max(current_end, off + items[i].size);
      if (end >= best)
        continue;
      used[i] = true;
      offsets[i] = off;
      placed.push_back(static_cast<int>(i));
      run(end);
      placed.pop_back();
      used[i] = false;
      if (best == lower_bound)
        return;
    }
  }
};

MemoryPlan first_fit(const std::vector<Item> &items) {
  std::vector<int> order(items.size());
  for (std::size_t i = 0; i < items.size(); ++i)
    order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (items[a].size != items[b].size)
      return items[a].size > items[b].size;
    if (items[a].first != items[b].first)
      return items[a].first < items[b].first;
    return items[a].id < items[b].id;
  });
  std::vector<std::int64_t> offsets(items.size(), 0);
  std::vector<int> placed;
  MemoryPlan p;
  for (int i : order) {
    offsets[i] = lowest_fit(items[i], items, offsets, placed);
    placed.push_back(i);
    p.footprint = std::max(p.footprint, offsets[i] + items[i].size);
  }
  for (std::size_t i = 0; i < items.size(); ++i)
    p.offsets[items[i].id] = offsets[i];
  return p;
}

std::int64_t item_peak(const std::vector<Item> &items) {
  std::vector<std::int64_t> points;
  for (const auto &it : items)
    points.push_back(it.first);
  std::int64_t peak = 0;
  for (auto t : points) {
    std::int64_t sum = 0;
    for (const auto &it : items)
      if (it.first <= t && t <= it.last)
        sum += it.size;
    peak = std::max(peak, sum);
  }
  return peak;
}

} // namespace

bool slice_is_contiguous(const Shape &shape, const Shape &begins, const Shape &ends) {
  std::size_t k = 0;
  while (k < shape.size() && ends[k] - begins[k] == 1)
    ++k;
  // Dim k may be any range; every later dim must be taken whole.
  for (std::size_t d = k + 1; d < shape.size(); ++d)
    if (begins[d] != 0 || ends[d] != shape[d])
      return false;
  return true;
}

std::map<NodeId, AliasInfo> alias_analysis(const Graph &g) {
  std::map<NodeId, AliasInfo> out;
  for (const auto &n : g.nodes) {
    if (n.kind.op == Op::Reshape) {
      out[n.id] = {n.inputs[0], 0};
    } else if (n.kind.op == Op::Slice) {
      const auto &src = g.node(n.inputs[0]).type;
      if (!slice_is_contiguous(src.shape, n.kind.begins, n.kind.ends))
        continue;
      std::int64_t elem = 0;
      for (std::size_t d = 0; d < src.rank(); ++d)
        elem = elem * src.shape[d] + n.kind.begins[d];
      out[n.id] = {n.inputs[0], elem * static_cast<std::int64_t>(byte_width(src.dtype))};
    }
  }
  return out;
}

std::vector<BufferRecord> liveness(const Graph &g, const std::optional<Placement> &placement) {
  const auto n = static_cast<std::int64_t>(g.size());
  std::vector<BufferRecord> out(g.size());
  for (const auto &node : g.nodes) {
    auto &b = out[node.id];
    b.id = node.id;
    b.first = b.last = node.id;
    if (placement) {
      auto sbp = node_sbp(node);
      b.size = sbp ? product(shard_shape(node.type.shape, *sbp, *placement)) *
                         product(node.type.lanes) *
                         static_cast<std::int64_t>(byte_width(node.type.dtype))
                   : 0;
    } else {
      b.size = node.type.byte_size();
    }
    for (auto in : node.inputs)
      out[in].last = std::max(out[in].last, node.id);
  }
  for (auto o : g.outputs)
    out[o].last = n - 1;
  for (const auto &node : g.nodes)
    if (node.kind.op == Op::Constant) {
      out[node.id].pinned = true;
      out[node.id].first = 0;
      out[node.id].last = n - 1;
    }

  if (!placement) {
    for (const auto &[id, info] : alias_analysis(g)) {
      auto &b = out[id];
      const auto &src = out[info.source];
      b.alias_of = src.alias_of ? *src.alias_of : info.source;
      b.alias_offset = src.alias_offset + info.byte_offset;
    }
    for (std::size_t i = g.size(); i-- > 0;) {
      const auto &b = out[i];
      if (!b.alias_of)
        continue;
      auto &root = out[*b.alias_of];
      root.first = std::min(root.first, b.first);
      root.last = std::max(root.last, b.last);
    }
  }
  return out;
}

std::int64_t peak_live_bytes(const std::vector<BufferRecord> &buffers, std::int64_t alignment) {
  return item_peak(plan_items(buffers, alignment));
}

std::int64_t peak_live_bytes(const Graph &g, const std::optional<Placement> &placement) {
  return peak_live_bytes(liveness(g, placement), 1);
}

MemoryPlan plan(const std::vector<BufferRecord> &buffers, PlanMode mode,
                std::int64_t alignment) {
  auto items = plan_items(buffers, alignment);
  bool exact = mode == PlanMode::Exact ||
               (mode == PlanMode::Auto && items.size() <= kExactPlanLimit);
  MemoryPlan p = first_fit(items);
  if (exact) {
    ExactSearch s{items, item_peak(items), p.footprint, {}, std::vector<std::int64_t>(items.size(), 0),
                  {}, std::vector<bool>(items.size(), false)};
    s.run(0);
    if (!s.best_offsets.empty() && s.best < p.footprint) {
      p.footprint = s.best;
      for (std::size_t i = 0; i < items.size(); ++i)
        p.offsets[items[i].id] = s.best_offsets[i];
    }
    p.optimal = true;
  }
  for (const auto &b : buffers)
    if (!p.offsets.count(b.id) && !b.alias_of)
      p.offsets[b.id] = 0;
  for (const auto &b : buffers)
    if (b.alias_of)
      p.offsets[b.id] = p.offsets[*b.alias_of] + b.alias_offset;
  return p;
}

bool plan_is_valid(const std::vector<BufferRecord> &buffers, const MemoryPlan &p,
                   std::int64_t alignment) {
  std::vector<const BufferRecord *> roots;
  for (const auto &b : buffers)
    if (!b.alias_of && b.size > 0) {
      auto it = p.offsets.find(b.id);
      if (it == p.offsets.end() || it->second < 0)
        return false;
      if (alignment > 1 && it->second % alignment != 0)
        return false;
      if (it->second + b.size > p.footprint)
        return false;
      roots.push_back(&b);
    }
  for (std::size_t i = 0; i < roots.size(); ++i)
    for (std::size_t j = i + 1; j < roots.size(); ++j) {
      if (!interferes(*roots[i], *roots[j]))
        continue;
      auto oi = p.offsets.at(roots[i]->id), oj = p.offsets.at(roots[j]->id);
      if (oi < oj + roots[j]->size && oj < oi + roots[i]->size)
        return false;
    }
  return true;
}

ArenaLayout arena_layout(const std::vector<BufferRecord> &buffers, const MemoryPlan &p) {
  ArenaLayout layout;
  layout.size_bytes = p.footprint;
  for (const auto &b : buffers)
    if (b.size > 0 || b.alias_of)
      layout.offsets[b.id] = p.offsets.at(b.id);
  return layout;
}

ConstantLayout plan_constants(const Graph &dg, const Placement &placement,
                              std::int64_t alignment) {
  const auto devices = static_cast<std::size_t>(placement.device_count());
  ConstantLayout out;
  out.devices.resize(devices);
  out.device_bytes.assign(devices, 0);
  auto users = dg.users();
  for (const auto &n : dg.nodes) {
    if (n.kind.op != Op::Constant)
      continue;
    std::optional<NdSbp> sbp = n.sbp;
    if (!sbp)
      for (auto u : users[n.id])
        if (dg.node(u).kind.op == Op::Boxing && dg.node(u).kind.box_target) {
          sbp = dg.node(u).kind.box_target;
          break;
        }
    if (!sbp)
      sbp = NdSbp::broadcast(placement.rank());
    if (sbp->has_partial())
      throw Error(ErrorCode::ShardMismatch,
                  "constant node " + std::to_string(n.id) + " cannot be Partial");
    auto bytes = product(shard_shape(n.type.shape, *sbp, placement)) * product(n.type.lanes) *
                 static_cast<std::int64_t>(byte_width(n.type.dtype));
    for (std::size_t d = 0; d < devices; ++d) {
      out.devices[d].push_back({n.id, out.device_bytes[d], bytes});
      out.device_bytes[d] += align_up(bytes, alignment);
    }
  }
  return out;
}

std::string plan_report(const std::vector<BufferRecord> &buffers, const MemoryPlan &p) {
  std::ostringstream os;
  os << std::left << std::setw(6) << "id" << std::setw(10) << "size" << std::setw(12)
     << "interval" << std::setw(8) << "alias" << "offset\n";
  for (const auto &b : buffers) {
    std::ostringstream interval;
    interval << "[" << b.first << "," << b.last << "]";
    os << std::left << std::setw(6) << b.id << std::setw(10) << b.size << std::setw(12)
       << interval.str() << std::setw(8)
       << (b.alias_of ? std::to_string(*b.alias_of) : std::string(b.pinned ? "pin" : "-"))
       << (p.offsets.count(b.id) ? p.offsets.at(b.id) : 0) << "\n";
  }
  os << "footprint " << p.footprint << " bytes" << (p.optimal ? " (optimal)" : "") << "\n";
  return os.str();
}

} // namespace minicase
