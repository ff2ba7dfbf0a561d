// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#include "minicase/cost_model.hpp"

#include "minicase/error.hpp"
#include "minicase/graph_json.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace minicase {

using nlohmann::json;

const char *unit_name(ComputeUnit u) {
  switch (u) {
  case ComputeUnit::Scalar: return "scalar";
  case ComputeUnit::Vector: return "vector";
  case ComputeUnit::Tensor: return "tensor";
  }
  return "?";
}

ComputeUnit parse_unit(const std::string &text) {
  if (text == "scalar") return ComputeUnit::Scalar;
  if (text == "vector") return ComputeUnit::Vector;
  if (text == "tensor") return ComputeUnit::Tensor;
  throw Error(ErrorCode::UnknownUnit, "unknown compute unit '" + text + "'");
}

HardwareSpec HardwareSpec::desk() {
  HardwareSpec hw;
  hw.levels = {{"L1", 32 * 1024, 256e9}, {"L2", 1024 * 1024, 128e9}, {"DRAM", 1LL << 30, 32e9}};
  hw.peak_flops = {{ComputeUnit::Scalar, 16e9},
                   {ComputeUnit::Vector, 128e9},
                   {ComputeUnit::Tensor, 512e9}};
  hw.alpha = 1e-6;
  hw.beta = 1e-9;
  hw.device_count = 2;
  hw.mesh = {2};
  return hw;
}

void HardwareSpec::validate() const {
  auto fail = [](const std::string &m) { throw Error(ErrorCode::Validation, "hardware: " + m); };
  if (levels.empty())
    fail("at least one memory level is required");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i].capacity <= 0 || !(levels[i].bandwidth > 0.0))
      fail("level " + levels[i].name + " needs positive capacity and bandwidth");
    if (i > 0 && levels[i].capacity <= levels[i - 1].capacity)
      fail("capacities must strictly increase outward");
    if (i > 0 && levels[i].bandwidth > levels[i - 1].bandwidth)
      fail("bandwidths must not increase outward");
  }
  for (auto u : {ComputeUnit::Scalar, ComputeUnit::Vector, ComputeUnit::Tensor}) {
    auto it = peak_flops.find(u);
    if (it == peak_flops.end() || !(it->second > 0.0))
      fail(std::string("peak_flops.") + unit_name(u) + " must be positive");
  }
  if (!(alpha > 0.0) || !(beta > 0.0))
    fail("comm alpha and beta must be positive");
  if (device_count < 1)
    fail("device_count must be positive");
  if (!mesh.empty() && product(mesh) > device_count)
    fail("mesh has more devices than device_count");
}

HardwareSpec HardwareSpec::from_json(const json &j) {
  HardwareSpec hw;
  try {
    for (const auto &l : j.at("levels"))
      hw.levels.push_back({l.value("name", std::string("L") + std::to_string(hw.levels.size())),
                           l.at("capacity").get<std::int64_t>(), l.at("bandwidth").get<double>()});
    for (const auto &[k, v] : j.at("peak_flops").items())
      hw.peak_flops[parse_unit(k)] = v.get<double>();
    hw.alpha = j.at("comm").at("alpha").get<double>();
    hw.beta = j.at("comm").at("beta").get<double>();
    hw.device_count = j.value("device_count", std::int64_t{1});
    if (j.contains("mesh"))
      hw.mesh = j.at("mesh").get<Shape>();
  } catch (const json::exception &e) {
    throw Error(ErrorCode::Parse, std::string("hardware spec: ") + e.what());
  }
  hw.validate();
  return hw;
}

HardwareSpec HardwareSpec::load(const std::string &path) { return from_json(load_json(path)); }

json HardwareSpec::to_json() const {
  json j;
  j["levels"] = json::array();
  for (const auto &l : levels)
    j["levels"].push_back({{"name", l.name}, {"capacity", l.capacity}, {"bandwidth", l.bandwidth}});
  j["peak_flops"] = json::object();
  for (const auto &[u, v] : peak_flops)
    j["peak_flops"][unit_name(u)] = v;
  j["comm"] = {{"alpha", alpha}, {"beta", beta}};
  j["device_count"] = device_count;
  j["mesh"] = mesh;
  return j;
}

ComputeUnit compute_unit(const OpKind &kind, const std::vector<TensorType> &inputs,
                         const TensorType &output) {
  switch (kind.op) {
  case Op::Boxing:
    throw Error(ErrorCode::UnknownUnit, "boxing has no compute unit; use comm_cost");
  case Op::MatMul: {
    bool two_d = inputs.size() == 2 && inputs[0].lanes.size() == 2 && inputs[1].lanes.size() == 2;
    if (two_d)
      return ComputeUnit::Tensor;
    if (output.is_packed())
      return ComputeUnit::Vector;
    return ComputeUnit::Scalar;
  }
  case Op::Unary:
  case Op::Binary:
    return output.is_packed() ? ComputeUnit::Vector : ComputeUnit::Scalar;
  default:
    return ComputeUnit::Scalar;
  }
}

double node_flops(const OpKind &kind, const std::vector<TensorType> &inputs,
                  const TensorType &output) {
  switch (kind.op) {
  case Op::MatMul: {
    // Logical dims: M x K times K x N, lanes included.
    const auto &a = inputs[0];
    std::int64_t m = a.shape[0] * (a.lanes.size() == 2 ? a.lanes[0] : 1);
    std::int64_t k = a.shape[1] * (a.lanes.size() == 2 ? a.lanes[1] : 1);
    std::int64_t n = output.element_count() / std::max<std::int64_t>(m, 1);
    return 2.0 * static_cast<double>(m) * static_cast<double>(n) * static_cast<double>(k);
  }
  case Op::Unary:
  case Op::Binary:
    return static_cast<double>(output.element_count());
  default:
    return 0.0;
  }
}

double roofline_cost(const OpKind &kind, const std::vector<TensorType> &inputs,
                     const TensorType &output, const HardwareSpec &hw) {
  if (kind.op == Op::Input || kind.op == Op::Constant)
    return 0.0;
  ComputeUnit unit = compute_unit(kind, inputs, output);
  auto it = hw.peak_flops.find(unit);
  if (it == hw.peak_flops.end())
    throw Error(ErrorCode::UnknownUnit, std::string("no peak for unit ") + unit_name(unit));
  double bytes = static_cast<double>(output.byte_size());
  for (const auto &t : inputs)
    bytes += static_cast<double>(t.byte_size());
  double compute = node_flops(kind, inputs, output) / it->second;
  double memory = bytes / hw.outer_bandwidth();
  return std::max(compute, memory);
}

double comm_cost(CollectiveKind kind, std::int64_t bytes, std::int64_t participants,
                 const HardwareSpec &hw) {
  if (kind == CollectiveKind::SliceLocal)
    return 0.0;
  if (participants <= 1)
    return hw.alpha;
  double wire = static_cast<double>(bytes);
  if (kind == CollectiveKind::AllReduce || kind == CollectiveKind::AllGather)
    wire = wire * static_cast<double>(participants - 1) / static_cast<double>(participants);
  return hw.alpha + hw.beta * wire;
}

UKernelModel UKernelModel::defaults(const HardwareSpec &hw) {
  UKernelModel m;
  for (const char *kind : {"MatMul", "Unary", "Binary", "Pack", "Unpack", "Transpose"})
    for (auto u : {ComputeUnit::Scalar, ComputeUnit::Vector, ComputeUnit::Tensor})
      m.entries[{kind, u}] = {2e-8, 1.0 / hw.peak_flops.at(u)};
  return m;
}

UKernelModel UKernelModel::from_json(const json &j) {
  UKernelModel m;
  try {
    for (const auto &e : j)
      m.entries[{e.at("kind").get<std::string>(), parse_unit(e.at("unit").get<std::string>())}] =
          {e.at("base").get<double>(), e.at("per_element").get<double>()};
  } catch (const json::exception &e) {
    throw Error(ErrorCode::Parse, std::string("ukernel model: ") + e.what());
  }
  return m;
}

json UKernelModel::to_json() const {
  json j = json::array();
  for (const auto &[key, e] : entries)
    j.push_back({{"kind", key.first},
                 {"unit", unit_name(key.second)},
                 {"base", e.base},
                 {"per_element", e.per_element}});
  return j;
}

double ukernel_time(const OpKind &kind, ComputeUnit unit, std::int64_t tile_elems,
                    const UKernelModel &model) {
  auto it = model.entries.find({op_name(kind.op), unit});
  if (it == model.entries.end())
    throw Error(ErrorCode::MissingEntry, std::string("no microkernel entry for ") +
                                             op_name(kind.op) + "/" + unit_name(unit));
  return it->second.base + it->second.per_element * static_cast<double>(tile_elems);
}

std::int64_t tile_work(const OpKind &kind, const Shape &tile) {
  if (kind.op == Op::MatMul)
    return 2 * product(tile);
  return product(tile);
}

std::vector<CalibrationSample> parse_calibration_csv(const std::string &text) {
  std::vector<CalibrationSample> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty() || line[0] == '#')
      continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ','))
      cols.push_back(c);
    if (cols.size() != 4)
      throw Error(ErrorCode::Parse, "calibration line " + std::to_string(lineno) +
                                        ": expected kind,unit,elems,seconds");
    if (cols[0] == "kind")
      continue;
    try {
      out.push_back({cols[0], parse_unit(cols[1]), std::stod(cols[2]), std::stod(cols[3])});
    } catch (const std::exception &) {
      throw Error(ErrorCode::Parse,
                  "calibration line " + std::to_string(lineno) + ": bad number");
    }
  }
  return out;
}

UKernelModel calibrate(const std::vector<CalibrationSample> &samples) {
  std::map<std::pair<std::string, ComputeUnit>, std::vector<const CalibrationSample *>> groups;
  for (const auto &s : samples)
    groups[{s.kind, s.unit}].push_back(&s);
  UKernelModel m;
  for (const auto &[key, rows] : groups) {
    double n = static_cast<double>(rows.size()), sx = 0, sy = 0;
    for (auto *r : rows) {
      sx += r->elems;
      sy += r->seconds;
    }
    double mx = sx / n, my = sy / n, sxx = 0, sxy = 0;
    for (auto *r : rows) {
      sxx += (r->elems - mx) * (r->elems - mx);
      sxy += (r->elems - mx) * (r->seconds - my);
    }
    std::string label = key.first + "/" + unit_name(key.second);
    if (!(sxx > 0.0))
      throw Error(ErrorCode::Validation, "calibration " + label + " needs two distinct sizes");
    double slope = sxy / sxx;
    if (!(slope > 0.0))
      throw Error(ErrorCode::Validation, "calibration " + label + " fit a non-positive slope");
    double base = std::max(0.0, my - slope * mx);
    m.entries[key] = {base, slope};
  }
  return m;
}

NodeCostFn roofline_node_cost(const HardwareSpec &hw) {
  return [hw](const EGraph &g, EClassId cls, const ENode &n) {
    std::vector<TensorType> in;
    for (auto c : n.children)
      in.push_back(g.eclass(c).type);
    return roofline_cost(n.kind, in, g.eclass(cls).type, hw);
  };
}

} // namespace minicase
