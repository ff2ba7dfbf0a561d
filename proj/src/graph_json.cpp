// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#include "minicase/graph_json.hpp"

#include "minicase/error.hpp"

#include <cstring>
#include <fstream>

namespace minicase {

using nlohmann::json;

namespace {

constexpr char kAlphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z')
    return c - 'A';
  if (c >= 'a' && c <= 'z')
    return c - 'a' + 26;
  if (c >= '0' && c <= '9')
    return c - '0' + 52;
  if (c == '+')
    return 62;
  if (c == '/')
    return 63;
  return -1;
}

std::string kind_string(const OpKind &k) {
  switch (k.op) {
  case Op::Unary: return unary_name(k.unary);
  case Op::Binary: return binary_name(k.binary);
  default: return op_name(k.op);
  }
}

json attrs_of(const OpKind &k) {
  json a = json::object();
  switch (k.op) {
  case Op::Input: a["name"] = k.name; break;
  case Op::Constant: {
    std::vector<std::uint8_t> bytes(k.data->size() * 4);
    std::memcpy(bytes.data(), k.data->data(), bytes.size());
    a["data"] = base64_encode(bytes);
    break;
  }
  case Op::Transpose: a["perm"] = k.perm; break;
  case Op::Pack: a["lanes"] = k.lanes; a["axes"] = k.axes; break;
  case Op::Unpack: a["axes"] = k.axes; break;
  case Op::Reshape: a["shape"] = k.shape; break;
  case Op::Slice: a["begins"] = k.begins; a["ends"] = k.ends; break;
  case Op::Boxing:
    a["target"] = k.box_target ? sbp_to_json(*k.box_target) : json("host");
    break;
  default: break;
  }
  return a;
}

template <typename T> T get(const json &j, const char *key) {
  if (!j.contains(key))
    throw Error(ErrorCode::Parse, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception &e) {
    throw Error(ErrorCode::Parse, std::string("bad field '") + key + "': " + e.what());
  }
}

OpKind kind_from(const std::string &kind, const json &attrs, DataType dt, const Shape &shape) {
  if (kind == "Input")
    return OpKind::input(get<std::string>(attrs, "name"), dt, shape);
  if (kind == "Constant") {
    auto bytes = base64_decode(get<std::string>(attrs, "data"));
    if (bytes.size() % 4 != 0)
      throw Error(ErrorCode::Parse, "constant payload is not a whole number of f32 values");
    std::vector<float> values(bytes.size() / 4);
    std::memcpy(values.data(), bytes.data(), bytes.size());
    return OpKind::constant(dt, shape, std::move(values));
  }
  if (kind == "Exp") return OpKind::unary_op(UnaryFn::Exp);
  if (kind == "Neg") return OpKind::unary_op(UnaryFn::Neg);
  if (kind == "Abs") return OpKind::unary_op(UnaryFn::Abs);
  if (kind == "Add") return OpKind::binary_op(BinaryFn::Add);
  if (kind == "Mul") return OpKind::binary_op(BinaryFn::Mul);
  if (kind == "Sub") return OpKind::binary_op(BinaryFn::Sub);
  if (kind == "MatMul") return OpKind::matmul();
  if (kind == "Transpose") return OpKind::transpose(get<Shape>(attrs, "perm"));
  if (kind == "Pack") return OpKind::pack(get<Shape>(attrs, "lanes"), get<Shape>(attrs, "axes"));
  if (kind == "Unpack") return OpKind::unpack(get<Shape>(attrs, "axes"));
  if (kind == "Reshape") return OpKind::reshape(get<Shape>(attrs, "shape"));
  if (kind == "Slice")
    return OpKind::slice(get<Shape>(attrs, "begins"), get<Shape>(attrs, "ends"));
  if (kind == "Boxing") {
    const auto &t = attrs.at("target");
    if (t.is_string() && t.get<std::string>() == "host")
      return OpKind::boxing(std::nullopt);
    return OpKind::boxing(sbp_from_json(t));
  }
  throw Error(ErrorCode::Parse, "unknown node kind '" + kind + "'");
}

} // namespace

std::string base64_encode(const std::vector<std::uint8_t> &bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i < bytes.size()) {
    std::uint32_t v = bytes[i] << 16;
    if (i + 1 < bytes.size())
      v |= bytes[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += i + 1 < bytes.size() ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string &text) {
  std::vector<std::uint8_t> out;
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=')
      break;
    int v = decode_char(c);
    if (v < 0)
      throw Error(ErrorCode::Parse, "invalid base64 character");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xff));
    }
  }
  return out;
}

json sbp_to_json(const NdSbp &sbp) {
  json a = json::array();
  for (const auto &e : sbp.entries)
    a.push_back(e.to_string());
  return a;
}

NdSbp sbp_from_json(const json &j) {
  NdSbp s;
  for (const auto &e : j)
    s.entries.push_back(Sbp::parse(e.get<std::string>()));
  return s;
}

json graph_to_json(const Graph &g) {
  json nodes = json::array();
  for (const auto &n : g.nodes) {
    json jn;
    jn["id"] = n.id;
    jn["kind"] = kind_string(n.kind);
    jn["attrs"] = attrs_of(n.kind);
    jn["inputs"] = n.inputs;
    jn["dtype"] = dtype_name(n.type.dtype);
    jn["shape"] = n.type.shape;
    jn["lanes"] = n.type.lanes;
    if (n.sbp)
      jn["sbp"] = sbp_to_json(*n.sbp);
    nodes.push_back(std::move(jn));
  }
  json j;
  j["nodes"] = std::move(nodes);
  j["inputs"] = g.inputs;
  j["outputs"] = g.outputs;
  if (g.placement)
    j["placement"] = g.placement->dims;
  return j;
}

Graph graph_from_json(const json &j) {
  if (!j.is_object() || !j.contains("nodes"))
    throw Error(ErrorCode::Parse, "graph document needs a 'nodes' array");
  Graph g;
  for (const auto &jn : j.at("nodes")) {
    GraphNode n;
    n.id = get<NodeId>(jn, "id");
    auto dt = parse_dtype(get<std::string>(jn, "dtype"));
    auto shape = get<Shape>(jn, "shape");
    Shape lanes = jn.contains("lanes") ? get<Shape>(jn, "lanes") : Shape{};
    json attrs = jn.contains("attrs") ? jn.at("attrs") : json::object();
    n.kind = kind_from(get<std::string>(jn, "kind"), attrs, dt, shape);
    n.inputs = jn.contains("inputs") ? get<std::vector<NodeId>>(jn, "inputs")
                                     : std::vector<NodeId>{};
    n.type = TensorType(dt, shape, lanes);
    if (jn.contains("sbp"))
      n.sbp = sbp_from_json(jn.at("sbp"));
    g.nodes.push_back(std::move(n));
  }
  g.inputs = j.contains("inputs") ? get<std::vector<NodeId>>(j, "inputs") : std::vector<NodeId>{};
  g.outputs =
      j.contains("outputs") ? get<std::vector<NodeId>>(j, "outputs") : std::vector<NodeId>{};
  if (j.contains("placement"))
    g.placement = Placement{get<Shape>(j, "placement")};
  return g;
}

json load_json(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::Parse, "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception &e) {
    throw Error(ErrorCode::Parse, "'" + path + "': " + e.what());
  }
}

Graph load_graph(const std::string &path) { return graph_from_json(load_json(path)); }

void save_json(const std::string &path, const json &j) {
  std::ofstream out(path);
  if (!out)
    throw Error(ErrorCode::Parse, "cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

} // namespace minicase
