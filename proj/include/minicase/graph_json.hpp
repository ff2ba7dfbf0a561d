// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0
//
// Canonical JSON form of graphs (the CLI's stage artifact format).

#pragma once

#include "minicase/tensor_ir.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace minicase {

std::string base64_encode(const std::vector<std::uint8_t> &bytes);
std::vector<std::uint8_t> base64_decode(const std::string &text);

nlohmann::json sbp_to_json(const NdSbp &sbp);
NdSbp sbp_from_json(const nlohmann::json &j);

nlohmann::json graph_to_json(const Graph &g);
/// Parses and type-checks; throws Error(Parse) on malformed documents.
Graph graph_from_json(const nlohmann::json &j);

Graph load_graph(const std::string &path);
void save_json(const std::string &path, const nlohmann::json &j);
nlohmann::json load_json(const std::string &path);

} // namespace minicase
