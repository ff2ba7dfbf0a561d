// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0
//
// Builders for the bundled example graphs under data/.

#pragma once

#include "minicase/tensor_ir.hpp"

#include <string>
#include <vector>

namespace minicase {

/// T(Add(T(D), Exp(T(A)))) with perm [1,0]: three transposes, all redundant.
Graph example_fig2();
/// MatMul(Exp(MatMul(Q, K)), V) with every dim a multiple of 16.
Graph example_attention();
/// MatMul(Add(MatMul(X, W1), bias), W2).
Graph example_mlp2();
/// A single 64x64x64 MatMul.
Graph example_tile_mm();

std::vector<std::string> example_names();
/// Throws Validation for unknown names.
Graph example_by_name(const std::string &name);

} // namespace minicase
