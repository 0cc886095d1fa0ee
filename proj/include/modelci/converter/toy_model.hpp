// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace modelci::converter {

// A small feed-forward graph used as the stand-in for framework models.
//
// toy-json:   [{"in_dim":2,"op":"dense","out_dim":3,"weights":[...]}, ...]
// toy-binary: "TOYB" | u32 payload_len | payload | u32 crc32(payload)
//             payload = u16 version(1) | u32 layer_count | layer*
//             layer   = u8 op | u32 in_dim | u32 out_dim | u32 n | f64 weights[n]
// All integers and floats are little-endian.

enum class LayerOp : std::uint8_t { Dense = 1, Relu = 2, Tanh = 3 };

struct ToyLayer {
    LayerOp op = LayerOp::Dense;
    std::uint32_t in_dim = 0;
    std::uint32_t out_dim = 0;
    // Dense: row-major out_dim x in_dim. Activations carry no weights.
    std::vector<double> weights;

    bool operator==(const ToyLayer&) const = default;
};

struct ToyGraph {
    std::vector<ToyLayer> layers;

    std::uint32_t input_dim() const { return layers.front().in_dim; }
    std::uint32_t output_dim() const { return layers.back().out_dim; }

    // Non-empty, dims >= 1, dense weight counts match, activations keep
    // width, consecutive layers chain. Throws Error(InvalidModel).
    void validate() const;

    // Applies the layers to one sample of input_dim() values.
    std::vector<double> forward(const std::vector<double>& input) const;

    bool operator==(const ToyGraph&) const = default;
};

inline constexpr std::string_view kToyJson = "toy-json";
inline constexpr std::string_view kToyBinary = "toy-binary";

ToyGraph decode_toy_json(std::string_view text);
// Canonical text: compact JSON, keys sorted, doubles in shortest round-trip form.
std::string encode_toy_json(const ToyGraph& graph);

ToyGraph decode_toy_binary(std::string_view bytes);
std::string encode_toy_binary(const ToyGraph& graph);

// Sniffs the encoding ("TOYB" magic or JSON text).
ToyGraph decode_toy_any(std::string_view bytes);

std::string_view op_name(LayerOp op) noexcept;

}  // namespace modelci::converter
