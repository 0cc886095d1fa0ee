// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/converter/toy_model.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include <json.hpp>

#include "modelci/error.hpp"
#include "modelci/util/hash.hpp"

using nlohmann::json;

namespace modelci::converter {

namespace {

constexpr std::string_view kMagic = "TOYB";
constexpr std::uint16_t kVersion = 1;

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::InvalidModel, msg); }

LayerOp parse_op(const std::string& name) {
    if (name == "dense") return LayerOp::Dense;
    if (name == "relu") return LayerOp::Relu;
    if (name == "tanh") return LayerOp::Tanh;
    invalid("unknown layer op '" + name + "'");
}

template <typename T>
void put_le(std::string& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                    std::conditional_t<sizeof(T) == 2,
                                                                       std::uint16_t, std::uint8_t>>>;
    const auto bits = std::bit_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<char>((static_cast<std::uint64_t>(bits) >> (8 * i)) & 0xff));
    }
}

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    template <typename T>
    T get() {
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                     std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                        std::conditional_t<sizeof(T) == 2,
                                                                           std::uint16_t, std::uint8_t>>>;
        if (data_.size() - pos_ < sizeof(T)) invalid("toy-binary payload truncated");
        std::uint64_t bits = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(T);
        return std::bit_cast<T>(static_cast<U>(bits));
    }

    std::size_t remaining() const { return data_.size() - pos_; }

private:
    std::string_view data_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string_view op_name(LayerOp op) noexcept {
    switch (op) {
        case LayerOp::Dense: return "dense";
        case LayerOp::Relu: return "relu";
        case LayerOp::Tanh: return "tanh";
    }
    return "dense";
}

void ToyGraph::validate() const {
    if (layers.empty()) invalid("toy model has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        const auto where = "layer " + std::to_string(i);
        if (l.in_dim < 1 || l.out_dim < 1) invalid(where + ": dimensions must be >= 1");
        if (l.op == LayerOp::Dense) {
            if (l.weights.size() != static_cast<std::size_t>(l.in_dim) * l.out_dim) {
                invalid(where + ": dense layer needs in_dim*out_dim weights");
            }
        } else {
            if (l.in_dim != l.out_dim) invalid(where + ": activation must keep its width");
            if (!l.weights.empty()) invalid(where + ": activation carries no weights");
        }
        for (const double w : l.weights) {
            if (!std::isfinite(w)) invalid(where + ": non-finite weight");
        }
        if (i > 0 && layers[i - 1].out_dim != l.in_dim) {
            invalid(where + ": in_dim does not match previous out_dim");
        }
    }
}

std::vector<double> ToyGraph::forward(const std::vector<double>& input) const {
    if (input.size() != input_dim()) {
        throw Error(ErrorCode::InvalidArgument, "input has " + std::to_string(input.size()) +
                                                    " values, model expects " +
                                                    std::to_string(input_dim()));
    }
    std::vector<double> x = input;
    for (const auto& l : layers) {
        switch (l.op) {
            case LayerOp::Dense: {
                std::vector<double> y(l.out_dim, 0.0);
                for (std::uint32_t o = 0; o < l.out_dim; ++o) {
                    const double* row = l.weights.data() + static_cast<std::size_t>(o) * l.in_dim;
                    double acc = 0;
                    for (std::uint32_t k = 0; k < l.in_dim; ++k) acc += row[k] * x[k];
                    y[o] = acc;
                }
                x = std::move(y);
                break;
            }
            case LayerOp::Relu:
                for (auto& v : x) v = v > 0 ? v : 0;
                break;
            case LayerOp::Tanh:
                for (auto& v : x) v = std::tanh(v);
                break;
        }
    }
    return x;
}

ToyGraph decode_toy_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        invalid(std::string("toy-json is not valid JSON: ") + e.what());
    }
    if (!doc.is_array()) invalid("toy-json must be a list of layers");
    ToyGraph g;
    try {
        for (const auto& item : doc) {
            ToyLayer l;
            l.op = parse_op(item.at("op").get<std::string>());
            const auto in = item.at("in_dim").get<std::int64_t>();
            const auto out = item.at("out_dim").get<std::int64_t>();
            if (in < 1 || out < 1 || in > UINT32_MAX || out > UINT32_MAX) {
                invalid("layer dimensions out of range");
            }
            l.in_dim = static_cast<std::uint32_t>(in);
            l.out_dim = static_cast<std::uint32_t>(out);
            l.weights = item.value("weights", std::vector<double>{});
            g.layers.push_back(std::move(l));
        }
    } catch (const json::exception& e) {
        invalid(std::string("malformed toy-json layer: ") + e.what());
    }
    g.validate();
    return g;
}

std::string encode_toy_json(const ToyGraph& graph) {
    graph.validate();
    json doc = json::array();
    for (const auto& l : graph.layers) {
        doc.push_back(json{{"op", op_name(l.op)},
                           {"in_dim", l.in_dim},
                           {"out_dim", l.out_dim},
                           {"weights", l.weights}});
    }
    return doc.dump();
}

std::string encode_toy_binary(const ToyGraph& graph) {
    graph.validate();
    std::string payload;
    put_le<std::uint16_t>(payload, kVersion);
    put_le<std::uint32_t>(payload, static_cast<std::uint32_t>(graph.layers.size()));
    for (const auto& l : graph.layers) {
        put_le<std::uint8_t>(payload, static_cast<std::uint8_t>(l.op));
        put_le<std::uint32_t>(payload, l.in_dim);
        put_le<std::uint32_t>(payload, l.out_dim);
        put_le<std::uint32_t>(payload, static_cast<std::uint32_t>(l.weights.size()));
        for (const double w : l.weights) put_le<double>(payload, w);
    }
    std::string out(kMagic);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(payload.size()));
    out += payload;
    put_le<std::uint32_t>(out, util::crc32(payload));
    return out;
}

ToyGraph decode_toy_binary(std::string_view bytes) {
    if (bytes.size() < kMagic.size() + 8 || bytes.substr(0, kMagic.size()) != kMagic) {
        invalid("not a toy-binary model (bad magic)");
    }
    Reader header(bytes.substr(kMagic.size(), 4));
    const auto payload_len = header.get<std::uint32_t>();
    if (bytes.size() != kMagic.size() + 4 + static_cast<std::size_t>(payload_len) + 4) {
        invalid("toy-binary length prefix does not match file size");
    }
    const auto payload = bytes.substr(kMagic.size() + 4, payload_len);
    Reader trailer(bytes.substr(kMagic.size() + 4 + payload_len));
    if (trailer.get<std::uint32_t>() != util::crc32(payload)) {
        invalid("toy-binary checksum mismatch");
    }
    Reader r(payload);
    if (r.get<std::uint16_t>() != kVersion) invalid("unsupported toy-binary version");
    const auto count = r.get<std::uint32_t>();
    ToyGraph g;
    for (std::uint32_t i = 0; i < count; ++i) {
        ToyLayer l;
        const auto op = r.get<std::uint8_t>();
        if (op < 1 || op > 3) invalid("unknown layer op code " + std::to_string(op));
        l.op = static_cast<LayerOp>(op);
        l.in_dim = r.get<std::uint32_t>();
        l.out_dim = r.get<std::uint32_t>();
        const auto n = r.get<std::uint32_t>();
        if (static_cast<std::size_t>(n) * 8 > r.remaining()) invalid("toy-binary payload truncated");
        l.weights.reserve(n);
        for (std::uint32_t k = 0; k < n; ++k) l.weights.push_back(r.get<double>());
        g.layers.push_back(std::move(l));
    }
    if (r.remaining() != 0) invalid("trailing bytes in toy-binary payload");
    g.validate();
    return g;
}

ToyGraph decode_toy_any(std::string_view bytes) {
    if (bytes.substr(0, kMagic.size()) == kMagic) return decode_toy_binary(bytes);
    return decode_toy_json(bytes);
}

}  // namespace modelci::converter
