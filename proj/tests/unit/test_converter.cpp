// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include <doctest.h>

#include "modelci/converter/converter.hpp"
#include "modelci/converter/toy_model.hpp"
#include "modelci/error.hpp"
#include "modelci/util/hash.hpp"
#include "test_support.hpp"
#include "toy_graphs.hpp"

using namespace modelci;
using namespace modelci::converter;
using registry::ModelStatus;

namespace {

ErrorCode code_of(const auto& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::Internal;
}

std::string to_hex(const std::string& bytes) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (const unsigned char c : bytes) {
        out.push_back(kHex[c >> 4]);
        out.push_back(kHex[c & 15]);
    }
    return out;
}

registry::RegistrationManifest toy_manifest(const std::string& framework = "toy") {
    registry::RegistrationManifest m;
    m.name = "toy";
    m.framework = framework;
    m.inputs = {registry::TensorSpec{"x", {-1, 4}, "float64"}};
    return m;
}

ConverterPlugin external(const std::string& source, const std::string& target,
                         const std::string& command) {
    ConverterPlugin p;
    p.source_framework = source;
    p.target_format = target;
    p.kind = PluginKind::ExternalCommand;
    p.command_template = command;
    p.produces_backends = {"mockserve"};
    return p;
}

struct Fixture {
    testing::TempDir dir;
    registry::Registry reg{std::make_shared<registry::MemoryStore>()};
    std::shared_ptr<PluginRegistry> plugins = std::make_shared<PluginRegistry>();
    Converter conv{reg, plugins, ConverterOptions{std::chrono::seconds(10), dir / "work"}};

    Fixture() {
        for (auto& p : default_plugins()) plugins->register_plugin(p);
    }
};

}  // namespace

TEST_CASE("toy-binary encoding is bit-exact") {
    ToyGraph g;
    g.layers.push_back(ToyLayer{LayerOp::Dense, 1, 1, {1.0}});
    // Frozen from an independent struct.pack + zlib.crc32 encoding.
    CHECK(to_hex(encode_toy_binary(g)) ==
          "544f59421b00000001000100000001010000000100000001000000000000000000f03f5a70d7bc");
}

TEST_CASE("toy-json <-> toy-binary round trip equals the canonical form") {
    std::mt19937_64 rng(2026);
    for (int i = 0; i < 100; ++i) {
        const auto g = testing::random_toy_graph(rng);
        const auto canonical = encode_toy_json(g);
        const auto binary = encode_toy_binary(decode_toy_json(canonical));
        CHECK(encode_toy_json(decode_toy_binary(binary)) == canonical);
        CHECK(decode_toy_binary(binary) == g);
    }
}

TEST_CASE("toy codec rejects malformed input") {
    ToyGraph g;
    g.layers.push_back(ToyLayer{LayerOp::Dense, 2, 1, {1.0, 2.0}});
    auto bytes = encode_toy_binary(g);
    auto corrupt = bytes;
    corrupt[corrupt.size() - 6] ^= 0x01;
    CHECK(code_of([&] { decode_toy_binary(corrupt); }) == ErrorCode::InvalidModel);
    CHECK(code_of([&] { decode_toy_binary(bytes.substr(0, bytes.size() - 1)); }) ==
          ErrorCode::InvalidModel);
    CHECK(code_of([] { decode_toy_json("[]"); }) == ErrorCode::InvalidModel);
    CHECK(code_of([] { decode_toy_json(R"([{"op":"dense","in_dim":2,"out_dim":2,"weights":[1]}])"); }) ==
          ErrorCode::InvalidModel);
    CHECK(code_of([] {
              decode_toy_json(R"([{"op":"dense","in_dim":1,"out_dim":2,"weights":[1,1]},)"
                              R"({"op":"relu","in_dim":3,"out_dim":3}])");
          }) == ErrorCode::InvalidModel);
    CHECK(code_of([] { decode_toy_json("not json"); }) == ErrorCode::InvalidModel);
}

TEST_CASE("toy graph forward pass") {
    const auto g = decode_toy_json(testing::tiny_toy_json());
    const auto y = g.forward({1, 2, 3, 4});
    // Row 0: 0.5*1 + 0.25*2 + 0*3 + 1*4 = 5; row 1: 1 - 3 + 8 = 6.
    REQUIRE(y.size() == 2);
    CHECK(y[0] == 5.0);
    CHECK(y[1] == 6.0);
    CHECK(g.forward({-1, 0, 0, 0})[0] == 0.0);
    CHECK(code_of([&] { g.forward({1}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("plugin registration") {
    PluginRegistry plugins;
    ConverterPlugin p;
    p.source_framework = "toy";
    p.target_format = "toy-binary";
    p.builtin = "toy-binary";
    plugins.register_plugin(p);
    CHECK(plugins.find("toy", "toy-binary").has_value());
    CHECK(code_of([&] { plugins.register_plugin(p); }) == ErrorCode::DuplicatePlugin);
    CHECK(code_of([&] { plugins.register_plugin(external("toy", "x", "cp {input} out")); }) ==
          ErrorCode::InvalidPlugin);
    auto unknown = p;
    unknown.target_format = "other";
    unknown.builtin = "magic";
    CHECK(code_of([&] { plugins.register_plugin(unknown); }) == ErrorCode::InvalidPlugin);
}

TEST_CASE("planning fans out from the source framework") {
    Fixture f;
    const auto rec = f.reg.register_model(toy_manifest(), testing::tiny_toy_json());
    const auto all = f.conv.plan(rec, {});
    REQUIRE(all.steps.size() == 2);
    CHECK(all.steps[0].target_format == "toy-binary");
    CHECK(all.steps[1].target_format == "toy-json");

    CHECK(f.conv.plan(rec, {"toy-binary"}).steps.size() == 1);
    CHECK(code_of([&] { f.conv.plan(rec, {"tensorrt"}); }) == ErrorCode::UnsupportedConversion);

    f.plugins->register_plugin(external("pytorch", "torchscript", "torchscript-export {input} {output}"));
    f.plugins->register_plugin(external("pytorch", "onnx", "onnx-export {input} {output}"));
    const auto pt = f.reg.register_model(toy_manifest("pytorch"), "weights");
    const auto plan = f.conv.plan(pt, {});
    REQUIRE(plan.steps.size() == 2);
    CHECK(plan.steps[0].target_format == "onnx");
    CHECK(plan.steps[1].target_format == "torchscript");
}

TEST_CASE("passthrough keeps the digest and conversion advances the status") {
    Fixture f;
    const auto rec = f.reg.register_model(toy_manifest(), testing::tiny_toy_json());
    const auto v = f.conv.convert(rec.id, "toy-json");
    CHECK(v.blob_digest == rec.weight_digest);
    CHECK(v.serving_backends == std::vector<std::string>{"mockserve"});
    const auto after = f.reg.get(rec.id);
    CHECK(after.status == ModelStatus::Converted);
    REQUIRE(after.variants.size() == 1);
    CHECK(after.variants[0].parent_id == rec.id);
}

TEST_CASE("builtin conversions are byte-deterministic") {
    Fixture f;
    const auto a = f.reg.register_model(toy_manifest(), testing::tiny_toy_json());
    auto m = toy_manifest();
    m.name = "copy";
    const auto b = f.reg.register_model(m, testing::tiny_toy_json());
    CHECK(f.conv.convert(a.id, "toy-binary").blob_digest ==
          f.conv.convert(b.id, "toy-binary").blob_digest);
    CHECK(run_builtin("toy-json", run_builtin("toy-binary", testing::tiny_toy_json())) ==
          encode_toy_json(decode_toy_json(testing::tiny_toy_json())));
}

TEST_CASE("external plugin success and failure") {
    Fixture f;
    f.plugins->register_plugin(external("toy", "copied", "cp {input} {output}"));
    f.plugins->register_plugin(external("toy", "broken", "echo boom >&2; exit 1"
                                                         " # {input} {output}"));
    f.plugins->register_plugin(external("toy", "empty", "touch {output} # {input}"));

    const auto rec = f.reg.register_model(toy_manifest(), testing::tiny_toy_json());
    const auto copied = f.conv.convert(rec.id, "copied");
    CHECK(copied.blob_digest == rec.weight_digest);
    CHECK(f.reg.get(rec.id).status == ModelStatus::Converted);

    // A failing conversion on a converted record leaves everything intact.
    CHECK(code_of([&] { f.conv.convert(rec.id, "broken"); }) == ErrorCode::PluginFailure);
    CHECK(code_of([&] { f.conv.convert(rec.id, "empty"); }) == ErrorCode::PluginFailure);
    const auto after = f.reg.get(rec.id);
    CHECK(after.variants.size() == 1);
    CHECK(f.reg.get_blob(rec.weight_digest) == testing::tiny_toy_json());

    auto m = toy_manifest();
    m.name = "fresh";
    const auto fresh = f.reg.register_model(m, testing::tiny_toy_json());
    try {
        f.conv.convert(fresh.id, "broken");
        FAIL("expected PluginFailure");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::PluginFailure);
        CHECK(std::string(e.what()).find("status 1") != std::string::npos);
    }
    CHECK(f.reg.get(fresh.id).status == ModelStatus::Failed);

    // failed -> converting is the permitted retry path.
    f.conv.convert(fresh.id, "toy-binary");
    CHECK(f.reg.get(fresh.id).status == ModelStatus::Converted);
}

TEST_CASE("external plugins time out") {
    testing::TempDir dir;
    registry::Registry reg(std::make_shared<registry::MemoryStore>());
    auto plugins = std::make_shared<PluginRegistry>();
    plugins->register_plugin(external("toy", "slow", "sleep 5; cp {input} {output}"));
    Converter conv(reg, plugins, ConverterOptions{std::chrono::milliseconds(300), dir / "work"});
    const auto rec = reg.register_model(toy_manifest(), "w");
    CHECK(code_of([&] { conv.convert(rec.id, "slow"); }) == ErrorCode::Timeout);
    CHECK(reg.get(rec.id).status == ModelStatus::Failed);
}

TEST_CASE("a plan with one failing step still ends converted") {
    Fixture f;
    f.plugins->register_plugin(external("toy", "zz-broken", "exit 1 # {input} {output}"));
    const auto rec = f.reg.register_model(toy_manifest(), testing::tiny_toy_json());
    const auto outcome = f.conv.run_plan(f.conv.plan(rec, {}));
    CHECK(outcome.variants.size() == 2);
    REQUIRE(outcome.failures.size() == 1);
    CHECK(outcome.failures[0].target_format == "zz-broken");
    CHECK(f.reg.get(rec.id).status == ModelStatus::Converted);
}
