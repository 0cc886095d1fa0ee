// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <memory>
#include <string>

#include "modelci/converter/toy_model.hpp"
#include "modelci/registry/registry.hpp"
#include "modelci/util/id.hpp"
#include "toy_graphs.hpp"

namespace modelci::testing {

// A registry holding one toy record with a toy-json and a toy-binary variant.
struct ToyHub {
    std::shared_ptr<registry::Registry> registry;
    registry::ModelRecord record;
    std::string json_variant;
    std::string binary_variant;
};

inline registry::RegistrationManifest toy_manifest(const std::string& name = "toy") {
    registry::RegistrationManifest m;
    m.name = name;
    m.framework = "toy";
    m.task = "regression";
    m.dataset = "synthetic";
    m.inputs = {registry::TensorSpec{"x", {-1, 4}, "float64"}};
    m.outputs = {registry::TensorSpec{"y", {-1, 2}, "float64"}};
    return m;
}

inline ToyHub make_toy_hub(std::shared_ptr<registry::Store> store = std::make_shared<registry::MemoryStore>()) {
    ToyHub hub;
    hub.registry = std::make_shared<registry::Registry>(std::move(store));
    const std::string json_model = tiny_toy_json();
    hub.record = hub.registry->register_model(toy_manifest(), json_model);
    const auto graph = converter::decode_toy_json(json_model);

    registry::ModelVariant j;
    j.id = util::new_id();
    j.format = "toy-json";
    j.blob_digest = hub.registry->put_blob(converter::encode_toy_json(graph));
    j.serving_backends = {"mockserve"};
    hub.json_variant = j.id;
    hub.registry->add_variant(hub.record.id, j);

    registry::ModelVariant b;
    b.id = util::new_id();
    b.format = "toy-binary";
    b.blob_digest = hub.registry->put_blob(converter::encode_toy_binary(graph));
    b.serving_backends = {"mockserve"};
    hub.binary_variant = b.id;
    hub.record = hub.registry->add_variant(hub.record.id, b);
    return hub;
}

}  // namespace modelci::testing
