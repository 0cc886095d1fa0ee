// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "modelci/registry/store.hpp"
#include "modelci/registry/types.hpp"

namespace modelci::registry {

struct DeletionSummary {
    std::string record_id;
    std::size_t variants_removed = 0;
    std::size_t results_removed = 0;
    std::vector<std::string> blobs_removed;
};

void to_json(nlohmann::json& j, const DeletionSummary& s);

// The model hub: records, weight blobs, variants and profiling results, plus
// the register/retrieve/update/delete housekeeping API.
//
// All mutations are serialized; readers take a shared lock and only ever
// observe committed records.
class Registry {
public:
    using InUseCheck = std::function<bool(const std::string& record_id)>;
    using ChangeListener = std::function<void(const ModelRecord&)>;

    // Loads every persisted record from `store`.
    explicit Registry(std::shared_ptr<Store> store);

    ModelRecord register_model(const RegistrationManifest& manifest, std::string_view weights);

    std::vector<ModelRecord> retrieve(const ModelQuery& query) const;
    ModelRecord get(const std::string& id) const;

    // `expected_updated_at`, when given, must equal the stored updated_at
    // (RFC 3339 text) or the update fails with Conflict.
    ModelRecord update(const std::string& id, const RecordPatch& patch,
                       const std::optional<std::string>& expected_updated_at = std::nullopt);

    DeletionSummary remove(const std::string& id);

    std::string put_blob(std::string_view bytes);
    std::string get_blob(std::string_view digest) const;

    // Lifecycle helpers used by the converter, profiler and dispatcher.
    ModelRecord transition(const std::string& id, ModelStatus to);
    // Transitions only if legal; returns whether it did.
    bool try_transition(const std::string& id, ModelStatus to);
    ModelRecord add_variant(const std::string& record_id, ModelVariant variant);
    ModelRecord add_result(const std::string& record_id, ProfilingResult result);
    std::optional<std::pair<ModelRecord, ModelVariant>> find_variant(
        const std::string& variant_id) const;

    void set_in_use_check(InUseCheck check);
    void set_change_listener(ChangeListener listener);

    Store& store() noexcept { return *store_; }
    std::shared_ptr<Store> shared_store() const noexcept { return store_; }

private:
    ModelRecord& mutable_record(const std::string& id);
    void persist(ModelRecord& record);
    void notify(const ModelRecord& record) const;
    util::Timestamp next_timestamp(util::Timestamp previous) const;

    std::shared_ptr<Store> store_;
    mutable std::shared_mutex mu_;
    std::map<std::string, ModelRecord> records_;
    InUseCheck in_use_;
    ChangeListener listener_;
};

}  // namespace modelci::registry
