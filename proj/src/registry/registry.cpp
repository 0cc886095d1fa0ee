// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/registry/registry.hpp"

#include <algorithm>
#include <mutex>
#include <set>

#include "modelci/error.hpp"
#include "modelci/util/hash.hpp"
#include "modelci/util/id.hpp"

using nlohmann::json;

namespace modelci::registry {

namespace {

std::set<std::string> referenced_blobs(const ModelRecord& r) {
    std::set<std::string> out{r.weight_digest};
    for (const auto& v : r.variants) out.insert(v.blob_digest);
    return out;
}

[[noreturn]] void not_found(const std::string& id) {
    throw Error(ErrorCode::NotFound, "model " + id + " not found", {{"id", id}});
}

}  // namespace

void to_json(json& j, const DeletionSummary& s) {
    j = json{{"record_id", s.record_id},
             {"variants_removed", s.variants_removed},
             {"results_removed", s.results_removed},
             {"blobs_removed", s.blobs_removed}};
}

Registry::Registry(std::shared_ptr<Store> store) : store_(std::move(store)) {
    for (const auto& id : store_->list_documents(kRecordCollection)) {
        const auto body = store_->get_document(kRecordCollection, id);
        if (!body) continue;
        try {
            auto record = json::parse(*body).get<ModelRecord>();
            records_.emplace(record.id, std::move(record));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::StorageFailure,
                        "corrupt record document " + id + ": " + e.what());
        }
    }
}

util::Timestamp Registry::next_timestamp(util::Timestamp previous) const {
    return std::max(util::now(), previous + std::chrono::milliseconds(1));
}

void Registry::persist(ModelRecord& record) {
    store_->put_document(kRecordCollection, record.id, json(record).dump(2));
}

void Registry::notify(const ModelRecord& record) const {
    if (listener_) listener_(record);
}

ModelRecord& Registry::mutable_record(const std::string& id) {
    const auto it = records_.find(id);
    if (it == records_.end()) not_found(id);
    return it->second;
}

ModelRecord Registry::register_model(const RegistrationManifest& manifest,
                                     std::string_view weights) {
    manifest.validate();
    if (weights.empty()) {
        throw Error(ErrorCode::InvalidManifest, "weight file is empty");
    }
    ModelRecord record;
    {
        std::unique_lock lock(mu_);
        int max_version = 0;
        for (const auto& [_, r] : records_) {
            if (r.name != manifest.name || r.framework != manifest.framework) continue;
            max_version = std::max(max_version, r.version);
            if (manifest.version && r.version == *manifest.version) {
                throw Error(ErrorCode::DuplicateVersion,
                            manifest.name + "/" + manifest.framework + " version " +
                                std::to_string(*manifest.version) + " already exists",
                            {{"id", r.id}});
            }
        }
        record.id = util::new_id();
        record.name = manifest.name;
        record.framework = manifest.framework;
        record.version = manifest.version.value_or(max_version + 1);
        record.task = manifest.task;
        record.dataset = manifest.dataset;
        record.metrics = manifest.metrics;
        record.inputs = manifest.inputs;
        record.outputs = manifest.outputs;
        // The blob write happens under the lock so a concurrent delete cannot
        // collect it before the record referencing it is committed.
        record.weight_digest = store_->put_blob(weights);
        record.status = ModelStatus::Registered;
        record.created_at = util::now();
        record.updated_at = record.created_at;
        persist(record);
        records_.emplace(record.id, record);
    }
    notify(record);
    return record;
}

std::vector<ModelRecord> Registry::retrieve(const ModelQuery& query) const {
    std::vector<ModelRecord> out;
    {
        std::shared_lock lock(mu_);
        for (const auto& [_, r] : records_) {
            if (query.matches(r)) out.push_back(r);
        }
    }
    std::sort(out.begin(), out.end(), [](const ModelRecord& a, const ModelRecord& b) {
        return std::tie(a.name, a.version, a.framework, a.id) <
               std::tie(b.name, b.version, b.framework, b.id);
    });
    return out;
}

ModelRecord Registry::get(const std::string& id) const {
    std::shared_lock lock(mu_);
    const auto it = records_.find(id);
    if (it == records_.end()) not_found(id);
    return it->second;
}

ModelRecord Registry::update(const std::string& id, const RecordPatch& patch,
                             const std::optional<std::string>& expected_updated_at) {
    ModelRecord copy;
    {
        std::unique_lock lock(mu_);
        ModelRecord& current = mutable_record(id);
        if (expected_updated_at &&
            *expected_updated_at != util::format_timestamp(current.updated_at)) {
            throw Error(ErrorCode::Conflict, "model " + id + " was modified concurrently",
                        {{"updated_at", util::format_timestamp(current.updated_at)}});
        }
        ModelRecord next = current;
        if (patch.status && *patch.status != next.status) {
            if (!is_legal_transition(next.status, *patch.status)) {
                throw Error(ErrorCode::IllegalTransition,
                            "cannot move from " + std::string(to_string(next.status)) + " to " +
                                std::string(to_string(*patch.status)),
                            {{"from", std::string(to_string(next.status))},
                             {"to", std::string(to_string(*patch.status))}});
            }
            next.status = *patch.status;
        }
        if (patch.task) next.task = *patch.task;
        if (patch.dataset) next.dataset = *patch.dataset;
        if (patch.metrics) {
            for (const auto& [k, v] : *patch.metrics) next.metrics[k] = v;
        }
        next.updated_at = next_timestamp(current.updated_at);
        persist(next);
        current = std::move(next);
        copy = current;
    }
    notify(copy);
    return copy;
}

DeletionSummary Registry::remove(const std::string& id) {
    std::unique_lock lock(mu_);
    const auto it = records_.find(id);
    if (it == records_.end()) not_found(id);
    if (in_use_ && in_use_(id)) {
        throw Error(ErrorCode::InUse, "model " + id + " has live service instances",
                    {{"id", id}});
    }
    DeletionSummary summary;
    summary.record_id = id;
    summary.variants_removed = it->second.variants.size();
    summary.results_removed = it->second.profiling_results.size();
    const auto candidates = referenced_blobs(it->second);
    store_->delete_document(kRecordCollection, id);
    records_.erase(it);

    std::set<std::string> still_referenced;
    for (const auto& [_, r] : records_) {
        for (auto& d : referenced_blobs(r)) still_referenced.insert(std::move(d));
    }
    for (const auto& digest : candidates) {
        if (still_referenced.count(digest) == 0 && store_->delete_blob(digest)) {
            summary.blobs_removed.push_back(digest);
        }
    }
    return summary;
}

std::string Registry::put_blob(std::string_view bytes) {
    std::unique_lock lock(mu_);
    return store_->put_blob(bytes);
}

std::string Registry::get_blob(std::string_view digest) const {
    return store_->get_blob(digest);
}

ModelRecord Registry::transition(const std::string& id, ModelStatus to) {
    RecordPatch patch;
    patch.status = to;
    return update(id, patch);
}

bool Registry::try_transition(const std::string& id, ModelStatus to) {
    ModelRecord copy;
    {
        std::unique_lock lock(mu_);
        ModelRecord& current = mutable_record(id);
        if (current.status == to || !is_legal_transition(current.status, to)) return false;
        ModelRecord next = current;
        next.status = to;
        next.updated_at = next_timestamp(current.updated_at);
        persist(next);
        current = std::move(next);
        copy = current;
    }
    notify(copy);
    return true;
}

ModelRecord Registry::add_variant(const std::string& record_id, ModelVariant variant) {
    ModelRecord copy;
    {
        std::unique_lock lock(mu_);
        ModelRecord& current = mutable_record(record_id);
        if (!store_->has_blob(variant.blob_digest)) {
            throw Error(ErrorCode::UnknownDigest,
                        "variant blob " + variant.blob_digest + " is not stored");
        }
        variant.parent_id = record_id;
        ModelRecord next = current;
        next.variants.push_back(std::move(variant));
        next.updated_at = next_timestamp(current.updated_at);
        persist(next);
        current = std::move(next);
        copy = current;
    }
    notify(copy);
    return copy;
}

ModelRecord Registry::add_result(const std::string& record_id, ProfilingResult result) {
    ModelRecord copy;
    {
        std::unique_lock lock(mu_);
        ModelRecord& current = mutable_record(record_id);
        ModelRecord next = current;
        next.profiling_results.push_back(std::move(result));
        next.updated_at = next_timestamp(current.updated_at);
        persist(next);
        current = std::move(next);
        copy = current;
    }
    notify(copy);
    return copy;
}

std::optional<std::pair<ModelRecord, ModelVariant>> Registry::find_variant(
    const std::string& variant_id) const {
    std::shared_lock lock(mu_);
    for (const auto& [_, r] : records_) {
        for (const auto& v : r.variants) {
            if (v.id == variant_id) return std::make_pair(r, v);
        }
    }
    return std::nullopt;
}

void Registry::set_in_use_check(InUseCheck check) {
    std::unique_lock lock(mu_);
    in_use_ = std::move(check);
}

void Registry::set_change_listener(ChangeListener listener) {
    std::unique_lock lock(mu_);
    listener_ = std::move(listener);
}

}  // namespace modelci::registry
