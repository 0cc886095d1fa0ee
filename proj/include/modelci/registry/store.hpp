// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace modelci::registry {

// Backend for structured documents (grouped in collections) and
// content-addressed blobs. Implementations must be safe for concurrent use.
class Store {
public:
    virtual ~Store() = default;

    virtual void put_document(std::string_view collection, std::string_view id,
                              std::string_view body) = 0;
    virtual std::optional<std::string> get_document(std::string_view collection,
                                                    std::string_view id) const = 0;
    virtual bool delete_document(std::string_view collection, std::string_view id) = 0;
    virtual std::vector<std::string> list_documents(std::string_view collection) const = 0;

    // Stores `bytes` under their SHA-256 digest and returns it. Idempotent.
    virtual std::string put_blob(std::string_view bytes) = 0;
    // Throws Error(UnknownDigest) for an unseen digest.
    virtual std::string get_blob(std::string_view digest) const = 0;
    virtual bool has_blob(std::string_view digest) const = 0;
    virtual bool delete_blob(std::string_view digest) = 0;
    virtual std::vector<std::string> list_blobs() const = 0;
};

// On-disk layout under root:
//   meta/<id>.json                 record documents ("records" collection)
//   <collection>/<id>.json         any other collection
//   blobs/<first 2 hex>/<digest>   blob bytes
class FileStore final : public Store {
public:
    explicit FileStore(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }
    std::filesystem::path blob_path(std::string_view digest) const;

    void put_document(std::string_view collection, std::string_view id,
                      std::string_view body) override;
    std::optional<std::string> get_document(std::string_view collection,
                                            std::string_view id) const override;
    bool delete_document(std::string_view collection, std::string_view id) override;
    std::vector<std::string> list_documents(std::string_view collection) const override;

    std::string put_blob(std::string_view bytes) override;
    std::string get_blob(std::string_view digest) const override;
    bool has_blob(std::string_view digest) const override;
    bool delete_blob(std::string_view digest) override;
    std::vector<std::string> list_blobs() const override;

private:
    std::filesystem::path collection_dir(std::string_view collection) const;

    std::filesystem::path root_;
};

class MemoryStore final : public Store {
public:
    void put_document(std::string_view collection, std::string_view id,
                      std::string_view body) override;
    std::optional<std::string> get_document(std::string_view collection,
                                            std::string_view id) const override;
    bool delete_document(std::string_view collection, std::string_view id) override;
    std::vector<std::string> list_documents(std::string_view collection) const override;

    std::string put_blob(std::string_view bytes) override;
    std::string get_blob(std::string_view digest) const override;
    bool has_blob(std::string_view digest) const override;
    bool delete_blob(std::string_view digest) override;
    std::vector<std::string> list_blobs() const override;

private:
    mutable std::shared_mutex mu_;
    std::map<std::string, std::map<std::string, std::string, std::less<>>, std::less<>> docs_;
    std::map<std::string, std::string, std::less<>> blobs_;
};

inline constexpr std::string_view kRecordCollection = "records";

}  // namespace modelci::registry
