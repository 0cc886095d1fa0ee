// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/registry/store.hpp"

#include <algorithm>

#include "modelci/error.hpp"
#include "modelci/util/fs.hpp"
#include "modelci/util/hash.hpp"

namespace fs = std::filesystem;

namespace modelci::registry {

namespace {

bool is_hex_digest(std::string_view d) {
    return d.size() == 64 && std::all_of(d.begin(), d.end(), [](char c) {
               return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
}

void check_id(std::string_view id) {
    if (id.empty() || id.find('/') != std::string_view::npos || id.front() == '.') {
        throw Error(ErrorCode::InvalidArgument, "invalid document id '" + std::string(id) + "'");
    }
}

[[noreturn]] void unknown_digest(std::string_view digest) {
    throw Error(ErrorCode::UnknownDigest, "unknown blob digest " + std::string(digest),
                {{"digest", std::string(digest)}});
}

}  // namespace

FileStore::FileStore(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_ / "meta", ec);
    fs::create_directories(root_ / "blobs", ec);
    if (ec) {
        throw Error(ErrorCode::StorageFailure,
                    "cannot create store at " + root_.string() + ": " + ec.message());
    }
}

fs::path FileStore::collection_dir(std::string_view collection) const {
    if (collection == kRecordCollection) return root_ / "meta";
    if (collection.empty() || collection == "blobs" || collection == "meta" ||
        collection.find('/') != std::string_view::npos) {
        throw Error(ErrorCode::InvalidArgument,
                    "invalid collection '" + std::string(collection) + "'");
    }
    return root_ / std::string(collection);
}

fs::path FileStore::blob_path(std::string_view digest) const {
    return root_ / "blobs" / std::string(digest.substr(0, 2)) / std::string(digest);
}

void FileStore::put_document(std::string_view collection, std::string_view id,
                             std::string_view body) {
    check_id(id);
    util::write_file_atomic(collection_dir(collection) / (std::string(id) + ".json"), body);
}

std::optional<std::string> FileStore::get_document(std::string_view collection,
                                                   std::string_view id) const {
    check_id(id);
    const auto path = collection_dir(collection) / (std::string(id) + ".json");
    std::error_code ec;
    if (!fs::exists(path, ec)) return std::nullopt;
    return util::read_file(path);
}

bool FileStore::delete_document(std::string_view collection, std::string_view id) {
    check_id(id);
    std::error_code ec;
    return fs::remove(collection_dir(collection) / (std::string(id) + ".json"), ec);
}

std::vector<std::string> FileStore::list_documents(std::string_view collection) const {
    std::vector<std::string> ids;
    const auto dir = collection_dir(collection);
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) return ids;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (entry.is_regular_file() && name.front() != '.' && entry.path().extension() == ".json") {
            ids.push_back(entry.path().stem().string());
        }
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::string FileStore::put_blob(std::string_view bytes) {
    std::string digest = util::sha256_hex(bytes);
    const auto path = blob_path(digest);
    std::error_code ec;
    if (!fs::exists(path, ec)) util::write_file_atomic(path, bytes);
    return digest;
}

std::string FileStore::get_blob(std::string_view digest) const {
    if (!is_hex_digest(digest)) unknown_digest(digest);
    const auto path = blob_path(digest);
    std::error_code ec;
    if (!fs::exists(path, ec)) unknown_digest(digest);
    return util::read_file(path);
}

bool FileStore::has_blob(std::string_view digest) const {
    std::error_code ec;
    return is_hex_digest(digest) && fs::exists(blob_path(digest), ec);
}

bool FileStore::delete_blob(std::string_view digest) {
    if (!is_hex_digest(digest)) return false;
    std::error_code ec;
    const auto path = blob_path(digest);
    const bool removed = fs::remove(path, ec);
    if (removed && fs::is_empty(path.parent_path(), ec)) fs::remove(path.parent_path(), ec);
    return removed;
}

std::vector<std::string> FileStore::list_blobs() const {
    std::vector<std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(root_ / "blobs")) {
        const auto name = entry.path().filename().string();
        if (entry.is_regular_file() && is_hex_digest(name)) out.push_back(name);
    }
    std::sort(out.begin(), out.end());
    return out;
}

void MemoryStore::put_document(std::string_view collection, std::string_view id,
                               std::string_view body) {
    check_id(id);
    std::unique_lock lock(mu_);
    docs_[std::string(collection)][std::string(id)] = std::string(body);
}

std::optional<std::string> MemoryStore::get_document(std::string_view collection,
                                                     std::string_view id) const {
    std::shared_lock lock(mu_);
    const auto c = docs_.find(collection);
    if (c == docs_.end()) return std::nullopt;
    const auto d = c->second.find(id);
    if (d == c->second.end()) return std::nullopt;
    return d->second;
}

bool MemoryStore::delete_document(std::string_view collection, std::string_view id) {
    std::unique_lock lock(mu_);
    const auto c = docs_.find(collection);
    if (c == docs_.end()) return false;
    const auto d = c->second.find(id);
    if (d == c->second.end()) return false;
    c->second.erase(d);
    return true;
}

std::vector<std::string> MemoryStore::list_documents(std::string_view collection) const {
    std::shared_lock lock(mu_);
    std::vector<std::string> ids;
    if (const auto c = docs_.find(collection); c != docs_.end()) {
        for (const auto& [id, _] : c->second) ids.push_back(id);
    }
    return ids;
}

std::string MemoryStore::put_blob(std::string_view bytes) {
    std::string digest = util::sha256_hex(bytes);
    std::unique_lock lock(mu_);
    blobs_.try_emplace(digest, bytes);
    return digest;
}

std::string MemoryStore::get_blob(std::string_view digest) const {
    std::shared_lock lock(mu_);
    const auto it = blobs_.find(digest);
    if (it == blobs_.end()) unknown_digest(digest);
    return it->second;
}

bool MemoryStore::has_blob(std::string_view digest) const {
    std::shared_lock lock(mu_);
    return blobs_.find(digest) != blobs_.end();
}

bool MemoryStore::delete_blob(std::string_view digest) {
    std::unique_lock lock(mu_);
    const auto it = blobs_.find(digest);
    if (it == blobs_.end()) return false;
    blobs_.erase(it);
    return true;
}

std::vector<std::string> MemoryStore::list_blobs() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [d, _] : blobs_) out.push_back(d);
    return out;
}

}  // namespace modelci::registry
