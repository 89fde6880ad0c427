#pragma once

// N-gram features over API-call sequences. Names are interned into dense
// positive ids; a gram is a length-n window (stride 1) over one path's id
// sequence, and a file's feature is the deduplicated set of grams across
// all of its paths. Grams pack into u64 keys (four 16-bit id slots,
// first id most significant) so set operations run on sorted u64 arrays.

#include "apiseq/pathext.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace apiseq::ngram {

// Ids are dense from 1 and capped at 16 bits so any 2/3/4-gram packs into
// one u64 key.
constexpr uint32_t kMaxApiId = 0xFFFF;

class ApiIdMap {
public:
    // Returns the existing id or assigns the next one.
    uint32_t intern(const std::string& name);
    std::optional<uint32_t> lookup(const std::string& name) const;
    const std::string& name_of(uint32_t id) const;
    uint32_t size() const { return static_cast<uint32_t>(names_.size()); }

    // One name per line, line k holds the name with id k (1-based).
    std::string save() const;
    static ApiIdMap load(const std::string& text);

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, uint32_t> ids_;
};

struct NGram {
    uint8_t n = 0;
    std::array<uint32_t, 4> ids{}; // ids[0..n) set, rest zero

    uint64_t pack() const;
    static NGram unpack(uint64_t key, int n);

    friend bool operator==(const NGram&, const NGram&) = default;
};

// Sliding window, stride 1: exactly max(0, L - n + 1) grams in order.
std::vector<NGram> grams_of(std::span<const uint32_t> sequence, int n);

// Deduplicated gram set for one file. Keys are sorted and unique.
class NGramSet {
public:
    NGramSet() = default;
    explicit NGramSet(int n) : n_(n) {}
    static NGramSet from_keys(int n, std::vector<uint64_t> keys); // sorts + dedups

    int n() const { return n_; }
    size_t size() const { return keys_.size(); }
    bool empty() const { return keys_.empty(); }
    std::span<const uint64_t> keys() const { return keys_; }
    bool contains(uint64_t key) const;

    uint32_t source_path_count() const { return source_path_count_; }
    uint64_t total_gram_occurrences() const { return total_gram_occurrences_; }

    // Set union (train accumulation); counts add up, keys dedup.
    void absorb(const NGramSet& other);

    std::vector<NGram> grams() const; // unpacked, in key order

    friend bool operator==(const NGramSet&, const NGramSet&) = default;

private:
    friend NGramSet gram_set_of_file(const std::vector<paths::ApiPath>&, ApiIdMap&, int);
    int n_ = 0;
    std::vector<uint64_t> keys_;
    uint32_t source_path_count_ = 0;
    uint64_t total_gram_occurrences_ = 0;
};

// Union of grams_of over every path; unknown names extend the map. Grams
// never cross path boundaries.
NGramSet gram_set_of_file(const std::vector<paths::ApiPath>& file_paths, ApiIdMap& map, int n);

// Gram dump format: one gram per line, comma-separated ids.
std::string dump_grams(const NGramSet& set);

} // namespace apiseq::ngram
