#include "apiseq/features.hpp"

#include "apiseq/error.hpp"

#include <algorithm>
#include <sstream>

namespace apiseq::ngram {

uint32_t ApiIdMap::intern(const std::string& name) {
    auto it = ids_.find(name);
    if (it != ids_.end()) return it->second;
    uint32_t id = static_cast<uint32_t>(names_.size()) + 1;
    if (id > kMaxApiId) fail("IdSpaceExhausted", "more than 65535 distinct API names");
    names_.push_back(name);
    ids_.emplace(name, id);
    return id;
}

std::optional<uint32_t> ApiIdMap::lookup(const std::string& name) const {
    auto it = ids_.find(name);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

const std::string& ApiIdMap::name_of(uint32_t id) const {
    if (id == 0 || id > names_.size()) fail("UnknownApiId", "id " + std::to_string(id));
    return names_[id - 1];
}

std::string ApiIdMap::save() const {
    std::string out;
    for (const std::string& name : names_) {
        out += name;
        out += '\n';
    }
    return out;
}

ApiIdMap ApiIdMap::load(const std::string& text) {
    ApiIdMap map;
    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty())
            fail("MalformedApiMap", "empty name at line " + std::to_string(line_no));
        if (map.ids_.count(line))
            fail("MalformedApiMap", "duplicate name at line " + std::to_string(line_no));
        map.intern(line);
    }
    return map;
}

uint64_t NGram::pack() const {
    return static_cast<uint64_t>(ids[0]) << 48 | static_cast<uint64_t>(ids[1]) << 32 |
           static_cast<uint64_t>(ids[2]) << 16 | static_cast<uint64_t>(ids[3]);
}

NGram NGram::unpack(uint64_t key, int n) {
    NGram g;
    g.n = static_cast<uint8_t>(n);
    for (int i = 0; i < n; ++i)
        g.ids[static_cast<size_t>(i)] = static_cast<uint32_t>(key >> (48 - 16 * i)) & 0xFFFF;
    return g;
}

static void check_gram_size(int n) {
    if (n < 2 || n > 4)
        fail("GramSizeOutOfRange", "n must be 2, 3 or 4, got " + std::to_string(n));
}

std::vector<NGram> grams_of(std::span<const uint32_t> sequence, int n) {
    check_gram_size(n);
    std::vector<NGram> out;
    if (sequence.size() < static_cast<size_t>(n)) return out;
    out.reserve(sequence.size() - static_cast<size_t>(n) + 1);
    for (size_t i = 0; i + static_cast<size_t>(n) <= sequence.size(); ++i) {
        NGram g;
        g.n = static_cast<uint8_t>(n);
        for (int k = 0; k < n; ++k) g.ids[static_cast<size_t>(k)] = sequence[i + static_cast<size_t>(k)];
        out.push_back(g);
    }
    return out;
}

NGramSet NGramSet::from_keys(int n, std::vector<uint64_t> keys) {
    check_gram_size(n);
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    NGramSet set(n);
    set.keys_ = std::move(keys);
    return set;
}

bool NGramSet::contains(uint64_t key) const {
    return std::binary_search(keys_.begin(), keys_.end(), key);
}

void NGramSet::absorb(const NGramSet& other) {
    if (n_ == 0) n_ = other.n_;
    else if (other.n_ != 0 && other.n_ != n_)
        fail("GramSizeMismatch", "absorbing " + std::to_string(other.n_) + "-grams into " +
                                     std::to_string(n_) + "-gram set");
    std::vector<uint64_t> merged;
    merged.reserve(keys_.size() + other.keys_.size());
    std::set_union(keys_.begin(), keys_.end(), other.keys_.begin(), other.keys_.end(),
                   std::back_inserter(merged));
    keys_ = std::move(merged);
    source_path_count_ += other.source_path_count_;
    total_gram_occurrences_ += other.total_gram_occurrences_;
}

std::vector<NGram> NGramSet::grams() const {
    std::vector<NGram> out;
    out.reserve(keys_.size());
    for (uint64_t key : keys_) out.push_back(NGram::unpack(key, n_));
    return out;
}

NGramSet gram_set_of_file(const std::vector<paths::ApiPath>& file_paths, ApiIdMap& map,
                          int n) {
    check_gram_size(n);
    std::vector<uint64_t> keys;
    uint64_t occurrences = 0;
    std::vector<uint32_t> ids;
    for (const paths::ApiPath& path : file_paths) {
        ids.clear();
        ids.reserve(path.apis.size());
        for (const std::string& api : path.apis) ids.push_back(map.intern(api));
        for (const NGram& g : grams_of(ids, n)) {
            keys.push_back(g.pack());
            ++occurrences;
        }
    }
    NGramSet set = NGramSet::from_keys(n, std::move(keys));
    set.source_path_count_ = static_cast<uint32_t>(file_paths.size());
    set.total_gram_occurrences_ = occurrences;
    return set;
}

std::string dump_grams(const NGramSet& set) {
    std::string out;
    for (const NGram& g : set.grams()) {
        for (int i = 0; i < g.n; ++i) {
            if (i) out += ',';
            out += std::to_string(g.ids[static_cast<size_t>(i)]);
        }
        out += '\n';
    }
    return out;
}

} // namespace apiseq::ngram
