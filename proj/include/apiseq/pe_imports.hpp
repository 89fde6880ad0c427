#pragma once

// PE32 import machinery: walks the import directory (Name/Hint array and
// Import Address Table) and resolves absolute call addresses back to API
// names via image base + thunk RVA.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace apiseq::pe {

struct ImportEntry {
    std::string dll_name;
    std::string api_name;
    uint16_t hint = 0;
    uint32_t thunk_rva = 0; // the IAT slot

    friend bool operator==(const ImportEntry&, const ImportEntry&) = default;
};

struct ImportTable {
    uint32_t image_base = 0;
    std::vector<ImportEntry> entries;
    std::map<uint32_t, size_t> by_thunk_rva; // thunk rva -> index into entries

    const ImportEntry* find_thunk(uint32_t rva) const {
        auto it = by_thunk_rva.find(rva);
        return it == by_thunk_rva.end() ? nullptr : &entries[it->second];
    }
};

// Known-API whitelist (Win32 SDK + DDK names). Exact, case-sensitive.
struct ApiDatabase {
    std::set<std::string> names;
};

// Walks DOS header -> PE signature -> optional header -> import directory.
// Errors: NotPE, TruncatedHeader, MalformedImportDirectory. PE32 only;
// PE32+ is rejected (NotPE with a PE32+ message).
ImportTable parse_imports(std::span<const uint8_t> pe_bytes);
ImportTable parse_imports_file(const std::string& path);

// call_addr - image_base == thunk_rva -> that entry's name; absent otherwise.
std::optional<std::string> resolve_call_target(uint32_t call_addr, const ImportTable& table);

bool filter_known(const std::string& name, const ApiDatabase& db);

// Newline-delimited names, '#' comments.
ApiDatabase load_api_database(const std::string& text);
ApiDatabase load_api_database_file(const std::string& path);

} // namespace apiseq::pe
