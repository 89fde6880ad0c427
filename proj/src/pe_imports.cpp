#include "apiseq/pe_imports.hpp"

#include "apiseq/error.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace apiseq::pe {

namespace {

constexpr uint32_t kPe32Magic = 0x10B;
constexpr uint32_t kPe32PlusMagic = 0x20B;
constexpr size_t kImportDescriptorSize = 20;
constexpr size_t kSectionHeaderSize = 40;
constexpr size_t kMaxDescriptors = 4096;
constexpr size_t kMaxThunks = 65536;

struct Reader {
    std::span<const uint8_t> bytes;

    uint8_t u8(size_t off, const char* what) const {
        if (off >= bytes.size()) fail("TruncatedHeader", what);
        return bytes[off];
    }
    uint16_t u16(size_t off, const char* what) const {
        if (off + 2 > bytes.size()) fail("TruncatedHeader", what);
        return static_cast<uint16_t>(bytes[off] | bytes[off + 1] << 8);
    }
    uint32_t u32(size_t off, const char* what) const {
        if (off + 4 > bytes.size()) fail("TruncatedHeader", what);
        return static_cast<uint32_t>(bytes[off]) | static_cast<uint32_t>(bytes[off + 1]) << 8 |
               static_cast<uint32_t>(bytes[off + 2]) << 16 |
               static_cast<uint32_t>(bytes[off + 3]) << 24;
    }
};

struct Section {
    uint32_t virtual_address = 0;
    uint32_t virtual_size = 0;
    uint32_t raw_offset = 0;
    uint32_t raw_size = 0;
};

// RVA -> file offset through the section table; RVAs below the first
// section map into the headers directly.
size_t rva_to_offset(uint32_t rva, const std::vector<Section>& sections, size_t file_size,
                     const char* what) {
    for (const auto& s : sections) {
        uint32_t span = std::max(s.virtual_size, s.raw_size);
        if (rva >= s.virtual_address && rva < s.virtual_address + span) {
            size_t off = s.raw_offset + (rva - s.virtual_address);
            if (off >= file_size)
                fail("MalformedImportDirectory",
                     std::string(what) + ": rva maps past end of file");
            return off;
        }
    }
    if (!sections.empty() && rva < sections.front().virtual_address && rva < file_size)
        return rva;
    fail("MalformedImportDirectory", std::string(what) + ": rva not covered by any section");
}

std::string read_asciiz(const Reader& r, size_t off, const char* what) {
    std::string out;
    for (size_t i = off; i < r.bytes.size(); ++i) {
        if (r.bytes[i] == 0) return out;
        out.push_back(static_cast<char>(r.bytes[i]));
        if (out.size() > 1024)
            fail("MalformedImportDirectory", std::string(what) + ": unterminated name");
    }
    fail("MalformedImportDirectory", std::string(what) + ": name runs past end of file");
}

} // namespace

ImportTable parse_imports(std::span<const uint8_t> pe_bytes) {
    Reader r{pe_bytes};
    if (pe_bytes.size() < 2 || pe_bytes[0] != 'M' || pe_bytes[1] != 'Z')
        fail("NotPE", "missing MZ signature");
    uint32_t e_lfanew = r.u32(0x3C, "DOS header e_lfanew");
    if (r.u8(e_lfanew, "PE signature") != 'P' || r.u8(e_lfanew + 1, "PE signature") != 'E' ||
        r.u8(e_lfanew + 2, "PE signature") != 0 || r.u8(e_lfanew + 3, "PE signature") != 0)
        fail("NotPE", "missing PE signature");

    const size_t coff = e_lfanew + 4;
    uint16_t n_sections = r.u16(coff + 2, "COFF section count");
    uint16_t opt_size = r.u16(coff + 16, "COFF optional header size");
    const size_t opt = coff + 20;

    uint16_t magic = r.u16(opt, "optional header magic");
    if (magic == kPe32PlusMagic) fail("NotPE", "PE32+ images are not supported");
    if (magic != kPe32Magic) fail("NotPE", "unknown optional header magic");

    ImportTable table;
    table.image_base = r.u32(opt + 28, "optional header ImageBase");
    uint32_t n_dirs = r.u32(opt + 92, "NumberOfRvaAndSizes");

    std::vector<Section> sections;
    const size_t sect_base = opt + opt_size;
    for (uint16_t i = 0; i < n_sections; ++i) {
        size_t s = sect_base + static_cast<size_t>(i) * kSectionHeaderSize;
        Section sec;
        sec.virtual_size = r.u32(s + 8, "section VirtualSize");
        sec.virtual_address = r.u32(s + 12, "section VirtualAddress");
        sec.raw_size = r.u32(s + 16, "section SizeOfRawData");
        sec.raw_offset = r.u32(s + 20, "section PointerToRawData");
        sections.push_back(sec);
    }

    if (n_dirs < 2) return table; // no import directory entry at all
    uint32_t import_rva = r.u32(opt + 96 + 8, "import directory rva");
    if (import_rva == 0) return table;

    size_t desc_off = rva_to_offset(import_rva, sections, pe_bytes.size(), "import directory");
    for (size_t d = 0; d < kMaxDescriptors; ++d) {
        size_t off = desc_off + d * kImportDescriptorSize;
        uint32_t original_first_thunk = r.u32(off, "import descriptor");
        uint32_t name_rva = r.u32(off + 12, "import descriptor");
        uint32_t first_thunk = r.u32(off + 16, "import descriptor");
        if (original_first_thunk == 0 && name_rva == 0 && first_thunk == 0) break;
        if (d + 1 == kMaxDescriptors)
            fail("MalformedImportDirectory", "descriptor table not terminated");
        if (name_rva == 0 || first_thunk == 0)
            fail("MalformedImportDirectory", "descriptor missing name or IAT");

        std::string dll = read_asciiz(
            r, rva_to_offset(name_rva, sections, pe_bytes.size(), "dll name"), "dll name");

        uint32_t lookup_rva = original_first_thunk ? original_first_thunk : first_thunk;
        size_t lookup_off =
            rva_to_offset(lookup_rva, sections, pe_bytes.size(), "import lookup table");
        for (size_t k = 0; k < kMaxThunks; ++k) {
            uint32_t entry = r.u32(lookup_off + 4 * k, "import lookup entry");
            if (entry == 0) break;
            if (k + 1 == kMaxThunks)
                fail("MalformedImportDirectory", "import lookup table not terminated");
            ImportEntry imp;
            imp.dll_name = dll;
            imp.thunk_rva = first_thunk + static_cast<uint32_t>(4 * k);
            if (entry & 0x80000000u) {
                // Ordinal-only import: no Name/Hint array entry to resolve.
                imp.hint = static_cast<uint16_t>(entry & 0xFFFF);
                imp.api_name = "ORD#" + std::to_string(entry & 0xFFFF);
            } else {
                size_t hn =
                    rva_to_offset(entry, sections, pe_bytes.size(), "hint/name entry");
                imp.hint = r.u16(hn, "hint");
                imp.api_name = read_asciiz(r, hn + 2, "import name");
            }
            if (!table.by_thunk_rva.emplace(imp.thunk_rva, table.entries.size()).second)
                fail("MalformedImportDirectory",
                     "duplicate IAT slot rva " + std::to_string(imp.thunk_rva));
            table.entries.push_back(std::move(imp));
        }
    }
    return table;
}

ImportTable parse_imports_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoError", "cannot open '" + path + "'");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return parse_imports(bytes);
}

std::optional<std::string> resolve_call_target(uint32_t call_addr, const ImportTable& table) {
    if (call_addr < table.image_base) return std::nullopt;
    const ImportEntry* entry = table.find_thunk(call_addr - table.image_base);
    if (!entry) return std::nullopt;
    return entry->api_name;
}

bool filter_known(const std::string& name, const ApiDatabase& db) {
    return db.names.count(name) != 0;
}

ApiDatabase load_api_database(const std::string& text) {
    ApiDatabase db;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto last = line.find_last_not_of(" \t\r");
        db.names.insert(line.substr(first, last - first + 1));
    }
    if (db.names.empty()) fail("EmptyApiDatabase", "no names loaded");
    return db;
}

ApiDatabase load_api_database_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoError", "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return load_api_database(ss.str());
}

} // namespace apiseq::pe
