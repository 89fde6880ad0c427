#pragma once

// Listing producers: linear and recursive traversal over a BinaryImage,
// plus the normalized disassembly interchange format (NDIF) so listings
// made by external tools can enter the pipeline.
//
// NDIF grammar, one instruction per line:
//   ADDR KIND [TARGET] [API=name]
// ADDR/TARGET are uppercase hex without prefix; KIND is one of
// SEQ JMP JCC CALL RET CALLIND APICALL STORE HALT. SEQ covers every
// non-control instruction; API= is only valid on APICALL lines.

#include "apiseq/miniisa.hpp"
#include "apiseq/pe_imports.hpp"

#include <map>
#include <optional>
#include <string>

namespace apiseq::disasm {

enum class ListingMode : uint8_t { Linear, Recursive, Ingested };

struct ListedInstruction {
    isa::Instruction instr;
    std::optional<std::string> api; // resolved API name, when any

    friend bool operator==(const ListedInstruction&, const ListedInstruction&) = default;
};

struct Listing {
    std::map<uint32_t, ListedInstruction> instructions;
    uint32_t entry = 0;
    ListingMode mode = ListingMode::Recursive;

    bool contains(uint32_t addr) const { return instructions.count(addr) != 0; }

    // Address execution falls through to after `addr`: addr+6 for MiniISA
    // listings, the next listed address for ingested ones (external tools
    // emit variable-width instructions and NDIF does not carry widths).
    std::optional<uint32_t> fall_through_of(uint32_t addr) const;
};

// Optional name resolution applied while listing. `imports` enables the
// PE-style route: a CALL whose target decodes out of range but matches
// image base + thunk RVA is rewritten to an APICALL carrying the resolved
// name. `known` restricts resolved names to the API database.
struct ResolveOptions {
    const pe::ImportTable* imports = nullptr;
    const pe::ApiDatabase* known = nullptr;
};

// Decode from offset 0, one instruction after the other; stops at the
// first junk byte or end of code.
Listing disassemble_linear(const isa::BinaryImage& image, const ResolveOptions& opts = {});

// Worklist traversal from the entry point: Jcc/Call push their
// fall-through and continue at the target, Jmp follows its target only,
// Ret/Halt/CallIndirect pop the worklist. Addresses are decoded at most
// once; junk at a target ends that branch only.
Listing disassemble_recursive(const isa::BinaryImage& image, const ResolveOptions& opts = {});

Listing parse_ndif(const std::string& text);
std::string emit_ndif(const Listing& listing);

} // namespace apiseq::disasm
