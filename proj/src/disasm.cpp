#include "apiseq/disasm.hpp"

#include "apiseq/error.hpp"

#include <cctype>
#include <charconv>
#include <sstream>
#include <unordered_set>
#include <vector>

namespace apiseq::disasm {

namespace {

std::string hex4(uint32_t value) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04X", value);
    return buf;
}

bool name_allowed(const std::string& name, const ResolveOptions& opts) {
    return !opts.known || pe::filter_known(name, *opts.known);
}

// Decode one instruction and apply name resolution. A Call whose target
// decodes out of range is matched against the import table (absolute
// address -> IAT slot) and rewritten to an ApiCall on a hit; without a hit
// the out-of-range result stands and the caller treats it as junk.
struct Resolved {
    isa::DecodeStatus status;
    ListedInstruction listed;
};

Resolved decode_resolved(const isa::BinaryImage& image, uint32_t addr,
                         const ResolveOptions& opts) {
    isa::DecodeResult dec = isa::decode_at(image, addr);
    Resolved out{dec.status, {dec.instr, std::nullopt}};
    if (dec.status == isa::DecodeStatus::TargetOutOfRange &&
        dec.instr.kind == isa::OpKind::Call && opts.imports) {
        if (auto name = pe::resolve_call_target(dec.instr.operand, *opts.imports)) {
            out.status = isa::DecodeStatus::Ok;
            out.listed.instr.kind = isa::OpKind::ApiCall;
            if (name_allowed(*name, opts)) out.listed.api = std::move(name);
        }
        return out;
    }
    if (dec.status == isa::DecodeStatus::Ok && dec.instr.kind == isa::OpKind::ApiCall) {
        if (auto name = image.api_name(dec.instr.operand); name && name_allowed(*name, opts))
            out.listed.api = std::move(name);
    }
    return out;
}

} // namespace

std::optional<uint32_t> Listing::fall_through_of(uint32_t addr) const {
    auto it = instructions.find(addr);
    if (it == instructions.end()) return std::nullopt;
    if (mode != ListingMode::Ingested) return addr + isa::Instruction::kWidth;
    ++it;
    if (it == instructions.end()) return std::nullopt;
    return it->first;
}

Listing disassemble_linear(const isa::BinaryImage& image, const ResolveOptions& opts) {
    Listing listing;
    listing.mode = ListingMode::Linear;
    listing.entry = image.entry_point;
    for (uint32_t addr = 0;; addr += isa::Instruction::kWidth) {
        Resolved r = decode_resolved(image, addr, opts);
        if (r.status != isa::DecodeStatus::Ok) break;
        listing.instructions.emplace(addr, std::move(r.listed));
    }
    return listing;
}

Listing disassemble_recursive(const isa::BinaryImage& image, const ResolveOptions& opts) {
    if (image.entry_point >= image.code.size())
        fail("EntryOutOfRange", "entry point " + std::to_string(image.entry_point) +
                                    " outside code of " + std::to_string(image.code.size()) +
                                    " bytes");
    Listing listing;
    listing.mode = ListingMode::Recursive;
    listing.entry = image.entry_point;

    // A target inside an already-listed instruction would produce an
    // overlapping decode; such targets are treated as junk.
    auto overlaps_listed = [&](uint32_t addr) {
        auto it = listing.instructions.upper_bound(addr);
        if (it != listing.instructions.end() && it->first < addr + isa::Instruction::kWidth)
            return true;
        if (it != listing.instructions.begin()) {
            --it;
            if (it->first + isa::Instruction::kWidth > addr) return true;
        }
        return false;
    };

    std::vector<uint32_t> worklist{image.entry_point};
    while (!worklist.empty()) {
        uint32_t addr = worklist.back();
        worklist.pop_back();
        if (listing.contains(addr) || overlaps_listed(addr)) continue;
        Resolved r = decode_resolved(image, addr, opts);
        if (r.status != isa::DecodeStatus::Ok) continue;
        isa::OpKind kind = r.listed.instr.kind;
        uint32_t target = r.listed.instr.operand;
        listing.instructions.emplace(addr, std::move(r.listed));
        switch (kind) {
        case isa::OpKind::Jmp:
            worklist.push_back(target);
            break;
        case isa::OpKind::Jcc:
        case isa::OpKind::Call:
            worklist.push_back(addr + isa::Instruction::kWidth);
            worklist.push_back(target);
            break;
        case isa::OpKind::Ret:
        case isa::OpKind::Halt:
        case isa::OpKind::CallIndirect:
            break;
        default:
            worklist.push_back(addr + isa::Instruction::kWidth);
            break;
        }
    }
    return listing;
}

namespace {

const std::pair<const char*, isa::OpKind> kNdifKinds[] = {
    {"SEQ", isa::OpKind::Compute},      {"JMP", isa::OpKind::Jmp},
    {"JCC", isa::OpKind::Jcc},          {"CALL", isa::OpKind::Call},
    {"RET", isa::OpKind::Ret},          {"CALLIND", isa::OpKind::CallIndirect},
    {"APICALL", isa::OpKind::ApiCall},  {"STORE", isa::OpKind::Store},
    {"HALT", isa::OpKind::Halt},
};

const char* ndif_kind(isa::OpKind kind) {
    if (kind == isa::OpKind::Nop) return "SEQ";
    for (const auto& [name, k] : kNdifKinds)
        if (k == kind) return name;
    return "SEQ";
}

uint32_t parse_hex(const std::string& token, size_t line_no, const char* what) {
    uint32_t value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value, 16);
    if (ec != std::errc{} || ptr != token.data() + token.size())
        fail("SyntaxError", "line " + std::to_string(line_no) + ": bad " + what + " '" +
                                token + "'");
    return value;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

} // namespace

Listing parse_ndif(const std::string& text) {
    Listing listing;
    listing.mode = ListingMode::Ingested;
    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::vector<std::string> tok = split_ws(line);
        if (tok.empty()) continue;
        if (tok.size() < 2)
            fail("SyntaxError", "line " + std::to_string(line_no) + ": expected ADDR KIND");

        ListedInstruction li;
        li.instr.address = parse_hex(tok[0], line_no, "address");

        std::optional<isa::OpKind> kind;
        for (const auto& [name, k] : kNdifKinds)
            if (tok[1] == name) kind = k;
        if (!kind)
            fail("SyntaxError",
                 "line " + std::to_string(line_no) + ": unknown kind '" + tok[1] + "'");
        li.instr.kind = *kind;
        if (li.instr.kind == isa::OpKind::Jcc) li.instr.taken = true;

        size_t next = 2;
        if (isa::has_target(*kind)) {
            if (tok.size() < 3)
                fail("SyntaxError",
                     "line " + std::to_string(line_no) + ": " + tok[1] + " needs a target");
            li.instr.operand = parse_hex(tok[2], line_no, "target");
            next = 3;
        }
        if (next < tok.size()) {
            const std::string& extra = tok[next];
            if (*kind == isa::OpKind::ApiCall && extra.rfind("API=", 0) == 0 &&
                extra.size() > 4) {
                li.api = extra.substr(4);
                ++next;
            } else {
                fail("SyntaxError", "line " + std::to_string(line_no) +
                                        ": unexpected token '" + extra + "'");
            }
        }
        if (next != tok.size())
            fail("SyntaxError", "line " + std::to_string(line_no) + ": trailing tokens");

        if (!listing.instructions.emplace(li.instr.address, std::move(li)).second)
            fail("DuplicateAddress",
                 "line " + std::to_string(line_no) + ": address " + tok[0] + " listed twice");
    }
    if (!listing.instructions.empty()) listing.entry = listing.instructions.begin()->first;
    return listing;
}

std::string emit_ndif(const Listing& listing) {
    std::string out;
    for (const auto& [addr, li] : listing.instructions) {
        out += hex4(addr);
        out += ' ';
        out += ndif_kind(li.instr.kind);
        if (isa::has_target(li.instr.kind)) {
            out += ' ';
            out += hex4(li.instr.operand);
        }
        if (li.instr.kind == isa::OpKind::ApiCall && li.api) {
            out += " API=";
            out += *li.api;
        }
        out += '\n';
    }
    return out;
}

} // namespace apiseq::disasm
