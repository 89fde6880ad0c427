#include "apiseq/miniisa.hpp"

#include "apiseq/error.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace apiseq::isa {

namespace {

constexpr uint8_t kOpNop = 0x00;
constexpr uint8_t kOpCompute = 0x01;
constexpr uint8_t kOpJmp = 0x10;
constexpr uint8_t kOpJcc = 0x11;
constexpr uint8_t kOpCall = 0x12;
constexpr uint8_t kOpRet = 0x13;
constexpr uint8_t kOpCallInd = 0x14;
constexpr uint8_t kOpApiCall = 0x20;
constexpr uint8_t kOpStore = 0x21;
constexpr uint8_t kOpHalt = 0x30;

uint8_t opcode_of(OpKind kind) {
    switch (kind) {
    case OpKind::Nop: return kOpNop;
    case OpKind::Compute: return kOpCompute;
    case OpKind::Jmp: return kOpJmp;
    case OpKind::Jcc: return kOpJcc;
    case OpKind::Call: return kOpCall;
    case OpKind::Ret: return kOpRet;
    case OpKind::CallIndirect: return kOpCallInd;
    case OpKind::ApiCall: return kOpApiCall;
    case OpKind::Store: return kOpStore;
    case OpKind::Halt: return kOpHalt;
    }
    fail("BadOpKind", "unreachable");
}

std::optional<OpKind> kind_of(uint8_t opcode) {
    switch (opcode) {
    case kOpNop: return OpKind::Nop;
    case kOpCompute: return OpKind::Compute;
    case kOpJmp: return OpKind::Jmp;
    case kOpJcc: return OpKind::Jcc;
    case kOpCall: return OpKind::Call;
    case kOpRet: return OpKind::Ret;
    case kOpCallInd: return OpKind::CallIndirect;
    case kOpApiCall: return OpKind::ApiCall;
    case kOpStore: return OpKind::Store;
    case kOpHalt: return OpKind::Halt;
    default: return std::nullopt;
    }
}

uint32_t get_u32_le(std::span<const uint8_t> p, size_t i) {
    return static_cast<uint32_t>(p[i]) | static_cast<uint32_t>(p[i + 1]) << 8 |
           static_cast<uint32_t>(p[i + 2]) << 16 | static_cast<uint32_t>(p[i + 3]) << 24;
}

void put_u32_le(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 24));
}

void put_u16_le(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

} // namespace

const char* op_name(OpKind kind) {
    switch (kind) {
    case OpKind::Nop: return "NOP";
    case OpKind::Compute: return "COMPUTE";
    case OpKind::Jmp: return "JMP";
    case OpKind::Jcc: return "JCC";
    case OpKind::Call: return "CALL";
    case OpKind::Ret: return "RET";
    case OpKind::CallIndirect: return "CALLIND";
    case OpKind::ApiCall: return "APICALL";
    case OpKind::Store: return "STORE";
    case OpKind::Halt: return "HALT";
    }
    return "?";
}

bool has_target(OpKind kind) {
    return kind == OpKind::Jmp || kind == OpKind::Jcc || kind == OpKind::Call ||
           kind == OpKind::Store;
}

bool is_control_transfer(OpKind kind) {
    switch (kind) {
    case OpKind::Jmp:
    case OpKind::Jcc:
    case OpKind::Call:
    case OpKind::Ret:
    case OpKind::CallIndirect:
    case OpKind::Halt:
        return true;
    default:
        return false;
    }
}

const char* decode_status_name(DecodeStatus status) {
    switch (status) {
    case DecodeStatus::Ok: return "Ok";
    case DecodeStatus::UnknownOpcode: return "UnknownOpcode";
    case DecodeStatus::OutOfBounds: return "OutOfBounds";
    case DecodeStatus::TargetOutOfRange: return "TargetOutOfRange";
    }
    return "?";
}

std::array<uint8_t, Instruction::kWidth> encode(const Instruction& instr) {
    std::array<uint8_t, Instruction::kWidth> out{};
    out[0] = opcode_of(instr.kind);
    if (instr.kind == OpKind::Jcc)
        out[1] = instr.taken ? 1 : 0;
    else if (instr.kind == OpKind::Store)
        out[1] = instr.value;
    out[2] = static_cast<uint8_t>(instr.operand);
    out[3] = static_cast<uint8_t>(instr.operand >> 8);
    out[4] = static_cast<uint8_t>(instr.operand >> 16);
    out[5] = static_cast<uint8_t>(instr.operand >> 24);
    return out;
}

DecodeResult decode_bytes(std::span<const uint8_t> code, uint32_t addr) {
    DecodeResult r;
    if (addr > code.size() || code.size() - addr < Instruction::kWidth) {
        r.status = DecodeStatus::OutOfBounds;
        return r;
    }
    auto kind = kind_of(code[addr]);
    if (!kind) {
        r.status = DecodeStatus::UnknownOpcode;
        return r;
    }
    r.instr.address = addr;
    r.instr.kind = *kind;
    r.instr.operand = get_u32_le(code, addr + 2);
    if (*kind == OpKind::Jcc)
        r.instr.taken = code[addr + 1] != 0;
    else if (*kind == OpKind::Store)
        r.instr.value = code[addr + 1];
    if (has_target(*kind) && r.instr.operand >= code.size()) {
        r.status = DecodeStatus::TargetOutOfRange;
        return r;
    }
    r.status = DecodeStatus::Ok;
    return r;
}

DecodeResult decode_at(const BinaryImage& image, uint32_t addr) {
    return decode_bytes(image.code, addr);
}

// ----------------------------------------------------------------------------
// Assembler

namespace {

struct AsmStatement {
    int line = 0;
    std::string mnemonic;
    std::vector<std::string> args;
    uint32_t address = 0;
};

bool is_ident(const std::string& s) {
    if (s.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
    return std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_';
    });
}

std::optional<uint32_t> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    try {
        size_t pos = 0;
        unsigned long long v;
        if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X'))
            v = std::stoull(s.substr(2), &pos, 16), pos += 2;
        else
            v = std::stoull(s, &pos, 10);
        if (pos != s.size() || v > 0xFFFFFFFFull) return std::nullopt;
        return static_cast<uint32_t>(v);
    } catch (...) {
        return std::nullopt;
    }
}

std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::toupper(c); });
    return s;
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

} // namespace

BinaryImage assemble(const std::string& source) {
    BinaryImage image;
    std::unordered_map<std::string, uint32_t> labels;
    std::vector<AsmStatement> statements;
    std::optional<std::string> entry_expr;
    int entry_line = 0;

    // Pass 1: strip comments, collect labels and statement addresses.
    uint32_t addr = 0;
    std::istringstream in(source);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        std::istringstream parts(raw);
        std::string piece;
        while (std::getline(parts, piece, ';')) {
            // Peel label prefixes.
            for (;;) {
                auto first = piece.find_first_not_of(" \t");
                if (first == std::string::npos) {
                    piece.clear();
                    break;
                }
                piece.erase(0, first);
                auto colon = piece.find(':');
                if (colon == std::string::npos) break;
                std::string name = piece.substr(0, colon);
                // Trim a trailing-run of spaces inside the label part.
                while (!name.empty() && (name.back() == ' ' || name.back() == '\t'))
                    name.pop_back();
                if (!is_ident(name)) break; // not a label; let mnemonic parse fail
                if (labels.count(name))
                    fail("DuplicateLabel",
                         "label '" + name + "' redefined at line " + std::to_string(line_no));
                labels.emplace(name, addr);
                piece.erase(0, colon + 1);
            }
            auto toks = split_ws(piece);
            if (toks.empty()) continue;
            std::string mnem = upper(toks[0]);
            if (mnem == ".ENTRY") {
                if (toks.size() != 2)
                    fail("SyntaxError", ".entry wants one argument (line " +
                                            std::to_string(line_no) + ")");
                entry_expr = toks[1];
                entry_line = line_no;
                continue;
            }
            if (mnem == ".BASE") {
                auto v = toks.size() == 2 ? parse_number(toks[1]) : std::nullopt;
                if (!v)
                    fail("SyntaxError",
                         ".base wants a number (line " + std::to_string(line_no) + ")");
                image.base_address = *v;
                continue;
            }
            if (mnem == ".API") {
                auto id = toks.size() == 3 ? parse_number(toks[1]) : std::nullopt;
                if (!id)
                    fail("SyntaxError",
                         ".api wants <id> <name> (line " + std::to_string(line_no) + ")");
                if (!image.api_map.emplace(*id, toks[2]).second)
                    fail("DuplicateApiId", "api id " + toks[1] + " redefined at line " +
                                               std::to_string(line_no));
                continue;
            }
            AsmStatement st;
            st.line = line_no;
            st.mnemonic = mnem;
            st.args.assign(toks.begin() + 1, toks.end());
            st.address = addr;
            statements.push_back(std::move(st));
            addr += Instruction::kWidth;
        }
    }

    if (statements.empty()) fail("EmptyImage", "source assembles to zero instructions");

    const uint32_t code_len = addr;
    auto resolve = [&](const std::string& arg, int line) -> uint32_t {
        if (auto v = parse_number(arg)) return *v;
        if (auto it = labels.find(arg); it != labels.end()) return it->second;
        fail("UndefinedLabel", "'" + arg + "' at line " + std::to_string(line));
    };

    // Pass 2: encode.
    image.code.reserve(code_len);
    for (const auto& st : statements) {
        Instruction instr;
        instr.address = st.address;
        auto want = [&](size_t lo, size_t hi) {
            if (st.args.size() < lo || st.args.size() > hi)
                fail("SyntaxError", st.mnemonic + " has wrong argument count (line " +
                                        std::to_string(st.line) + ")");
        };
        if (st.mnemonic == "NOP") {
            want(0, 0);
            instr.kind = OpKind::Nop;
        } else if (st.mnemonic == "COMPUTE") {
            want(0, 0);
            instr.kind = OpKind::Compute;
        } else if (st.mnemonic == "JMP") {
            want(1, 1);
            instr.kind = OpKind::Jmp;
            instr.operand = resolve(st.args[0], st.line);
        } else if (st.mnemonic == "JCC") {
            want(1, 2);
            instr.kind = OpKind::Jcc;
            instr.operand = resolve(st.args[0], st.line);
            instr.taken = true;
            if (st.args.size() == 2) {
                std::string flag = upper(st.args[1]);
                if (flag == "T")
                    instr.taken = true;
                else if (flag == "F")
                    instr.taken = false;
                else
                    fail("SyntaxError", "JCC flag must be T or F (line " +
                                            std::to_string(st.line) + ")");
            }
        } else if (st.mnemonic == "CALL") {
            want(1, 1);
            instr.kind = OpKind::Call;
            instr.operand = resolve(st.args[0], st.line);
        } else if (st.mnemonic == "RET") {
            want(0, 0);
            instr.kind = OpKind::Ret;
        } else if (st.mnemonic == "CALLIND") {
            want(0, 0);
            instr.kind = OpKind::CallIndirect;
        } else if (st.mnemonic == "APICALL") {
            want(1, 1);
            auto id = parse_number(st.args[0]);
            if (!id)
                fail("SyntaxError",
                     "APICALL wants a numeric id (line " + std::to_string(st.line) + ")");
            instr.kind = OpKind::ApiCall;
            instr.operand = *id;
        } else if (st.mnemonic == "STORE") {
            want(2, 2);
            instr.kind = OpKind::Store;
            instr.operand = resolve(st.args[0], st.line);
            auto v = parse_number(st.args[1]);
            if (!v || *v > 0xFF)
                fail("SyntaxError",
                     "STORE value must be a byte (line " + std::to_string(st.line) + ")");
            instr.value = static_cast<uint8_t>(*v);
        } else if (st.mnemonic == "HALT") {
            want(0, 0);
            instr.kind = OpKind::Halt;
        } else {
            fail("SyntaxError", "unknown mnemonic '" + st.mnemonic + "' (line " +
                                    std::to_string(st.line) + ")");
        }
        auto bytes = encode(instr);
        image.code.insert(image.code.end(), bytes.begin(), bytes.end());
    }

    if (entry_expr) {
        image.entry_point = resolve(*entry_expr, entry_line);
        if (image.entry_point >= code_len)
            fail("EntryOutOfRange", ".entry resolves past the end of code");
    }
    return image;
}

// ----------------------------------------------------------------------------
// Image container

static constexpr uint16_t kImageVersion = 1;

std::vector<uint8_t> save_image(const BinaryImage& image) {
    std::vector<uint8_t> out;
    out.insert(out.end(), {'M', 'I', 'S', 'A'});
    put_u16_le(out, kImageVersion);
    put_u32_le(out, image.base_address);
    put_u32_le(out, image.entry_point);
    if (image.api_map.size() > 0xFFFF)
        fail("ApiMapTooLarge", "more than 65535 api map entries");
    put_u16_le(out, static_cast<uint16_t>(image.api_map.size()));
    for (const auto& [id, name] : image.api_map) {
        if (name.size() > 0xFF) fail("ApiNameTooLong", name);
        put_u32_le(out, id);
        out.push_back(static_cast<uint8_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
    }
    put_u32_le(out, static_cast<uint32_t>(image.code.size()));
    out.insert(out.end(), image.code.begin(), image.code.end());
    return out;
}

BinaryImage load_image(std::span<const uint8_t> bytes) {
    size_t pos = 0;
    auto need = [&](size_t n) {
        if (bytes.size() - pos < n) fail("TruncatedImage", "unexpected end of file");
    };
    need(4);
    if (!(bytes[0] == 'M' && bytes[1] == 'I' && bytes[2] == 'S' && bytes[3] == 'A'))
        fail("NotMiniIsa", "bad magic");
    pos = 4;
    need(2);
    uint16_t version = static_cast<uint16_t>(bytes[pos] | bytes[pos + 1] << 8);
    pos += 2;
    if (version != kImageVersion)
        fail("UnsupportedVersion", "image version " + std::to_string(version));
    BinaryImage image;
    need(8);
    image.base_address = get_u32_le(bytes, pos);
    image.entry_point = get_u32_le(bytes, pos + 4);
    pos += 8;
    need(2);
    uint16_t count = static_cast<uint16_t>(bytes[pos] | bytes[pos + 1] << 8);
    pos += 2;
    for (uint16_t i = 0; i < count; ++i) {
        need(5);
        uint32_t id = get_u32_le(bytes, pos);
        uint8_t len = bytes[pos + 4];
        pos += 5;
        need(len);
        std::string name(bytes.begin() + pos, bytes.begin() + pos + len);
        pos += len;
        if (!image.api_map.emplace(id, std::move(name)).second)
            fail("DuplicateApiId", "api id " + std::to_string(id));
    }
    need(4);
    uint32_t code_len = get_u32_le(bytes, pos);
    pos += 4;
    need(code_len);
    image.code.assign(bytes.begin() + pos, bytes.begin() + pos + code_len);
    pos += code_len;
    if (image.entry_point >= image.code.size() && !image.code.empty())
        fail("EntryOutOfRange", "entry point past end of code");
    if (image.code.empty()) fail("EmptyImage", "image has no code");
    return image;
}

void save_image_file(const BinaryImage& image, const std::string& path) {
    auto bytes = save_image(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) fail("IoError", "write failed for '" + path + "'");
}

BinaryImage load_image_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoError", "cannot open '" + path + "'");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return load_image(bytes);
}

} // namespace apiseq::isa
