#pragma once

// MiniISA: a fixed-width toy instruction set plus its executable container.
// Every instruction encodes to exactly 6 bytes:
//   byte 0     opcode
//   byte 1     meta (Jcc taken flag / Store value, 0 otherwise)
//   bytes 2-5  little-endian operand (branch or store target, ApiCall id)
// Decoding is defined at any byte offset; junk bytes surface as
// UnknownOpcode, which is what the disassembly layers treat as data.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace apiseq::isa {

enum class OpKind : uint8_t {
    Nop,
    Compute,
    Jmp,
    Jcc,
    Call,
    Ret,
    CallIndirect,
    ApiCall,
    Store,
    Halt,
};

const char* op_name(OpKind kind);

// True for kinds whose operand is a code address (Jmp/Jcc/Call/Store).
bool has_target(OpKind kind);

// True for kinds that end a basic block (Jmp/Jcc/Call/Ret/CallIndirect/Halt).
bool is_control_transfer(OpKind kind);

struct Instruction {
    static constexpr uint32_t kWidth = 6;

    uint32_t address = 0;
    OpKind kind = OpKind::Nop;
    uint32_t operand = 0; // branch/store target, or ApiCall id
    bool taken = false;   // Jcc only: static direction hint used by the VM
    uint8_t value = 0;    // Store only: byte written

    uint32_t next_address() const { return address + kWidth; }

    friend bool operator==(const Instruction&, const Instruction&) = default;
};

enum class Format : uint8_t { Mini, Pe };

// Executable container. For MiniISA binaries api_map plays the role of a
// PE import table: ApiCall operands resolve through it to API names.
struct BinaryImage {
    uint32_t base_address = 0;
    uint32_t entry_point = 0;
    std::vector<uint8_t> code;
    std::map<uint32_t, std::string> api_map;
    Format format = Format::Mini;

    std::optional<std::string> api_name(uint32_t id) const {
        auto it = api_map.find(id);
        if (it == api_map.end()) return std::nullopt;
        return it->second;
    }
};

enum class DecodeStatus : uint8_t {
    Ok,
    UnknownOpcode,    // byte 0 not in the opcode table (data bytes)
    OutOfBounds,      // fewer than 6 bytes left at addr
    TargetOutOfRange, // address operand outside [0, code length)
};

const char* decode_status_name(DecodeStatus status);

struct DecodeResult {
    DecodeStatus status = DecodeStatus::Ok;
    // Populated for Ok and TargetOutOfRange (fields decoded, range check
    // failed); callers that resolve PE-style thunk calls inspect the latter.
    Instruction instr;

    bool ok() const { return status == DecodeStatus::Ok; }
};

std::array<uint8_t, Instruction::kWidth> encode(const Instruction& instr);

DecodeResult decode_bytes(std::span<const uint8_t> code, uint32_t addr);
DecodeResult decode_at(const BinaryImage& image, uint32_t addr);

// Tiny two-pass assembler. One statement per line (';' also splits
// statements within a line), '#' starts a comment, `label:` prefixes an
// instruction or stands alone. Directives:
//   .entry <label|number>    .base <number>    .api <id> <name>
// Mnemonics: NOP COMPUTE JMP JCC CALL RET CALLIND APICALL STORE HALT.
// JCC takes an optional T/F direction flag (default T).
// Numbers are decimal or 0x-prefixed hex.
BinaryImage assemble(const std::string& source);

// MiniISA image file: magic "MISA", version u16, base u32, entry u32,
// api-map count u16 then (u32 id, u8 len, name bytes) records, code length
// u32, code bytes. All integers little-endian.
std::vector<uint8_t> save_image(const BinaryImage& image);
BinaryImage load_image(std::span<const uint8_t> bytes);

void save_image_file(const BinaryImage& image, const std::string& path);
BinaryImage load_image_file(const std::string& path);

} // namespace apiseq::isa
