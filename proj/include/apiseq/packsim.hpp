#pragma once

// Packed-binary detection at desk scale: a deterministic MiniISA VM that
// flags write-then-execute behavior, a PEiD-style entry-point signature
// matcher, and the cross-validation of the two over a corpus.

#include "apiseq/miniisa.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace apiseq::pack {

enum class StopReason : uint8_t {
    Halted,
    Packed,      // fetch overlapped a previously written byte
    Returned,    // Ret with empty call stack
    DecodeError, // junk opcode or bad operand at pc
    OutOfRange,  // pc past end of memory
    StepLimit,
};

const char* stop_reason_name(StopReason reason);

struct VmResult {
    bool packed = false;
    std::optional<uint32_t> evidence; // pc of the flagged fetch
    StopReason stop = StopReason::Halted;
    uint64_t steps = 0;
    bool ran_to_completion = true; // false only for StepLimit
    std::vector<uint8_t> memory;   // final memory (self-modified code visible)
    std::vector<uint8_t> written;  // byte map: 1 where a Store landed

    size_t written_bytes() const;
};

constexpr uint64_t kDefaultMaxSteps = 100000;

// Executes from the entry point over a mutable copy of the code. Store
// writes one byte and records its address; before each fetch, any overlap
// of the 6 instruction bytes with a written address flags the run as
// packed with the pc as evidence.
VmResult run_vm(const isa::BinaryImage& image, uint64_t max_steps = kDefaultMaxSteps);

struct PackerSignature {
    std::string name;
    std::vector<std::optional<uint8_t>> pattern; // nullopt = wildcard byte
};

// Signature file: `NAME: HH HH ?? HH ...` per line, '#' comments.
std::vector<PackerSignature> parse_signatures(const std::string& text);
std::vector<PackerSignature> load_signature_file(const std::string& path);

// First signature (file order) matching the static bytes at the entry
// point; wildcards match anything, patterns past end of code never match.
std::optional<std::string> match_signatures(const isa::BinaryImage& image,
                                            std::span<const PackerSignature> sigs);

struct EvalEntry {
    std::string id;
    std::optional<std::string> sig_result;
    bool dyn_result = false;
    std::optional<uint32_t> evidence;
};

struct EvalReport {
    std::vector<EvalEntry> entries; // corpus order
    std::vector<std::string> both, sig_only, dyn_only, neither;
};

// Runs both detectors over the corpus and partitions the disagreements.
EvalReport evaluate_detectors(std::span<const std::pair<std::string, isa::BinaryImage>> corpus,
                              std::span<const PackerSignature> sigs,
                              uint64_t max_steps = kDefaultMaxSteps);

} // namespace apiseq::pack
