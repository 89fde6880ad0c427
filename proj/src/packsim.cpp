#include "apiseq/packsim.hpp"

#include "apiseq/error.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace apiseq::pack {

const char* stop_reason_name(StopReason reason) {
    switch (reason) {
    case StopReason::Halted: return "halted";
    case StopReason::Packed: return "packed";
    case StopReason::Returned: return "returned";
    case StopReason::DecodeError: return "decode_error";
    case StopReason::OutOfRange: return "out_of_range";
    case StopReason::StepLimit: return "step_limit";
    }
    return "?";
}

size_t VmResult::written_bytes() const {
    return static_cast<size_t>(std::count(written.begin(), written.end(), uint8_t{1}));
}

VmResult run_vm(const isa::BinaryImage& image, uint64_t max_steps) {
    VmResult result;
    result.memory = image.code;
    result.written.assign(image.code.size(), 0);

    uint32_t pc = image.entry_point;
    std::vector<uint32_t> call_stack;
    for (;;) {
        if (result.steps >= max_steps) {
            result.stop = StopReason::StepLimit;
            result.ran_to_completion = false;
            return result;
        }
        if (pc >= result.memory.size()) {
            result.stop = StopReason::OutOfRange;
            return result;
        }
        // Write-then-execute check precedes the fetch: any of the bytes the
        // fetch would consume being Store targets flags the run.
        uint32_t end = std::min<uint32_t>(pc + isa::Instruction::kWidth,
                                          static_cast<uint32_t>(result.memory.size()));
        for (uint32_t a = pc; a < end; ++a) {
            if (result.written[a]) {
                result.packed = true;
                result.evidence = pc;
                result.stop = StopReason::Packed;
                return result;
            }
        }

        isa::DecodeResult dec = isa::decode_bytes(result.memory, pc);
        if (!dec.ok()) {
            result.stop = StopReason::DecodeError;
            return result;
        }
        ++result.steps;
        const isa::Instruction& instr = dec.instr;
        switch (instr.kind) {
        case isa::OpKind::Jmp:
            pc = instr.operand;
            break;
        case isa::OpKind::Jcc:
            pc = instr.taken ? instr.operand : instr.next_address();
            break;
        case isa::OpKind::Call:
            call_stack.push_back(instr.next_address());
            pc = instr.operand;
            break;
        case isa::OpKind::Ret:
            if (call_stack.empty()) {
                result.stop = StopReason::Returned;
                return result;
            }
            pc = call_stack.back();
            call_stack.pop_back();
            break;
        case isa::OpKind::CallIndirect:
            // MiniISA has no registers to hold the target; nothing defined
            // to execute here.
            result.stop = StopReason::DecodeError;
            return result;
        case isa::OpKind::Store:
            result.memory[instr.operand] = instr.value;
            result.written[instr.operand] = 1;
            pc = instr.next_address();
            break;
        case isa::OpKind::Halt:
            result.stop = StopReason::Halted;
            return result;
        default:
            pc = instr.next_address();
            break;
        }
    }
}

std::vector<PackerSignature> parse_signatures(const std::string& text) {
    std::vector<PackerSignature> sigs;
    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto colon = line.find(':');
        if (colon == std::string::npos)
            fail("MalformedSignature", "line " + std::to_string(line_no) + ": missing ':'");
        PackerSignature sig;
        auto a = line.find_first_not_of(" \t");
        if (a >= colon)
            fail("MalformedSignature", "line " + std::to_string(line_no) + ": empty name");
        auto b = line.find_last_not_of(" \t", colon - 1);
        sig.name = line.substr(a, b - a + 1);

        std::istringstream bytes(line.substr(colon + 1));
        std::string tok;
        while (bytes >> tok) {
            if (tok == "??") {
                sig.pattern.push_back(std::nullopt);
                continue;
            }
            if (tok.size() != 2 || !std::isxdigit(static_cast<unsigned char>(tok[0])) ||
                !std::isxdigit(static_cast<unsigned char>(tok[1])))
                fail("MalformedSignature",
                     "line " + std::to_string(line_no) + ": bad byte '" + tok + "'");
            sig.pattern.push_back(static_cast<uint8_t>(std::stoul(tok, nullptr, 16)));
        }
        if (sig.pattern.empty())
            fail("MalformedSignature", "line " + std::to_string(line_no) + ": empty pattern");
        sigs.push_back(std::move(sig));
    }
    return sigs;
}

std::vector<PackerSignature> load_signature_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoError", "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_signatures(ss.str());
}

std::optional<std::string> match_signatures(const isa::BinaryImage& image,
                                            std::span<const PackerSignature> sigs) {
    for (const PackerSignature& sig : sigs) {
        if (image.entry_point + sig.pattern.size() > image.code.size()) continue;
        bool hit = true;
        for (size_t i = 0; i < sig.pattern.size(); ++i) {
            const auto& want = sig.pattern[i];
            if (want && image.code[image.entry_point + i] != *want) {
                hit = false;
                break;
            }
        }
        if (hit) return sig.name;
    }
    return std::nullopt;
}

EvalReport evaluate_detectors(std::span<const std::pair<std::string, isa::BinaryImage>> corpus,
                              std::span<const PackerSignature> sigs, uint64_t max_steps) {
    EvalReport report;
    for (const auto& [id, image] : corpus) {
        EvalEntry entry;
        entry.id = id;
        entry.sig_result = match_signatures(image, sigs);
        VmResult vm = run_vm(image, max_steps);
        entry.dyn_result = vm.packed;
        entry.evidence = vm.evidence;
        bool sig = entry.sig_result.has_value();
        (sig && entry.dyn_result    ? report.both
         : sig                      ? report.sig_only
         : entry.dyn_result         ? report.dyn_only
                                    : report.neither)
            .push_back(id);
        report.entries.push_back(std::move(entry));
    }
    return report;
}

} // namespace apiseq::pack
