#pragma once

// Shared test fixtures: instruction/image builders, deterministic random
// program generation, and brute-force set helpers used as oracles.

#include "apiseq/features.hpp"
#include "apiseq/miniisa.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace testutil {

inline apiseq::isa::Instruction op(apiseq::isa::OpKind kind, uint32_t operand = 0,
                                   bool taken = true, uint8_t value = 0) {
    apiseq::isa::Instruction instr;
    instr.kind = kind;
    instr.operand = operand;
    instr.taken = taken;
    instr.value = value;
    return instr;
}

// Lays the instructions out at 0, 6, 12, ... and encodes them into an image.
inline apiseq::isa::BinaryImage image_of(std::vector<apiseq::isa::Instruction> instrs,
                                         uint32_t entry = 0,
                                         std::map<uint32_t, std::string> api_map = {}) {
    apiseq::isa::BinaryImage image;
    image.entry_point = entry;
    image.api_map = std::move(api_map);
    uint32_t addr = 0;
    for (auto& instr : instrs) {
        instr.address = addr;
        auto bytes = apiseq::isa::encode(instr);
        image.code.insert(image.code.end(), bytes.begin(), bytes.end());
        addr += apiseq::isa::Instruction::kWidth;
    }
    return image;
}

inline std::mt19937_64 rng(uint64_t seed) { return std::mt19937_64(seed); }

// Raw-draw helpers so the generated values do not depend on the standard
// library's distribution implementations.
inline uint64_t pick(std::mt19937_64& g, uint64_t lo, uint64_t hi) {
    return lo + g() % (hi - lo + 1);
}

inline bool chance(std::mt19937_64& g, double p) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53 < p;
}

// API names used by random programs; ids 1..8.
inline std::map<uint32_t, std::string> small_api_map() {
    std::map<uint32_t, std::string> map;
    for (uint32_t id = 1; id <= 8; ++id) map[id] = "Api" + std::to_string(id);
    return map;
}

// A random well-formed program: every address operand is aligned and
// in range, every ApiCall id resolves. Cycles and call/ret structure
// arise naturally from backward targets.
inline apiseq::isa::BinaryImage random_program(std::mt19937_64& g, int max_instrs = 40) {
    using apiseq::isa::OpKind;
    int n = static_cast<int>(pick(g, 1, static_cast<uint64_t>(max_instrs)));
    auto addr_of = [](uint64_t index) { return static_cast<uint32_t>(index * 6); };
    std::vector<apiseq::isa::Instruction> instrs;
    for (int i = 0; i < n; ++i) {
        uint64_t roll = pick(g, 0, 99);
        uint32_t target = addr_of(pick(g, 0, static_cast<uint64_t>(n - 1)));
        if (roll < 20)
            instrs.push_back(op(OpKind::Compute));
        else if (roll < 45)
            instrs.push_back(op(OpKind::ApiCall, static_cast<uint32_t>(pick(g, 1, 8))));
        else if (roll < 60)
            instrs.push_back(op(OpKind::Jcc, target, chance(g, 0.5)));
        else if (roll < 70)
            instrs.push_back(op(OpKind::Jmp, target));
        else if (roll < 80)
            instrs.push_back(op(OpKind::Call, target));
        else if (roll < 85)
            instrs.push_back(op(OpKind::Ret));
        else if (roll < 90)
            instrs.push_back(op(OpKind::Store, target, true,
                                static_cast<uint8_t>(pick(g, 0, 255))));
        else if (roll < 95)
            instrs.push_back(op(OpKind::Nop));
        else
            instrs.push_back(op(OpKind::Halt));
    }
    uint32_t entry = chance(g, 0.5) ? 0 : addr_of(pick(g, 0, static_cast<uint64_t>(n - 1)));
    return image_of(std::move(instrs), entry, small_api_map());
}

// Brute-force sorted-range intersection count, the oracle for the tuned
// kernels and the similarity coefficients.
inline size_t ref_intersection_count(const std::vector<uint64_t>& a,
                                     const std::vector<uint64_t>& b) {
    std::vector<uint64_t> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out.size();
}

// A random gram set with the given size; ids drawn from [1, id_span].
inline apiseq::ngram::NGramSet random_gram_set(std::mt19937_64& g, int n, size_t size,
                                               uint32_t id_span = 12) {
    std::vector<uint64_t> keys;
    for (size_t i = 0; i < size; ++i) {
        apiseq::ngram::NGram gram;
        gram.n = static_cast<uint8_t>(n);
        for (int k = 0; k < n; ++k)
            gram.ids[static_cast<size_t>(k)] = static_cast<uint32_t>(pick(g, 1, id_span));
        keys.push_back(gram.pack());
    }
    return apiseq::ngram::NGramSet::from_keys(n, std::move(keys));
}

} // namespace testutil
