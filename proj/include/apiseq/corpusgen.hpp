#pragma once

// Deterministic synthetic corpora: families of variants sharing ordered API
// motifs, benign programs drawn from a shared pool, and packed / VM-evasive
// stubs. All generation is a pure function of (spec, seed); the PRNG is
// std::mt19937_64 so corpora are identical across platforms.

#include "apiseq/classify.hpp"
#include "apiseq/miniisa.hpp"
#include "apiseq/packsim.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace apiseq::corpus {

struct FamilySpec {
    std::string name;       // family name (Zbot, Genome, ...)
    classify::Label label;  // class the family belongs to
    std::vector<std::vector<uint32_t>> motifs; // universe-id sequences, the shared trait
    uint32_t variant_count = 10;
    double noise_rate = 0.0; // probability of junk API / branch insertion per slot
    uint64_t seed = 0;
};

// Fixed API name universe. Indices 0..11 are the canonical twelve file APIs,
// 12..29 lean malware-flavored (motif alphabet), 30+ benign-flavored.
// APICALL operands in generated images are universe indices.
const std::vector<std::string>& api_universe();
std::span<const uint32_t> benign_pool(); // universe ids benign programs draw from

// The six default families, motifs fixed, per-family seeds derived from
// corpus_seed. Noise rates are staggered so family tightness differs.
std::vector<FamilySpec> default_families(uint64_t corpus_seed);

// Each variant embeds every motif as APICALL runs (in-motif insertions
// capped at ceil(noise_rate * motif length)), separated by noise runs,
// Jcc diamonds and Jmp-reordered blocks.
std::vector<isa::BinaryImage> generate_family(const FamilySpec& spec);

// Programs of benign-pool calls; regenerated until no default-family motif
// appears as a contiguous run.
std::vector<isa::BinaryImage> generate_benign(size_t count, uint64_t seed);

// Stub that stores the inner program's bytes into a fresh region then jumps
// there; the evasive variant carries the same entry bytes but its direction
// check falls through to HALT before any write.
isa::BinaryImage generate_packed(const isa::BinaryImage& inner, bool evasive);

// Offset of the unpack region inside a generate_packed stub.
uint32_t packed_region_offset(const isa::BinaryImage& inner);

// Signature matching both the packed and the evasive stub prologue.
pack::PackerSignature minipack_signature();

struct ManifestEntry {
    std::string path;
    classify::Label label = classify::Label::Benign;
    std::string family; // empty for benign
    bool packed = false;
};

std::string encode_manifest(const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> decode_manifest(const std::string& text);
std::vector<ManifestEntry> read_manifest_file(const std::string& path);

struct CorpusOptions {
    std::string out_dir;
    uint64_t seed = 1;
    uint32_t variants = 10;     // per family
    size_t benign_count = 20;
    std::vector<std::string> family_filter; // empty = all defaults
    bool with_packed = false;   // also emit packed + evasive stubs
};

// Writes images plus manifest.json into out_dir; returns the manifest.
std::vector<ManifestEntry> write_corpus(const CorpusOptions& options);

} // namespace apiseq::corpus
