#include "apiseq/corpusgen.hpp"

#include "apiseq/cfg.hpp"
#include "apiseq/disasm.hpp"
#include "apiseq/error.hpp"
#include "apiseq/pathext.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

namespace apiseq::corpus {

namespace fs = std::filesystem;

namespace {

// Raw-draw helpers instead of <random> distributions: distribution output
// is implementation-defined, and corpora must be byte-identical across
// standard libraries.
std::mt19937_64 seeded(uint64_t seed, uint64_t stream) {
    std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                      static_cast<uint32_t>(stream), static_cast<uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

uint32_t pick(std::mt19937_64& g, uint32_t lo, uint32_t hi) {
    return lo + static_cast<uint32_t>(g() % (hi - lo + 1));
}

uint32_t pick_of(std::mt19937_64& g, std::span<const uint32_t> pool) {
    return pool[static_cast<size_t>(g() % pool.size())];
}

bool chance(std::mt19937_64& g, double p) {
    return p > 0.0 && static_cast<double>(g() >> 11) * 0x1.0p-53 < p;
}

// Universe ids 12..29: the motif alphabet malware noise also draws from.
// Keeping it disjoint from the benign pool means malware and benign gram
// sets never collide by accident.
std::span<const uint32_t> malware_pool() {
    static const std::vector<uint32_t> pool = [] {
        std::vector<uint32_t> p;
        for (uint32_t id = 12; id <= 29; ++id) p.push_back(id);
        return p;
    }();
    return pool;
}

struct FamilyTableRow {
    const char* name;
    classify::Label label;
    double noise_rate;
    std::vector<std::vector<uint32_t>> motifs;
};

// Motifs alternate a 12..29 id with a 0..11 id so every 2-window contains
// at least one id outside the benign pool.
const std::vector<FamilyTableRow>& family_table() {
    static const std::vector<FamilyTableRow> rows = {
        {"Genome", classify::Label::Trojan, 0.0, {{12, 0, 13, 1, 14, 2}, {15, 3, 16, 4}}},
        {"Inject", classify::Label::Trojan, 0.10, {{17, 2, 12, 5, 18, 6}, {19, 7, 13, 8}}},
        {"AgentDropper",
         classify::Label::Trojan,
         0.15,
         {{20, 9, 14, 10, 21, 11}, {22, 0, 15, 5}}},
        {"ZAccess", classify::Label::Backdoor, 0.25, {{23, 1, 16, 6, 24, 3}, {25, 8, 17, 2}}},
        {"Palevo", classify::Label::Worm, 0.35, {{26, 4, 18, 9, 27, 10}, {28, 11, 19, 7}}},
        {"Zbot", classify::Label::Trojan, 0.45, {{29, 5, 20, 0, 23, 4}, {24, 6, 21, 1}}},
    };
    return rows;
}

std::vector<uint32_t> motif_with_insertions(std::mt19937_64& g,
                                            const std::vector<uint32_t>& motif, double noise,
                                            std::span<const uint32_t> pool) {
    size_t cap = static_cast<size_t>(std::ceil(noise * static_cast<double>(motif.size())));
    std::vector<uint32_t> out;
    out.reserve(motif.size() + cap);
    size_t inserted = 0;
    for (size_t i = 0; i < motif.size(); ++i) {
        out.push_back(motif[i]);
        if (i + 1 < motif.size() && inserted < cap && chance(g, noise)) {
            out.push_back(pick_of(g, pool));
            ++inserted;
        }
    }
    return out;
}

std::vector<uint32_t> noise_run(std::mt19937_64& g, double noise,
                                std::span<const uint32_t> pool) {
    std::vector<uint32_t> out;
    for (int k = 0; k < 3; ++k)
        if (chance(g, noise)) out.push_back(pick_of(g, pool));
    return out;
}

// Lays the event segments out as a program: straight APICALL runs, with
// occasional decoy diamonds (taken arm stays on the spine) and segments
// outlined past the HALT and reached by JMP.
std::string build_source(std::mt19937_64& g,
                         const std::vector<std::vector<uint32_t>>& segments,
                         double structure_noise, std::span<const uint32_t> decoy_pool) {
    std::ostringstream main, tail;
    std::set<uint32_t> used;
    int counter = 0;
    auto emit_calls = [&](std::ostringstream& os, const std::vector<uint32_t>& ids) {
        for (uint32_t id : ids) {
            os << "  APICALL " << id << "\n";
            used.insert(id);
        }
    };

    main << "main:\n";
    for (const std::vector<uint32_t>& seg : segments) {
        if (seg.empty()) continue;
        bool decoy = chance(g, std::min(0.5, structure_noise * 1.5));
        bool outline = !decoy && chance(g, std::min(0.4, structure_noise));
        if (decoy) {
            int id = counter++;
            main << "  JCC sp" << id << " T\n";
            int decoys = 1 + (chance(g, 0.5) ? 1 : 0);
            for (int k = 0; k < decoys; ++k) {
                uint32_t api = pick_of(g, decoy_pool);
                main << "  APICALL " << api << "\n";
                used.insert(api);
            }
            main << "  JMP sp" << id << "\n";
            main << "sp" << id << ":\n";
            emit_calls(main, seg);
        } else if (outline) {
            int id = counter++;
            main << "  JMP far" << id << "\n";
            tail << "far" << id << ":\n";
            emit_calls(tail, seg);
            tail << "  JMP back" << id << "\n";
            main << "back" << id << ":\n";
        } else {
            emit_calls(main, seg);
        }
    }
    main << "  HALT\n";

    std::ostringstream src;
    src << ".entry main\n";
    for (uint32_t id : used) src << ".api " << id << " " << api_universe()[id] << "\n";
    src << main.str() << tail.str();
    return src.str();
}

} // namespace

const std::vector<std::string>& api_universe() {
    static const std::vector<std::string> names = {
        // 0..11: the canonical twelve file/loader APIs, in id order.
        "ReadFile", "WriteFile", "CloseFile", "OpenFile", "CreateFile", "CreateProcess",
        "GetProcAddress", "VirtualAlloc", "VirtualAllocEx", "FindFirstFile", "FindNextFile",
        "LoadLibrary",
        // 12..29: malware-flavored.
        "CreateRemoteThread", "WriteProcessMemory", "OpenProcess", "SetWindowsHookEx",
        "RegSetValue", "RegCreateKey", "InternetOpen", "InternetConnect", "HttpSendRequest",
        "URLDownloadToFile", "WinExec", "ShellExecute", "CreateMutex", "GetTickCount",
        "IsDebuggerPresent", "CryptEncrypt", "AdjustTokenPrivileges", "CreateService",
        // 30..59: benign-flavored.
        "GetMessage", "TranslateMessage", "DispatchMessage", "PeekMessage", "SendMessage",
        "PostMessage", "BeginPaint", "EndPaint", "TextOut", "DrawText", "GetDC", "ReleaseDC",
        "InvalidateRect", "UpdateWindow", "CreateWindowEx", "ShowWindow", "DestroyWindow",
        "RegisterClassEx", "DefWindowProc", "LoadIcon", "LoadCursor", "GetSystemMetrics",
        "GetClientRect", "SetWindowText", "GetWindowText", "MessageBoxA", "GetLocalTime",
        "GetSystemTime", "QueryPerformanceCounter", "Sleep"};
    return names;
}

std::span<const uint32_t> benign_pool() {
    static const std::vector<uint32_t> pool = [] {
        std::vector<uint32_t> p;
        for (uint32_t id = 0; id <= 11; ++id) p.push_back(id);
        for (uint32_t id = 30; id <= 59; ++id) p.push_back(id);
        return p;
    }();
    return pool;
}

std::vector<FamilySpec> default_families(uint64_t corpus_seed) {
    std::mt19937_64 g = seeded(corpus_seed, 1);
    std::vector<FamilySpec> specs;
    for (const FamilyTableRow& row : family_table()) {
        FamilySpec spec;
        spec.name = row.name;
        spec.label = row.label;
        spec.motifs = row.motifs;
        spec.noise_rate = row.noise_rate;
        spec.seed = g();
        specs.push_back(std::move(spec));
    }
    return specs;
}

std::vector<isa::BinaryImage> generate_family(const FamilySpec& spec) {
    if (spec.motifs.empty()) fail("EmptyMotifs", "family '" + spec.name + "' has no motifs");
    if (spec.noise_rate < 0.0 || spec.noise_rate > 1.0)
        fail("NoiseOutOfRange", "noise_rate must be in [0,1]");
    std::vector<isa::BinaryImage> images;
    images.reserve(spec.variant_count);
    for (uint32_t v = 0; v < spec.variant_count; ++v) {
        std::mt19937_64 g = seeded(spec.seed, v);
        std::vector<std::vector<uint32_t>> segments;
        segments.push_back(noise_run(g, spec.noise_rate, malware_pool()));
        for (const std::vector<uint32_t>& motif : spec.motifs) {
            segments.push_back(motif_with_insertions(g, motif, spec.noise_rate, malware_pool()));
            segments.push_back(noise_run(g, spec.noise_rate, malware_pool()));
        }
        images.push_back(
            isa::assemble(build_source(g, segments, spec.noise_rate, malware_pool())));
    }
    return images;
}

namespace {

// True when any default-family motif occurs as a contiguous run in any
// extracted API path of the image.
bool contains_default_motif(const isa::BinaryImage& image) {
    static const std::unordered_map<std::string, uint32_t> index_of = [] {
        std::unordered_map<std::string, uint32_t> m;
        const auto& names = api_universe();
        for (uint32_t i = 0; i < names.size(); ++i) m.emplace(names[i], i);
        return m;
    }();
    disasm::Listing listing = disasm::disassemble_recursive(image);
    cfg::Cfg graph = cfg::build_cfg(listing);
    paths::ExtractResult extracted = paths::extract_paths(graph);
    for (const paths::ApiPath& path : extracted.paths) {
        std::vector<uint32_t> ids;
        ids.reserve(path.apis.size());
        for (const std::string& api : path.apis) ids.push_back(index_of.at(api));
        for (const FamilyTableRow& row : family_table()) {
            for (const std::vector<uint32_t>& motif : row.motifs) {
                if (motif.size() > ids.size()) continue;
                if (std::search(ids.begin(), ids.end(), motif.begin(), motif.end()) !=
                    ids.end())
                    return true;
            }
        }
    }
    return false;
}

} // namespace

std::vector<isa::BinaryImage> generate_benign(size_t count, uint64_t seed) {
    std::vector<isa::BinaryImage> images;
    images.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        for (uint64_t attempt = 0;; ++attempt) {
            if (attempt == 100)
                fail("GenerationStuck", "benign program kept containing family motifs");
            std::mt19937_64 g = seeded(seed, i * 100 + attempt);
            std::vector<std::vector<uint32_t>> segments;
            uint32_t seg_count = pick(g, 2, 4);
            for (uint32_t s = 0; s < seg_count; ++s) {
                std::vector<uint32_t> seg;
                uint32_t len = pick(g, 4, 10);
                for (uint32_t k = 0; k < len; ++k) seg.push_back(pick_of(g, benign_pool()));
                segments.push_back(std::move(seg));
            }
            isa::BinaryImage image =
                isa::assemble(build_source(g, segments, 0.3, benign_pool()));
            if (!contains_default_motif(image)) {
                images.push_back(std::move(image));
                break;
            }
        }
    }
    return images;
}

uint32_t packed_region_offset(const isa::BinaryImage& inner) {
    // prologue (3 instructions) + one Store per inner byte + the tail Jmp.
    return static_cast<uint32_t>(3 * isa::Instruction::kWidth +
                                 inner.code.size() * isa::Instruction::kWidth +
                                 isa::Instruction::kWidth);
}

isa::BinaryImage generate_packed(const isa::BinaryImage& inner, bool evasive) {
    if (inner.code.empty()) fail("EmptyImage", "cannot pack an empty program");
    const uint32_t region = packed_region_offset(inner);
    const uint32_t store_run = 3 * isa::Instruction::kWidth;

    std::vector<isa::Instruction> prog;
    prog.push_back({0, isa::OpKind::Compute, 0, false, 0});
    prog.push_back({6, isa::OpKind::Jcc, store_run, !evasive, 0});
    prog.push_back({12, isa::OpKind::Halt, 0, false, 0});
    uint32_t addr = store_run;
    for (size_t i = 0; i < inner.code.size(); ++i) {
        prog.push_back({addr, isa::OpKind::Store, region + static_cast<uint32_t>(i), false,
                        inner.code[i]});
        addr += isa::Instruction::kWidth;
    }
    prog.push_back({addr, isa::OpKind::Jmp, region + inner.entry_point, false, 0});

    isa::BinaryImage stub;
    stub.base_address = 0;
    stub.entry_point = 0;
    stub.api_map = inner.api_map;
    stub.code.resize(region + inner.code.size(), 0);
    for (const isa::Instruction& instr : prog) {
        auto bytes = isa::encode(instr);
        std::copy(bytes.begin(), bytes.end(), stub.code.begin() + instr.address);
    }
    return stub;
}

pack::PackerSignature minipack_signature() {
    auto compute = isa::encode({0, isa::OpKind::Compute, 0, false, 0});
    auto jcc = isa::encode({6, isa::OpKind::Jcc, 3 * isa::Instruction::kWidth, true, 0});
    pack::PackerSignature sig;
    sig.name = "MINIPACK";
    for (uint8_t b : compute) sig.pattern.push_back(b);
    sig.pattern.push_back(jcc[0]);
    sig.pattern.push_back(std::nullopt); // direction byte differs for the evasive stub
    for (size_t i = 2; i < jcc.size(); ++i) sig.pattern.push_back(jcc[i]);
    return sig;
}

std::string encode_manifest(const std::vector<ManifestEntry>& entries) {
    nlohmann::json arr = nlohmann::json::array();
    for (const ManifestEntry& e : entries) {
        arr.push_back({{"path", e.path},
                       {"label", classify::label_name(e.label)},
                       {"family", e.family},
                       {"packed", e.packed}});
    }
    return arr.dump(2) + "\n";
}

std::vector<ManifestEntry> decode_manifest(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& err) {
        fail("MalformedManifest", err.what());
    }
    if (!doc.is_array()) fail("MalformedManifest", "manifest must be a JSON array");
    std::vector<ManifestEntry> entries;
    for (const nlohmann::json& item : doc) {
        if (!item.is_object() || !item.contains("path") || !item.contains("label"))
            fail("MalformedManifest", "entry needs at least path and label");
        ManifestEntry e;
        e.path = item.at("path").get<std::string>();
        auto label = classify::label_from(item.at("label").get<std::string>());
        if (!label)
            fail("MalformedManifest",
                 "unknown label '" + item.at("label").get<std::string>() + "'");
        e.label = *label;
        if (item.contains("family")) e.family = item.at("family").get<std::string>();
        if (item.contains("packed")) e.packed = item.at("packed").get<bool>();
        entries.push_back(std::move(e));
    }
    return entries;
}

std::vector<ManifestEntry> read_manifest_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoError", "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return decode_manifest(ss.str());
}

std::vector<ManifestEntry> write_corpus(const CorpusOptions& options) {
    if (options.out_dir.empty()) fail("BadOutputDir", "output directory not set");
    fs::create_directories(options.out_dir);

    auto lower = [](std::string s) {
        std::transform(s.begin(), s.end(), s.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        return s;
    };

    std::vector<FamilySpec> families = default_families(options.seed);
    if (!options.family_filter.empty()) {
        std::vector<FamilySpec> kept;
        for (const std::string& want : options.family_filter) {
            auto it = std::find_if(families.begin(), families.end(), [&](const FamilySpec& f) {
                return lower(f.name) == lower(want);
            });
            if (it == families.end()) fail("UnknownFamily", "'" + want + "'");
            kept.push_back(*it);
        }
        families = std::move(kept);
    }

    std::vector<ManifestEntry> manifest;
    auto emit = [&](const std::string& name, const isa::BinaryImage& image,
                    classify::Label label, const std::string& family, bool packed) {
        isa::save_image_file(image, (fs::path(options.out_dir) / name).string());
        manifest.push_back({name, label, family, packed});
    };

    for (FamilySpec family : families) {
        family.variant_count = options.variants;
        std::vector<isa::BinaryImage> images = generate_family(family);
        for (size_t v = 0; v < images.size(); ++v)
            emit(lower(family.name) + "_" + std::to_string(v) + ".misa", images[v],
                 family.label, family.name, false);
        if (options.with_packed && !images.empty()) {
            emit("packed_" + lower(family.name) + ".misa", generate_packed(images[0], false),
                 family.label, family.name, true);
            emit("evasive_" + lower(family.name) + ".misa", generate_packed(images[0], true),
                 family.label, family.name, true);
        }
    }

    uint64_t benign_seed = seeded(options.seed, 2)();
    std::vector<isa::BinaryImage> benign = generate_benign(options.benign_count, benign_seed);
    for (size_t k = 0; k < benign.size(); ++k)
        emit("benign_" + std::to_string(k) + ".misa", benign[k], classify::Label::Benign, "",
             false);

    std::ofstream out(fs::path(options.out_dir) / "manifest.json");
    if (!out) fail("IoError", "cannot write manifest.json");
    out << encode_manifest(manifest);
    return manifest;
}

} // namespace apiseq::corpus
