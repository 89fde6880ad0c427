// Command-line frontend for the analysis pipeline. Every subcommand prints
// a JSON report (keys sorted, schema per README) unless --pretty asks for a
// table; scan/packcheck/packsig exit 1 on a positive verdict, everything
// exits 2 on usage or file-format errors.

#include "apiseq/cfg.hpp"
#include "apiseq/classify.hpp"
#include "apiseq/corpusgen.hpp"
#include "apiseq/disasm.hpp"
#include "apiseq/error.hpp"
#include "apiseq/experiments.hpp"
#include "apiseq/features.hpp"
#include "apiseq/miniisa.hpp"
#include "apiseq/packsim.hpp"
#include "apiseq/pathext.hpp"
#include "apiseq/pe_imports.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace apiseq;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoError", "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot write '" + path + "'");
    out << text;
}

bool is_misa(const std::string& data) {
    return data.size() >= 4 && data.compare(0, 4, "MISA") == 0;
}

// Accepts a MiniISA image (disassembled with `mode`) or an NDIF listing.
disasm::Listing load_listing(const std::string& path, disasm::ListingMode mode) {
    std::string data = read_file(path);
    if (is_misa(data)) {
        auto img = isa::load_image(
            std::span(reinterpret_cast<const uint8_t*>(data.data()), data.size()));
        return mode == disasm::ListingMode::Linear ? disasm::disassemble_linear(img)
                                                   : disasm::disassemble_recursive(img);
    }
    if (data.size() >= 2 && data[0] == 'M' && data[1] == 'Z')
        fail("NotMiniIsa", "PE input is only supported by the imports command");
    return disasm::parse_ndif(data);
}

classify::Label parse_label(const std::string& name) {
    auto label = classify::label_from(name);
    if (!label) fail("UnknownLabel", "'" + name + "'");
    return *label;
}

classify::Coefficient parse_coefficient(const std::string& name) {
    auto coef = classify::coefficient_from(name);
    if (!coef) fail("UnknownCoefficient", "'" + name + "'");
    return *coef;
}

classify::TverskyParams parse_tversky(const std::string& mode, double alpha, double beta) {
    classify::TverskyParams params;
    if (mode == "paper")
        params.mode = classify::TverskyMode::PaperLiteral;
    else if (mode == "constants")
        params.mode = classify::TverskyMode::Constants;
    else
        fail("UnknownTverskyMode", "'" + mode + "' (expected paper or constants)");
    params.alpha = alpha;
    params.beta = beta;
    return params;
}

// Loads databases when the directory has been initialized, otherwise
// returns an empty map (train bootstraps new directories).
classify::DatabaseMap load_dbs_if_any(const std::string& dir, int n, ngram::ApiIdMap& map) {
    if (!fs::exists(fs::path(dir) / "apimap.txt")) return {};
    return classify::load_databases(dir, n, map);
}

std::vector<classify::LabeledSample> featurize_manifest(const std::string& manifest_path,
                                                        ngram::ApiIdMap& map, int n) {
    std::vector<classify::LabeledSample> samples;
    for (exp::LabeledImage& li : exp::load_manifest_images(manifest_path))
        samples.push_back({li.id, li.label, exp::featurize(li.image, map, n)});
    return samples;
}

json scores_json(const std::map<classify::Label, double>& scores) {
    json out = json::object();
    for (const auto& [label, score] : scores) out[classify::label_name(label)] = score;
    return out;
}

json sizes_json(const std::map<classify::Label, size_t>& sizes) {
    json out = json::object();
    for (const auto& [label, size] : sizes) out[classify::label_name(label)] = size;
    return out;
}

void print_json(const json& doc) { std::cout << doc.dump(2) << "\n"; }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Static API-sequence malware analysis pipeline"};
    app.require_subcommand(1);
    app.fallthrough(); // lets --pretty appear after the subcommand too
    bool pretty = false;
    app.add_flag("--pretty", pretty, "render tables instead of JSON");
    int exit_code = 0;

    // corpusgen
    auto* cg = app.add_subcommand("corpusgen", "generate a synthetic corpus");
    corpus::CorpusOptions copt;
    std::string families_csv;
    cg->add_option("--out", copt.out_dir, "output directory")->required();
    cg->add_option("--seed", copt.seed, "corpus seed");
    cg->add_option("--variants", copt.variants, "variants per family");
    cg->add_option("--benign", copt.benign_count, "benign program count");
    cg->add_option("--families", families_csv, "comma-separated family subset");
    cg->add_flag("--with-packed", copt.with_packed, "also emit packed and evasive stubs");
    cg->callback([&] {
        std::stringstream ss(families_csv);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) copt.family_filter.push_back(tok);
        auto manifest = corpus::write_corpus(copt);
        print_json({{"out", copt.out_dir},
                    {"entries", manifest.size()},
                    {"manifest", (fs::path(copt.out_dir) / "manifest.json").string()}});
    });

    // disasm
    auto* ds = app.add_subcommand("disasm", "produce an instruction listing");
    std::string ds_file, ds_mode = "recursive", ds_ndif;
    ds->add_option("file", ds_file, "MiniISA image or NDIF listing")->required();
    ds->add_option("--mode", ds_mode, "linear or recursive")
        ->check(CLI::IsMember({"linear", "recursive"}));
    ds->add_option("--ndif", ds_ndif, "write NDIF here instead of stdout");
    ds->callback([&] {
        auto listing = load_listing(ds_file, ds_mode == "linear"
                                                 ? disasm::ListingMode::Linear
                                                 : disasm::ListingMode::Recursive);
        std::string text = disasm::emit_ndif(listing);
        if (ds_ndif.empty())
            std::cout << text;
        else
            write_file(ds_ndif, text);
    });

    // cfg
    auto* cf = app.add_subcommand("cfg", "build the control-flow graph");
    std::string cf_file, cf_dot;
    cf->add_option("file", cf_file, "MiniISA image or NDIF listing")->required();
    cf->add_option("--dot", cf_dot, "write DOT here instead of stdout");
    cf->callback([&] {
        auto graph = cfg::build_cfg(load_listing(cf_file, disasm::ListingMode::Recursive));
        std::string dot = cfg::to_dot(graph);
        if (cf_dot.empty())
            std::cout << dot;
        else
            write_file(cf_dot, dot);
    });

    // extract
    auto* ex = app.add_subcommand("extract", "extract API paths and n-grams");
    std::string ex_file, ex_json;
    int ex_n = 3;
    paths::TraversalLimits ex_limits;
    ex->add_option("file", ex_file, "MiniISA image or NDIF listing")->required();
    ex->add_option("--n", ex_n, "gram size")->check(CLI::Range(2, 4));
    ex->add_option("--json", ex_json, "write a JSON report here");
    ex->add_option("--max-paths", ex_limits.max_paths, "path count limit");
    ex->add_option("--max-path-blocks", ex_limits.max_path_blocks, "per-path block limit");
    ex->callback([&] {
        auto graph = cfg::build_cfg(load_listing(ex_file, disasm::ListingMode::Recursive));
        auto extracted = paths::extract_paths(graph, ex_limits);
        for (const auto& path : extracted.paths) {
            std::cout << paths::terminal_name(path.terminal) << ":";
            for (const auto& api : path.apis) std::cout << " " << api;
            std::cout << "\n";
        }
        if (!ex_json.empty()) {
            ngram::ApiIdMap map;
            std::vector<paths::ApiPath> with_apis;
            for (const auto& path : extracted.paths)
                if (!path.apis.empty()) with_apis.push_back(path);
            auto set = ngram::gram_set_of_file(with_apis, map, ex_n);
            json jpaths = json::array();
            for (const auto& path : extracted.paths)
                jpaths.push_back({{"apis", path.apis},
                                  {"blocks", path.blocks},
                                  {"terminal", paths::terminal_name(path.terminal)}});
            json jgrams = json::array();
            for (const auto& gram : set.grams()) {
                std::vector<uint32_t> ids(gram.ids.begin(), gram.ids.begin() + gram.n);
                jgrams.push_back(ids);
            }
            json names = json::array();
            for (uint32_t id = 1; id <= map.size(); ++id) names.push_back(map.name_of(id));
            write_file(ex_json, json{{"n", ex_n},
                                     {"truncated", extracted.truncated},
                                     {"paths", jpaths},
                                     {"grams", jgrams},
                                     {"api_ids", names}}
                                    .dump(2) +
                                    "\n");
        }
    });

    // train
    auto* tr = app.add_subcommand("train", "add files to a class database");
    std::string tr_db, tr_label;
    int tr_n = 3;
    std::vector<std::string> tr_files;
    tr->add_option("--db", tr_db, "database directory")->required();
    tr->add_option("--label", tr_label, "class label")->required();
    tr->add_option("--n", tr_n, "gram size")->check(CLI::Range(2, 4));
    tr->add_option("files", tr_files, "training inputs")->required()->expected(-1);
    tr->callback([&] {
        classify::Label label = parse_label(tr_label);
        ngram::ApiIdMap map;
        classify::DatabaseMap dbs = load_dbs_if_any(tr_db, tr_n, map);
        std::vector<ngram::NGramSet> sets;
        for (const std::string& file : tr_files)
            sets.push_back(exp::featurize_listing(
                load_listing(file, disasm::ListingMode::Recursive), map, tr_n));
        auto it = dbs.find(label);
        size_t before = it == dbs.end() ? 0 : it->second.grams.size();
        classify::ClassDatabase db = classify::train(
            sets, label, tr_n, it == dbs.end() ? nullptr : &it->second);
        dbs[label] = db;
        classify::save_databases(dbs, map, tr_db);
        print_json({{"label", classify::label_name(label)},
                    {"n", tr_n},
                    {"files", tr_files.size()},
                    {"db_size_before", before},
                    {"db_size_after", db.grams.size()},
                    {"sample_count", db.sample_count}});
    });

    // scan
    auto* sc = app.add_subcommand("scan", "score one file against the databases");
    std::string sc_file, sc_db, sc_coef = "dice", sc_tmode = "paper";
    int sc_n = 3;
    double sc_margin = 0.0, sc_alpha = 0.5, sc_beta = 0.5;
    sc->add_option("file", sc_file, "MiniISA image or NDIF listing")->required();
    sc->add_option("--db", sc_db, "database directory")->required();
    sc->add_option("--n", sc_n, "gram size")->check(CLI::Range(2, 4));
    sc->add_option("--coef", sc_coef, "dice, tversky or cosine");
    sc->add_option("--margin", sc_margin, "decision margin");
    sc->add_option("--tversky-mode", sc_tmode, "paper or constants");
    sc->add_option("--alpha", sc_alpha, "tversky alpha (constants mode)");
    sc->add_option("--beta", sc_beta, "tversky beta (constants mode)");
    sc->callback([&] {
        ngram::ApiIdMap map;
        classify::DatabaseMap dbs = classify::load_databases(sc_db, sc_n, map);
        auto set = exp::featurize_listing(load_listing(sc_file, disasm::ListingMode::Recursive),
                                          map, sc_n);
        auto [report, verdict] =
            classify::scan(set, dbs, parse_coefficient(sc_coef),
                           parse_tversky(sc_tmode, sc_alpha, sc_beta), sc_margin);
        if (pretty) {
            std::printf("%-10s %s\n", "class", "score");
            for (const auto& [label, score] : report.scores)
                std::printf("%-10s %.6f\n", classify::label_name(label), score);
            std::printf("verdict: %s", verdict.malicious ? "malicious" : "benign");
            if (verdict.family) std::printf(" (%s)", classify::label_name(*verdict.family));
            std::printf("\n");
        } else {
            print_json({{"file", sc_file},
                        {"n", sc_n},
                        {"coefficient", classify::coefficient_name(report.coefficient)},
                        {"margin", sc_margin},
                        {"scores", scores_json(report.scores)},
                        {"decision", verdict.malicious ? "malicious" : "benign"},
                        {"family", verdict.family
                                       ? json(classify::label_name(*verdict.family))
                                       : json(nullptr)}});
        }
        exit_code = verdict.malicious ? 1 : 0;
    });

    // phase
    auto* ph = app.add_subcommand("phase", "run one cumulative train/test phase");
    std::string ph_db, ph_train, ph_test, ph_coef = "dice", ph_tmode = "paper";
    int ph_n = 3, ph_index = 0;
    double ph_margin = 0.0, ph_alpha = 0.5, ph_beta = 0.5;
    ph->add_option("--db", ph_db, "database directory")->required();
    ph->add_option("--train-manifest", ph_train, "manifest of samples to fold in")->required();
    ph->add_option("--test-manifest", ph_test, "manifest of the test wave")->required();
    ph->add_option("--n", ph_n, "gram size")->check(CLI::Range(2, 4));
    ph->add_option("--coef", ph_coef, "dice, tversky or cosine");
    ph->add_option("--phase", ph_index, "phase index for the report");
    ph->add_option("--margin", ph_margin, "decision margin");
    ph->add_option("--tversky-mode", ph_tmode, "paper or constants");
    ph->add_option("--alpha", ph_alpha, "tversky alpha");
    ph->add_option("--beta", ph_beta, "tversky beta");
    ph->callback([&] {
        ngram::ApiIdMap map;
        classify::DatabaseMap dbs = load_dbs_if_any(ph_db, ph_n, map);
        auto train_adds = featurize_manifest(ph_train, map, ph_n);
        auto test_set = featurize_manifest(ph_test, map, ph_n);
        classify::PhaseReport report =
            classify::run_phase(ph_index, train_adds, test_set, dbs,
                                parse_coefficient(ph_coef),
                                parse_tversky(ph_tmode, ph_alpha, ph_beta), ph_margin);
        classify::save_databases(dbs, map, ph_db);
        if (pretty) {
            std::printf("phase %d: detection %.4f, fpr %.4f, missed %zu, false positives %zu\n",
                        report.phase, report.detection_rate, report.false_positive_rate,
                        report.missed_malware.size(), report.false_positives.size());
        } else {
            print_json({{"phase", report.phase},
                        {"detection_rate", report.detection_rate},
                        {"false_positive_rate", report.false_positive_rate},
                        {"missed_malware", report.missed_malware},
                        {"false_positives", report.false_positives},
                        {"db_size_before", sizes_json(report.db_size_before)},
                        {"db_size_after", sizes_json(report.db_size_after)}});
        }
    });

    // packcheck
    auto* pc = app.add_subcommand("packcheck", "run the write-then-execute tracer");
    std::string pc_file;
    uint64_t pc_steps = pack::kDefaultMaxSteps;
    pc->add_option("file", pc_file, "MiniISA image")->required();
    pc->add_option("--max-steps", pc_steps, "step budget");
    pc->callback([&] {
        auto result = pack::run_vm(isa::load_image_file(pc_file), pc_steps);
        print_json({{"packed", result.packed},
                    {"evidence", result.evidence ? json(*result.evidence) : json(nullptr)},
                    {"stop", pack::stop_reason_name(result.stop)},
                    {"steps", result.steps},
                    {"ran_to_completion", result.ran_to_completion},
                    {"written_bytes", result.written_bytes()}});
        exit_code = result.packed ? 1 : 0;
    });

    // packsig
    auto* ps = app.add_subcommand("packsig", "match entry-point packer signatures");
    std::string ps_file, ps_sigs;
    ps->add_option("file", ps_file, "MiniISA image")->required();
    ps->add_option("--sigs", ps_sigs, "signature file")->required();
    ps->callback([&] {
        auto sigs = pack::load_signature_file(ps_sigs);
        auto hit = pack::match_signatures(isa::load_image_file(ps_file), sigs);
        print_json({{"matched", hit ? json(*hit) : json(nullptr)}});
        exit_code = hit ? 1 : 0;
    });

    // packeval
    auto* pe_cmd = app.add_subcommand("packeval", "cross-validate both packer detectors");
    std::string pv_manifest, pv_sigs;
    uint64_t pv_steps = pack::kDefaultMaxSteps;
    pe_cmd->add_option("--manifest", pv_manifest, "corpus manifest")->required();
    pe_cmd->add_option("--sigs", pv_sigs, "signature file")->required();
    pe_cmd->add_option("--max-steps", pv_steps, "step budget per binary");
    pe_cmd->callback([&] {
        auto sigs = pack::load_signature_file(pv_sigs);
        std::vector<std::pair<std::string, isa::BinaryImage>> corpus_images;
        for (exp::LabeledImage& li : exp::load_manifest_images(pv_manifest))
            corpus_images.emplace_back(li.id, std::move(li.image));
        auto report = pack::evaluate_detectors(corpus_images, sigs, pv_steps);
        if (pretty) {
            std::printf("%-28s %-10s %-5s %s\n", "id", "signature", "vm", "evidence");
            for (const auto& e : report.entries)
                std::printf("%-28s %-10s %-5s %s\n", e.id.c_str(),
                            e.sig_result ? e.sig_result->c_str() : "-",
                            e.dyn_result ? "yes" : "no",
                            e.evidence ? std::to_string(*e.evidence).c_str() : "-");
            std::printf("both %zu, sig_only %zu, dyn_only %zu, neither %zu\n",
                        report.both.size(), report.sig_only.size(), report.dyn_only.size(),
                        report.neither.size());
        } else {
            json entries = json::array();
            for (const auto& e : report.entries)
                entries.push_back(
                    {{"id", e.id},
                     {"signature", e.sig_result ? json(*e.sig_result) : json(nullptr)},
                     {"vm_packed", e.dyn_result},
                     {"evidence", e.evidence ? json(*e.evidence) : json(nullptr)}});
            print_json({{"entries", entries},
                        {"both", report.both},
                        {"sig_only", report.sig_only},
                        {"dyn_only", report.dyn_only},
                        {"neither", report.neither}});
        }
    });

    // imports
    auto* im = app.add_subcommand("imports", "parse a PE32 import table");
    std::string im_file;
    im->add_option("file", im_file, "PE32 binary")->required();
    im->callback([&] {
        auto table = pe::parse_imports_file(im_file);
        if (pretty) {
            std::printf("image base 0x%08X\n", table.image_base);
            std::printf("%-16s %-24s %-6s %s\n", "dll", "api", "hint", "thunk_rva");
            for (const auto& e : table.entries)
                std::printf("%-16s %-24s %-6u 0x%04X\n", e.dll_name.c_str(),
                            e.api_name.c_str(), e.hint, e.thunk_rva);
        } else {
            json entries = json::array();
            for (const auto& e : table.entries)
                entries.push_back({{"dll", e.dll_name},
                                   {"api", e.api_name},
                                   {"hint", e.hint},
                                   {"thunk_rva", e.thunk_rva}});
            print_json({{"image_base", table.image_base}, {"entries", entries}});
        }
    });

    // sweep
    auto* sw = app.add_subcommand("sweep", "coefficient x gram-size TPR/FPR matrix");
    std::string sw_train, sw_test, sw_out, sw_tmode = "paper";
    double sw_margin = 0.0, sw_alpha = 0.5, sw_beta = 0.5;
    sw->add_option("--train-manifest", sw_train, "training corpus manifest")->required();
    sw->add_option("--test-manifest", sw_test, "test corpus manifest")->required();
    sw->add_option("--out", sw_out, "also write the JSON artifact here");
    sw->add_option("--margin", sw_margin, "decision margin");
    sw->add_option("--tversky-mode", sw_tmode, "paper or constants");
    sw->add_option("--alpha", sw_alpha, "tversky alpha");
    sw->add_option("--beta", sw_beta, "tversky beta");
    sw->callback([&] {
        auto train_images = exp::load_manifest_images(sw_train);
        auto test_images = exp::load_manifest_images(sw_test);
        auto result = exp::sweep(train_images, test_images,
                                 parse_tversky(sw_tmode, sw_alpha, sw_beta), sw_margin);
        json doc = exp::sweep_to_json(result);
        if (!sw_out.empty()) write_file(sw_out, doc.dump(2) + "\n");
        if (pretty) {
            std::printf("baseline %.4f\n", result.baseline);
            std::printf("%-10s %-4s %-8s %s\n", "coef", "n", "tpr", "fpr");
            for (const auto& [coef, by_n] : result.cells)
                for (const auto& [n, cell] : by_n)
                    std::printf("%-10s %-4d %-8.4f %.4f\n", classify::coefficient_name(coef),
                                n, cell.tpr, cell.fpr);
        } else {
            print_json(doc);
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return exit_code;
}
