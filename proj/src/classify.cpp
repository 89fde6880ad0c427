#include "apiseq/classify.hpp"

#include "apiseq/error.hpp"
#include "apiseq/setops.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace apiseq::classify {

namespace fs = std::filesystem;

const char* label_name(Label label) {
    switch (label) {
    case Label::Virus: return "virus";
    case Label::Trojan: return "trojan";
    case Label::Backdoor: return "backdoor";
    case Label::Adware: return "adware";
    case Label::Worm: return "worm";
    case Label::Benign: return "benign";
    }
    return "?";
}

std::optional<Label> label_from(const std::string& name) {
    std::string lower = name;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (Label l : {Label::Virus, Label::Trojan, Label::Backdoor, Label::Adware, Label::Worm,
                    Label::Benign})
        if (lower == label_name(l)) return l;
    return std::nullopt;
}

const char* coefficient_name(Coefficient c) {
    switch (c) {
    case Coefficient::Dice: return "dice";
    case Coefficient::Tversky: return "tversky";
    case Coefficient::Cosine: return "cosine";
    }
    return "?";
}

std::optional<Coefficient> coefficient_from(const std::string& name) {
    for (Coefficient c : {Coefficient::Dice, Coefficient::Tversky, Coefficient::Cosine})
        if (name == coefficient_name(c)) return c;
    return std::nullopt;
}

namespace {

void check_same_n(const ngram::NGramSet& x, const ngram::NGramSet& y) {
    if (x.n() != 0 && y.n() != 0 && x.n() != y.n())
        fail("GramSizeMismatch", "comparing " + std::to_string(x.n()) + "-grams with " +
                                     std::to_string(y.n()) + "-grams");
}

size_t intersection(const ngram::NGramSet& x, const ngram::NGramSet& y) {
    check_same_n(x, y);
    return setops::intersect_count(x.keys(), y.keys());
}

} // namespace

double dice(const ngram::NGramSet& x, const ngram::NGramSet& y) {
    size_t i = intersection(x, y);
    size_t denom = x.size() + y.size();
    if (denom == 0) return 0.0;
    return 2.0 * static_cast<double>(i) / static_cast<double>(denom);
}

double tversky(const ngram::NGramSet& x, const ngram::NGramSet& y,
               const TverskyParams& params) {
    size_t i = intersection(x, y);
    if (i == 0) return 0.0;
    double dx = static_cast<double>(x.size() - i);
    double dy = static_cast<double>(y.size() - i);
    double alpha, beta;
    if (params.mode == TverskyMode::PaperLiteral) {
        alpha = std::min(dx, dy);
        beta = std::max(dx, dy);
    } else {
        if (params.alpha < 0.0 || params.beta < 0.0 || params.alpha + params.beta <= 0.0)
            fail("InvalidTverskyParams", "alpha and beta must be non-negative, alpha+beta > 0");
        alpha = params.alpha;
        beta = params.beta;
    }
    return static_cast<double>(i) / (static_cast<double>(i) + alpha * dx + beta * dy);
}

double cosine(const ngram::NGramSet& x, const ngram::NGramSet& y) {
    size_t i = intersection(x, y);
    if (x.empty() || y.empty()) return 0.0;
    double nx = static_cast<double>(x.size() + i);
    double ny = static_cast<double>(y.size() + i);
    return 2.0 * static_cast<double>(i) / std::sqrt(nx * ny);
}

double similarity(Coefficient c, const ngram::NGramSet& x, const ngram::NGramSet& y,
                  const TverskyParams& params) {
    switch (c) {
    case Coefficient::Dice: return dice(x, y);
    case Coefficient::Tversky: return tversky(x, y, params);
    case Coefficient::Cosine: return cosine(x, y);
    }
    return 0.0;
}

void ClassDatabase::add_file(const ngram::NGramSet& file) {
    if (n != 0 && file.n() != 0 && file.n() != n)
        fail("GramSizeMismatch", "adding " + std::to_string(file.n()) + "-gram file to " +
                                     std::to_string(n) + "-gram database");
    if (n == 0) n = file.n();
    grams.absorb(file);
    ++sample_count;
    for (uint64_t key : file.keys()) ++gram_counts[key];
}

ClassDatabase train(std::span<const ngram::NGramSet> files, Label label, int n,
                    const ClassDatabase* existing) {
    ClassDatabase db;
    if (existing) {
        if (existing->label != label)
            fail("LabelMismatch", std::string("existing database is ") +
                                      label_name(existing->label) + ", training " +
                                      label_name(label));
        db = *existing;
    } else {
        db.label = label;
        db.n = n;
        db.grams = ngram::NGramSet(n);
    }
    for (const ngram::NGramSet& file : files) db.add_file(file);
    return db;
}

std::pair<SimilarityReport, Verdict> scan(const ngram::NGramSet& file, const DatabaseMap& dbs,
                                          Coefficient coefficient, const TverskyParams& params,
                                          double margin) {
    auto benign_it = dbs.find(Label::Benign);
    if (benign_it == dbs.end()) fail("MissingBenignDb", "scan requires a benign database");

    SimilarityReport report;
    report.n = file.n();
    report.coefficient = coefficient;
    for (const auto& [label, db] : dbs)
        report.scores[label] = similarity(coefficient, file, db.grams, params);

    Verdict verdict;
    verdict.coefficient = coefficient;
    verdict.n = file.n();
    verdict.margin = margin;
    verdict.benign_score = report.scores.at(Label::Benign);

    std::optional<Label> best;
    for (Label l : kMalwareLabels) {
        auto it = report.scores.find(l);
        if (it == report.scores.end()) continue;
        if (!best || it->second > verdict.best_malware_score) {
            best = l;
            verdict.best_malware_score = it->second;
        }
    }
    if (best && verdict.best_malware_score > verdict.benign_score + margin) {
        verdict.malicious = true;
        verdict.family = best;
    }
    return {report, verdict};
}

PhaseReport run_phase(int phase_index, std::span<const LabeledSample> train_adds,
                      std::span<const LabeledSample> test_set, DatabaseMap& dbs,
                      Coefficient coefficient, const TverskyParams& params, double margin) {
    PhaseReport report;
    report.phase = phase_index;
    for (const auto& [label, db] : dbs) report.db_size_before[label] = db.grams.size();

    auto db_for = [&](Label label, int n) -> ClassDatabase& {
        auto it = dbs.find(label);
        if (it == dbs.end()) {
            ClassDatabase fresh;
            fresh.label = label;
            fresh.n = n;
            fresh.grams = ngram::NGramSet(n);
            it = dbs.emplace(label, std::move(fresh)).first;
        }
        return it->second;
    };

    for (const LabeledSample& s : train_adds) db_for(s.label, s.set.n()).add_file(s.set);

    size_t malware_total = 0, malware_hit = 0, benign_total = 0, benign_flagged = 0;
    std::vector<const LabeledSample*> feedback_malware, feedback_benign;
    for (const LabeledSample& s : test_set) {
        auto [rep, verdict] = scan(s.set, dbs, coefficient, params, margin);
        if (s.label == Label::Benign) {
            ++benign_total;
            if (verdict.malicious) {
                ++benign_flagged;
                report.false_positives.push_back(s.id);
                feedback_benign.push_back(&s);
            }
        } else {
            ++malware_total;
            if (verdict.malicious) {
                ++malware_hit;
            } else {
                report.missed_malware.push_back(s.id);
                feedback_malware.push_back(&s);
            }
        }
    }

    for (const LabeledSample* s : feedback_malware) db_for(s->label, s->set.n()).add_file(s->set);
    for (const LabeledSample* s : feedback_benign) db_for(Label::Benign, s->set.n()).add_file(s->set);

    report.detection_rate =
        malware_total ? static_cast<double>(malware_hit) / static_cast<double>(malware_total)
                      : 0.0;
    report.false_positive_rate =
        benign_total ? static_cast<double>(benign_flagged) / static_cast<double>(benign_total)
                     : 0.0;
    for (const auto& [label, db] : dbs) report.db_size_after[label] = db.grams.size();
    return report;
}

std::string encode_database(const ClassDatabase& db) {
    std::string out = std::string(label_name(db.label)) + ' ' + std::to_string(db.n) + ' ' +
                      std::to_string(db.sample_count) + '\n';
    for (const ngram::NGram& g : db.grams.grams()) {
        for (int i = 0; i < g.n; ++i) {
            if (i) out += ',';
            out += std::to_string(g.ids[static_cast<size_t>(i)]);
        }
        out += ' ';
        auto it = db.gram_counts.find(g.pack());
        out += std::to_string(it == db.gram_counts.end() ? uint64_t{1} : it->second);
        out += '\n';
    }
    return out;
}

namespace {

uint64_t parse_u64(const std::string& tok, const char* what) {
    uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
        fail("MalformedDatabase", std::string("bad ") + what + " '" + tok + "'");
    return value;
}

} // namespace

ClassDatabase decode_database(const std::string& text) {
    std::istringstream in(text);
    std::string header;
    if (!std::getline(in, header)) fail("MalformedDatabase", "missing header");
    std::istringstream hs(header);
    std::string label_tok;
    int n = 0;
    uint32_t samples = 0;
    if (!(hs >> label_tok >> n >> samples))
        fail("MalformedDatabase", "bad header '" + header + "'");
    auto label = label_from(label_tok);
    if (!label) fail("MalformedDatabase", "unknown label '" + label_tok + "'");

    ClassDatabase db;
    db.label = *label;
    db.n = n;
    db.sample_count = samples;
    std::vector<uint64_t> keys;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto space = line.find(' ');
        if (space == std::string::npos)
            fail("MalformedDatabase", "gram line without count: '" + line + "'");
        std::string ids_part = line.substr(0, space);
        uint64_t count = parse_u64(line.substr(space + 1), "count");

        ngram::NGram g;
        g.n = static_cast<uint8_t>(n);
        int idx = 0;
        size_t pos = 0;
        while (pos <= ids_part.size()) {
            size_t comma = ids_part.find(',', pos);
            std::string tok = ids_part.substr(
                pos, comma == std::string::npos ? std::string::npos : comma - pos);
            uint64_t id = parse_u64(tok, "id");
            if (idx >= n || id == 0 || id > ngram::kMaxApiId)
                fail("MalformedDatabase", "gram '" + ids_part + "' does not fit n=" +
                                              std::to_string(n));
            g.ids[static_cast<size_t>(idx++)] = static_cast<uint32_t>(id);
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (idx != n)
            fail("MalformedDatabase",
                 "gram '" + ids_part + "' does not fit n=" + std::to_string(n));
        keys.push_back(g.pack());
        db.gram_counts[g.pack()] = count;
    }
    db.grams = ngram::NGramSet::from_keys(n, std::move(keys));
    return db;
}

void save_databases(const DatabaseMap& dbs, const ngram::ApiIdMap& map,
                    const std::string& dir) {
    fs::create_directories(dir);
    for (const auto& [label, db] : dbs) {
        fs::path path = fs::path(dir) / (std::string(label_name(label)) + "." +
                                         std::to_string(db.n) + ".db");
        std::ofstream out(path);
        if (!out) fail("IoError", "cannot write '" + path.string() + "'");
        out << encode_database(db);
    }
    std::ofstream out(fs::path(dir) / "apimap.txt");
    if (!out) fail("IoError", "cannot write apimap.txt in '" + dir + "'");
    out << map.save();
}

DatabaseMap load_databases(const std::string& dir, int n, ngram::ApiIdMap& map) {
    fs::path map_path = fs::path(dir) / "apimap.txt";
    std::ifstream map_in(map_path);
    if (!map_in) fail("MissingApiMap", "no apimap.txt in '" + dir + "'");
    std::stringstream map_text;
    map_text << map_in.rdbuf();
    map = ngram::ApiIdMap::load(map_text.str());

    DatabaseMap dbs;
    for (Label l : {Label::Virus, Label::Trojan, Label::Backdoor, Label::Adware, Label::Worm,
                    Label::Benign}) {
        fs::path path =
            fs::path(dir) / (std::string(label_name(l)) + "." + std::to_string(n) + ".db");
        std::ifstream in(path);
        if (!in) continue;
        std::stringstream text;
        text << in.rdbuf();
        ClassDatabase db = decode_database(text.str());
        if (db.label != l)
            fail("MalformedDatabase", "label in '" + path.string() + "' does not match name");
        if (db.n != n)
            fail("GramSizeMismatch", "database '" + path.string() + "' holds " +
                                         std::to_string(db.n) + "-grams");
        dbs.emplace(l, std::move(db));
    }
    return dbs;
}

} // namespace apiseq::classify
