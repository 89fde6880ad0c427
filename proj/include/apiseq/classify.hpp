#pragma once

// Per-class n-gram databases, set-similarity coefficients, verdicts, and the
// cumulative phase loop. A database is the union of the gram sets of its
// training files; scanning scores the file set against every database and
// flags it malicious when the best malware score beats the benign score by
// more than the margin.

#include "apiseq/features.hpp"

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace apiseq::classify {

enum class Label : uint8_t { Virus, Trojan, Backdoor, Adware, Worm, Benign };

// Tie-break and report order for the malware classes.
constexpr std::array<Label, 5> kMalwareLabels = {Label::Virus, Label::Trojan, Label::Backdoor,
                                                 Label::Adware, Label::Worm};

const char* label_name(Label label);
std::optional<Label> label_from(const std::string& name);

enum class Coefficient : uint8_t { Dice, Tversky, Cosine };

const char* coefficient_name(Coefficient c);
std::optional<Coefficient> coefficient_from(const std::string& name);

enum class TverskyMode : uint8_t { PaperLiteral, Constants };

// PaperLiteral derives alpha/beta from the difference sizes themselves
// (alpha = min(|X-Y|, |Y-X|), beta = max); Constants uses the fixed
// weights. alpha+beta must be positive in Constants mode.
struct TverskyParams {
    TverskyMode mode = TverskyMode::PaperLiteral;
    double alpha = 0.5;
    double beta = 0.5;
};

// D = 2|X∩Y| / (|X| + |Y|); 0 when both sets are empty.
double dice(const ngram::NGramSet& x, const ngram::NGramSet& y);

// T = |X∩Y| / (|X∩Y| + a|X-Y| + b|Y-X|); 0 when the numerator is 0.
double tversky(const ngram::NGramSet& x, const ngram::NGramSet& y, const TverskyParams& params);

// C = 2|X∩Y| / sqrt((|X|+|X∩Y|) * (|Y|+|X∩Y|)); 0 when either set is empty.
double cosine(const ngram::NGramSet& x, const ngram::NGramSet& y);

double similarity(Coefficient c, const ngram::NGramSet& x, const ngram::NGramSet& y,
                  const TverskyParams& params = {});

struct ClassDatabase {
    Label label = Label::Benign;
    int n = 0;
    ngram::NGramSet grams;
    uint32_t sample_count = 0;
    std::map<uint64_t, uint64_t> gram_counts; // occurrence metadata only

    void add_file(const ngram::NGramSet& file);
};

ClassDatabase train(std::span<const ngram::NGramSet> files, Label label, int n,
                    const ClassDatabase* existing = nullptr);

using DatabaseMap = std::map<Label, ClassDatabase>;

struct SimilarityReport {
    int n = 0;
    Coefficient coefficient = Coefficient::Dice;
    std::map<Label, double> scores;
};

struct Verdict {
    bool malicious = false;
    std::optional<Label> family;
    double best_malware_score = 0.0;
    double benign_score = 0.0;
    double margin = 0.0;
    Coefficient coefficient = Coefficient::Dice;
    int n = 0;
};

// Scores `file` against every database present. Malicious iff the best
// malware score exceeds benign + margin; ties go to Benign. Family is the
// argmax with ties broken in kMalwareLabels order.
std::pair<SimilarityReport, Verdict> scan(const ngram::NGramSet& file, const DatabaseMap& dbs,
                                          Coefficient coefficient, const TverskyParams& params,
                                          double margin);

struct LabeledSample {
    std::string id;
    Label label = Label::Benign;
    ngram::NGramSet set;
};

struct PhaseReport {
    int phase = 0;
    double detection_rate = 0.0;      // over true-malware test items
    double false_positive_rate = 0.0; // over true-benign test items
    std::vector<std::string> missed_malware;
    std::vector<std::string> false_positives;
    std::map<Label, size_t> db_size_before;
    std::map<Label, size_t> db_size_after;
};

// One cumulative phase: fold train_adds in, scan the test wave, feed every
// missed malware item back into its true family database and every false
// positive into Benign. Databases only grow.
PhaseReport run_phase(int phase_index, std::span<const LabeledSample> train_adds,
                      std::span<const LabeledSample> test_set, DatabaseMap& dbs,
                      Coefficient coefficient, const TverskyParams& params, double margin);

// Persistence: one text file per (label, n) named `<label>.<n>.db`
// (header `label n sample_count`, then one `id,id,... count` line per
// gram) plus the interned name map in `apimap.txt`.
void save_databases(const DatabaseMap& dbs, const ngram::ApiIdMap& map, const std::string& dir);
DatabaseMap load_databases(const std::string& dir, int n, ngram::ApiIdMap& map);

std::string encode_database(const ClassDatabase& db);
ClassDatabase decode_database(const std::string& text);

} // namespace apiseq::classify
