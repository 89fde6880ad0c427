#pragma once

// Pipeline composition shared by the CLI and the evaluation harness:
// image/listing -> recursive disassembly -> CFG -> path extraction ->
// n-gram set, plus the coefficient/n sweep over a labeled corpus.

#include "apiseq/classify.hpp"
#include "apiseq/corpusgen.hpp"
#include "apiseq/disasm.hpp"
#include "apiseq/features.hpp"
#include "apiseq/pathext.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace apiseq::exp {

// The canonical feature route for one binary.
ngram::NGramSet featurize(const isa::BinaryImage& image, ngram::ApiIdMap& map, int n,
                          const paths::TraversalLimits& limits = {},
                          const disasm::ResolveOptions& resolve = {});

ngram::NGramSet featurize_listing(const disasm::Listing& listing, ngram::ApiIdMap& map, int n,
                                  const paths::TraversalLimits& limits = {});

struct LabeledImage {
    std::string id;
    classify::Label label = classify::Label::Benign;
    std::string family;
    isa::BinaryImage image;
};

// Loads every manifest entry's image (paths relative to the manifest file).
std::vector<LabeledImage> load_manifest_images(const std::string& manifest_path);

struct SweepCell {
    double tpr = 0.0;
    double fpr = 0.0;
};

struct SweepResult {
    // cells[coefficient][n] over n in {2,3,4}
    std::map<classify::Coefficient, std::map<int, SweepCell>> cells;
    double baseline = 0.0; // malware prevalence of the test wave
};

// Trains class databases per n from the train split, then measures TPR/FPR
// of every coefficient x n combination on the test split.
SweepResult sweep(const std::vector<LabeledImage>& train, const std::vector<LabeledImage>& test,
                  const classify::TverskyParams& params = {}, double margin = 0.0);

nlohmann::json sweep_to_json(const SweepResult& result);

} // namespace apiseq::exp
