#include "apiseq/experiments.hpp"

#include "apiseq/cfg.hpp"
#include "apiseq/error.hpp"

#include <filesystem>

namespace apiseq::exp {

namespace fs = std::filesystem;

ngram::NGramSet featurize_listing(const disasm::Listing& listing, ngram::ApiIdMap& map, int n,
                                  const paths::TraversalLimits& limits) {
    cfg::Cfg graph = cfg::build_cfg(listing);
    paths::ExtractResult extracted = paths::extract_paths(graph, limits);
    std::vector<paths::ApiPath> with_apis;
    for (paths::ApiPath& path : extracted.paths)
        if (!path.apis.empty()) with_apis.push_back(std::move(path));
    return ngram::gram_set_of_file(with_apis, map, n);
}

ngram::NGramSet featurize(const isa::BinaryImage& image, ngram::ApiIdMap& map, int n,
                          const paths::TraversalLimits& limits,
                          const disasm::ResolveOptions& resolve) {
    return featurize_listing(disasm::disassemble_recursive(image, resolve), map, n, limits);
}

std::vector<LabeledImage> load_manifest_images(const std::string& manifest_path) {
    std::vector<corpus::ManifestEntry> entries = corpus::read_manifest_file(manifest_path);
    fs::path dir = fs::path(manifest_path).parent_path();
    std::vector<LabeledImage> images;
    images.reserve(entries.size());
    for (const corpus::ManifestEntry& e : entries) {
        LabeledImage li;
        li.id = e.path;
        li.label = e.label;
        li.family = e.family;
        li.image = isa::load_image_file((dir / e.path).string());
        images.push_back(std::move(li));
    }
    return images;
}

SweepResult sweep(const std::vector<LabeledImage>& train, const std::vector<LabeledImage>& test,
                  const classify::TverskyParams& params, double margin) {
    SweepResult result;
    size_t malware_total = 0;
    for (const LabeledImage& t : test)
        if (t.label != classify::Label::Benign) ++malware_total;
    result.baseline =
        test.empty() ? 0.0 : static_cast<double>(malware_total) / static_cast<double>(test.size());

    ngram::ApiIdMap map;
    for (int n : {2, 3, 4}) {
        classify::DatabaseMap dbs;
        for (const LabeledImage& t : train) {
            ngram::NGramSet set = featurize(t.image, map, n);
            auto it = dbs.find(t.label);
            if (it == dbs.end()) {
                classify::ClassDatabase db;
                db.label = t.label;
                db.n = n;
                db.grams = ngram::NGramSet(n);
                it = dbs.emplace(t.label, std::move(db)).first;
            }
            it->second.add_file(set);
        }

        std::vector<ngram::NGramSet> test_sets;
        test_sets.reserve(test.size());
        for (const LabeledImage& t : test) test_sets.push_back(featurize(t.image, map, n));

        for (classify::Coefficient coef : {classify::Coefficient::Dice,
                                           classify::Coefficient::Tversky,
                                           classify::Coefficient::Cosine}) {
            size_t hits = 0, false_pos = 0, benign_total = 0;
            for (size_t i = 0; i < test.size(); ++i) {
                auto [report, verdict] =
                    classify::scan(test_sets[i], dbs, coef, params, margin);
                if (test[i].label == classify::Label::Benign) {
                    ++benign_total;
                    if (verdict.malicious) ++false_pos;
                } else if (verdict.malicious) {
                    ++hits;
                }
            }
            SweepCell cell;
            cell.tpr = malware_total
                           ? static_cast<double>(hits) / static_cast<double>(malware_total)
                           : 0.0;
            cell.fpr = benign_total
                           ? static_cast<double>(false_pos) / static_cast<double>(benign_total)
                           : 0.0;
            result.cells[coef][n] = cell;
        }
    }
    return result;
}

nlohmann::json sweep_to_json(const SweepResult& result) {
    nlohmann::json cells = nlohmann::json::object();
    for (const auto& [coef, by_n] : result.cells) {
        nlohmann::json inner = nlohmann::json::object();
        for (const auto& [n, cell] : by_n)
            inner[std::to_string(n)] = {{"tpr", cell.tpr}, {"fpr", cell.fpr}};
        cells[classify::coefficient_name(coef)] = inner;
    }
    return {{"baseline", result.baseline}, {"cells", cells}};
}

} // namespace apiseq::exp
