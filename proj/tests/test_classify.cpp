#include "apiseq/classify.hpp"

#include "helpers/builders.hpp"
#include "helpers/checks.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace apiseq;
using classify::Coefficient;
using classify::Label;

namespace {

ngram::NGramSet set_of(int n, std::initializer_list<std::initializer_list<uint32_t>> grams) {
    std::vector<uint64_t> keys;
    for (const auto& ids : grams) {
        ngram::NGram gram;
        gram.n = static_cast<uint8_t>(n);
        size_t k = 0;
        for (uint32_t id : ids) gram.ids[k++] = id;
        keys.push_back(gram.pack());
    }
    return ngram::NGramSet::from_keys(n, std::move(keys));
}

// |X|=4 |Y|=6 |X∩Y|=2
const ngram::NGramSet kX = set_of(2, {{1, 1}, {1, 2}, {2, 1}, {2, 2}});
const ngram::NGramSet kY = set_of(2, {{1, 1}, {1, 2}, {3, 1}, {3, 2}, {3, 3}, {3, 4}});

classify::TverskyParams constants(double a, double b) {
    classify::TverskyParams p;
    p.mode = classify::TverskyMode::Constants;
    p.alpha = a;
    p.beta = b;
    return p;
}

} // namespace

TEST_CASE("coefficient values match hand computation") {
    CHECK(classify::dice(kX, kY) == doctest::Approx(0.4).epsilon(1e-12));
    // paper-literal weights: alpha=min(2,4)=2, beta=max(2,4)=4
    CHECK(classify::tversky(kX, kY, {}) == doctest::Approx(1.0 / 11.0).epsilon(1e-12));
    CHECK(classify::tversky(kX, kY, constants(1, 0)) ==
          doctest::Approx(0.5).epsilon(1e-12)); // 2/(2+2)
    CHECK(classify::cosine(kX, kY) ==
          doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12)); // 4/sqrt(48)

    auto sub = set_of(3, {{1, 2, 3}, {2, 3, 4}, {3, 4, 5}});
    auto sup = set_of(3, {{1, 2, 3}, {2, 3, 4}, {3, 4, 5}, {9, 9, 9}, {8, 8, 8}, {7, 7, 7}});
    CHECK(classify::dice(sub, sup) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(classify::tversky(sub, sup, {}) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(classify::tversky(sub, sup, constants(1, 0)) ==
          doctest::Approx(1.0).epsilon(1e-12)); // containment
    CHECK(classify::cosine(sub, sup) == doctest::Approx(2.0 / std::sqrt(6.0)).epsilon(1e-12));

    // the literal weighting depends on argument order
    CHECK(classify::tversky(kY, kX, {}) == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
    CHECK(classify::tversky(sup, sub, {}) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("identity, disjointness and empty conventions") {
    CHECK(classify::dice(kX, kX) == 1.0);
    CHECK(classify::tversky(kX, kX, {}) == 1.0);
    CHECK(classify::tversky(kX, kX, constants(0.3, 0.9)) == 1.0);
    CHECK(classify::cosine(kX, kX) == 1.0);

    auto z = set_of(2, {{9, 9}});
    CHECK(classify::dice(kX, z) == 0.0);
    CHECK(classify::tversky(kX, z, {}) == 0.0);
    CHECK(classify::cosine(kX, z) == 0.0);

    ngram::NGramSet empty2(2);
    CHECK(classify::dice(empty2, empty2) == 0.0);
    CHECK(classify::tversky(empty2, empty2, {}) == 0.0);
    CHECK(classify::cosine(empty2, kY) == 0.0);
    CHECK(classify::cosine(kY, empty2) == 0.0);
}

TEST_CASE("random pairs: symmetry, range, dice/tversky agreement") {
    auto g = testutil::rng(707);
    for (int i = 0; i < 2000; ++i) {
        auto a = testutil::random_gram_set(g, 3, testutil::pick(g, 0, 30), 6);
        auto b = testutil::random_gram_set(g, 3, testutil::pick(g, 0, 30), 6);
        for (auto coef : {Coefficient::Dice, Coefficient::Tversky, Coefficient::Cosine}) {
            double xy = classify::similarity(coef, a, b, {});
            CHECK(xy >= 0.0);
            CHECK(xy <= 1.0);
            // the literal tversky weighting is direction-dependent, the others are not
            if (coef != Coefficient::Tversky)
                CHECK(xy == classify::similarity(coef, b, a, {}));
        }
        // with alpha=beta=1/2 tversky reduces to dice
        CHECK(classify::tversky(a, b, constants(0.5, 0.5)) ==
              doctest::Approx(classify::dice(a, b)).epsilon(1e-12));
        if (!a.empty()) CHECK(classify::similarity(Coefficient::Dice, a, a, {}) == 1.0);
    }
}

TEST_CASE("coefficients reject bad input") {
    auto a2 = set_of(2, {{1, 2}});
    auto a3 = set_of(3, {{1, 2, 3}});
    CHECK_FAILS(classify::dice(a2, a3), "GramSizeMismatch");
    CHECK_FAILS(classify::tversky(a2, a3, {}), "GramSizeMismatch");
    CHECK_FAILS(classify::cosine(a2, a3), "GramSizeMismatch");
    CHECK_FAILS(classify::tversky(a2, a2, constants(-1, 1)), "InvalidTverskyParams");
    CHECK_FAILS(classify::tversky(a2, a2, constants(0, 0)), "InvalidTverskyParams");
}

TEST_CASE("training unions gram sets") {
    std::vector<ngram::NGramSet> files{set_of(2, {{1, 2}, {2, 3}}),
                                       set_of(2, {{2, 3}, {3, 4}})};
    auto db = classify::train(files, Label::Trojan, 2);
    CHECK(db.label == Label::Trojan);
    CHECK(db.n == 2);
    CHECK(db.grams.size() == 3);
    CHECK(db.sample_count == 2);
    CHECK(db.gram_counts.size() == 3);

    std::vector<ngram::NGramSet> more{set_of(2, {{9, 9}})};
    auto grown = classify::train(more, Label::Trojan, 2, &db);
    CHECK(grown.grams.size() == 4);
    CHECK(grown.sample_count == 3);

    CHECK_FAILS(classify::train(more, Label::Worm, 2, &db), "LabelMismatch");
}

TEST_CASE("scan picks the best family and honors the margin") {
    classify::DatabaseMap dbs;
    auto mk = [&](Label label, std::initializer_list<std::initializer_list<uint32_t>> grams) {
        std::vector<ngram::NGramSet> files{set_of(2, grams)};
        dbs[label] = classify::train(files, label, 2);
    };
    mk(Label::Benign, {{50, 50}, {51, 51}, {52, 52}});
    mk(Label::Trojan, {{1, 2}, {2, 3}});
    mk(Label::Worm, {{9, 9}, {8, 8}});

    auto file = set_of(2, {{1, 2}, {2, 3}});
    auto [report, verdict] = classify::scan(file, dbs, Coefficient::Dice, {}, 0.0);
    CHECK(verdict.malicious);
    CHECK(verdict.family == Label::Trojan);
    CHECK(verdict.best_malware_score == 1.0);
    CHECK(verdict.benign_score == 0.0);
    CHECK(report.scores.at(Label::Trojan) == 1.0);
    CHECK(report.scores.at(Label::Worm) == 0.0);

    // a margin the best score cannot clear flips the verdict
    auto [r2, v2] = classify::scan(file, dbs, Coefficient::Dice, {}, 1.0);
    CHECK(!v2.malicious);
    CHECK(!v2.family.has_value());

    // no benign database -> error
    classify::DatabaseMap no_benign;
    no_benign[Label::Trojan] = dbs[Label::Trojan];
    CHECK_FAILS(classify::scan(file, no_benign, Coefficient::Dice, {}, 0.0),
                "MissingBenignDb");
}

TEST_CASE("equal scores break ties in label order") {
    classify::DatabaseMap dbs;
    auto mk = [&](Label label, std::initializer_list<std::initializer_list<uint32_t>> grams) {
        std::vector<ngram::NGramSet> files{set_of(2, grams)};
        dbs[label] = classify::train(files, label, 2);
    };
    mk(Label::Benign, {{50, 50}});
    mk(Label::Worm, {{1, 2}, {7, 7}});
    mk(Label::Virus, {{1, 2}, {8, 8}});

    auto file = set_of(2, {{1, 2}});
    auto [report, verdict] = classify::scan(file, dbs, Coefficient::Dice, {}, 0.0);
    CHECK(report.scores.at(Label::Virus) == report.scores.at(Label::Worm));
    CHECK(verdict.family == Label::Virus); // listed before Worm
}

TEST_CASE("ties with benign stay benign") {
    classify::DatabaseMap dbs;
    std::vector<ngram::NGramSet> same{set_of(2, {{1, 2}})};
    dbs[Label::Benign] = classify::train(same, Label::Benign, 2);
    dbs[Label::Trojan] = classify::train(same, Label::Trojan, 2);
    auto [report, verdict] = classify::scan(set_of(2, {{1, 2}}), dbs, Coefficient::Dice, {}, 0.0);
    CHECK(report.scores.at(Label::Trojan) == report.scores.at(Label::Benign));
    CHECK(!verdict.malicious);
}

TEST_CASE("phase feedback folds misses and false positives back") {
    classify::DatabaseMap dbs;
    std::vector<classify::LabeledSample> train_adds{
        {"t0", Label::Trojan, set_of(3, {{1, 2, 3}, {2, 3, 4}})},
        {"b0", Label::Benign, set_of(3, {{30, 31, 32}})},
    };
    std::vector<classify::LabeledSample> test_set{
        // shares a gram with the trojan db: detected
        {"m1", Label::Trojan, set_of(3, {{1, 2, 3}, {9, 9, 9}})},
        // disjoint from every db: missed, fed back into Trojan
        {"m2", Label::Trojan, set_of(3, {{7, 7, 7}})},
        // shares the trojan gram but is benign: false positive, fed to Benign
        {"b1", Label::Benign, set_of(3, {{2, 3, 4}})},
        // disjoint benign: true negative
        {"b2", Label::Benign, set_of(3, {{40, 41, 42}})},
    };

    auto report = classify::run_phase(1, train_adds, test_set, dbs, Coefficient::Dice, {}, 0.0);
    CHECK(report.phase == 1);
    CHECK(report.detection_rate == doctest::Approx(0.5));
    CHECK(report.false_positive_rate == doctest::Approx(0.5));
    CHECK(report.missed_malware == std::vector<std::string>{"m2"});
    CHECK(report.false_positives == std::vector<std::string>{"b1"});
    CHECK(report.db_size_before.empty()); // databases were created this phase
    CHECK(report.db_size_after.at(Label::Trojan) == 3); // {123,234} + fed-back {777}
    CHECK(report.db_size_after.at(Label::Benign) == 2);

    // every fed-back sample is now fully contained in its database
    for (uint64_t k : test_set[1].set.keys()) CHECK(dbs[Label::Trojan].grams.contains(k));
    for (uint64_t k : test_set[2].set.keys()) CHECK(dbs[Label::Benign].grams.contains(k));

    // an empty test wave reports zero rates, not NaN
    auto quiet = classify::run_phase(2, {}, {}, dbs, Coefficient::Dice, {}, 0.0);
    CHECK(quiet.detection_rate == 0.0);
    CHECK(quiet.false_positive_rate == 0.0);
    CHECK(quiet.db_size_before.at(Label::Trojan) == 3);
}

TEST_CASE("database encode/decode round-trip") {
    std::vector<ngram::NGramSet> files{set_of(3, {{1, 2, 3}, {4, 5, 6}}),
                                       set_of(3, {{1, 2, 3}})};
    auto db = classify::train(files, Label::Backdoor, 3);
    auto text = classify::encode_database(db);
    auto back = classify::decode_database(text);
    CHECK(back.label == db.label);
    CHECK(back.n == db.n);
    CHECK(back.sample_count == db.sample_count);
    CHECK(back.grams == db.grams);
    CHECK(back.gram_counts == db.gram_counts);
}

TEST_CASE("database decode rejects damage") {
    CHECK_FAILS(classify::decode_database(""), "MalformedDatabase");
    CHECK_FAILS(classify::decode_database("unlabel 3 1\n1,2,3 1\n"), "MalformedDatabase");
    CHECK_FAILS(classify::decode_database("trojan x 1\n"), "MalformedDatabase");
    CHECK_FAILS(classify::decode_database("trojan 3 1\n1,2,3\n"), "MalformedDatabase");
    CHECK_FAILS(classify::decode_database("trojan 3 1\n1,2 1\n"), "MalformedDatabase");
    CHECK_FAILS(classify::decode_database("trojan 3 1\n1,2,99999 1\n"), "MalformedDatabase");
}

TEST_CASE("directory save/load round-trip") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "apiseq_dbtest";
    fs::remove_all(dir);

    ngram::ApiIdMap map;
    map.intern("ReadFile");
    map.intern("WriteFile");
    map.intern("CloseFile");
    classify::DatabaseMap dbs;
    std::vector<ngram::NGramSet> files{set_of(3, {{1, 2, 3}})};
    dbs[Label::Trojan] = classify::train(files, Label::Trojan, 3);
    std::vector<ngram::NGramSet> benign{set_of(3, {{3, 2, 1}})};
    dbs[Label::Benign] = classify::train(benign, Label::Benign, 3);

    classify::save_databases(dbs, map, dir.string());
    CHECK(fs::exists(dir / "trojan.3.db"));
    CHECK(fs::exists(dir / "benign.3.db"));
    CHECK(fs::exists(dir / "apimap.txt"));

    ngram::ApiIdMap map2;
    auto back = classify::load_databases(dir.string(), 3, map2);
    CHECK(back.size() == 2);
    CHECK(back.at(Label::Trojan).grams == dbs.at(Label::Trojan).grams);
    CHECK(map2.size() == 3);
    CHECK(map2.name_of(2) == "WriteFile");

    // loading a different n finds no databases but keeps the map
    ngram::ApiIdMap map3;
    CHECK(classify::load_databases(dir.string(), 2, map3).empty());
    CHECK(map3.size() == 3);

    ngram::ApiIdMap map4;
    CHECK_FAILS(classify::load_databases((dir / "nope").string(), 3, map4), "MissingApiMap");

    // a database whose header contradicts its filename is rejected
    {
        std::ofstream bad(dir / "worm.3.db");
        bad << "virus 3 1\n1,2,3 1\n";
    }
    ngram::ApiIdMap map5;
    CHECK_FAILS(classify::load_databases(dir.string(), 3, map5), "MalformedDatabase");
    fs::remove_all(dir);
}
