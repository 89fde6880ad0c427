#include "apiseq/features.hpp"

#include "helpers/builders.hpp"
#include "helpers/checks.hpp"

#include <doctest.h>

#include <string>
#include <vector>

using namespace apiseq;

TEST_CASE("intern hands out dense ids from 1") {
    ngram::ApiIdMap map;
    CHECK(map.intern("ReadFile") == 1);
    CHECK(map.intern("WriteFile") == 2);
    CHECK(map.intern("ReadFile") == 1); // stable
    CHECK(map.size() == 2);
    CHECK(map.lookup("WriteFile") == 2u);
    CHECK(!map.lookup("CloseFile").has_value());
    CHECK(map.name_of(1) == "ReadFile");
    CHECK_FAILS(map.name_of(0), "UnknownApiId");
    CHECK_FAILS(map.name_of(3), "UnknownApiId");
}

TEST_CASE("api map save/load round-trip") {
    ngram::ApiIdMap map;
    map.intern("A");
    map.intern("B");
    map.intern("C");
    std::string text = map.save();
    CHECK(text == "A\nB\nC\n");
    auto back = ngram::ApiIdMap::load(text);
    CHECK(back.size() == 3);
    CHECK(back.lookup("B") == 2u);
    auto crlf = ngram::ApiIdMap::load("A\r\nB\r\n");
    CHECK(crlf.lookup("B") == 2u);
    CHECK_FAILS(ngram::ApiIdMap::load("A\n\nB\n"), "MalformedApiMap");
    CHECK_FAILS(ngram::ApiIdMap::load("A\nB\nA\n"), "MalformedApiMap");
}

TEST_CASE("id space is capped at 65535") {
    ngram::ApiIdMap map;
    for (uint32_t i = 0; i < 0xFFFF; ++i) map.intern("api_" + std::to_string(i));
    CHECK(map.size() == 0xFFFF);
    CHECK_FAILS(map.intern("one_too_many"), "IdSpaceExhausted");
}

TEST_CASE("gram pack/unpack round-trips") {
    for (int n : {2, 3, 4}) {
        ngram::NGram gram;
        gram.n = static_cast<uint8_t>(n);
        uint32_t vals[] = {1, 0xFFFF, 0x1234, 7};
        for (int k = 0; k < n; ++k) gram.ids[static_cast<size_t>(k)] = vals[k];
        auto back = ngram::NGram::unpack(gram.pack(), n);
        CHECK(back == gram);
    }
    // lexicographic id order survives packing
    ngram::NGram a, b;
    a.n = b.n = 2;
    a.ids = {1, 2, 0, 0};
    b.ids = {1, 3, 0, 0};
    CHECK(a.pack() < b.pack());
}

TEST_CASE("gram size is validated") {
    std::vector<uint32_t> seq{1, 2, 3};
    CHECK_FAILS(ngram::grams_of(seq, 1), "GramSizeOutOfRange");
    CHECK_FAILS(ngram::grams_of(seq, 5), "GramSizeOutOfRange");
    CHECK_FAILS(ngram::grams_of(seq, 0), "GramSizeOutOfRange");
    CHECK_FAILS(ngram::NGramSet::from_keys(7, {}), "GramSizeOutOfRange");
}

TEST_CASE("sliding windows per sequence") {
    std::vector<uint32_t> seq{5, 6, 7, 8};
    auto grams = ngram::grams_of(seq, 2);
    REQUIRE(grams.size() == 3);
    CHECK(grams[0].ids == std::array<uint32_t, 4>{5, 6, 0, 0});
    CHECK(grams[1].ids == std::array<uint32_t, 4>{6, 7, 0, 0});
    CHECK(grams[2].ids == std::array<uint32_t, 4>{7, 8, 0, 0});
    CHECK(ngram::grams_of(std::vector<uint32_t>{1}, 2).empty());
    CHECK(ngram::grams_of(std::vector<uint32_t>{}, 4).empty());
}

TEST_CASE("1000 random sequences have exactly max(0, L-n+1) windows") {
    auto g = testutil::rng(606);
    for (int i = 0; i < 1000; ++i) {
        size_t len = testutil::pick(g, 0, 12);
        std::vector<uint32_t> seq;
        for (size_t k = 0; k < len; ++k)
            seq.push_back(static_cast<uint32_t>(testutil::pick(g, 1, 9)));
        for (int n : {2, 3, 4}) {
            auto grams = ngram::grams_of(seq, n);
            size_t expect = seq.size() + 1 >= static_cast<size_t>(n)
                                ? seq.size() + 1 - static_cast<size_t>(n)
                                : 0;
            CHECK(grams.size() == expect);
        }
    }
}

TEST_CASE("from_keys sorts, dedups, and is idempotent") {
    std::vector<uint64_t> keys;
    for (uint64_t k : {9, 3, 3, 7, 9, 1}) {
        ngram::NGram gram;
        gram.n = 2;
        gram.ids = {static_cast<uint32_t>(k), 1, 0, 0};
        keys.push_back(gram.pack());
    }
    auto set = ngram::NGramSet::from_keys(2, keys);
    CHECK(set.size() == 4);
    CHECK(std::is_sorted(set.keys().begin(), set.keys().end()));
    auto again = ngram::NGramSet::from_keys(
        2, std::vector<uint64_t>(set.keys().begin(), set.keys().end()));
    CHECK(again == set);
    CHECK(set.contains(keys[0]));
    ngram::NGram missing;
    missing.n = 2;
    missing.ids = {100, 100, 0, 0};
    CHECK(!set.contains(missing.pack()));
}

TEST_CASE("absorb unions keys and adopts n") {
    auto g = testutil::rng(607);
    auto a = testutil::random_gram_set(g, 3, 20);
    auto b = testutil::random_gram_set(g, 3, 20);
    ngram::NGramSet acc;
    acc.absorb(a); // n adopted from the first absorbed set
    CHECK(acc.n() == 3);
    acc.absorb(b);
    for (uint64_t k : a.keys()) CHECK(acc.contains(k));
    for (uint64_t k : b.keys()) CHECK(acc.contains(k));
    CHECK(acc.size() <= a.size() + b.size());
    CHECK(std::is_sorted(acc.keys().begin(), acc.keys().end()));

    auto wrong = testutil::random_gram_set(g, 2, 5);
    CHECK_FAILS(acc.absorb(wrong), "GramSizeMismatch");
}

TEST_CASE("file gram sets never cross path boundaries") {
    ngram::ApiIdMap map;
    std::vector<paths::ApiPath> file_paths(2);
    file_paths[0].apis = {"A", "B"};
    file_paths[1].apis = {"C", "D"};
    auto set = ngram::gram_set_of_file(file_paths, map, 2);
    REQUIRE(set.size() == 2);
    auto grams = set.grams();
    CHECK(grams[0].ids == std::array<uint32_t, 4>{map.intern("A"), map.intern("B"), 0, 0});
    CHECK(grams[1].ids == std::array<uint32_t, 4>{map.intern("C"), map.intern("D"), 0, 0});
    CHECK(set.source_path_count() == 2);
    CHECK(set.total_gram_occurrences() == 2);
    CHECK(set.n() == 2);
}

TEST_CASE("duplicate windows dedup but occurrences accumulate") {
    ngram::ApiIdMap map;
    std::vector<paths::ApiPath> file_paths(1);
    file_paths[0].apis = {"A", "B", "A", "B", "A"};
    auto set = ngram::gram_set_of_file(file_paths, map, 2);
    CHECK(set.size() == 2); // AB and BA
    CHECK(set.total_gram_occurrences() == 4);
}

TEST_CASE("gram dump format") {
    ngram::ApiIdMap map;
    std::vector<paths::ApiPath> file_paths(1);
    file_paths[0].apis = {"A", "B", "C"};
    auto set = ngram::gram_set_of_file(file_paths, map, 3);
    CHECK(ngram::dump_grams(set) == "1,2,3\n");
}
