#include "apiseq/disasm.hpp"

#include "helpers/builders.hpp"
#include "helpers/checks.hpp"
#include "helpers/pe_golden.hpp"

#include <doctest.h>

using namespace apiseq;
using isa::OpKind;
using testutil::op;

TEST_CASE("linear listing decodes to the first junk byte") {
    auto img = testutil::image_of(
        {op(OpKind::Compute), op(OpKind::ApiCall, 1), op(OpKind::Halt)},
        0, testutil::small_api_map());
    img.code.push_back(0xEE); // trailing garbage
    img.code.resize(img.code.size() + 5, 0);

    auto listing = disasm::disassemble_linear(img);
    CHECK(listing.mode == disasm::ListingMode::Linear);
    REQUIRE(listing.instructions.size() == 3);
    CHECK(listing.instructions.at(6).api == "Api1");
    CHECK(listing.entry == 0);
}

TEST_CASE("recursive listing follows reachable code only") {
    // 0: Jcc 18; 6: Halt; 12: unreachable ApiCall; 18: Halt
    auto img = testutil::image_of({op(OpKind::Jcc, 18), op(OpKind::Halt),
                                   op(OpKind::ApiCall, 1), op(OpKind::Halt)},
                                  0, testutil::small_api_map());
    auto listing = disasm::disassemble_recursive(img);
    CHECK(listing.instructions.size() == 3);
    CHECK(!listing.contains(12));
    CHECK(listing.contains(18));
}

TEST_CASE("recursive listing starts at a nonzero entry") {
    auto img = testutil::image_of({op(OpKind::ApiCall, 1), op(OpKind::Halt),
                                   op(OpKind::Jmp, 0)},
                                  12, testutil::small_api_map());
    auto listing = disasm::disassemble_recursive(img);
    CHECK(listing.entry == 12);
    CHECK(listing.instructions.size() == 3); // 12 -> 0 -> 6
}

TEST_CASE("junk at a branch target ends that branch only") {
    auto img = testutil::image_of({op(OpKind::Jcc, 6), op(OpKind::Halt)});
    img.code[6] = 0xEE; // target now junk
    auto listing = disasm::disassemble_recursive(img);
    CHECK(listing.instructions.size() == 1);
    CHECK(listing.contains(0));
}

TEST_CASE("targets overlapping listed instructions are dropped") {
    auto img = testutil::image_of({op(OpKind::Jcc, 3), op(OpKind::Halt)});
    auto listing = disasm::disassemble_recursive(img);
    CHECK(!listing.contains(3));
    CHECK(listing.contains(0));
    CHECK(listing.contains(6));
}

TEST_CASE("entry past the code fails") {
    auto img = testutil::image_of({op(OpKind::Halt)});
    img.entry_point = 600;
    CHECK_FAILS(disasm::disassemble_recursive(img), "EntryOutOfRange");
}

TEST_CASE("recursive listings are sub-listings of linear ones") {
    auto g = testutil::rng(303);
    for (int i = 0; i < 200; ++i) {
        auto img = testutil::random_program(g);
        img.entry_point = 0;
        auto lin = disasm::disassemble_linear(img);
        auto rec = disasm::disassemble_recursive(img);
        CHECK(lin.instructions.size() * 6 == img.code.size()); // no junk generated
        for (const auto& [addr, li] : rec.instructions) {
            REQUIRE(lin.contains(addr));
            CHECK(lin.instructions.at(addr) == li);
        }
    }
}

TEST_CASE("out-of-range calls resolve through the import table") {
    auto table = pe::parse_imports(testutil::golden_pe());
    auto img = testutil::image_of({op(OpKind::Call, 0x140000 + 0x5234), op(OpKind::Halt)});
    disasm::ResolveOptions ro;
    ro.imports = &table;

    auto listing = disasm::disassemble_recursive(img, ro);
    REQUIRE(listing.contains(0));
    CHECK(listing.instructions.at(0).instr.kind == OpKind::ApiCall);
    CHECK(listing.instructions.at(0).api == "CreateFileA");
    CHECK(listing.contains(6)); // rewritten call falls through

    // a whitelist without the name keeps the call opaque
    pe::ApiDatabase db;
    db.names.insert("ExitProcess");
    ro.known = &db;
    auto filtered = disasm::disassemble_recursive(img, ro);
    CHECK(filtered.instructions.at(0).instr.kind == OpKind::ApiCall);
    CHECK(!filtered.instructions.at(0).api.has_value());
}

TEST_CASE("out-of-range calls without an import hit stay junk") {
    auto table = pe::parse_imports(testutil::golden_pe());
    auto img = testutil::image_of({op(OpKind::Call, 0x140000 + 0x9999), op(OpKind::Halt)});
    disasm::ResolveOptions ro;
    ro.imports = &table;
    auto listing = disasm::disassemble_recursive(img, ro);
    CHECK(listing.instructions.empty());

    // without any import table the same call is junk too
    auto plain = disasm::disassemble_recursive(img);
    CHECK(plain.instructions.empty());
}

TEST_CASE("mini fall-through is fixed width, ingested fall-through is next listed") {
    auto img = testutil::image_of({op(OpKind::Compute), op(OpKind::Halt)});
    auto mini = disasm::disassemble_recursive(img);
    CHECK(mini.fall_through_of(0) == 6u);
    CHECK(mini.fall_through_of(6) == 12u); // fixed width even past the end

    auto ingested = disasm::parse_ndif("0000 SEQ\n0008 JCC 0000\n0013 HALT\n");
    CHECK(ingested.fall_through_of(0x0) == 0x8u);
    CHECK(ingested.fall_through_of(0x8) == 0x13u);
    CHECK(!ingested.fall_through_of(0x13).has_value());
}

TEST_CASE("ndif parses kinds, targets and api names") {
    auto listing = disasm::parse_ndif(
        "# comment line\n"
        "0010 APICALL API=ReadFile   # resolved call\n"
        "0000 SEQ\n"
        "0006 JCC 0010\n"
        "0016 CALL 0000\n"
        "001C RET\n");
    CHECK(listing.mode == disasm::ListingMode::Ingested);
    CHECK(listing.entry == 0); // lowest address, not first line
    CHECK(listing.instructions.size() == 5);
    CHECK(listing.instructions.at(0x6).instr.kind == OpKind::Jcc);
    CHECK(listing.instructions.at(0x6).instr.taken);
    CHECK(listing.instructions.at(0x6).instr.operand == 0x10);
    CHECK(listing.instructions.at(0x10).api == "ReadFile");
    CHECK(listing.instructions.at(0x1C).instr.kind == OpKind::Ret);
}

TEST_CASE("ndif rejects malformed lines") {
    CHECK_FAILS(disasm::parse_ndif("0000\n"), "SyntaxError");
    CHECK_FAILS(disasm::parse_ndif("0000 WAT\n"), "SyntaxError");
    CHECK_FAILS(disasm::parse_ndif("000G SEQ\n"), "SyntaxError");
    CHECK_FAILS(disasm::parse_ndif("0000 JMP\n"), "SyntaxError");
    CHECK_FAILS(disasm::parse_ndif("0000 JMP 00ZZ\n"), "SyntaxError");
    CHECK_FAILS(disasm::parse_ndif("0000 RET 0006\n"), "SyntaxError");
    CHECK_FAILS(disasm::parse_ndif("0000 SEQ API=ReadFile\n"), "SyntaxError");
    CHECK_FAILS(disasm::parse_ndif("0000 APICALL API=\n"), "SyntaxError");
    CHECK_FAILS(disasm::parse_ndif("0000 SEQ\n0000 HALT\n"), "DuplicateAddress");
}

TEST_CASE("emit/parse is a fixpoint") {
    auto g = testutil::rng(304);
    for (int i = 0; i < 100; ++i) {
        auto img = testutil::random_program(g);
        auto listing = disasm::disassemble_recursive(img);
        std::string text = disasm::emit_ndif(listing);
        auto parsed = disasm::parse_ndif(text);
        CHECK(disasm::emit_ndif(parsed) == text);
        CHECK(parsed.instructions.size() == listing.instructions.size());
    }
}

TEST_CASE("emit uses the listing format") {
    auto img = testutil::image_of(
        {op(OpKind::ApiCall, 1), op(OpKind::Jcc, 0, false), op(OpKind::Halt)},
        0, testutil::small_api_map());
    auto listing = disasm::disassemble_recursive(img);
    CHECK(disasm::emit_ndif(listing) ==
          "0000 APICALL API=Api1\n0006 JCC 0000\n000C HALT\n");
}
