#include <fstream>

#include "doctest.h"
#include "lesiongrade/error.hpp"
#include "lesiongrade/mask_io.hpp"
#include "oracles.hpp"

using namespace lesiongrade;
using Kind = MaskFormatError::Kind;

namespace {

Kind kind_of(std::string_view bytes, std::size_t* offset = nullptr) {
    try {
        decode_mask(bytes, LesionClass::MA, "t.pgm");
    } catch (const MaskFormatError& e) {
        if (offset) *offset = e.offset();
        return e.kind();
    }
    FAIL("no error raised");
    return Kind::Io;
}

}  // namespace

TEST_CASE("P5 all background") {
    std::string f = "P5\n3 3\n255\n" + std::string(9, '\0');
    auto m = decode_mask(f, LesionClass::SE, "x");
    CHECK(m.width() == 3);
    CHECK(m.height() == 3);
    CHECK(m.foreground_count() == 0);
    CHECK(m.lesion_class() == LesionClass::SE);
}

TEST_CASE("P2 diagonal") {
    auto m = decode_mask("P2\n2 2\n255\n255 0\n0 255\n", LesionClass::MA, "x");
    CHECK(m.at(0, 0));
    CHECK_FALSE(m.at(0, 1));
    CHECK_FALSE(m.at(1, 0));
    CHECK(m.at(1, 1));
}

TEST_CASE("threshold is strictly above 127") {
    auto m = decode_mask("P2 3 1 255 127 128 200", LesionClass::MA, "x");
    CHECK_FALSE(m.at(0, 0));
    CHECK(m.at(0, 1));
    CHECK(m.at(0, 2));
}

TEST_CASE("header comments are skipped") {
    auto m = decode_mask("P2\n# made by hand\n2 # width then height\n1\n255\n0 255\n", LesionClass::MA, "x");
    CHECK(m.foreground_count() == 1);
    CHECK(m.at(0, 1));
}

TEST_CASE("P5 round trip of a random mask") {
    Rng rng(5);
    auto m = oracle::random_mask(rng, 64, 64, 0.3);
    oracle::TempDir dir("pgm");
    for (auto enc : {PgmEncoding::Binary, PgmEncoding::Ascii}) {
        save_mask(m, dir / "m.pgm", enc);
        auto back = load_mask(dir / "m.pgm", LesionClass::HE);
        CHECK(back == m);
    }
}

TEST_CASE("decode errors carry kind and offset") {
    std::size_t off = 99;
    CHECK(kind_of("P6\n1 1\n255\n\0", &off) == Kind::MalformedHeader);
    CHECK(off == 0);
    CHECK(kind_of("", &off) == Kind::MalformedHeader);
    CHECK(kind_of("P5\n2 x\n255\n", &off) == Kind::MalformedHeader);
    CHECK(off == 5);
    CHECK(kind_of("P5\n2 2\n", &off) == Kind::MalformedHeader);
    CHECK(kind_of("P5\n0 2\n255\n", &off) == Kind::ZeroDimension);
    CHECK(off == 3);
    CHECK(kind_of("P5\n2 0\n255\n", &off) == Kind::ZeroDimension);
    CHECK(off == 5);
    CHECK(kind_of("P5\n1 1\n65535\n\0\0", &off) == Kind::MaxvalTooLarge);
    CHECK(off == 7);
    CHECK(kind_of(std::string("P5\n2 2\n255\n\0\0\0", 14), &off) == Kind::TruncatedPayload);
    CHECK(off == 14);
    CHECK(kind_of("P2\n2 2\n255\n0 0 0\n", &off) == Kind::TruncatedPayload);
    CHECK(kind_of("P2\n2 1\n1\n0 2\n", &off) == Kind::BadSample);
    CHECK(off == 11);
    CHECK(kind_of("P2\n2 1\n255\n0 q\n", &off) == Kind::BadSample);
    CHECK(kind_of(std::string("P5\n2 1\n100\n\x00\xff", 13), &off) == Kind::BadSample);
    CHECK(off == 12);
}

TEST_CASE("error message names file and offset") {
    try {
        decode_mask("P5\n0 2\n255\n", LesionClass::MA, "dir/a.pgm");
        FAIL("expected error");
    } catch (const InputError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("dir/a.pgm") != std::string::npos);
        CHECK(msg.find("byte 3") != std::string::npos);
    }
}

TEST_CASE("missing file is an io error") {
    try {
        load_mask("/nonexistent/zz.pgm", LesionClass::MA);
        FAIL("expected error");
    } catch (const MaskFormatError& e) {
        CHECK(e.kind() == Kind::Io);
        CHECK(std::string(e.what()).find("/nonexistent/zz.pgm") != std::string::npos);
    }
}

TEST_CASE("mask constructor contract") {
    CHECK_THROWS_AS(LesionMask(0, 3, LesionClass::MA), InputError);
    CHECK_THROWS_AS(LesionMask(2, 2, LesionClass::MA, {1, 0, 1}), InputError);
    LesionMask m(2, 1, LesionClass::MA, {0, 7});
    CHECK(m.pixels()[1] == 1);
}

TEST_CASE("manifest") {
    oracle::TempDir dir("manifest");
    const std::string header = "image_id,ma_mask,he_mask,se_mask,ex_mask,dr_grade,dme_grade\n";

    SUBCASE("header only") {
        oracle::spit(dir / "m.csv", header);
        CHECK(load_manifest(dir / "m.csv").empty());
    }
    SUBCASE("round trip and relative paths") {
        std::vector<ManifestRecord> recs(2);
        recs[0].image_id = "a";
        recs[0].mask_paths = {"m/a_MA.pgm", "m/a_HE.pgm", "m/a_SE.pgm", "m/a_EX.pgm"};
        recs[0].grades = GradePair{3, 1};
        recs[1].image_id = "b,with comma";
        recs[1].mask_paths = {"/abs/1.pgm", "2.pgm", "3.pgm", "4.pgm"};
        save_manifest(recs, dir / "m.csv");
        auto back = load_manifest(dir / "m.csv");
        REQUIRE(back.size() == 2);
        CHECK(back[0].image_id == "a");
        CHECK(back[0].grades == std::optional<GradePair>(GradePair{3, 1}));
        CHECK(back[1].image_id == "b,with comma");
        CHECK_FALSE(back[1].grades.has_value());
        CHECK(resolve_mask_path(dir / "m.csv", back[0].mask_paths[0]) == dir / "m/a_MA.pgm");
        CHECK(resolve_mask_path(dir / "m.csv", back[1].mask_paths[0]) == "/abs/1.pgm");
    }
    SUBCASE("dr grade out of range") {
        oracle::spit(dir / "m.csv", header + "a,1,2,3,4,5,0\n");
        CHECK_THROWS_AS(load_manifest(dir / "m.csv"), InputError);
    }
    SUBCASE("half a grade pair") {
        oracle::spit(dir / "m.csv", header + "a,1,2,3,4,2,\n");
        CHECK_THROWS_AS(load_manifest(dir / "m.csv"), InputError);
    }
    SUBCASE("missing column") {
        oracle::spit(dir / "m.csv", "image_id,ma_mask,he_mask,se_mask\na,1,2,3\n");
        CHECK_THROWS_AS(load_manifest(dir / "m.csv"), InputError);
    }
    SUBCASE("duplicate id") {
        oracle::spit(dir / "m.csv", header + "a,1,2,3,4,,\na,1,2,3,4,,\n");
        CHECK_THROWS_AS(load_manifest(dir / "m.csv"), InputError);
    }
}
