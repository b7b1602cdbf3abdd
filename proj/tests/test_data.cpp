#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "mmslt/augment.hpp"
#include "mmslt/data.hpp"
#include "support/tempdir.hpp"

using namespace mmslt;
using testsupport::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_lines(const std::filesystem::path& p, const std::vector<std::string>& lines) {
    std::ofstream out(p);
    for (const auto& l : lines) out << l << "\n";
}

}  // namespace

TEST_CASE("vocabulary basics") {
    Vocabulary v = Vocabulary::from_sentences({"der wind weht", "der regen"});
    CHECK(v.size() == 4 + 4);  // four reserved + der, regen, weht, wind
    const std::set<int> reserved{Vocabulary::pad_id, Vocabulary::bos_id, Vocabulary::eos_id,
                                 Vocabulary::unk_id};
    CHECK(reserved.size() == 4);
    SECTION("round trip for in-vocab text") {
        const std::string s = "der wind weht";
        CHECK(v.decode(v.encode(s)) == s);
    }
    SECTION("unknown tokens map to <UNK>") {
        std::size_t unk = 0;
        auto ids = v.encode("der sturm", &unk);
        CHECK(unk == 1);
        CHECK(ids[1] == Vocabulary::unk_id);
    }
}

TEST_CASE("manifest loading") {
    TempDir dir("manifest");
    SECTION("empty file gives an empty dataset") {
        write_lines(dir / "m.jsonl", {});
        Dataset ds = load_manifest(dir / "m.jsonl");
        CHECK(ds.items.empty());
    }
    SECTION("two well-formed lines keep order and ids") {
        write_lines(dir / "m.jsonl",
                    {R"({"id":"a","frames":["f0.pgm"],"text":"hallo welt","split":"train"})",
                     R"({"id":"b","frames":["f1.pgm","f2.pgm"],"text":"guten tag","split":"dev"})"});
        Dataset ds = load_manifest(dir / "m.jsonl");
        REQUIRE(ds.items.size() == 2);
        CHECK(ds.items[0].id == "a");
        CHECK(ds.items[1].id == "b");
        CHECK(ds.items[1].frame_count() == 2);
        CHECK(ds.items[1].split == Split::dev);
        // vocab learned from the train split only
        CHECK(ds.vocab.contains("hallo"));
        CHECK_FALSE(ds.vocab.contains("guten"));
    }
    SECTION("a line missing \"text\" is reported with its number") {
        write_lines(dir / "m.jsonl",
                    {R"({"id":"a","frames":["f.pgm"],"text":"x","split":"train"})",
                     R"({"id":"b","frames":["f.pgm"],"split":"train"})"});
        CHECK_THROWS_WITH(load_manifest(dir / "m.jsonl"),
                          Catch::Matchers::ContainsSubstring("line 2") &&
                              Catch::Matchers::ContainsSubstring("text"));
    }
    SECTION("missing file") {
        CHECK_THROWS_AS(load_manifest(dir / "absent.jsonl"), std::runtime_error);
    }
    SECTION("duplicate ids rejected") {
        write_lines(dir / "m.jsonl",
                    {R"({"id":"a","frames":["f.pgm"],"text":"x","split":"train"})",
                     R"({"id":"a","frames":["f.pgm"],"text":"y","split":"train"})"});
        CHECK_THROWS_WITH(load_manifest(dir / "m.jsonl"),
                          Catch::Matchers::ContainsSubstring("duplicate"));
    }
    SECTION("missing frame file surfaces on first access") {
        write_lines(dir / "m.jsonl",
                    {R"({"id":"a","frames":["absent.pgm"],"text":"x","split":"train"})"});
        Dataset ds = load_manifest(dir / "m.jsonl");
        CHECK_THROWS_AS(ds.items[0].frames(), std::runtime_error);
    }
}

TEST_CASE("toy dataset generation") {
    SECTION("determinism: identical args give byte-identical output") {
        TempDir d1("toy1"), d2("toy2");
        write_dataset(make_toy_dataset(30, 20, 6, 7), d1.path());
        write_dataset(make_toy_dataset(30, 20, 6, 7), d2.path());
        CHECK(slurp(d1 / "manifest.jsonl") == slurp(d2 / "manifest.jsonl"));
        Dataset ds = load_manifest(d1 / "manifest.jsonl");
        REQUIRE(!ds.items.empty());
        const auto rel = std::filesystem::relative(ds.items[0].frame_paths[0], d1.path());
        CHECK(slurp(d1.path() / rel) == slurp(d2.path() / rel));
    }
    SECTION("one glyph frame per target token") {
        Dataset ds = make_toy_dataset(20, 20, 6, 3);
        for (const auto& v : ds.items) {
            CHECK(v.frame_count() == Vocabulary::tokenize(v.text).size());
        }
    }
    SECTION("contract violations") {
        CHECK_THROWS_AS(make_toy_dataset(10, 3, 6, 1), std::invalid_argument);
        CHECK_THROWS_AS(make_toy_dataset(10, 20, 0, 1), std::invalid_argument);
    }
    SECTION("80/10/10 split") {
        Dataset ds = make_toy_dataset(200, 20, 6, 7);
        CHECK(ds.split_items(Split::train).size() == 160);
        CHECK(ds.split_items(Split::dev).size() == 20);
        CHECK(ds.split_items(Split::test).size() == 20);
    }
    SECTION("glyph index strip reads back") {
        for (int id : {0, 1, 7, 15}) {
            Image im = toy::render_glyph(id, 32, 99);
            CHECK(toy::read_glyph_index(im) == id);
        }
    }
    SECTION("round trip: detokenize(tokenize(text)) == text for every item") {
        Dataset ds = make_toy_dataset(50, 20, 6, 11);
        for (const auto& v : ds.items) {
            CHECK(ds.vocab.decode(ds.vocab.encode(v.text)) == v.text);
        }
    }
}

TEST_CASE("collate") {
    Dataset ds;
    ds.vocab = Vocabulary::from_sentences({"a b c d e"});
    std::vector<Image> f3(3, Image::filled(8, 8, 0));
    std::vector<Image> f5(5, Image::filled(8, 8, 0));
    ds.items.emplace_back("v0", f3, "a b c", Split::train);
    ds.items.emplace_back("v1", f5, "a b c d e", Split::train);

    SECTION("single item: all-true masks") {
        Batch b = collate({&ds.items[0]}, ds.vocab);
        CHECK(b.t_max == 3);
        CHECK(ag::mask_count(b.frame_masks[0]) == 3);
        CHECK(ag::mask_count(b.token_masks[0]) == 4);  // 3 tokens + <EOS>
    }
    SECTION("padding arithmetic for mixed lengths") {
        Batch b = collate({&ds.items[0], &ds.items[1]}, ds.vocab);
        CHECK(b.t_max == 5);
        CHECK(b.tbar_max == 6);
        CHECK(ag::mask_count(b.frame_masks[0]) == 3);
        CHECK(ag::mask_count(b.frame_masks[1]) == 5);
        // un-padding recovers the original token ids
        std::vector<int> row0;
        for (std::size_t t = 0; t < b.token_ids[0].size(); ++t) {
            if (b.token_masks[0][t]) row0.push_back(b.token_ids[0][t]);
        }
        auto expect = ds.vocab.encode("a b c");
        expect.push_back(Vocabulary::eos_id);
        CHECK(row0 == expect);
        CHECK(b.token_ids[0].back() == Vocabulary::pad_id);
    }
    SECTION("unknown token becomes <UNK> and is counted") {
        SignVideo v("v2", f3, "a b zzz", Split::train);
        Batch b = collate({&v}, ds.vocab);
        CHECK(b.unk_count == 1);
        CHECK(b.token_ids[0][2] == Vocabulary::unk_id);
    }
    SECTION("empty batch rejected") {
        CHECK_THROWS_AS(collate({}, ds.vocab), std::invalid_argument);
    }
}

TEST_CASE("video-level augmentation") {
    Rng rng(5);
    std::vector<Image> frames;
    for (int i = 0; i < 3; ++i) frames.push_back(toy::render_glyph(i, 32, 1));

    SECTION("p=0 is the identity") {
        Rng r(1);
        auto out = augment_video(frames, 0.0, r);
        REQUIRE(out.size() == frames.size());
        CHECK(out[0].pixels == frames[0].pixels);
    }
    SECTION("p=1 with a fixed rng is deterministic") {
        Rng r1(42), r2(42);
        auto o1 = augment_video(frames, 1.0, r1);
        auto o2 = augment_video(frames, 1.0, r2);
        for (std::size_t i = 0; i < o1.size(); ++i) CHECK(o1[i].pixels == o2[i].pixels);
    }
    SECTION("all frames share the same transform") {
        // identical input frames must stay identical after augmentation
        std::vector<Image> same(4, frames[0]);
        Rng r(7);
        auto out = augment_video(same, 1.0, r);
        for (std::size_t i = 1; i < out.size(); ++i) CHECK(out[i].pixels == out[0].pixels);
    }
}

TEST_CASE("image io and geometry") {
    TempDir dir("img");
    Image im = toy::render_glyph(4, 32, 1);
    write_pgm(dir / "x.pgm", im);
    Image back = read_pgm(dir / "x.pgm");
    CHECK(back.pixels == im.pixels);
    Image up = square_resize(im, 64);
    CHECK(up.width == 64);
    Image same = square_resize(im, 32);
    CHECK(same.pixels == im.pixels);
    Image rect = resize(im, 21, 26);
    Image sq = square_resize(rect, 25);
    CHECK(sq.width == 25);
    CHECK(sq.height == 25);
}
