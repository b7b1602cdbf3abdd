#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <chrono>
#include <thread>

#include "mmslt/mllm.hpp"
#include "mmslt/mllm_http.hpp"
#include "support/tempdir.hpp"

using namespace mmslt;
using testsupport::TempDir;

namespace {

SignVideo glyph_video(const std::string& id, const std::vector<int>& glyphs) {
    std::vector<Image> frames;
    for (int g : glyphs) frames.push_back(toy::render_glyph(g, 32, 1));
    return SignVideo(id, frames, "x", Split::train);
}

// counts concurrent in-flight calls and group starts (rises from idle)
class ProbeClient : public MllmClient {
public:
    std::string describe(const MllmRequest& req) override {
        {
            std::scoped_lock lock(mutex_);
            if (active_ == 0) ++groups_;
            ++active_;
            watermark_ = std::max(watermark_, active_);
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(40));
        std::string text = MockMllmClient::render(req.frame, default_prompt_id);
        {
            std::scoped_lock lock(mutex_);
            --active_;
            ++calls_;
        }
        return text;
    }
    std::size_t call_count() const override { return calls_; }
    int watermark() const { return watermark_; }
    int groups() const { return groups_; }

private:
    mutable std::mutex mutex_;
    int active_{0};
    int watermark_{0};
    int groups_{0};
    std::atomic<std::size_t> calls_{0};
};

}  // namespace

TEST_CASE("prompt registry") {
    SECTION("id 3 returns the registered detailed prompt, twice identically") {
        const std::string a = render_prompt(3);
        const std::string b = render_prompt(3);
        CHECK(a == b);
        CHECK_THAT(a, Catch::Matchers::ContainsSubstring("sign language components"));
        CHECK(prompt_group(3) == "detailed");
    }
    SECTION("groups follow the registry layout") {
        CHECK(prompt_group(1) == "simple");
        CHECK(prompt_group(2) == "simple");
        CHECK(prompt_group(4) == "detailed");
        CHECK(prompt_group(5) == "in-context");
        CHECK(prompt_group(6) == "in-context");
    }
    SECTION("out-of-range ids are rejected") {
        CHECK_THROWS_AS(render_prompt(0), std::invalid_argument);
        CHECK_THROWS_AS(render_prompt(7), std::invalid_argument);
    }
    SECTION("default is prompt 3") { CHECK(default_prompt_id == 3); }
}

TEST_CASE("frame preprocessing for the endpoint") {
    Image big = Image::filled(512, 512, 40);
    Image out = preprocess_frame_for_mllm(big, 256);
    CHECK(out.width == 256);
    CHECK(out.height == 256);
    Image same = Image::filled(256, 256, 10);
    CHECK(preprocess_frame_for_mllm(same, 256).pixels == same.pixels);
    Image rect = Image::filled(210, 260, 90);  // width x height 210x260
    Image sq = preprocess_frame_for_mllm(rect, 256);
    CHECK(sq.width == 256);
    CHECK(sq.height == 256);
    CHECK_THROWS_AS(preprocess_frame_for_mllm(Image{}, 256), std::invalid_argument);
}

TEST_CASE("description generation against the mock client") {
    TempDir dir("gendesc");
    GenerationOptions opt;
    opt.resize_side = 32;
    SignVideo video = glyph_video("v0", {1, 2, 3, 1});

    SECTION("mock output equals the fixed function of (frame, prompt)") {
        DescriptionCache cache(dir / "c.jsonl");
        MockMllmClient client;
        auto set = generate_descriptions(video, 3, client, cache, opt);
        REQUIRE(set.entries.size() == 4);
        for (int t = 0; t < 4; ++t) {
            CHECK(set.entries.at(t) ==
                  MockMllmClient::render(video.frames()[static_cast<std::size_t>(t)], 3));
        }
        CHECK(set.entries.at(0) == set.entries.at(3));  // same glyph, same text
    }

    SECTION("idempotence: second run answers from cache with zero calls") {
        DescriptionCache cache(dir / "c.jsonl");
        MockMllmClient client;
        auto first = generate_descriptions(video, 3, client, cache, opt);
        const auto calls_after_first = client.call_count();
        auto second = generate_descriptions(video, 3, client, cache, opt);
        CHECK(client.call_count() == calls_after_first);
        CHECK(first.entries == second.entries);
    }

    SECTION("cache reload across instances") {
        {
            DescriptionCache cache(dir / "c.jsonl");
            MockMllmClient client;
            generate_descriptions(video, 3, client, cache, opt);
        }
        DescriptionCache cache2(dir / "c.jsonl");
        MockMllmClient client2;
        auto set = generate_descriptions(video, 3, client2, cache2, opt);
        CHECK(client2.call_count() == 0);
        CHECK(set.entries.size() == 4);
    }

    SECTION("a changed frame digest forces regeneration") {
        DescriptionCache cache(dir / "c.jsonl");
        MockMllmClient client;
        generate_descriptions(video, 3, client, cache, opt);
        const auto base_calls = client.call_count();
        SignVideo altered("v0", {toy::render_glyph(9, 32, 1), video.frames()[1], video.frames()[2],
                                 video.frames()[3]},
                          "x", Split::train);
        auto set = generate_descriptions(altered, 3, client, cache, opt);
        CHECK(client.call_count() == base_calls + 1);  // only frame 0 re-requested
        CHECK_THAT(set.entries.at(0), Catch::Matchers::ContainsSubstring("glyph-9"));
    }

    SECTION("20 frames with batch 8 run in ceil(20/8)=3 request groups, <=8 in flight") {
        std::vector<int> glyphs(20);
        for (int i = 0; i < 20; ++i) glyphs[static_cast<std::size_t>(i)] = i % 8;
        SignVideo long_video = glyph_video("v20", glyphs);
        DescriptionCache cache(dir / "c20.jsonl");
        ProbeClient client;
        generate_descriptions(long_video, 3, client, cache, opt);
        CHECK(client.call_count() == 20);
        CHECK(client.watermark() <= 8);
        CHECK(client.groups() == 3);
    }

    SECTION("responses are truncated at the output token cap") {
        class Wordy : public MllmClient {
        public:
            std::string describe(const MllmRequest&) override {
                std::string out;
                for (int i = 0; i < 300; ++i) out += "w" + std::to_string(i) + " ";
                return out;
            }
        } wordy;
        DescriptionCache cache(dir / "cw.jsonl");
        auto set = generate_descriptions(video, 3, wordy, cache, opt);
        CHECK(Vocabulary::tokenize(set.entries.at(0)).size() == 256);
    }

    SECTION("empty model response is an error naming the frame") {
        class Empty : public MllmClient {
        public:
            std::string describe(const MllmRequest&) override { return ""; }
        } empty;
        DescriptionCache cache(dir / "ce.jsonl");
        CHECK_THROWS_AS(generate_descriptions(video, 3, empty, cache, opt), GenerationError);
    }

    SECTION("interrupt then resume equals one uninterrupted run") {
        SignVideo long_video = glyph_video("vr", {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
        // uninterrupted reference
        DescriptionCache ref_cache(dir / "ref.jsonl");
        MockMllmClient ref_client;
        generate_descriptions(long_video, 3, ref_client, ref_cache, opt);
        // interrupted run: transport dies after 5 requests
        DescriptionCache cache(dir / "cr.jsonl");
        MockMllmClient inner;
        FailAfterClient flaky(inner, 5);
        CHECK_THROWS_AS(generate_descriptions(long_video, 3, flaky, cache, opt), GenerationError);
        CHECK(cache.size() > 0);
        CHECK(cache.size() < 12);
        // restart with a healthy client
        MockMllmClient healthy;
        auto set = generate_descriptions(long_video, 3, healthy, cache, opt);
        CHECK(set.entries.size() == 12);
        CHECK(cache.text_map() == ref_cache.text_map());
    }
}

TEST_CASE("http client against a local endpoint") {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::atomic<int> failures_left{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        ++hits;
        if (failures_left.fetch_sub(1) > 0) {
            res.status = 503;
            res.set_content("busy", "text/plain");
            return;
        }
        const auto body = nlohmann::json::parse(req.body);
        const auto& content = body.at("messages").at(0).at("content");
        REQUIRE(content.at(0).at("type") == "text");
        REQUIRE(content.at(1).at("image_url").at("url").get<std::string>().rfind("data:image", 0) == 0);
        nlohmann::json out;
        out["choices"] =
            nlohmann::json::array({{{"message", {{"content", "the signer raises one hand"}}}}});
        res.set_content(out.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&] { server.listen_after_bind(); });
    while (!server.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(5));

    HttpClientConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port);
    cfg.retries = 3;
    cfg.backoff_ms = 5;

    SECTION("round trip") {
        failures_left = 0;
        HttpMllmClient client(cfg);
        MllmRequest req;
        req.prompt = render_prompt(3);
        req.frame = toy::render_glyph(2, 32, 1);
        req.model_id = "test-model";
        CHECK(client.describe(req) == "the signer raises one hand");
    }
    SECTION("retries with backoff then succeeds") {
        failures_left = 2;
        hits = 0;
        HttpMllmClient client(cfg);
        MllmRequest req;
        req.prompt = "p";
        req.frame = toy::render_glyph(2, 32, 1);
        CHECK(client.describe(req) == "the signer raises one hand");
        CHECK(hits == 3);
    }
    SECTION("gives up after the retry budget") {
        failures_left = 100;
        HttpMllmClient client(cfg);
        MllmRequest req;
        req.prompt = "p";
        req.frame = toy::render_glyph(2, 32, 1);
        CHECK_THROWS_WITH(client.describe(req), Catch::Matchers::ContainsSubstring("3 attempts"));
    }

    server.stop();
    server_thread.join();
}

TEST_CASE("gen-desc end to end through the cache file") {
    TempDir dir("cachefile");
    Dataset ds = make_toy_dataset(6, 12, 4, 3);
    DescriptionCache cache(dir / "cache.jsonl");
    MockMllmClient client;
    GenerationOptions opt;
    opt.resize_side = 32;
    for (const auto& v : ds.items) generate_descriptions(v, 3, client, cache, opt);
    // every (video, frame) pair present with non-empty text
    std::size_t frames_total = 0;
    for (const auto& v : ds.items) frames_total += v.frame_count();
    CHECK(cache.size() == frames_total);
    for (const auto& [key, text] : cache.text_map()) CHECK(!text.empty());
}
