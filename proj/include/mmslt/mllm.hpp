#pragma once

// Per-frame description generation against an opaque chat-completions style
// endpoint, with a deterministic mock for desk-scale runs, grouped requests
// (<= 8 in flight), a 256-token output cap, and a resumable JSON Lines cache
// keyed by (video, frame, prompt, model) with a content digest per frame.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmslt/data.hpp"
#include "mmslt/image.hpp"
#include "mmslt/prompts.hpp"
#include "mmslt/rng.hpp"

namespace mmslt {

struct SLDescriptionSet {
    std::string video_id;
    std::map<int, std::string> entries;  // frame index -> description text
    int prompt_id{default_prompt_id};
    std::string model_id;
};

struct CacheEntry {
    std::string video_id;
    int frame_index{0};
    int prompt_id{0};
    std::string model_id;
    std::string frame_digest;
    std::string text;
};

// ---------------------------------------------------------------------------
// cache: JSON Lines, append-only, last write wins per key on load
// ---------------------------------------------------------------------------

class DescriptionCache {
public:
    using Key = std::tuple<std::string, int, int, std::string>;

    explicit DescriptionCache(std::filesystem::path path) : path_(std::move(path)) {
        std::ifstream in(path_);
        if (!in) return;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
                CacheEntry e;
                e.video_id = j.at("video_id").get<std::string>();
                e.frame_index = j.at("frame_index").get<int>();
                e.prompt_id = j.at("prompt_id").get<int>();
                e.model_id = j.at("model_id").get<std::string>();
                e.frame_digest = j.at("frame_digest").get<std::string>();
                e.text = j.at("text").get<std::string>();
                entries_[key_of(e)] = std::move(e);
            } catch (const std::exception& e) {
                throw std::runtime_error("description cache " + path_.string() + " line " +
                                         std::to_string(line_no) + ": " + e.what());
            }
        }
    }

    static Key key_of(const CacheEntry& e) {
        return {e.video_id, e.frame_index, e.prompt_id, e.model_id};
    }

    std::optional<CacheEntry> lookup(const std::string& video_id, int frame_index, int prompt_id,
                                     const std::string& model_id) const {
        std::scoped_lock lock(mutex_);
        auto it = entries_.find(Key{video_id, frame_index, prompt_id, model_id});
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    // append + flush so an interrupted run keeps everything written so far
    void append(const CacheEntry& e) {
        std::scoped_lock lock(mutex_);
        if (!out_.is_open()) {
            std::filesystem::create_directories(path_.parent_path().empty()
                                                    ? std::filesystem::path(".")
                                                    : path_.parent_path());
            out_.open(path_, std::ios::app);
            if (!out_) throw std::runtime_error("cannot open cache for append: " + path_.string());
        }
        nlohmann::json j;
        j["video_id"] = e.video_id;
        j["frame_index"] = e.frame_index;
        j["prompt_id"] = e.prompt_id;
        j["model_id"] = e.model_id;
        j["frame_digest"] = e.frame_digest;
        j["text"] = e.text;
        out_ << j.dump() << "\n";
        out_.flush();
        entries_[key_of(e)] = e;
    }

    std::size_t size() const {
        std::scoped_lock lock(mutex_);
        return entries_.size();
    }

    // key -> text view, used by tests and the resumability check
    std::map<Key, std::string> text_map() const {
        std::scoped_lock lock(mutex_);
        std::map<Key, std::string> out;
        for (const auto& [k, e] : entries_) out[k] = e.text;
        return out;
    }

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::map<Key, CacheEntry> entries_;
    std::ofstream out_;
};

// ---------------------------------------------------------------------------
// clients
// ---------------------------------------------------------------------------

struct MllmRequest {
    std::string prompt;
    Image frame;  // already preprocessed
    std::string model_id;
    int max_tokens{256};
};

class MllmClient {
public:
    virtual ~MllmClient() = default;
    // returns the generated description; throws on transport/model failure
    virtual std::string describe(const MllmRequest& req) = 0;
    virtual std::size_t call_count() const { return 0; }
};

inline Image preprocess_frame_for_mllm(const Image& frame, int target_side = 256) {
    if (frame.empty()) throw std::invalid_argument("preprocess_frame_for_mllm: empty frame");
    return square_resize(frame, target_side);
}

inline std::string truncate_tokens(const std::string& text, int max_tokens) {
    std::istringstream in(text);
    std::string tok;
    std::string out;
    int n = 0;
    while (n < max_tokens && in >> tok) {
        if (n > 0) out += ' ';
        out += tok;
        ++n;
    }
    return out;
}

// Deterministic mock. Toy glyph frames are described through a fixed phrase
// table keyed by the glyph index read back from the pixels, so descriptions
// are informative for the toy task; any other frame maps to a digest phrase.
class MockMllmClient : public MllmClient {
public:
    std::string describe(const MllmRequest& req) override {
        calls_.fetch_add(1, std::memory_order_relaxed);
        return render(req.frame, req.prompt.empty() ? default_prompt_id : prompt_id_of(req.prompt));
    }

    static std::string render(const Image& frame, int prompt_id) {
        static const char* hand_shapes[] = {"a flat hand", "a closed fist", "a hooked index finger",
                                            "spread fingers"};
        static const char* positions[] = {"at chest height", "near the chin", "beside the shoulder",
                                          "in front of the forehead"};
        static const char* movements[] = {"moving outward", "held still", "circling slowly",
                                          "tilting sideways"};
        static const char* faces[] = {"with raised eyebrows", "with pursed lips",
                                      "with a neutral gaze", "with an open mouth"};
        std::string body;
        const int glyph = toy::read_glyph_index(frame);
        if (glyph >= 0) {
            body = "glyph-" + std::to_string(glyph) + ": the signer forms " +
                   hand_shapes[glyph % 4] + " " + positions[(glyph / 4) % 4] + " " +
                   movements[(glyph / 16) % 4] + " " + faces[(glyph / 64) % 4];
        } else {
            body = "frame-" + hex64(frame.digest()) + ": the signer holds both hands mid-motion";
        }
        if (prompt_id != default_prompt_id) {
            body = "variant-" + std::to_string(prompt_id) + " " + body;
        }
        return body;
    }

    std::size_t call_count() const override { return calls_.load(std::memory_order_relaxed); }

private:
    static int prompt_id_of(const std::string& prompt) {
        for (const auto& p : prompt_registry()) {
            if (prompt == p.text) return p.id;
        }
        return default_prompt_id;
    }

    std::atomic<std::size_t> calls_{0};
};

// test hook: wraps a client and fails every request after the first n
class FailAfterClient : public MllmClient {
public:
    FailAfterClient(MllmClient& inner, std::size_t allow) : inner_(inner), allow_(allow) {}
    std::string describe(const MllmRequest& req) override {
        if (served_.fetch_add(1, std::memory_order_relaxed) >= allow_) {
            throw std::runtime_error("injected transport failure");
        }
        return inner_.describe(req);
    }
    std::size_t call_count() const override { return inner_.call_count(); }

private:
    MllmClient& inner_;
    std::size_t allow_;
    std::atomic<std::size_t> served_{0};
};

// ---------------------------------------------------------------------------
// generation
// ---------------------------------------------------------------------------

struct GenerationOptions {
    std::string model_id{"mock-mllm"};
    int batch_frames{8};      // request group size
    int max_tokens{256};      // output cap
    int resize_side{256};     // frame side fed to the endpoint
};

class GenerationError : public std::runtime_error {
public:
    GenerationError(std::string video_id, int frame_index, const std::string& why)
        : std::runtime_error("description generation failed for video " + video_id + " frame " +
                             std::to_string(frame_index) + ": " + why),
          video_id(std::move(video_id)),
          frame_index(frame_index) {}
    std::string video_id;
    int frame_index;
};

inline SLDescriptionSet generate_descriptions(const SignVideo& video, int prompt_id,
                                              MllmClient& client, DescriptionCache& cache,
                                              const GenerationOptions& opt = {}) {
    const std::string prompt = render_prompt(prompt_id);
    const auto& frames = video.frames();
    if (frames.empty()) throw std::invalid_argument("generate_descriptions: video has no frames");

    SLDescriptionSet out;
    out.video_id = video.id;
    out.prompt_id = prompt_id;
    out.model_id = opt.model_id;

    std::vector<std::string> digests(frames.size());
    std::vector<int> missing;
    for (std::size_t t = 0; t < frames.size(); ++t) {
        digests[t] = hex64(frames[t].digest());
        auto hit = cache.lookup(video.id, static_cast<int>(t), prompt_id, opt.model_id);
        if (hit.has_value() && hit->frame_digest == digests[t]) {
            out.entries[static_cast<int>(t)] = hit->text;
        } else {
            missing.push_back(static_cast<int>(t));
        }
    }

    for (std::size_t group_start = 0; group_start < missing.size();
         group_start += static_cast<std::size_t>(opt.batch_frames)) {
        const std::size_t group_end =
            std::min(missing.size(), group_start + static_cast<std::size_t>(opt.batch_frames));
        std::vector<std::pair<int, std::future<std::string>>> inflight;
        for (std::size_t i = group_start; i < group_end; ++i) {
            const int t = missing[i];
            inflight.emplace_back(t, std::async(std::launch::async, [&client, &prompt, &frames, &opt, t] {
                                      MllmRequest req;
                                      req.prompt = prompt;
                                      req.frame = preprocess_frame_for_mllm(
                                          frames[static_cast<std::size_t>(t)], opt.resize_side);
                                      req.model_id = opt.model_id;
                                      req.max_tokens = opt.max_tokens;
                                      return client.describe(req);
                                  }));
        }
        // join in frame order: successes are cached, first failure reported
        std::optional<GenerationError> first_error;
        for (auto& [t, fut] : inflight) {
            try {
                std::string text = truncate_tokens(fut.get(), opt.max_tokens);
                if (text.empty()) throw std::runtime_error("empty model response");
                if (!first_error.has_value()) {
                    CacheEntry e{video.id, t, prompt_id, opt.model_id,
                                 digests[static_cast<std::size_t>(t)], text};
                    cache.append(e);
                    out.entries[t] = std::move(text);
                }
            } catch (const std::exception& e) {
                if (!first_error.has_value()) first_error.emplace(video.id, t, e.what());
            }
        }
        if (first_error.has_value()) throw *first_error;
    }
    return out;
}

}  // namespace mmslt
