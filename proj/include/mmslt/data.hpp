#pragma once

// Datasets and manifests. A SignVideo is an ordered frame sequence plus its
// target sentence; frames live in image files and load lazily. The toy
// generator renders one glyph frame per target token so the visual-to-text
// mapping is learnable at desk scale.

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmslt/autograd.hpp"
#include "mmslt/image.hpp"
#include "mmslt/rng.hpp"

namespace mmslt {

enum class Split { train, dev, test };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        default: return "test";
    }
}

inline Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "dev") return Split::dev;
    if (s == "test") return Split::test;
    throw std::runtime_error("unknown split: " + s);
}

// ---------------------------------------------------------------------------
// Vocabulary: whitespace tokens <-> ids, reserved ids 0..3
// ---------------------------------------------------------------------------

class Vocabulary {
public:
    static constexpr int pad_id = 0;
    static constexpr int bos_id = 1;
    static constexpr int eos_id = 2;
    static constexpr int unk_id = 3;

    Vocabulary() : tokens_{"<PAD>", "<BOS>", "<EOS>", "<UNK>"} {
        for (std::size_t i = 0; i < tokens_.size(); ++i) ids_[tokens_[i]] = static_cast<int>(i);
    }

    // builds the table from sentences; tokens sorted for reproducibility
    static Vocabulary from_sentences(const std::vector<std::string>& sentences) {
        std::set<std::string> uniq;
        for (const auto& s : sentences) {
            for (const auto& t : tokenize(s)) uniq.insert(t);
        }
        Vocabulary v;
        for (const auto& t : uniq) v.add(t);
        return v;
    }

    static std::vector<std::string> tokenize(const std::string& text) {
        std::vector<std::string> out;
        std::istringstream in(text);
        std::string tok;
        while (in >> tok) out.push_back(tok);
        return out;
    }

    int add(const std::string& token) {
        auto it = ids_.find(token);
        if (it != ids_.end()) return it->second;
        const int id = static_cast<int>(tokens_.size());
        tokens_.push_back(token);
        ids_[token] = id;
        return id;
    }

    int id_of(const std::string& token) const {
        auto it = ids_.find(token);
        return it == ids_.end() ? unk_id : it->second;
    }

    bool contains(const std::string& token) const { return ids_.count(token) != 0; }

    const std::string& token_of(int id) const {
        if (id < 0 || id >= static_cast<int>(tokens_.size())) {
            throw std::out_of_range("token id out of range");
        }
        return tokens_[static_cast<std::size_t>(id)];
    }

    int size() const { return static_cast<int>(tokens_.size()); }

    std::vector<int> encode(const std::string& text, std::size_t* unk_count = nullptr) const {
        std::vector<int> out;
        for (const auto& t : tokenize(text)) {
            const int id = id_of(t);
            if (id == unk_id && unk_count != nullptr) ++*unk_count;
            out.push_back(id);
        }
        return out;
    }

    std::string decode(const std::vector<int>& ids) const {
        std::string out;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (i > 0) out += ' ';
            out += token_of(ids[i]);
        }
        return out;
    }

    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::map<std::string, int> ids_;
};

// ---------------------------------------------------------------------------
// SignVideo / Dataset
// ---------------------------------------------------------------------------

class SignVideo {
public:
    std::string id;
    std::vector<std::filesystem::path> frame_paths;
    std::string text;
    Split split{Split::train};

    SignVideo() : cache_(std::make_shared<FrameCache>()) {}

    // in-memory video (toy generator, tests)
    SignVideo(std::string vid, std::vector<Image> frames, std::string target, Split sp)
        : id(std::move(vid)), text(std::move(target)), split(sp), cache_(std::make_shared<FrameCache>()) {
        cache_->loaded = true;
        cache_->frames = std::move(frames);
    }

    std::size_t frame_count() const {
        return cache_->loaded ? cache_->frames.size() : frame_paths.size();
    }

    // lazy, idempotent, safe under concurrent readers
    const std::vector<Image>& frames() const {
        std::scoped_lock lock(cache_->mutex);
        if (!cache_->loaded) {
            cache_->frames.reserve(frame_paths.size());
            for (const auto& p : frame_paths) cache_->frames.push_back(read_pgm(p));
            cache_->loaded = true;
        }
        return cache_->frames;
    }

private:
    struct FrameCache {
        std::mutex mutex;
        bool loaded{false};
        std::vector<Image> frames;
    };
    std::shared_ptr<FrameCache> cache_;
};

struct Dataset {
    std::vector<SignVideo> items;
    Vocabulary vocab;

    std::vector<const SignVideo*> split_items(Split s) const {
        std::vector<const SignVideo*> out;
        for (const auto& v : items) {
            if (v.split == s) out.push_back(&v);
        }
        return out;
    }

    const SignVideo* find(const std::string& id) const {
        for (const auto& v : items) {
            if (v.id == id) return &v;
        }
        return nullptr;
    }
};

// ---------------------------------------------------------------------------
// manifest: JSON Lines, one video per line
// ---------------------------------------------------------------------------

inline Dataset load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("manifest not found: " + path.string());
    const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    Dataset ds;
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error("manifest line " + std::to_string(line_no) +
                                     ": invalid JSON (" + e.what() + ")");
        }
        auto fail = [&](const std::string& why) {
            throw std::runtime_error("manifest line " + std::to_string(line_no) + ": " + why);
        };
        if (!j.is_object()) fail("not a JSON object");
        if (!j.contains("id") || !j["id"].is_string()) fail("missing \"id\" field");
        if (!j.contains("frames") || !j["frames"].is_array()) fail("missing \"frames\" field");
        if (!j.contains("text") || !j["text"].is_string()) fail("missing \"text\" field");
        if (!j.contains("split") || !j["split"].is_string()) fail("missing \"split\" field");
        SignVideo v;
        v.id = j["id"].get<std::string>();
        if (!seen_ids.insert(v.id).second) fail("duplicate id \"" + v.id + "\"");
        for (const auto& f : j["frames"]) {
            if (!f.is_string()) fail("frame path is not a string");
            v.frame_paths.push_back(base / f.get<std::string>());
        }
        if (v.frame_paths.empty()) fail("video has no frames");
        v.text = j["text"].get<std::string>();
        if (v.text.empty()) fail("empty \"text\"");
        try {
            v.split = split_from_string(j["split"].get<std::string>());
        } catch (const std::exception& e) {
            fail(e.what());
        }
        ds.items.push_back(std::move(v));
    }
    std::vector<std::string> train_texts;
    for (const auto& v : ds.items) {
        if (v.split == Split::train) train_texts.push_back(v.text);
    }
    ds.vocab = Vocabulary::from_sentences(train_texts);
    return ds;
}

inline void write_manifest(const std::filesystem::path& path, const Dataset& ds,
                           const std::vector<std::vector<std::string>>& relative_frames) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path.string());
    for (std::size_t i = 0; i < ds.items.size(); ++i) {
        const auto& v = ds.items[i];
        nlohmann::json j;
        j["id"] = v.id;
        j["frames"] = relative_frames[i];
        j["text"] = v.text;
        j["split"] = split_name(v.split);
        out << j.dump() << "\n";
    }
}

// ---------------------------------------------------------------------------
// toy glyphs: one rendered glyph per target token; a short binary strip in
// the top rows encodes the glyph index so the mock description client can
// recover it from pixels alone
// ---------------------------------------------------------------------------

namespace toy {

constexpr int strip_bits = 12;
constexpr int glyph_grid = 6;

inline Image render_glyph(int glyph_index, int side, std::uint64_t seed) {
    Image im = Image::filled(side, side, 12);
    // strip: bit b occupies a 2x2 block at rows 0..1, cols 2b..2b+1
    for (int b = 0; b < strip_bits && 2 * b + 1 < side; ++b) {
        const std::uint8_t v = ((glyph_index >> b) & 1) != 0 ? 255 : 0;
        for (int y = 0; y < 2; ++y) {
            for (int x = 0; x < 2; ++x) im.at(y, 2 * b + x) = v;
        }
    }
    // glyph body: deterministic dot-matrix pattern scaled to fill the frame
    Rng rng(fnv1a("glyph", seed) ^ static_cast<std::uint64_t>(glyph_index) * 0x9E3779B97F4A7C15ULL);
    bool cells[glyph_grid][glyph_grid];
    for (auto& row : cells) {
        for (auto& c : row) c = rng.uniform() < 0.5;
    }
    const int body_top = 4;
    const int cell = std::max(1, (side - body_top - 2) / glyph_grid);
    for (int gy = 0; gy < glyph_grid; ++gy) {
        for (int gx = 0; gx < glyph_grid; ++gx) {
            if (!cells[gy][gx]) continue;
            for (int y = 0; y < cell; ++y) {
                for (int x = 0; x < cell; ++x) {
                    const int yy = body_top + gy * cell + y;
                    const int xx = 1 + gx * cell + x;
                    if (yy < side && xx < side) im.at(yy, xx) = 235;
                }
            }
        }
    }
    return im;
}

// reads the strip back; returns -1 when the frame carries no plausible strip
inline int read_glyph_index(const Image& im) {
    if (im.height < 2 || im.width < 2 * strip_bits) return -1;
    int index = 0;
    for (int b = 0; b < strip_bits; ++b) {
        int sum = 0;
        for (int y = 0; y < 2; ++y) {
            for (int x = 0; x < 2; ++x) sum += im.at(y, 2 * b + x);
        }
        const int avg = sum / 4;
        if (avg > 160) {
            index |= 1 << b;
        } else if (avg > 64) {
            return -1;  // ambiguous, not a toy frame
        }
    }
    return index;
}

inline std::string token_name(int glyph_index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "t%02d", glyph_index);
    return buf;
}

}  // namespace toy

// Deterministic desk-scale dataset: n_videos glyph videos, 80/10/10 split.
// vocab_size counts the 4 reserved ids, so vocab_size - 4 distinct glyphs.
inline Dataset make_toy_dataset(int n_videos, int vocab_size, int max_len, std::uint64_t seed,
                                int frame_side = 32) {
    if (vocab_size < 4) throw std::invalid_argument("make_toy_dataset: vocab_size must be >= 4");
    if (max_len < 1) throw std::invalid_argument("make_toy_dataset: max_len must be >= 1");
    if (n_videos < 0) throw std::invalid_argument("make_toy_dataset: negative n_videos");
    const int content = vocab_size - 4;
    if (content < 1) throw std::invalid_argument("make_toy_dataset: no content tokens");
    Rng rng(fnv1a("toy-dataset", seed));
    Dataset ds;
    const int n_train = n_videos * 8 / 10;
    const int n_dev = n_videos * 9 / 10 - n_train;
    const int min_len = std::max(1, max_len - 2);
    for (int i = 0; i < n_videos; ++i) {
        const int len = min_len + static_cast<int>(rng.uniform_int(
                                      static_cast<std::uint64_t>(max_len - min_len + 1)));
        std::vector<Image> frames;
        std::string text;
        for (int t = 0; t < len; ++t) {
            const int glyph = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(content)));
            frames.push_back(toy::render_glyph(glyph, frame_side, seed));
            if (t > 0) text += ' ';
            text += toy::token_name(glyph);
        }
        char vid[32];
        std::snprintf(vid, sizeof(vid), "toy%05d", i);
        const Split sp = i < n_train ? Split::train : (i < n_train + n_dev ? Split::dev : Split::test);
        ds.items.emplace_back(vid, std::move(frames), text, sp);
    }
    std::vector<std::string> all_texts;
    for (int gi = 0; gi < content; ++gi) all_texts.push_back(toy::token_name(gi));
    ds.vocab = Vocabulary::from_sentences(all_texts);
    return ds;
}

// writes frames as PGM files plus a JSON Lines manifest
inline void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "frames");
    std::vector<std::vector<std::string>> rel(ds.items.size());
    for (std::size_t i = 0; i < ds.items.size(); ++i) {
        const auto& v = ds.items[i];
        const auto& frames = v.frames();
        for (std::size_t t = 0; t < frames.size(); ++t) {
            char name[64];
            std::snprintf(name, sizeof(name), "frames/%s_%03zu.pgm", v.id.c_str(), t);
            write_pgm(dir / name, frames[t]);
            rel[i].emplace_back(name);
        }
    }
    write_manifest(dir / "manifest.jsonl", ds, rel);
}

// ---------------------------------------------------------------------------
// batching
// ---------------------------------------------------------------------------

struct Batch {
    std::vector<const SignVideo*> videos;
    std::vector<ag::Mask> frame_masks;        // each of length t_max
    std::vector<std::vector<int>> token_ids;  // targets (tokens + <EOS>), padded to tbar_max
    std::vector<ag::Mask> token_masks;
    int t_max{0};
    int tbar_max{0};
    std::size_t unk_count{0};
};

inline Batch collate(const std::vector<const SignVideo*>& items, const Vocabulary& vocab) {
    if (items.empty()) throw std::invalid_argument("collate: empty batch");
    Batch b;
    b.videos = items;
    for (const auto* v : items) {
        b.t_max = std::max(b.t_max, static_cast<int>(v->frame_count()));
    }
    std::vector<std::vector<int>> targets;
    for (const auto* v : items) {
        auto ids = vocab.encode(v->text, &b.unk_count);
        ids.push_back(Vocabulary::eos_id);
        b.tbar_max = std::max(b.tbar_max, static_cast<int>(ids.size()));
        targets.push_back(std::move(ids));
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
        ag::Mask fm(static_cast<std::size_t>(b.t_max), 0);
        for (std::size_t t = 0; t < items[i]->frame_count(); ++t) fm[t] = 1;
        b.frame_masks.push_back(std::move(fm));
        ag::Mask tm(static_cast<std::size_t>(b.tbar_max), 0);
        for (std::size_t t = 0; t < targets[i].size(); ++t) tm[t] = 1;
        b.token_masks.push_back(std::move(tm));
        targets[i].resize(static_cast<std::size_t>(b.tbar_max), Vocabulary::pad_id);
        b.token_ids.push_back(std::move(targets[i]));
    }
    return b;
}

}  // namespace mmslt
