#pragma once

// The translation model: frame-wise visual encoder, frozen description and
// text encoders, description mapper, modality adapter, LoRA-adapted
// multimodal encoder, and the autoregressive decoder. Stage wiring:
//   stage 1 trains vis/dm/ma, encoder LoRA (+norms), the temperature;
//   stage 2 freezes dm and adds the decoder (LoRA on its base).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmslt/autograd.hpp"
#include "mmslt/data.hpp"
#include "mmslt/image.hpp"
#include "mmslt/nn.hpp"
#include "mmslt/rng.hpp"

namespace mmslt {

using ag::Graph;
using ag::Mask;
using ag::Mat;
using ag::Param;
using ag::Ref;

// ---------------------------------------------------------------------------
// profiles
// ---------------------------------------------------------------------------

struct ModelProfile {
    std::string name{"toy"};
    int c_vis{64};        // C  (visual feature width)
    int c_desc{32};       // C-bar (description embedding width)
    int c_mm{64};         // C' (sign-element / multimodal width)
    int enc_layers{2};
    int dec_layers{2};
    int heads{4};
    int ffn_hidden{128};
    int vis_hidden{128};
    int ma_conv_kernel{5};
    int de_layers{2};
    int de_heads{4};
    int de_ffn{64};
    int de_vocab{509};    // hash buckets; id 0 reserved for [CLS]
    int de_max_positions{64};
    int lora_rank{16};
    int lora_alpha{32};
    int resize_side{32};
    int crop_side{32};
    int max_positions{256};

    static ModelProfile toy() { return ModelProfile{}; }

    static ModelProfile full() {
        ModelProfile p;
        p.name = "full";
        p.c_vis = 512;
        p.c_desc = 768;
        p.c_mm = 1024;
        p.enc_layers = 12;
        p.dec_layers = 12;
        p.heads = 16;
        p.ffn_hidden = 4096;
        p.vis_hidden = 1024;
        p.de_layers = 12;
        p.de_heads = 12;
        p.de_ffn = 3072;
        p.de_vocab = 30522;
        p.de_max_positions = 512;
        p.resize_side = 256;
        p.crop_side = 224;
        p.max_positions = 1024;
        return p;
    }

    static ModelProfile named(const std::string& n) {
        if (n == "toy") return toy();
        if (n == "full") return full();
        throw std::runtime_error("unknown profile: " + n);
    }
};

inline void to_json(nlohmann::json& j, const ModelProfile& p) {
    j = nlohmann::json{{"name", p.name},
                       {"c_vis", p.c_vis},
                       {"c_desc", p.c_desc},
                       {"c_mm", p.c_mm},
                       {"enc_layers", p.enc_layers},
                       {"dec_layers", p.dec_layers},
                       {"heads", p.heads},
                       {"ffn_hidden", p.ffn_hidden},
                       {"vis_hidden", p.vis_hidden},
                       {"ma_conv_kernel", p.ma_conv_kernel},
                       {"de_layers", p.de_layers},
                       {"de_heads", p.de_heads},
                       {"de_ffn", p.de_ffn},
                       {"de_vocab", p.de_vocab},
                       {"de_max_positions", p.de_max_positions},
                       {"lora_rank", p.lora_rank},
                       {"lora_alpha", p.lora_alpha},
                       {"resize_side", p.resize_side},
                       {"crop_side", p.crop_side},
                       {"max_positions", p.max_positions}};
}

inline void from_json(const nlohmann::json& j, ModelProfile& p) {
    p = ModelProfile::named(j.value("name", "toy"));
    auto get = [&](const char* k, int& v) {
        if (j.contains(k)) v = j.at(k).get<int>();
    };
    get("c_vis", p.c_vis);
    get("c_desc", p.c_desc);
    get("c_mm", p.c_mm);
    get("enc_layers", p.enc_layers);
    get("dec_layers", p.dec_layers);
    get("heads", p.heads);
    get("ffn_hidden", p.ffn_hidden);
    get("vis_hidden", p.vis_hidden);
    get("ma_conv_kernel", p.ma_conv_kernel);
    get("de_layers", p.de_layers);
    get("de_heads", p.de_heads);
    get("de_ffn", p.de_ffn);
    get("de_vocab", p.de_vocab);
    get("de_max_positions", p.de_max_positions);
    get("lora_rank", p.lora_rank);
    get("lora_alpha", p.lora_alpha);
    get("resize_side", p.resize_side);
    get("crop_side", p.crop_side);
    get("max_positions", p.max_positions);
}

// ablation arrangement + the spec's open-question flags
struct ModelOptions {
    bool use_descriptions{true};   // GSD-MLLM column of the ablation grid
    bool use_mapper{true};         // DM column; false + descriptions => D-hat := D
    bool train_layer_norms{true};
    bool dm_grad_to_vis{true};
    bool decoder_train_embeddings{true};
};

inline void to_json(nlohmann::json& j, const ModelOptions& o) {
    j = nlohmann::json{{"use_descriptions", o.use_descriptions},
                       {"use_mapper", o.use_mapper},
                       {"train_layer_norms", o.train_layer_norms},
                       {"dm_grad_to_vis", o.dm_grad_to_vis},
                       {"decoder_train_embeddings", o.decoder_train_embeddings}};
}

inline void from_json(const nlohmann::json& j, ModelOptions& o) {
    o.use_descriptions = j.value("use_descriptions", true);
    o.use_mapper = j.value("use_mapper", true);
    o.train_layer_norms = j.value("train_layer_norms", true);
    o.dm_grad_to_vis = j.value("dm_grad_to_vis", true);
    o.decoder_train_embeddings = j.value("decoder_train_embeddings", true);
}

// ---------------------------------------------------------------------------
// frame preprocessing (resize + crop + scaling to [-1, 1])
// ---------------------------------------------------------------------------

inline Mat frames_to_matrix(const std::vector<Image>& frames, int resize_side, int crop_side,
                            bool random_crop, Rng* rng) {
    if (frames.empty()) throw std::invalid_argument("visual_encode: empty video");
    const auto pixels = static_cast<Eigen::Index>(crop_side) * crop_side;
    Mat out(static_cast<Eigen::Index>(frames.size()), pixels);
    for (std::size_t t = 0; t < frames.size(); ++t) {
        Image im = square_resize(frames[t], resize_side);
        int top = (resize_side - crop_side) / 2;
        int left = top;
        if (random_crop && rng != nullptr && resize_side > crop_side) {
            top = static_cast<int>(rng->uniform_int(static_cast<std::uint64_t>(resize_side - crop_side + 1)));
            left = static_cast<int>(rng->uniform_int(static_cast<std::uint64_t>(resize_side - crop_side + 1)));
        }
        im = crop(im, top, left, crop_side, crop_side);
        for (Eigen::Index i = 0; i < pixels; ++i) {
            out(static_cast<Eigen::Index>(t), i) = im.pixels[static_cast<std::size_t>(i)] / 127.5 - 1.0;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// subnetworks
// ---------------------------------------------------------------------------

// psi_vis: frame-wise two-layer MLP over pixels -> C
struct VisualEncoder {
    nn::Mlp2 mlp;
    int resize_side{32}, crop_side{32};

    void init(Rng& rng, const ModelProfile& p) {
        resize_side = p.resize_side;
        crop_side = p.crop_side;
        mlp.init("vis", rng, p.crop_side * p.crop_side, p.vis_hidden, p.c_vis);
    }
    Ref forward(Graph& g, const std::vector<Image>& frames, bool train, Rng* rng) {
        return mlp.forward(g, g.constant(frames_to_matrix(frames, resize_side, crop_side, train, rng)));
    }
    void collect(nn::ParamList& out) { mlp.collect(out); }
    void set_trainable(bool t) { mlp.set_trainable(t); }
};

// psi_dm: two-layer MLP C -> C-bar, GELU between, hidden width C-bar
struct DescriptionMapper {
    nn::Mlp2 mlp;
    void init(Rng& rng, const ModelProfile& p) { mlp.init("dm", rng, p.c_vis, p.c_desc, p.c_desc); }
    Ref forward(Graph& g, Ref v) { return mlp.forward(g, v); }
    void collect(nn::ParamList& out) { mlp.collect(out); }
    void set_trainable(bool t) { mlp.set_trainable(t); }
};

// psi_ma: 1D conv (k=5, s=1, same) -> max pool (k=2, s=2) -> two-layer MLP.
// Output length is ceil(T/2) per the pooled-mask rule, never 0.
struct ModalityAdapter {
    nn::Conv1dSame conv;
    nn::Mlp2 mlp;
    int in_width{0};

    void init(Rng& rng, const ModelProfile& p, bool with_descriptions) {
        in_width = p.c_vis + (with_descriptions ? p.c_desc : 0);
        conv.init("ma.conv", rng, p.ma_conv_kernel, in_width, p.c_mm);
        mlp.init("ma.mlp", rng, p.c_mm, p.c_mm, p.c_mm);
    }
    Ref forward(Graph& g, Ref fused, const Mask& mask, Mask* pooled_mask) {
        if (fused.cols() != in_width) {
            throw std::invalid_argument("modality adapter: input width mismatch");
        }
        Ref h = ag::apply_mask_zero(conv.forward(g, fused), mask);
        Ref pooled = ag::masked_maxpool2(h, mask, pooled_mask);
        return ag::apply_mask_zero(mlp.forward(g, pooled), *pooled_mask);
    }
    void collect(nn::ParamList& out) {
        conv.collect(out);
        mlp.collect(out);
    }
    void set_trainable(bool t) {
        conv.set_trainable(t);
        mlp.set_trainable(t);
    }
};

// psi_enc: learned positions + transformer encoder; base frozen, LoRA (and
// optionally the layer norms) trainable
struct MultimodalEncoder {
    nn::Embedding pos;
    nn::TransformerEncoder enc;

    void init(Rng& rng, const ModelProfile& p) {
        pos.init("enc.pos", rng, p.max_positions, p.c_mm);
        nn::TransformerConfig c{p.c_mm, p.enc_layers, p.heads, p.ffn_hidden, p.lora_rank,
                                static_cast<double>(p.lora_alpha)};
        enc.init("enc", rng, c);
    }
    Ref forward(Graph& g, Ref se, const Mask& mask) {
        Ref x = ag::add(se, pos.positions(g, static_cast<int>(se.rows())));
        return enc.forward(g, x, mask);
    }
    void collect(nn::ParamList& out) {
        pos.collect(out);
        enc.collect(out);
    }
};

// psi_te: frozen text encoder over task-vocabulary tokens
struct TextEncoder {
    nn::Embedding tok, pos;
    nn::TransformerEncoder enc;

    void init(Rng& rng, const ModelProfile& p, int vocab_size) {
        tok.init("te.tok_emb", rng, vocab_size, p.c_mm);
        pos.init("te.pos_emb", rng, p.max_positions, p.c_mm);
        nn::TransformerConfig c{p.c_mm, p.enc_layers, p.heads, p.ffn_hidden, 0, 0.0};
        enc.init("te", rng, c);
    }
    // value-only: the encoder never receives gradients
    Mat encode(const std::vector<int>& token_ids) {
        if (token_ids.empty()) throw std::invalid_argument("text_encode: empty token sequence");
        Graph g(/*grad_enabled=*/false);
        Ref x = ag::add(tok.forward(g, token_ids), pos.positions(g, static_cast<int>(token_ids.size())));
        return enc.forward(g, x, ag::all_real(token_ids.size())).val();
    }
    void collect(nn::ParamList& out) {
        tok.collect(out);
        pos.collect(out);
        enc.collect(out);
    }
    void freeze() {
        tok.set_trainable(false);
        pos.set_trainable(false);
        enc.set_base_trainable(false);
        enc.set_norms_trainable(false);
    }
};

// psi_de: frozen description encoder; hash-bucket tokenizer, [CLS] readout
struct DescriptionEncoder {
    nn::Embedding tok, pos;
    nn::TransformerEncoder enc;
    int vocab{509};
    int max_positions{64};

    void init(Rng& rng, const ModelProfile& p) {
        vocab = p.de_vocab;
        max_positions = p.de_max_positions;
        tok.init("de.tok_emb", rng, p.de_vocab, p.c_desc);
        pos.init("de.pos_emb", rng, p.de_max_positions, p.c_desc);
        nn::TransformerConfig c{p.c_desc, p.de_layers, p.de_heads, p.de_ffn, 0, 0.0};
        enc.init("de", rng, c);
    }

    std::vector<int> tokenize(const std::string& text) const {
        std::vector<int> ids{0};  // [CLS]
        for (const auto& t : Vocabulary::tokenize(text)) {
            ids.push_back(1 + static_cast<int>(fnv1a(t) % static_cast<std::uint64_t>(vocab - 1)));
            if (static_cast<int>(ids.size()) == max_positions) break;
        }
        return ids;
    }

    // sentence-level embedding: the [CLS] row of the final layer, 1 x C-bar
    Mat encode(const std::string& text) {
        if (text.empty()) throw std::invalid_argument("describe_encode: empty description");
        Graph g(/*grad_enabled=*/false);
        const auto ids = tokenize(text);
        Ref x = ag::add(tok.forward(g, ids), pos.positions(g, static_cast<int>(ids.size())));
        Ref y = enc.forward(g, x, ag::all_real(ids.size()));
        return y.val().row(0);
    }

    void collect(nn::ParamList& out) {
        tok.collect(out);
        pos.collect(out);
        enc.collect(out);
    }
    void freeze() {
        tok.set_trainable(false);
        pos.set_trainable(false);
        enc.set_base_trainable(false);
        enc.set_norms_trainable(false);
    }
};

// ---------------------------------------------------------------------------
// the assembled model
// ---------------------------------------------------------------------------

enum class Stage { mmlp, slt };

inline const char* stage_name(Stage s) { return s == Stage::mmlp ? "mmlp" : "slt"; }

class MmsltModel {
public:
    ModelProfile prof;
    ModelOptions opt;
    int vocab_size{0};

    VisualEncoder vis;
    DescriptionMapper dm;
    ModalityAdapter ma;
    MultimodalEncoder enc;
    TextEncoder te;
    DescriptionEncoder de;
    nn::TransformerDecoder dec;
    Param tau_logit;  // temperature as exp(s), s init ln(1/0.07)

    void build(const ModelProfile& profile, const ModelOptions& options, int task_vocab_size,
               std::uint64_t seed) {
        prof = profile;
        opt = options;
        vocab_size = task_vocab_size;
        Rng root(fnv1a("model-init", seed));
        Rng r_vis = root.fork("vis");
        Rng r_dm = root.fork("dm");
        Rng r_ma = root.fork("ma");
        Rng r_enc = root.fork("enc");
        Rng r_te = root.fork("te");
        Rng r_de = root.fork("de");
        Rng r_dec = root.fork("dec");
        vis.init(r_vis, prof);
        dm.init(r_dm, prof);
        ma.init(r_ma, prof, opt.use_descriptions);
        enc.init(r_enc, prof);
        te.init(r_te, prof, vocab_size);
        de.init(r_de, prof);
        nn::TransformerConfig dc{prof.c_mm, prof.dec_layers, prof.heads, prof.ffn_hidden,
                                 prof.lora_rank, static_cast<double>(prof.lora_alpha)};
        dec.init("dec", r_dec, dc, vocab_size, prof.max_positions);
        tau_logit = Param{"align.tau_logit", Mat::Constant(1, 1, std::log(1.0 / 0.07)),
                          {},       {},      {}, true, false};
        te.freeze();
        de.freeze();
    }

    void collect(nn::ParamList& out) {
        vis.collect(out);
        dm.collect(out);
        ma.collect(out);
        enc.collect(out);
        te.collect(out);
        de.collect(out);
        dec.collect(out);
        out.push_back(&tau_logit);
    }

    // Trainable sets per stage. The frozen encoders stay frozen always; the
    // multimodal encoder and decoder train through LoRA (base frozen).
    void configure_stage(Stage stage) {
        te.freeze();
        de.freeze();
        vis.set_trainable(true);
        ma.set_trainable(true);
        enc.pos.set_trainable(true);
        enc.enc.set_base_trainable(false);
        enc.enc.set_lora_trainable(true);
        enc.enc.set_norms_trainable(opt.train_layer_norms);
        dec.set_base_trainable(false);
        dec.set_lora_trainable(true);
        dec.set_norms_trainable(opt.train_layer_norms);
        dec.set_embeddings_trainable(opt.decoder_train_embeddings);
        if (stage == Stage::mmlp) {
            dm.set_trainable(opt.use_mapper);
            tau_logit.trainable = true;
        } else {
            dm.set_trainable(false);  // mapper stays frozen during SLT
            tau_logit.trainable = false;
        }
    }

    // ---- per-video forward pieces -----------------------------------------

    Ref visual_encode(Graph& g, const std::vector<Image>& frames, bool train, Rng* rng) {
        return vis.forward(g, frames, train, rng);
    }

    Ref map_descriptions(Graph& g, Ref v) {
        Ref input = opt.dm_grad_to_vis ? v : ag::stop_gradient(v);
        return dm.forward(g, input);
    }

    // fused SE features for one item. desc holds either mapped descriptions
    // (a graph node) or direct description features (a constant); it is an
    // invalid Ref when descriptions are disabled.
    Ref adapt_modalities(Graph& g, Ref v, Ref desc, const Mask& mask, Mask* pooled_mask) {
        Ref fused = v;
        if (opt.use_descriptions) {
            if (!desc.valid()) throw std::invalid_argument("adapter: missing description features");
            if (desc.rows() != v.rows()) {
                throw std::invalid_argument("adapter: V and D-hat length mismatch");
            }
            fused = ag::concat_cols(v, desc);
        }
        return ma.forward(g, fused, mask, pooled_mask);
    }

    Ref encode_multimodal(Graph& g, Ref se, const Mask& mask) { return enc.forward(g, se, mask); }

    // memory for one video: frames -> M (T' x C'), pooled mask out
    Ref encode_memory(Graph& g, const std::vector<Image>& frames, const Mat* direct_desc,
                      bool train, Rng* rng, Mask* pooled_mask) {
        Ref v = visual_encode(g, frames, train, rng);
        Ref desc;  // invalid when descriptions off
        if (opt.use_descriptions) {
            if (opt.use_mapper) {
                desc = map_descriptions(g, v);
            } else {
                if (direct_desc == nullptr) {
                    throw std::invalid_argument("mapper disabled: direct description features required");
                }
                if (direct_desc->rows() != v.rows()) {
                    throw std::invalid_argument("direct description feature length mismatch");
                }
                desc = g.constant(*direct_desc);
            }
        }
        Mask mask = ag::all_real(frames.size());
        Ref se = adapt_modalities(g, v, desc, mask, pooled_mask);
        return encode_multimodal(g, se, *pooled_mask);
    }

    // spoken-sentence tokens for psi_te/decoder targets: tokens + <EOS>
    std::vector<int> target_ids(const Vocabulary& vocab, const std::string& text) const {
        auto ids = vocab.encode(text);
        ids.push_back(Vocabulary::eos_id);
        return ids;
    }

    Mat text_encode(const std::vector<int>& token_ids) { return te.encode(token_ids); }

    // checksum of the frozen parameters under a name prefix
    std::uint64_t frozen_checksum(const std::string& prefix) {
        nn::ParamList all;
        collect(all);
        std::uint64_t h = 1469598103934665603ULL;
        for (Param* p : all) {
            if (!p->trainable && p->name.rfind(prefix, 0) == 0) {
                h = fnv1a(p->name, h);
                h = fnv1a(p->value.data(), static_cast<std::size_t>(p->value.size()) * sizeof(double), h);
            }
        }
        return h;
    }

    std::uint64_t checksum_of(const std::string& prefix) {
        nn::ParamList all;
        collect(all);
        std::uint64_t h = 1469598103934665603ULL;
        for (Param* p : all) {
            if (p->name.rfind(prefix, 0) == 0) {
                h = fnv1a(p->name, h);
                h = fnv1a(p->value.data(), static_cast<std::size_t>(p->value.size()) * sizeof(double), h);
            }
        }
        return h;
    }
};

// ---------------------------------------------------------------------------
// checkpointing: parameter blobs + JSON metadata, bit-exact round trip
// ---------------------------------------------------------------------------

struct CheckpointMeta {
    std::string profile{"toy"};
    std::string stage{"mmlp"};
    std::int64_t step{0};
    std::string config_hash;
};

inline void save_params(const std::filesystem::path& file, nn::ParamList& params) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint blob: " + file.string());
    out.write("MMSLTCK1", 8);
    const std::uint64_t n = params.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    for (const Param* p : params) {
        const std::uint64_t name_len = p->name.size();
        out.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
        out.write(p->name.data(), static_cast<std::streamsize>(name_len));
        const std::uint64_t rows = static_cast<std::uint64_t>(p->value.rows());
        const std::uint64_t cols = static_cast<std::uint64_t>(p->value.cols());
        out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
        out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(sizeof(double) * p->value.size()));
    }
    if (!out) throw std::runtime_error("checkpoint write failed: " + file.string());
}

inline void load_params(const std::filesystem::path& file, nn::ParamList& params) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint blob not found: " + file.string());
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::string(magic, 8) != "MMSLTCK1") {
        throw std::runtime_error("not a checkpoint blob: " + file.string());
    }
    std::map<std::string, Mat> stored;
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    for (std::uint64_t i = 0; i < n; ++i) {
        std::uint64_t name_len = 0;
        in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
        std::string name(name_len, '\0');
        in.read(name.data(), static_cast<std::streamsize>(name_len));
        std::uint64_t rows = 0, cols = 0;
        in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
        in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
        Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
        if (!in) throw std::runtime_error("truncated checkpoint blob: " + file.string());
        stored.emplace(std::move(name), std::move(m));
    }
    for (Param* p : params) {
        auto it = stored.find(p->name);
        if (it == stored.end()) {
            throw std::runtime_error("checkpoint missing parameter " + p->name + ": " + file.string());
        }
        if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
            throw std::runtime_error("checkpoint shape mismatch for " + p->name +
                                     " (incompatible model profile): " + file.string());
        }
        p->value = it->second;
    }
}

inline void save_checkpoint(const std::filesystem::path& dir, MmsltModel& model,
                            const CheckpointMeta& meta) {
    std::filesystem::create_directories(dir);
    nn::ParamList params;
    model.collect(params);
    save_params(dir / "params.bin", params);
    nlohmann::json j;
    j["profile"] = meta.profile;
    j["stage"] = meta.stage;
    j["step"] = meta.step;
    j["config_hash"] = meta.config_hash;
    j["vocab_size"] = model.vocab_size;
    std::ofstream out(dir / "meta.json");
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write checkpoint metadata: " + dir.string());
}

inline CheckpointMeta load_checkpoint(const std::filesystem::path& dir, MmsltModel& model) {
    std::ifstream in(dir / "meta.json");
    if (!in) throw std::runtime_error("checkpoint metadata not found: " + (dir / "meta.json").string());
    nlohmann::json j = nlohmann::json::parse(in);
    CheckpointMeta meta;
    meta.profile = j.value("profile", "toy");
    meta.stage = j.value("stage", "mmlp");
    meta.step = j.value("step", 0);
    meta.config_hash = j.value("config_hash", "");
    if (j.contains("vocab_size") && j["vocab_size"].get<int>() != model.vocab_size) {
        throw std::runtime_error("checkpoint vocabulary size mismatch: " + dir.string());
    }
    nn::ParamList params;
    model.collect(params);
    load_params(dir / "params.bin", params);
    return meta;
}

}  // namespace mmslt
