#pragma once

// Layers built on the autograd tape: linear (optionally with a LoRA delta),
// layer norm, embeddings, the two-layer GELU MLP, temporal conv, multi-head
// attention, and pre-norm transformer encoder/decoder stacks.

#include <cmath>
#include <string>
#include <vector>

#include "mmslt/autograd.hpp"
#include "mmslt/rng.hpp"

namespace mmslt::nn {

using ag::Graph;
using ag::Mask;
using ag::Mat;
using ag::Param;
using ag::Ref;

inline Mat randn(Rng& rng, Eigen::Index rows, Eigen::Index cols, double std) {
    Mat m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.normal() * std;
    }
    return m;
}

using ParamList = std::vector<Param*>;

// key-query-value padding/causal bias: 0 on allowed pairs, -1e9 elsewhere
inline Mat attn_bias(Eigen::Index query_len, const Mask& key_mask, bool causal) {
    Mat bias = Mat::Zero(query_len, static_cast<Eigen::Index>(key_mask.size()));
    for (Eigen::Index i = 0; i < bias.rows(); ++i) {
        for (Eigen::Index j = 0; j < bias.cols(); ++j) {
            const bool masked = key_mask[static_cast<std::size_t>(j)] == 0 || (causal && j > i);
            if (masked) bias(i, j) = -1e9;
        }
    }
    return bias;
}

// ---------------------------------------------------------------------------

struct Linear {
    Param w;  // in x out
    Param b;  // 1 x out

    void init(const std::string& name, Rng& rng, int in, int out, double std = 0.02) {
        w = Param{name + ".w", randn(rng, in, out, std), {}, {}, {}, true, true};
        b = Param{name + ".b", Mat::Zero(1, out), {}, {}, {}, true, false};
    }

    Ref forward(Graph& g, Ref x) { return ag::add_rowvec(ag::matmul(x, g.leaf(w)), g.leaf(b)); }

    void collect(ParamList& out) {
        out.push_back(&w);
        out.push_back(&b);
    }
    void set_trainable(bool t) { w.trainable = b.trainable = t; }
};

// base weight plus optional low-rank delta: y = x W + b + (alpha/r) (x A) B.
// B starts at zero so the initial delta vanishes; rank 0 disables the branch.
struct LoraLinear {
    Param w;       // in x out (base)
    Param b;       // 1 x out (base)
    Param lora_a;  // in x r
    Param lora_b;  // r x out
    int rank{0};
    double scaling{0.0};

    void init(const std::string& name, Rng& rng, int in, int out, int r, double alpha,
              double std = 0.02) {
        w = Param{name + ".w", randn(rng, in, out, std), {}, {}, {}, true, true};
        b = Param{name + ".b", Mat::Zero(1, out), {}, {}, {}, true, false};
        rank = r;
        if (rank > 0) {
            scaling = alpha / rank;
            lora_a = Param{name + ".lora_a", randn(rng, in, rank, 0.02), {}, {}, {}, true, true};
            lora_b = Param{name + ".lora_b", Mat::Zero(rank, out), {}, {}, {}, true, true};
        }
    }

    Ref forward(Graph& g, Ref x) {
        Ref y = ag::add_rowvec(ag::matmul(x, g.leaf(w)), g.leaf(b));
        if (rank > 0) {
            Ref delta = ag::matmul(ag::matmul(x, g.leaf(lora_a)), g.leaf(lora_b));
            y = ag::add(y, ag::scale(delta, scaling));
        }
        return y;
    }

    // fold the delta into the base weight (merge equivalence)
    Mat merged_weight() const {
        if (rank == 0) return w.value;
        return w.value + scaling * (lora_a.value * lora_b.value);
    }

    void collect(ParamList& out) {
        out.push_back(&w);
        out.push_back(&b);
        if (rank > 0) {
            out.push_back(&lora_a);
            out.push_back(&lora_b);
        }
    }
    void set_base_trainable(bool t) { w.trainable = b.trainable = t; }
    void set_lora_trainable(bool t) {
        if (rank > 0) lora_a.trainable = lora_b.trainable = t;
    }
};

struct LayerNorm {
    Param gamma;
    Param beta;

    void init(const std::string& name, int dim) {
        gamma = Param{name + ".gamma", Mat::Ones(1, dim), {}, {}, {}, true, false};
        beta = Param{name + ".beta", Mat::Zero(1, dim), {}, {}, {}, true, false};
    }
    Ref forward(Graph& g, Ref x) { return ag::layer_norm(x, g.leaf(gamma), g.leaf(beta)); }
    void collect(ParamList& out) {
        out.push_back(&gamma);
        out.push_back(&beta);
    }
    void set_trainable(bool t) { gamma.trainable = beta.trainable = t; }
};

struct Embedding {
    Param table;  // vocab x dim

    void init(const std::string& name, Rng& rng, int vocab, int dim, double std = 0.02) {
        table = Param{name, randn(rng, vocab, dim, std), {}, {}, {}, true, false};
    }
    Ref forward(Graph& g, const std::vector<int>& ids) {
        return ag::embedding_rows(g.leaf(table), ids);
    }
    Ref positions(Graph& g, int len) {
        std::vector<int> ids(static_cast<std::size_t>(len));
        for (int i = 0; i < len; ++i) ids[static_cast<std::size_t>(i)] = i;
        return forward(g, ids);
    }
    void collect(ParamList& out) { out.push_back(&table); }
    void set_trainable(bool t) { table.trainable = t; }
};

// two affine layers, one GELU between
struct Mlp2 {
    Linear fc1, fc2;

    void init(const std::string& name, Rng& rng, int in, int hidden, int out) {
        fc1.init(name + ".fc1", rng, in, hidden);
        fc2.init(name + ".fc2", rng, hidden, out);
    }
    Ref forward(Graph& g, Ref x) { return fc2.forward(g, ag::gelu(fc1.forward(g, x))); }
    void collect(ParamList& out) {
        fc1.collect(out);
        fc2.collect(out);
    }
    void set_trainable(bool t) {
        fc1.set_trainable(t);
        fc2.set_trainable(t);
    }
};

// temporal conv, odd kernel, stride 1, zero `same` padding
struct Conv1dSame {
    Param w;  // (k*in) x out
    Param b;
    int kernel{5};

    void init(const std::string& name, Rng& rng, int k, int in, int out) {
        kernel = k;
        const double std = std::sqrt(2.0 / (k * in + out));
        w = Param{name + ".w", randn(rng, static_cast<Eigen::Index>(k) * in, out, std),
                  {}, {}, {}, true, true};
        b = Param{name + ".b", Mat::Zero(1, out), {}, {}, {}, true, false};
    }
    Ref forward(Graph& g, Ref x) {
        return ag::add_rowvec(ag::matmul(ag::im2col1d(x, kernel), g.leaf(w)), g.leaf(b));
    }
    void collect(ParamList& out) {
        out.push_back(&w);
        out.push_back(&b);
    }
    void set_trainable(bool t) { w.trainable = b.trainable = t; }
};

// ---------------------------------------------------------------------------
// attention / transformer
// ---------------------------------------------------------------------------

struct MultiHeadAttention {
    int heads{4};
    int dim{64};
    LoraLinear q_proj, v_proj;  // LoRA targets
    Linear k_proj, out_proj;

    void init(const std::string& name, Rng& rng, int d, int h, int lora_rank, double lora_alpha) {
        heads = h;
        dim = d;
        q_proj.init(name + ".q", rng, d, d, lora_rank, lora_alpha);
        k_proj.init(name + ".k", rng, d, d);
        v_proj.init(name + ".v", rng, d, d, lora_rank, lora_alpha);
        out_proj.init(name + ".out", rng, d, d);
    }

    Ref forward(Graph& g, Ref query_in, Ref kv_in, const Mat& bias) {
        Ref q = q_proj.forward(g, query_in);
        Ref k = k_proj.forward(g, kv_in);
        Ref v = v_proj.forward(g, kv_in);
        const int dh = dim / heads;
        const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
        Ref bias_node = g.constant(bias);
        std::vector<Ref> head_outs;
        head_outs.reserve(static_cast<std::size_t>(heads));
        for (int h = 0; h < heads; ++h) {
            Ref qh = ag::slice_cols(q, static_cast<Eigen::Index>(h) * dh, dh);
            Ref kh = ag::slice_cols(k, static_cast<Eigen::Index>(h) * dh, dh);
            Ref vh = ag::slice_cols(v, static_cast<Eigen::Index>(h) * dh, dh);
            Ref scores = ag::add(ag::scale(ag::matmul_nt(qh, kh), inv_sqrt), bias_node);
            Ref attn = ag::softmax_rows(scores);
            head_outs.push_back(ag::matmul(attn, vh));
        }
        return out_proj.forward(g, ag::concat_cols(head_outs));
    }

    void collect(ParamList& out) {
        q_proj.collect(out);
        k_proj.collect(out);
        v_proj.collect(out);
        out_proj.collect(out);
    }
    void set_base_trainable(bool t) {
        q_proj.set_base_trainable(t);
        k_proj.set_trainable(t);
        v_proj.set_base_trainable(t);
        out_proj.set_trainable(t);
    }
    void set_lora_trainable(bool t) {
        q_proj.set_lora_trainable(t);
        v_proj.set_lora_trainable(t);
    }
};

struct TransformerConfig {
    int dim{64};
    int layers{2};
    int heads{4};
    int ffn_hidden{128};
    int lora_rank{0};
    double lora_alpha{0.0};
};

struct EncoderLayer {
    LayerNorm ln1, ln2;
    MultiHeadAttention attn;
    Mlp2 ffn;

    void init(const std::string& name, Rng& rng, const TransformerConfig& c) {
        ln1.init(name + ".ln1", c.dim);
        ln2.init(name + ".ln2", c.dim);
        attn.init(name + ".attn", rng, c.dim, c.heads, c.lora_rank, c.lora_alpha);
        ffn.init(name + ".ffn", rng, c.dim, c.ffn_hidden, c.dim);
    }
    Ref forward(Graph& g, Ref x, const Mat& bias) {
        Ref h = ln1.forward(g, x);
        x = ag::add(x, attn.forward(g, h, h, bias));
        x = ag::add(x, ffn.forward(g, ln2.forward(g, x)));
        return x;
    }
    void collect(ParamList& out) {
        ln1.collect(out);
        ln2.collect(out);
        attn.collect(out);
        ffn.collect(out);
    }
};

struct TransformerEncoder {
    std::vector<EncoderLayer> layers;
    LayerNorm final_ln;
    TransformerConfig cfg;

    void init(const std::string& name, Rng& rng, const TransformerConfig& c) {
        cfg = c;
        layers.resize(static_cast<std::size_t>(c.layers));
        for (int i = 0; i < c.layers; ++i) {
            layers[static_cast<std::size_t>(i)].init(name + ".l" + std::to_string(i), rng, c);
        }
        final_ln.init(name + ".final_ln", c.dim);
    }

    // pre-norm self-attention stack; padded rows are zeroed on output
    Ref forward(Graph& g, Ref x, const Mask& mask) {
        const Mat bias = attn_bias(x.rows(), mask, /*causal=*/false);
        for (auto& layer : layers) x = layer.forward(g, x, bias);
        x = final_ln.forward(g, x);
        return ag::apply_mask_zero(x, mask);
    }

    void collect(ParamList& out) {
        for (auto& l : layers) l.collect(out);
        final_ln.collect(out);
    }

    void set_base_trainable(bool t) {
        for (auto& l : layers) {
            l.attn.set_base_trainable(t);
            l.ffn.set_trainable(t);
        }
    }
    void set_lora_trainable(bool t) {
        for (auto& l : layers) l.attn.set_lora_trainable(t);
    }
    void set_norms_trainable(bool t) {
        for (auto& l : layers) {
            l.ln1.set_trainable(t);
            l.ln2.set_trainable(t);
        }
        final_ln.set_trainable(t);
    }
};

struct DecoderLayer {
    LayerNorm ln1, ln2, ln3;
    MultiHeadAttention self_attn, cross_attn;
    Mlp2 ffn;

    void init(const std::string& name, Rng& rng, const TransformerConfig& c) {
        ln1.init(name + ".ln1", c.dim);
        ln2.init(name + ".ln2", c.dim);
        ln3.init(name + ".ln3", c.dim);
        self_attn.init(name + ".self", rng, c.dim, c.heads, c.lora_rank, c.lora_alpha);
        cross_attn.init(name + ".cross", rng, c.dim, c.heads, c.lora_rank, c.lora_alpha);
        ffn.init(name + ".ffn", rng, c.dim, c.ffn_hidden, c.dim);
    }
    Ref forward(Graph& g, Ref x, Ref memory, const Mat& self_bias, const Mat& cross_bias) {
        Ref h = ln1.forward(g, x);
        x = ag::add(x, self_attn.forward(g, h, h, self_bias));
        x = ag::add(x, cross_attn.forward(g, ln2.forward(g, x), memory, cross_bias));
        x = ag::add(x, ffn.forward(g, ln3.forward(g, x)));
        return x;
    }
    void collect(ParamList& out) {
        ln1.collect(out);
        ln2.collect(out);
        ln3.collect(out);
        self_attn.collect(out);
        cross_attn.collect(out);
        ffn.collect(out);
    }
};

struct TransformerDecoder {
    Embedding tok_emb;
    Embedding pos_emb;
    std::vector<DecoderLayer> layers;
    LayerNorm final_ln;
    Linear out_proj;
    TransformerConfig cfg;
    int vocab{0};

    void init(const std::string& name, Rng& rng, const TransformerConfig& c, int vocab_size,
              int max_positions) {
        cfg = c;
        vocab = vocab_size;
        tok_emb.init(name + ".tok_emb", rng, vocab_size, c.dim);
        pos_emb.init(name + ".pos_emb", rng, max_positions, c.dim);
        layers.resize(static_cast<std::size_t>(c.layers));
        for (int i = 0; i < c.layers; ++i) {
            layers[static_cast<std::size_t>(i)].init(name + ".l" + std::to_string(i), rng, c);
        }
        final_ln.init(name + ".final_ln", c.dim);
        out_proj.init(name + ".out_proj", rng, c.dim, vocab_size);
    }

    // teacher-forced (or prefix) forward: input ids -> logits, one row per id
    Ref forward(Graph& g, const std::vector<int>& input_ids, Ref memory, const Mask& memory_mask) {
        const int len = static_cast<int>(input_ids.size());
        Ref x = ag::add(tok_emb.forward(g, input_ids), pos_emb.positions(g, len));
        const Mat self_bias = attn_bias(len, ag::all_real(static_cast<std::size_t>(len)), true);
        const Mat cross_bias = attn_bias(len, memory_mask, false);
        for (auto& layer : layers) x = layer.forward(g, x, memory, self_bias, cross_bias);
        return out_proj.forward(g, final_ln.forward(g, x));
    }

    void collect(ParamList& out) {
        tok_emb.collect(out);
        pos_emb.collect(out);
        for (auto& l : layers) l.collect(out);
        final_ln.collect(out);
        out_proj.collect(out);
    }

    void set_base_trainable(bool t) {
        for (auto& l : layers) {
            l.self_attn.set_base_trainable(t);
            l.cross_attn.set_base_trainable(t);
            l.ffn.set_trainable(t);
        }
    }
    void set_lora_trainable(bool t) {
        for (auto& l : layers) {
            l.self_attn.set_lora_trainable(t);
            l.cross_attn.set_lora_trainable(t);
        }
    }
    void set_norms_trainable(bool t) {
        for (auto& l : layers) {
            l.ln1.set_trainable(t);
            l.ln2.set_trainable(t);
            l.ln3.set_trainable(t);
        }
        final_ln.set_trainable(t);
    }
    void set_embeddings_trainable(bool t) {
        tok_emb.set_trainable(t);
        pos_emb.set_trainable(t);
        out_proj.set_trainable(t);
    }
};

// spec-orientation LoRA application: base (d_out x d_in), A (r x d_in),
// B (d_out x r), x given as columns; y = W x + (alpha/r) B (A x)
inline Mat lora_forward_cols(const Mat& base, const Mat& a, const Mat& b, double alpha,
                             const Mat& x_cols) {
    if (base.cols() != x_cols.rows() || a.cols() != base.cols() || b.rows() != base.rows() ||
        b.cols() != a.rows()) {
        throw std::invalid_argument("lora_forward: shape mismatch");
    }
    const double scaling = a.rows() > 0 ? alpha / static_cast<double>(a.rows()) : 0.0;
    return base * x_cols + scaling * (b * (a * x_cols));
}

}  // namespace mmslt::nn
