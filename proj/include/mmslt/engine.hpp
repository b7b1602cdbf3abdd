#pragma once

// Stage loops. Stage 1 (mmlp): description-regression + contrastive
// alignment; stage 2 (slt): teacher-forced cross entropy with the mapper
// frozen. One optimizer update per batch, cosine schedule over total steps,
// periodic dev evaluation, best/last checkpoints, JSONL metric log. All
// randomness is keyed by (seed, purpose, step) so interrupted runs resume on
// the same trajectory.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmslt/augment.hpp"
#include "mmslt/autograd.hpp"
#include "mmslt/data.hpp"
#include "mmslt/decode.hpp"
#include "mmslt/feature_store.hpp"
#include "mmslt/losses.hpp"
#include "mmslt/metrics.hpp"
#include "mmslt/mllm.hpp"
#include "mmslt/model.hpp"
#include "mmslt/optim.hpp"

namespace mmslt {

// ---------------------------------------------------------------------------
// stage configuration (defaults from the training recipe)
// ---------------------------------------------------------------------------

struct StageConfig {
    Stage stage{Stage::mmlp};
    int epochs{80};
    int batch_size{16};
    double lr_max{1e-4};
    double lr_min{1e-8};
    double weight_decay{0.2};
    double beta1{0.9};
    double beta2{0.98};
    double label_smoothing{0.2};
    double lambda{0.1};
    double augment_p{0.5};
    int eval_every{5};  // epochs
    std::uint64_t seed{7};
    bool use_align{true};  // M-L Align column of the ablation grid

    static StageConfig mmlp_defaults() { return StageConfig{}; }

    static StageConfig slt_defaults() {
        StageConfig c;
        c.stage = Stage::slt;
        c.epochs = 200;
        c.batch_size = 8;
        c.weight_decay = 1e-3;
        return c;
    }
};

struct StepLosses {
    double align{0.0};
    double dm{0.0};
    double mmlp{0.0};
    double slt{0.0};
};

// ---------------------------------------------------------------------------
// feature store construction
// ---------------------------------------------------------------------------

inline std::uint64_t feature_store_hash(const std::filesystem::path& cache_path,
                                        std::uint64_t model_seed, const ModelProfile& prof,
                                        int prompt_id, const std::string& model_id) {
    std::uint64_t h = fnv1a("feature-store");
    std::ifstream in(cache_path, std::ios::binary);
    if (in) {
        std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        h = fnv1a(content, h);
    }
    h = fnv1a(&model_seed, sizeof(model_seed), h);
    h = fnv1a(&prof.c_desc, sizeof(prof.c_desc), h);
    h = fnv1a(&prof.de_layers, sizeof(prof.de_layers), h);
    h = fnv1a(&prof.de_vocab, sizeof(prof.de_vocab), h);
    h = fnv1a(&prompt_id, sizeof(prompt_id), h);
    h = fnv1a(model_id, h);
    return h;
}

// runs the frozen description encoder over every cached description
inline FeatureStore build_feature_store(const Dataset& ds, const DescriptionCache& cache,
                                        MmsltModel& model, int prompt_id,
                                        const std::string& model_id) {
    FeatureStore fs;
    for (const auto& video : ds.items) {
        const auto t_count = static_cast<int>(video.frame_count());
        Mat d(t_count, model.prof.c_desc);
        for (int t = 0; t < t_count; ++t) {
            auto hit = cache.lookup(video.id, t, prompt_id, model_id);
            if (!hit.has_value()) {
                throw std::runtime_error("no cached description for video " + video.id + " frame " +
                                         std::to_string(t) + "; run gen-desc first");
            }
            d.row(t) = model.de.encode(hit->text).row(0);
        }
        fs.features.emplace(video.id, std::move(d));
    }
    fs.config_hash = feature_store_hash(cache.path(), 0, model.prof, prompt_id, model_id);
    return fs;
}

// ---------------------------------------------------------------------------
// training steps
// ---------------------------------------------------------------------------

namespace detail {

inline Mat pooled_text_feature(MmsltModel& model, const Vocabulary& vocab, const std::string& text) {
    const auto ids = model.target_ids(vocab, text);
    const Mat l = model.text_encode(ids);
    return global_pool_value(l, ag::all_real(ids.size()));
}

}  // namespace detail

// One stage-1 update. Returns {L_ALIGN, L_DM, L_MMLP}; when `update` is false
// the model is left untouched (loss probe).
inline StepLosses pretrain_step(MmsltModel& model, const std::vector<const SignVideo*>& items,
                                const std::vector<std::vector<Image>>& frames_per_item,
                                const Vocabulary& vocab, const FeatureStore* store,
                                const StageConfig& cfg, AdamW& optimizer, double lr,
                                Rng* crop_rng, bool update = true) {
    if (items.empty()) throw std::invalid_argument("pretrain_step: empty batch");
    const bool need_dm = model.opt.use_descriptions && model.opt.use_mapper;
    if (model.opt.use_descriptions && store == nullptr) {
        throw std::invalid_argument("pretrain_step: description feature store required");
    }
    Graph g;
    std::vector<Ref> d_hat_list, d_ref_list;
    std::vector<ag::Mask> d_masks;
    std::vector<Ref> m_pooled, l_pooled;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const SignVideo& video = *items[i];
        const auto& frames = frames_per_item[i];
        Ref v = model.visual_encode(g, frames, update, crop_rng);
        Ref desc;
        const Mat* d_direct = nullptr;
        if (model.opt.use_descriptions) {
            const Mat& d_ref = store->require(video.id);
            if (d_ref.rows() != v.rows()) {
                throw std::runtime_error("description feature length mismatch for video " + video.id);
            }
            if (model.opt.use_mapper) {
                desc = model.map_descriptions(g, v);
                d_hat_list.push_back(desc);
                d_ref_list.push_back(g.constant(d_ref));
                d_masks.push_back(ag::all_real(static_cast<std::size_t>(d_ref.rows())));
            } else {
                d_direct = &d_ref;
                desc = g.constant(d_ref);
            }
        }
        (void)d_direct;
        if (cfg.use_align) {
            ag::Mask pooled_mask;
            Ref se = model.adapt_modalities(g, v, desc, ag::all_real(frames.size()), &pooled_mask);
            Ref m = model.encode_multimodal(g, se, pooled_mask);
            m_pooled.push_back(global_pool(g, m, pooled_mask));
            l_pooled.push_back(g.constant(detail::pooled_text_feature(model, vocab, video.text)));
        }
    }

    Ref align_term;
    if (cfg.use_align) {
        Ref m_glob = ag::concat_rows(m_pooled);
        Ref l_glob = ag::concat_rows(l_pooled);
        Ref tau = ag::exp_elem(g.leaf(model.tau_logit));
        align_term = align_loss(g, m_glob, l_glob, tau);
    }
    Ref dm_term;
    if (need_dm) dm_term = dm_loss(g, d_hat_list, d_ref_list, d_masks);

    StepLosses out;
    Ref total;
    if (align_term.valid() && dm_term.valid()) {
        total = mmlp_loss(g, align_term, dm_term, cfg.lambda);
    } else if (align_term.valid()) {
        total = align_term;
    } else if (dm_term.valid()) {
        total = ag::scale(dm_term, cfg.lambda);
    } else {
        throw std::invalid_argument("pretrain_step: nothing to optimize (no align, no mapper)");
    }
    out.align = align_term.valid() ? ag::scalar(align_term) : 0.0;
    out.dm = dm_term.valid() ? ag::scalar(dm_term) : 0.0;
    out.mmlp = ag::scalar(total);
    if (!std::isfinite(out.mmlp)) throw std::runtime_error("pretrain_step: non-finite loss");
    if (update) {
        g.backward(total);
        nn::ParamList params;
        model.collect(params);
        AdamWConfig ac{lr, cfg.beta1, cfg.beta2, 1e-8, cfg.weight_decay};
        optimizer.step(params, ac);
    }
    return out;
}

// One stage-2 update: teacher-forced label-smoothed cross entropy, mean over
// the batch's real target positions.
inline StepLosses finetune_step(MmsltModel& model, const std::vector<const SignVideo*>& items,
                                const std::vector<std::vector<Image>>& frames_per_item,
                                const Vocabulary& vocab, const FeatureStore* store,
                                const StageConfig& cfg, AdamW& optimizer, double lr,
                                Rng* crop_rng, bool update = true) {
    if (items.empty()) throw std::invalid_argument("finetune_step: empty batch");
    const bool need_store = model.opt.use_descriptions && !model.opt.use_mapper;
    if (need_store && store == nullptr) {
        throw std::invalid_argument("finetune_step: description feature store required (mapper off)");
    }
    Graph g;
    std::vector<Ref> logits_list;
    std::vector<int> targets_cat;
    ag::Mask mask_cat;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const SignVideo& video = *items[i];
        ag::Mask pooled_mask;
        const Mat* direct = nullptr;
        if (need_store) direct = &store->require(video.id);
        Ref memory =
            model.encode_memory(g, frames_per_item[i], direct, update, crop_rng, &pooled_mask);
        const auto targets = model.target_ids(vocab, video.text);
        std::vector<int> input{Vocabulary::bos_id};
        input.insert(input.end(), targets.begin(), targets.end() - 1);
        logits_list.push_back(model.dec.forward(g, input, memory, pooled_mask));
        targets_cat.insert(targets_cat.end(), targets.begin(), targets.end());
        mask_cat.insert(mask_cat.end(), targets.size(), 1);
    }
    Ref logits = ag::concat_rows(logits_list);
    Ref loss = slt_loss(g, logits, targets_cat, mask_cat, cfg.label_smoothing);
    StepLosses out;
    out.slt = ag::scalar(loss);
    if (!std::isfinite(out.slt)) throw std::runtime_error("finetune_step: non-finite loss");
    if (update) {
        g.backward(loss);
        nn::ParamList params;
        model.collect(params);
        AdamWConfig ac{lr, cfg.beta1, cfg.beta2, 1e-8, cfg.weight_decay};
        optimizer.step(params, ac);
    }
    return out;
}

// ---------------------------------------------------------------------------
// inference
// ---------------------------------------------------------------------------

// value-only memory for one video (eval preprocessing: center crop)
inline std::pair<Mat, ag::Mask> compute_memory(MmsltModel& model, const SignVideo& video,
                                               const FeatureStore* store) {
    const bool need_store = model.opt.use_descriptions && !model.opt.use_mapper;
    const Mat* direct = nullptr;
    if (need_store) {
        if (store == nullptr) {
            throw std::invalid_argument("compute_memory: description feature store required");
        }
        direct = &store->require(video.id);
    }
    Graph g(/*grad_enabled=*/false);
    ag::Mask pooled_mask;
    Ref m = model.encode_memory(g, video.frames(), direct, /*train=*/false, nullptr, &pooled_mask);
    return {m.val(), pooled_mask};
}

inline StepScorer make_step_scorer(MmsltModel& model, const Mat& memory, const ag::Mask& mem_mask) {
    return [&model, memory, mem_mask](const std::vector<int>& prefix) {
        Graph g(/*grad_enabled=*/false);
        std::vector<int> input{Vocabulary::bos_id};
        input.insert(input.end(), prefix.begin(), prefix.end());
        Ref logits = model.dec.forward(g, input, g.constant(memory), mem_mask);
        Ref logp = ag::log_softmax_rows(logits);
        return Eigen::VectorXd(logp.val().row(logp.rows() - 1).transpose());
    };
}

// default generation cap: 1.5x the longest training sentence, capped at 128
inline int default_max_len(const Dataset& ds) {
    std::size_t longest = 1;
    for (const auto& v : ds.items) {
        if (v.split == Split::train) {
            longest = std::max(longest, Vocabulary::tokenize(v.text).size() + 1);  // + <EOS>
        }
    }
    return std::min(128, std::max(1, static_cast<int>(std::ceil(1.5 * static_cast<double>(longest)))));
}

struct Translation {
    std::string id;
    std::string hypothesis;
    std::string reference;
    double score{0.0};
};

inline std::vector<Translation> translate_split(MmsltModel& model, const Dataset& ds, Split split,
                                                const DecodeConfig& cfg, const FeatureStore* store) {
    std::vector<Translation> out;
    for (const auto* video : ds.split_items(split)) {
        auto [memory, mem_mask] = compute_memory(model, *video, store);
        auto scorer = make_step_scorer(model, memory, mem_mask);
        Hypothesis hyp = beam_decode_hyp(scorer, Vocabulary::eos_id, cfg);
        Translation t;
        t.id = video->id;
        t.hypothesis = ds.vocab.decode(strip_eos(hyp.tokens, Vocabulary::eos_id));
        t.reference = video->text;
        t.score = penalized_score(hyp, cfg.length_penalty);
        out.push_back(std::move(t));
    }
    return out;
}

inline void write_translations(const std::filesystem::path& path,
                               const std::vector<Translation>& translations) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write translations: " + path.string());
    for (const auto& t : translations) {
        nlohmann::json j;
        j["id"] = t.id;
        j["hypothesis"] = t.hypothesis;
        j["reference"] = t.reference;
        j["score"] = t.score;
        out << j.dump() << "\n";
    }
}

inline std::vector<Translation> read_translations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("translations not found: " + path.string());
    std::vector<Translation> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        out.push_back(Translation{j.at("id").get<std::string>(),
                                  j.at("hypothesis").get<std::string>(),
                                  j.at("reference").get<std::string>(), j.value("score", 0.0)});
    }
    return out;
}

// in-batch top-1 retrieval accuracy: argmax_k cos(M~_j, L~_k) == j
inline double retrieval_accuracy(MmsltModel& model, const std::vector<const SignVideo*>& items,
                                 const Vocabulary& vocab, const FeatureStore* store) {
    if (items.empty()) throw std::invalid_argument("retrieval_accuracy: empty batch");
    Mat m_glob(static_cast<Eigen::Index>(items.size()), model.prof.c_mm);
    Mat l_glob(static_cast<Eigen::Index>(items.size()), model.prof.c_mm);
    for (std::size_t i = 0; i < items.size(); ++i) {
        auto [memory, mem_mask] = compute_memory(model, *items[i], store);
        m_glob.row(static_cast<Eigen::Index>(i)) = global_pool_value(memory, mem_mask).row(0);
        l_glob.row(static_cast<Eigen::Index>(i)) =
            detail::pooled_text_feature(model, vocab, items[i]->text).row(0);
    }
    m_glob.rowwise().normalize();
    l_glob.rowwise().normalize();
    const Mat sim = m_glob * l_glob.transpose();
    int correct = 0;
    for (Eigen::Index j = 0; j < sim.rows(); ++j) {
        Eigen::Index best = 0;
        sim.row(j).maxCoeff(&best);
        if (best == j) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(sim.rows());
}

// ---------------------------------------------------------------------------
// the stage loop
// ---------------------------------------------------------------------------

struct RunResult {
    std::filesystem::path best_checkpoint;
    std::filesystem::path last_checkpoint;
    double best_metric{-1.0};
    std::int64_t steps_run{0};
};

namespace detail {

inline std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(fnv1a("shuffle", seed ^ static_cast<std::uint64_t>(epoch) * 0x9E3779B97F4A7C15ULL));
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform_int(i));
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

inline void log_line(std::ofstream& log, const nlohmann::json& j) {
    log << j.dump() << "\n";
    log.flush();
}

}  // namespace detail

// Runs one training stage over the train split. The caller configures the
// model arrangement and loads the stage-1 checkpoint when fine-tuning.
inline RunResult run_stage(MmsltModel& model, const Dataset& ds, const StageConfig& cfg,
                           const FeatureStore* store, const std::filesystem::path& run_dir,
                           const DecodeConfig& decode_cfg, const std::string& config_hash,
                           bool resume = false, std::ostream* progress = nullptr) {
    namespace fs = std::filesystem;
    fs::create_directories(run_dir / "checkpoints");
    fs::create_directories(run_dir / "logs");
    const fs::path best_dir = run_dir / "checkpoints" / "best";
    const fs::path last_dir = run_dir / "checkpoints" / "last";
    const fs::path log_path = run_dir / "logs" / "metrics.jsonl";

    model.configure_stage(cfg.stage);
    nn::ParamList params;
    model.collect(params);

    const auto train_items = ds.split_items(Split::train);
    const auto dev_items = ds.split_items(Split::dev);
    const auto n_train = train_items.size();
    const std::int64_t steps_per_epoch =
        n_train == 0 ? 0
                     : static_cast<std::int64_t>((n_train + static_cast<std::size_t>(cfg.batch_size) - 1) /
                                                 static_cast<std::size_t>(cfg.batch_size));
    const std::int64_t total_steps = steps_per_epoch * cfg.epochs;

    AdamW optimizer;
    std::int64_t global_step = 0;
    if (resume) {
        CheckpointMeta meta = load_checkpoint(last_dir, model);
        optimizer.load(last_dir / "optim.bin", params);
        global_step = meta.step;
        model.configure_stage(cfg.stage);
    }
    std::ofstream log(log_path, resume ? std::ios::app : std::ios::trunc);
    if (!log) throw std::runtime_error("cannot open metric log: " + log_path.string());

    CheckpointMeta meta;
    meta.profile = model.prof.name;
    meta.stage = stage_name(cfg.stage);
    meta.config_hash = config_hash;

    RunResult result;
    result.best_checkpoint = best_dir;
    result.last_checkpoint = last_dir;

    auto evaluate_dev = [&](std::int64_t step, int epoch) -> double {
        if (dev_items.empty()) return -1.0;
        double metric = 0.0;
        nlohmann::json j;
        j["event"] = "eval";
        j["step"] = step;
        j["epoch"] = epoch;
        if (cfg.stage == Stage::mmlp) {
            const std::size_t n = std::min<std::size_t>(16, dev_items.size());
            std::vector<const SignVideo*> batch(dev_items.begin(),
                                                dev_items.begin() + static_cast<std::ptrdiff_t>(n));
            metric = cfg.use_align ? retrieval_accuracy(model, batch, ds.vocab, store) : 0.0;
            j["retrieval_dev"] = metric;
        } else {
            std::vector<std::string> ids, hyps, refs;
            auto translations = translate_split(model, ds, Split::dev, decode_cfg, store);
            for (const auto& t : translations) {
                ids.push_back(t.id);
                hyps.push_back(t.hypothesis);
                refs.push_back(t.reference);
            }
            metric = metrics::bleu(hyps, refs, 4);
            j["bleu4_dev"] = metric;
        }
        detail::log_line(log, j);
        if (progress != nullptr) *progress << "  eval epoch " << epoch << ": " << metric << "\n";
        return metric;
    };

    if (cfg.epochs == 0 || steps_per_epoch == 0) {
        meta.step = global_step;
        save_checkpoint(last_dir, model, meta);
        optimizer.save(last_dir / "optim.bin", params);
        save_checkpoint(best_dir, model, meta);
        return result;
    }

    const int start_epoch = static_cast<int>(global_step / steps_per_epoch);
    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        const auto perm = detail::epoch_permutation(n_train, cfg.seed, epoch);
        for (std::int64_t b = 0; b < steps_per_epoch; ++b) {
            // resume lands mid-epoch on the same trajectory
            if (global_step > static_cast<std::int64_t>(epoch) * steps_per_epoch + b) continue;
            std::vector<const SignVideo*> batch_items;
            for (std::int64_t k = b * cfg.batch_size;
                 k < std::min<std::int64_t>(static_cast<std::int64_t>(n_train), (b + 1) * cfg.batch_size);
                 ++k) {
                batch_items.push_back(train_items[perm[static_cast<std::size_t>(k)]]);
            }
            Rng aug_rng(fnv1a("augment", cfg.seed ^ static_cast<std::uint64_t>(global_step) *
                                                        0x9E3779B97F4A7C15ULL));
            Rng crop_rng(fnv1a("crop", cfg.seed ^ static_cast<std::uint64_t>(global_step) *
                                                      0xC2B2AE3D27D4EB4FULL));
            std::vector<std::vector<Image>> frames;
            frames.reserve(batch_items.size());
            for (const auto* v : batch_items) {
                frames.push_back(augment_video(v->frames(), cfg.augment_p, aug_rng));
            }
            const double lr = cosine_lr(global_step, total_steps, cfg.lr_max, cfg.lr_min);
            StepLosses losses;
            if (cfg.stage == Stage::mmlp) {
                losses = pretrain_step(model, batch_items, frames, ds.vocab, store, cfg, optimizer,
                                       lr, &crop_rng);
            } else {
                losses = finetune_step(model, batch_items, frames, ds.vocab, store, cfg, optimizer,
                                       lr, &crop_rng);
            }
            ++global_step;
            nlohmann::json j;
            j["step"] = global_step;
            j["epoch"] = epoch;
            j["lr"] = lr;
            if (cfg.stage == Stage::mmlp) {
                j["loss_align"] = losses.align;
                j["loss_dm"] = losses.dm;
                j["loss_mmlp"] = losses.mmlp;
            } else {
                j["loss_slt"] = losses.slt;
            }
            detail::log_line(log, j);
        }
        if (progress != nullptr) {
            *progress << "epoch " << epoch + 1 << "/" << cfg.epochs << " done (step " << global_step
                      << ")\n";
        }
        meta.step = global_step;
        save_checkpoint(last_dir, model, meta);
        optimizer.save(last_dir / "optim.bin", params);
        const bool eval_now = (epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs;
        if (eval_now) {
            const double metric = evaluate_dev(global_step, epoch);
            if (metric > result.best_metric) {
                result.best_metric = metric;
                save_checkpoint(best_dir, model, meta);
            }
        }
    }
    if (result.best_metric < 0.0) save_checkpoint(best_dir, model, meta);
    result.steps_run = global_step;
    return result;
}

// ---------------------------------------------------------------------------
// ablation grid (five configurations toggling GSD / M-L Align / DM)
// ---------------------------------------------------------------------------

struct AblationRow {
    int index{0};
    bool gsd{false};
    bool align{false};
    bool dm{false};
    metrics::EvalReport report;
};

struct AblationSettings {
    ModelProfile profile;
    std::uint64_t model_seed{7};
    StageConfig mmlp;
    StageConfig slt;
    DecodeConfig decode;
};

inline std::vector<AblationRow> ablation_grid() {
    return {{1, false, false, false, {}},
            {2, true, false, false, {}},
            {3, true, false, true, {}},
            {4, true, true, false, {}},
            {5, true, true, true, {}}};
}

inline std::vector<AblationRow> run_ablation(const Dataset& ds, const FeatureStore& store,
                                             const AblationSettings& settings,
                                             const std::filesystem::path& out_dir,
                                             std::ostream* progress = nullptr) {
    auto rows = ablation_grid();
    for (auto& row : rows) {
        if (progress != nullptr) {
            *progress << "ablation config (" << row.index << "): gsd=" << row.gsd
                      << " align=" << row.align << " dm=" << row.dm << "\n";
        }
        ModelOptions opt;
        opt.use_descriptions = row.gsd;
        opt.use_mapper = row.dm;
        MmsltModel model;
        model.build(settings.profile, opt, ds.vocab.size(), settings.model_seed);
        const auto row_dir = out_dir / ("config" + std::to_string(row.index));
        const FeatureStore* store_ptr = row.gsd ? &store : nullptr;
        const bool pretrain_needed = row.align || (row.gsd && row.dm);
        if (pretrain_needed) {
            StageConfig mmlp_cfg = settings.mmlp;
            mmlp_cfg.use_align = row.align;
            run_stage(model, ds, mmlp_cfg, store_ptr, row_dir / "pretrain", settings.decode, "",
                      false, progress);
        }
        run_stage(model, ds, settings.slt, store_ptr, row_dir / "finetune", settings.decode, "",
                  false, progress);
        auto translations = translate_split(model, ds, Split::test, settings.decode, store_ptr);
        std::vector<std::string> ids, hyps, refs;
        for (const auto& t : translations) {
            ids.push_back(t.id);
            hyps.push_back(t.hypothesis);
            refs.push_back(t.reference);
        }
        row.report = metrics::evaluate_corpus(ids, hyps, refs);
    }
    return rows;
}

inline nlohmann::json ablation_report_json(const std::vector<AblationRow>& rows) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& row : rows) {
        j.push_back({{"config", row.index},
                     {"gsd_mllm", row.gsd},
                     {"ml_align", row.align},
                     {"description_mapper", row.dm},
                     {"bleu1", row.report.bleu1},
                     {"bleu2", row.report.bleu2},
                     {"bleu3", row.report.bleu3},
                     {"bleu4", row.report.bleu4},
                     {"rouge_l", row.report.rouge}});
    }
    return j;
}

}  // namespace mmslt
