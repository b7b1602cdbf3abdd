// mmslt: one entry point for the whole pipeline.
//   make-toy            render a deterministic glyph dataset + toy config
//   gen-desc            generate per-frame descriptions into the cache
//   build-feature-store encode cached descriptions into a feature store
//   pretrain            stage 1 (description regression + alignment)
//   finetune            stage 2 (translation fine-tuning)
//   translate           beam-decode a split to JSON Lines
//   evaluate            BLEU-1..4 / ROUGE-L report from translate output
//   ablate              train the five-row component grid and report
//
// Exit codes: 0 ok, 2 usage, 3 config, 4 missing prerequisite, 5 runtime.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "mmslt/config.hpp"
#include "mmslt/data.hpp"
#include "mmslt/engine.hpp"
#include "mmslt/metrics.hpp"
#include "mmslt/mllm.hpp"
#include "mmslt/mllm_http.hpp"

namespace fs = std::filesystem;
using namespace mmslt;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct PrereqError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

PipelineConfig load_config_or_die(const std::string& path, const std::vector<std::string>& sets) {
    try {
        return load_config(path.empty() ? fs::path{} : fs::path(path), sets);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
}

Dataset load_manifest_checked(const std::string& path) {
    if (!fs::exists(path)) throw PrereqError("manifest not found: " + path);
    return load_manifest(path);
}

void guard_fresh_file(const fs::path& p, bool force) {
    if (fs::exists(p) && !force) {
        throw std::runtime_error("refusing to overwrite " + p.string() + " (use --force)");
    }
}

void guard_fresh_run_dir(const fs::path& dir, bool force, bool resume) {
    if (resume) return;
    if (fs::exists(dir / "logs" / "metrics.jsonl") && !force) {
        throw std::runtime_error("run directory " + dir.string() +
                                 " already holds results (use --force or --resume)");
    }
}

void write_snapshot(const fs::path& dir, const PipelineConfig& cfg, const std::string& name) {
    fs::create_directories(dir);
    std::ofstream out(dir / name);
    out << cfg.to_json().dump(2) << "\n";
}

std::unique_ptr<MllmClient> make_client(const PipelineConfig& cfg, const std::string& override_client) {
    const std::string kind = override_client.empty() ? cfg.mllm.client : override_client;
    if (kind == "mock") return std::make_unique<MockMllmClient>();
    if (kind == "http") {
        HttpClientConfig hc;
        hc.endpoint = cfg.mllm.endpoint;
        hc.path = cfg.mllm.path;
        hc.api_key_env = cfg.mllm.api_key_env;
        hc.retries = cfg.mllm.retries;
        hc.backoff_ms = cfg.mllm.backoff_ms;
        return std::make_unique<HttpMllmClient>(hc);
    }
    throw ConfigError("unknown client kind: " + kind + " (expected mock or http)");
}

GenerationOptions gen_options(const PipelineConfig& cfg) {
    GenerationOptions opt;
    opt.model_id = cfg.mllm.model_id;
    opt.batch_frames = cfg.mllm.batch_frames;
    opt.max_tokens = cfg.mllm.max_tokens;
    opt.resize_side = cfg.mllm.resize_side;
    return opt;
}

DecodeConfig resolve_decode(const PipelineConfig& cfg, const Dataset& ds) {
    DecodeConfig d = cfg.decode;
    if (d.max_len <= 0) d.max_len = default_max_len(ds);
    return d;
}

// toy preset: paper-default schedules are far too long for a 200-video desk
// run, so make-toy emits a tuned config next to the data
nlohmann::json toy_config_json(std::uint64_t seed, int frame_side) {
    nlohmann::json j;
    j["seed"] = seed;
    j["model"] = nlohmann::json{{"name", "toy"}, {"resize_side", frame_side},
                                {"crop_side", frame_side}};
    j["mllm"] = nlohmann::json{{"client", "mock"}, {"resize_side", frame_side}};
    j["mmlp"] = nlohmann::json{{"epochs", 5}, {"batch_size", 16}, {"lr_max", 3e-3},
                               {"lr_min", 1e-5}, {"weight_decay", 0.01}, {"eval_every", 1}};
    j["slt"] = nlohmann::json{{"epochs", 20}, {"batch_size", 8}, {"lr_max", 3e-3},
                              {"lr_min", 1e-5}, {"weight_decay", 0.01}, {"eval_every", 5}};
    return j;
}

void print_eval_table(const metrics::EvalReport& rep) {
    std::printf("%-8s %-8s %-8s %-8s %-8s\n", "BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "ROUGE-L");
    std::printf("%-8.2f %-8.2f %-8.2f %-8.2f %-8.2f\n", rep.bleu1, rep.bleu2, rep.bleu3, rep.bleu4,
                rep.rouge);
}

int run(int argc, char** argv) {
    CLI::App app{"MMSLT pipeline: sign-video translation via per-frame descriptions"};
    app.require_subcommand(1);

    // shared option storage
    std::string config_path, manifest_path, cache_path, store_path, out_path, init_path;
    std::string split_name_arg{"test"}, client_kind, hyp_path;
    std::vector<std::string> sets;
    bool force = false, resume = false, from_scratch = false;
    int n_videos = 200, vocab_size = 20, max_len = 6, frame_side = 32;
    std::uint64_t seed = 7;

    auto add_common = [&](CLI::App* cmd, bool with_config = true) {
        if (with_config) {
            cmd->add_option("--config", config_path, "pipeline config JSON");
            cmd->add_option("--set", sets, "dot-path override, e.g. mmlp.epochs=5");
        }
        cmd->add_flag("--force", force, "allow overwriting existing outputs");
    };

    auto* make_toy = app.add_subcommand("make-toy", "render the deterministic glyph dataset");
    make_toy->add_option("--out", out_path, "output directory")->required();
    make_toy->add_option("--n", n_videos, "number of videos");
    make_toy->add_option("--vocab", vocab_size, "vocabulary size incl. 4 reserved ids");
    make_toy->add_option("--max-len", max_len, "maximum sentence length");
    make_toy->add_option("--seed", seed, "generator seed");
    make_toy->add_option("--frame-side", frame_side, "frame side in pixels");
    add_common(make_toy, false);

    auto* gen_desc = app.add_subcommand("gen-desc", "generate per-frame SL descriptions");
    gen_desc->add_option("--manifest", manifest_path, "dataset manifest")->required();
    gen_desc->add_option("--cache", cache_path, "description cache (JSON Lines)")->required();
    gen_desc->add_option("--client", client_kind, "mock|http (overrides config)");
    add_common(gen_desc);

    auto* build_fs = app.add_subcommand("build-feature-store", "encode cached descriptions");
    build_fs->add_option("--manifest", manifest_path, "dataset manifest")->required();
    build_fs->add_option("--cache", cache_path, "description cache")->required();
    build_fs->add_option("--out", out_path, "feature store file")->required();
    add_common(build_fs);

    auto* pretrain = app.add_subcommand("pretrain", "stage 1: multimodal-language pre-training");
    pretrain->add_option("--manifest", manifest_path, "dataset manifest")->required();
    pretrain->add_option("--store", store_path, "description feature store");
    pretrain->add_option("--cache", cache_path, "cache path (validates store freshness)");
    pretrain->add_option("--out", out_path, "run directory")->required();
    pretrain->add_flag("--resume", resume, "continue from the last checkpoint");
    add_common(pretrain);

    auto* finetune = app.add_subcommand("finetune", "stage 2: translation fine-tuning");
    finetune->add_option("--manifest", manifest_path, "dataset manifest")->required();
    finetune->add_option("--init", init_path, "stage-1 checkpoint directory");
    finetune->add_option("--store", store_path, "feature store (configs without the mapper)");
    finetune->add_option("--out", out_path, "run directory")->required();
    finetune->add_flag("--from-scratch", from_scratch, "train without a stage-1 checkpoint");
    finetune->add_flag("--resume", resume, "continue from the last checkpoint");
    add_common(finetune);

    auto* translate = app.add_subcommand("translate", "decode a split to JSON Lines");
    translate->add_option("--manifest", manifest_path, "dataset manifest")->required();
    translate->add_option("--checkpoint", init_path, "checkpoint directory")->required();
    translate->add_option("--store", store_path, "feature store (configs without the mapper)");
    translate->add_option("--split", split_name_arg, "train|dev|test");
    translate->add_option("--out", out_path, "output JSONL file")->required();
    add_common(translate);

    auto* evaluate = app.add_subcommand("evaluate", "score translate output");
    evaluate->add_option("--hyp", hyp_path, "translate output JSONL")->required();
    evaluate->add_option("--out", out_path, "report JSON file");
    add_common(evaluate);

    auto* ablate = app.add_subcommand("ablate", "five-configuration component study");
    ablate->add_option("--manifest", manifest_path, "dataset manifest")->required();
    ablate->add_option("--store", store_path, "description feature store")->required();
    ablate->add_option("--out", out_path, "output directory")->required();
    add_common(ablate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (make_toy->parsed()) {
        const fs::path dir(out_path);
        guard_fresh_file(dir / "manifest.jsonl", force);
        Dataset ds = make_toy_dataset(n_videos, vocab_size, max_len, seed, frame_side);
        write_dataset(ds, dir);
        std::ofstream cfg_out(dir / "toy_config.json");
        cfg_out << toy_config_json(seed, frame_side).dump(2) << "\n";
        std::cerr << "wrote " << ds.items.size() << " videos under " << dir.string() << "\n";
        return 0;
    }

    if (gen_desc->parsed()) {
        PipelineConfig cfg = load_config_or_die(config_path, sets);
        Dataset ds = load_manifest_checked(manifest_path);
        auto client = make_client(cfg, client_kind);
        DescriptionCache cache((fs::path(cache_path)));
        const auto opt = gen_options(cfg);
        std::size_t frames_total = 0;
        for (const auto& video : ds.items) {
            auto set = generate_descriptions(video, cfg.mllm.prompt_id, *client, cache, opt);
            frames_total += set.entries.size();
        }
        write_snapshot(fs::path(cache_path).parent_path(), cfg, "resolved_config.gen-desc.json");
        std::cerr << "descriptions ready for " << ds.items.size() << " videos (" << frames_total
                  << " frames, " << client->call_count() << " client calls)\n";
        return 0;
    }

    if (build_fs->parsed()) {
        PipelineConfig cfg = load_config_or_die(config_path, sets);
        Dataset ds = load_manifest_checked(manifest_path);
        if (!fs::exists(cache_path)) throw PrereqError("description cache not found: " + cache_path);
        guard_fresh_file(out_path, force);
        DescriptionCache cache((fs::path(cache_path)));
        MmsltModel model;
        model.build(cfg.model, cfg.options, ds.vocab.size(), cfg.seed);
        FeatureStore store = build_feature_store(ds, cache, model, cfg.mllm.prompt_id, cfg.mllm.model_id);
        store.config_hash =
            feature_store_hash(cache_path, cfg.seed, cfg.model, cfg.mllm.prompt_id, cfg.mllm.model_id);
        store.save(out_path);
        write_snapshot(fs::path(out_path).parent_path(), cfg, "resolved_config.build-feature-store.json");
        std::cerr << "feature store with " << store.features.size() << " videos -> " << out_path << "\n";
        return 0;
    }

    if (pretrain->parsed()) {
        PipelineConfig cfg = load_config_or_die(config_path, sets);
        Dataset ds = load_manifest_checked(manifest_path);
        const fs::path run_dir(out_path);
        guard_fresh_run_dir(run_dir, force, resume);
        FeatureStore store;
        const FeatureStore* store_ptr = nullptr;
        if (cfg.options.use_descriptions) {
            if (store_path.empty()) throw PrereqError("pretrain needs --store (run build-feature-store)");
            if (!fs::exists(store_path)) throw PrereqError("feature store not found: " + store_path);
            if (!cache_path.empty()) {
                store = FeatureStore::load_checked(
                    store_path,
                    feature_store_hash(cache_path, cfg.seed, cfg.model, cfg.mllm.prompt_id,
                                       cfg.mllm.model_id));
            } else {
                store = FeatureStore::load(store_path);
            }
            store_ptr = &store;
        }
        MmsltModel model;
        model.build(cfg.model, cfg.options, ds.vocab.size(), cfg.seed);
        write_snapshot(run_dir, cfg, "resolved_config.json");
        StageConfig sc = cfg.mmlp;
        sc.stage = Stage::mmlp;
        auto result = run_stage(model, ds, sc, store_ptr, run_dir, resolve_decode(cfg, ds),
                                cfg.hash(), resume, &std::cerr);
        std::cerr << "pretrain done; best dev metric " << result.best_metric << "\n";
        return 0;
    }

    if (finetune->parsed()) {
        PipelineConfig cfg = load_config_or_die(config_path, sets);
        Dataset ds = load_manifest_checked(manifest_path);
        const fs::path run_dir(out_path);
        guard_fresh_run_dir(run_dir, force, resume);
        MmsltModel model;
        model.build(cfg.model, cfg.options, ds.vocab.size(), cfg.seed);
        if (!from_scratch) {
            if (init_path.empty()) {
                throw PrereqError("finetune needs --init <stage-1 checkpoint> or --from-scratch");
            }
            if (!fs::exists(fs::path(init_path) / "params.bin")) {
                throw PrereqError("stage-1 checkpoint not found: " + init_path);
            }
            load_checkpoint(init_path, model);
        }
        FeatureStore store;
        const FeatureStore* store_ptr = nullptr;
        if (cfg.options.use_descriptions && !cfg.options.use_mapper) {
            if (store_path.empty()) throw PrereqError("this arrangement feeds D directly; pass --store");
            store = FeatureStore::load(store_path);
            store_ptr = &store;
        }
        write_snapshot(run_dir, cfg, "resolved_config.json");
        StageConfig sc = cfg.slt;
        sc.stage = Stage::slt;
        auto result = run_stage(model, ds, sc, store_ptr, run_dir, resolve_decode(cfg, ds),
                                cfg.hash(), resume, &std::cerr);
        std::cerr << "finetune done; best dev BLEU-4 " << result.best_metric << "\n";
        return 0;
    }

    if (translate->parsed()) {
        PipelineConfig cfg = load_config_or_die(config_path, sets);
        Dataset ds = load_manifest_checked(manifest_path);
        guard_fresh_file(out_path, force);
        MmsltModel model;
        model.build(cfg.model, cfg.options, ds.vocab.size(), cfg.seed);
        if (!fs::exists(fs::path(init_path) / "params.bin")) {
            throw PrereqError("checkpoint not found: " + init_path);
        }
        load_checkpoint(init_path, model);
        FeatureStore store;
        const FeatureStore* store_ptr = nullptr;
        if (cfg.options.use_descriptions && !cfg.options.use_mapper) {
            if (store_path.empty()) throw PrereqError("this arrangement feeds D directly; pass --store");
            store = FeatureStore::load(store_path);
            store_ptr = &store;
        }
        auto translations =
            translate_split(model, ds, split_from_string(split_name_arg), resolve_decode(cfg, ds), store_ptr);
        write_translations(out_path, translations);
        write_snapshot(fs::path(out_path).parent_path(), cfg, "resolved_config.translate.json");
        std::cerr << "translated " << translations.size() << " videos -> " << out_path << "\n";
        return 0;
    }

    if (evaluate->parsed()) {
        if (!fs::exists(hyp_path)) throw PrereqError("translate output not found: " + hyp_path);
        auto translations = read_translations(hyp_path);
        std::vector<std::string> ids, hyps, refs;
        for (const auto& t : translations) {
            ids.push_back(t.id);
            hyps.push_back(t.hypothesis);
            refs.push_back(t.reference);
        }
        auto rep = metrics::evaluate_corpus(ids, hyps, refs);
        const auto j = metrics::report_to_json(rep);
        if (!out_path.empty()) {
            guard_fresh_file(out_path, force);
            std::ofstream out(out_path);
            out << j.dump(2) << "\n";
        }
        std::cout << j.dump(2) << "\n";
        print_eval_table(rep);
        return 0;
    }

    if (ablate->parsed()) {
        PipelineConfig cfg = load_config_or_die(config_path, sets);
        Dataset ds = load_manifest_checked(manifest_path);
        if (!fs::exists(store_path)) throw PrereqError("feature store not found: " + store_path);
        const fs::path dir(out_path);
        guard_fresh_file(dir / "ablation_report.json", force);
        FeatureStore store = FeatureStore::load(store_path);
        AblationSettings settings;
        settings.profile = cfg.model;
        settings.model_seed = cfg.seed;
        settings.mmlp = cfg.mmlp;
        settings.mmlp.stage = Stage::mmlp;
        settings.slt = cfg.slt;
        settings.slt.stage = Stage::slt;
        settings.decode = resolve_decode(cfg, ds);
        auto rows = run_ablation(ds, store, settings, dir, &std::cerr);
        fs::create_directories(dir);
        std::ofstream out(dir / "ablation_report.json");
        out << ablation_report_json(rows).dump(2) << "\n";
        write_snapshot(dir, cfg, "resolved_config.json");
        std::printf("%-8s %-5s %-7s %-5s %-8s %-8s %-8s %-8s %-8s\n", "config", "GSD", "Align",
                    "DM", "B-1", "B-2", "B-3", "B-4", "R");
        for (const auto& row : rows) {
            std::printf("(%d)      %-5s %-7s %-5s %-8.2f %-8.2f %-8.2f %-8.2f %-8.2f\n", row.index,
                        row.gsd ? "yes" : "-", row.align ? "yes" : "-", row.dm ? "yes" : "-",
                        row.report.bleu1, row.report.bleu2, row.report.bleu3, row.report.bleu4,
                        row.report.rouge);
        }
        return 0;
    }

    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 3;
    } catch (const PrereqError& e) {
        std::cerr << "error: missing-prerequisite: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: runtime: " << e.what() << "\n";
        return 5;
    }
}
