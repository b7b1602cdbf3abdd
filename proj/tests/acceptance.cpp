// Acceptance suite: runs every criterion at its stated tolerance and prints
// one PASS/FAIL line per criterion. Criteria 7, 8 and 10 drive the CLI binary
// (path in MMSLT_CLI) end to end on the toy dataset.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmslt/config.hpp"
#include "mmslt/engine.hpp"
#include "support/gradcheck.hpp"
#include "support/tempdir.hpp"

using namespace mmslt;
namespace fs = std::filesystem;

namespace {

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& what) {
    if (!cond) throw Failure(what);
}

void require_close(double got, double want, double tol, const std::string& what) {
    if (!(std::abs(got - want) <= tol)) {
        std::ostringstream os;
        os << what << ": got " << got << ", want " << want << " (tol " << tol << ")";
        throw Failure(os.str());
    }
}

std::string cli_path() {
    const char* p = std::getenv("MMSLT_CLI");
    if (p != nullptr && *p != 0) return p;
    return "./tools/mmslt";
}

void run_cli(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " 2>/dev/null";
    const int rc = std::system(cmd.c_str());
    if (rc != 0) throw Failure("CLI failed (" + std::to_string(rc) + "): " + cmd);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Failure("missing file: " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double last_eval_value(const fs::path& log, const std::string& key) {
    std::ifstream in(log);
    if (!in) throw Failure("missing metric log: " + log.string());
    std::string line;
    double value = -1.0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        if (j.contains(key)) value = j[key].get<double>();
    }
    if (value < 0.0) throw Failure("no " + key + " entries in " + log.string());
    return value;
}

ag::Mat randmat(Rng& rng, Eigen::Index r, Eigen::Index c, double s = 1.0) {
    ag::Mat m(r, c);
    for (Eigen::Index j = 0; j < c; ++j) {
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.normal() * s;
    }
    return m;
}

struct ToyFixture {
    Dataset ds;
    std::unique_ptr<testsupport::TempDir> dir;
    std::unique_ptr<DescriptionCache> cache;
    FeatureStore store;
    MmsltModel model;

    explicit ToyFixture(int n = 32, std::uint64_t seed = 7) {
        dir = std::make_unique<testsupport::TempDir>("accept");
        ds = make_toy_dataset(n, 12, 4, seed);
        cache = std::make_unique<DescriptionCache>(dir->path() / "cache.jsonl");
        MockMllmClient client;
        GenerationOptions gen;
        gen.resize_side = 32;
        for (const auto& v : ds.items) generate_descriptions(v, 3, client, *cache, gen);
        model.build(ModelProfile::toy(), ModelOptions{}, ds.vocab.size(), seed);
        store = build_feature_store(ds, *cache, model, 3, gen.model_id);
    }
};

// ---------------------------------------------------------------------------

void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    ag::Mat m1(1, 4), l1(1, 4);
    m1 << 1, 2, 3, 4;
    l1 << 4, 3, 2, 1;
    require(align_loss_value(m1, l1, 0.07) == 0.0, "align_loss(B=1) must be exactly 0");

    ag::Mat e2 = ag::Mat::Identity(2, 2);
    require_close(align_loss_value(e2, e2, 1.0), std::log(1.0 + std::exp(-1.0)), 1e-6,
                  "align_loss orthonormal B=2, tau=1");

    ag::Mat a(1, 2), b(1, 2);
    a << 1, 2;
    b << 1, 0;
    require_close(dm_loss_value({a}, {b}, {ag::all_real(1)}), 4.0, 1e-9, "dm_loss hand case");

    ag::Mat logits = ag::Mat::Constant(1, 4, 0.0);
    require_close(slt_loss_value(logits, {1}, ag::all_real(1), 0.0), std::log(4.0), 1e-6,
                  "slt_loss uniform logits");
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    require(secs < 1.0, "criterion 1 exceeded 1 s");
}

void criterion_2() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(42);
    double worst = 0.0;

    {  // align loss wrt M, L, tau
        ag::Param m{"m", randmat(rng, 4, 6), {}, {}, {}, true, true};
        ag::Param l{"l", randmat(rng, 4, 6), {}, {}, {}, true, true};
        ag::Param tau{"tau", ag::Mat::Constant(1, 1, 0.4), {}, {}, {}, true, true};
        auto loss = [&](bool back) {
            ag::Graph g;
            ag::Ref out = align_loss(g, g.leaf(m), g.leaf(l), g.leaf(tau));
            if (back) g.backward(out);
            return ag::scalar(out);
        };
        loss(true);
        worst = std::max(worst, testsupport::max_grad_rel_err({&m, &l, &tau},
                                                              [&] { return loss(false); }, 1e-5));
    }
    {  // slt loss wrt logits
        ag::Param lg{"lg", randmat(rng, 6, 8), {}, {}, {}, true, true};
        const std::vector<int> targets{1, 5, 0, 7, 2, 4};
        const ag::Mask mask{1, 1, 1, 1, 1, 0};
        auto loss = [&](bool back) {
            ag::Graph g;
            ag::Ref out = slt_loss(g, g.leaf(lg), targets, mask, 0.2);
            if (back) g.backward(out);
            return ag::scalar(out);
        };
        loss(true);
        worst = std::max(
            worst, testsupport::max_grad_rel_err({&lg}, [&] { return loss(false); }, 1e-5));
    }
    MmsltModel model;
    model.build(ModelProfile::toy(), ModelOptions{}, 20, 31);
    {  // description mapper
        const ag::Mat v = randmat(rng, 4, 64);
        const ag::Mat target = randmat(rng, 4, 32);
        auto loss = [&](bool back) {
            ag::Graph g;
            ag::Ref dh = model.dm.forward(g, g.constant(v));
            ag::Ref out = dm_loss(g, {dh}, {g.constant(target)}, {ag::all_real(4)});
            if (back) g.backward(out);
            return ag::scalar(out);
        };
        nn::ParamList ps;
        model.dm.collect(ps);
        for (auto* p : ps) p->zero_grad();
        loss(true);
        worst = std::max(worst,
                         testsupport::max_grad_rel_err(ps, [&] { return loss(false); }, 1e-5));
    }
    {  // modality adapter
        const ag::Mat fused = randmat(rng, 5, 96);
        auto loss = [&](bool back) {
            ag::Graph g;
            ag::Mask pooled;
            ag::Ref se = model.ma.forward(g, g.constant(fused), ag::all_real(5), &pooled);
            ag::Ref out = ag::sum_squares(ag::masked_mean_rows(se, pooled));
            if (back) g.backward(out);
            return ag::scalar(out);
        };
        nn::ParamList ps;
        model.ma.collect(ps);
        for (auto* p : ps) p->zero_grad();
        loss(true);
        worst = std::max(worst,
                         testsupport::max_grad_rel_err(ps, [&] { return loss(false); }, 1e-5));
    }
    {  // lora forward wrt A, B and input
        ag::Param a{"a", randmat(rng, 6, 2, 0.5), {}, {}, {}, true, true};
        ag::Param b{"b", randmat(rng, 2, 5, 0.5), {}, {}, {}, true, true};
        ag::Param x{"x", randmat(rng, 3, 6), {}, {}, {}, true, true};
        const ag::Mat base = randmat(rng, 6, 5, 0.5);
        auto loss = [&](bool back) {
            ag::Graph g;
            ag::Ref y = ag::add(
                ag::matmul(g.leaf(x), g.constant(base)),
                ag::scale(ag::matmul(ag::matmul(g.leaf(x), g.leaf(a)), g.leaf(b)), 2.0));
            ag::Ref out = ag::sum_squares(y);
            if (back) g.backward(out);
            return ag::scalar(out);
        };
        loss(true);
        worst = std::max(worst, testsupport::max_grad_rel_err({&a, &b, &x},
                                                              [&] { return loss(false); }, 1e-5));
    }
    require(worst < 1e-4, "max gradient relative error " + std::to_string(worst) + " >= 1e-4");
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    require(secs < 60.0, "criterion 2 exceeded 1 min");
}

void criterion_3() {
    Rng rng(9);
    {  // zero-init identity through the multimodal encoder
        MmsltModel with_lora, without;
        with_lora.build(ModelProfile::toy(), ModelOptions{}, 20, 77);
        without.build(ModelProfile::toy(), ModelOptions{}, 20, 77);
        for (auto& layer : without.enc.enc.layers) {
            layer.attn.q_proj.rank = 0;
            layer.attn.v_proj.rank = 0;
        }
        const ag::Mat se = randmat(rng, 6, 64);
        ag::Graph g1(false), g2(false);
        ag::Ref o1 = with_lora.encode_multimodal(g1, g1.constant(se), ag::all_real(6));
        ag::Ref o2 = without.encode_multimodal(g2, g2.constant(se), ag::all_real(6));
        require((o1.val() - o2.val()).cwiseAbs().maxCoeff() < 1e-7,
                "LoRA zero-init must equal the frozen base encoder to 1e-7");
    }
    {  // merge equivalence
        nn::LoraLinear lin;
        lin.init("t", rng, 8, 6, 4, 16.0);
        lin.lora_b.value = randmat(rng, 4, 6, 0.4);
        const ag::Mat x = randmat(rng, 5, 8);
        ag::Graph g(false);
        ag::Mat via_lora = lin.forward(g, g.constant(x)).val();
        ag::Mat merged = x * lin.merged_weight();
        merged.rowwise() += lin.b.value.row(0);
        require((via_lora - merged).cwiseAbs().maxCoeff() < 1e-6,
                "merged-weight path must match lora_forward to 1e-6");
    }
}

void criterion_4() {
    ToyFixture w(24, 11);
    auto items = w.ds.split_items(Split::train);
    items.resize(4);
    std::vector<std::vector<Image>> frames;
    for (const auto* v : items) frames.push_back(v->frames());

    StageConfig mmlp = StageConfig::mmlp_defaults();
    mmlp.seed = 11;
    w.model.configure_stage(Stage::mmlp);
    const auto de0 = w.model.checksum_of("de.");
    const auto te0 = w.model.checksum_of("te.");
    const auto enc0 = w.model.frozen_checksum("enc.");
    AdamW opt;
    for (int s = 0; s < 100; ++s) {
        pretrain_step(w.model, items, frames, w.ds.vocab, &w.store, mmlp, opt, 1e-3, nullptr);
    }
    require(w.model.checksum_of("de.") == de0, "psi_de changed during stage-1 training");
    require(w.model.checksum_of("te.") == te0, "psi_te changed during stage-1 training");
    require(w.model.frozen_checksum("enc.") == enc0, "encoder base changed during stage-1 training");

    StageConfig slt = StageConfig::slt_defaults();
    slt.seed = 11;
    w.model.configure_stage(Stage::slt);
    const auto dm0 = w.model.checksum_of("dm.");
    const auto enc1 = w.model.frozen_checksum("enc.");
    AdamW opt2;
    for (int s = 0; s < 100; ++s) {
        finetune_step(w.model, items, frames, w.ds.vocab, nullptr, slt, opt2, 1e-3, nullptr);
    }
    require(w.model.checksum_of("dm.") == dm0, "psi_dm changed during stage-2 training");
    require(w.model.checksum_of("de.") == de0, "psi_de changed during stage-2 training");
    require(w.model.checksum_of("te.") == te0, "psi_te changed during stage-2 training");
    require(w.model.frozen_checksum("enc.") == enc1, "encoder base changed during stage-2 training");
}

void criterion_5() {
    std::ifstream in(std::string(MMSLT_TEST_DATA_DIR) + "/metrics_oracle.json");
    require(in.good(), "oracle table missing");
    const nlohmann::json cases = nlohmann::json::parse(in);
    require(cases.size() >= 10, "oracle table must hold at least 10 cases");
    bool saw_bp_case = false, saw_lcs_case = false;
    for (const auto& c : cases) {
        const auto hyps = c.at("hyps").get<std::vector<std::string>>();
        const auto refs = c.at("refs").get<std::vector<std::string>>();
        const std::string name = c.at("name").get<std::string>();
        require_close(metrics::bleu(hyps, refs, 1), c.at("bleu1").get<double>(), 1e-6, name + " bleu1");
        require_close(metrics::bleu(hyps, refs, 2), c.at("bleu2").get<double>(), 1e-6, name + " bleu2");
        require_close(metrics::bleu(hyps, refs, 3), c.at("bleu3").get<double>(), 1e-6, name + " bleu3");
        require_close(metrics::bleu(hyps, refs, 4), c.at("bleu4").get<double>(), 1e-6, name + " bleu4");
        require_close(metrics::rouge_l(hyps, refs), c.at("rouge_l").get<double>(), 1e-6,
                      name + " rouge");
        if (name == "one_missing_tail") {
            require_close(c.at("bleu4").get<double>(), 77.8800783071405, 1e-9, "oracle BP pin");
            saw_bp_case = true;
        }
        if (name == "lcs_hand") {
            require_close(c.at("rouge_l").get<double>(), 80.0, 1e-9, "oracle LCS pin");
            saw_lcs_case = true;
        }
    }
    require(saw_bp_case && saw_lcs_case, "oracle table must include the named hand cases");
}

void criterion_6() {
    // untrained toy model over 50 toy videos
    Dataset ds = make_toy_dataset(50, 20, 6, 3);
    for (auto& v : ds.items) v.split = Split::test;
    MmsltModel model;
    model.build(ModelProfile::toy(), ModelOptions{}, ds.vocab.size(), 5);
    const int max_len = 10;
    int checked = 0;
    for (const auto& v : ds.items) {
        auto [memory, mem_mask] = compute_memory(model, v, nullptr);
        auto scorer = make_step_scorer(model, memory, mem_mask);
        const auto greedy = greedy_decode(scorer, Vocabulary::eos_id, max_len);
        DecodeConfig beam1{1, 1.0, max_len};
        require(beam_decode(scorer, Vocabulary::eos_id, beam1) == greedy,
                "beam=1 differs from greedy on " + v.id);
        DecodeConfig beam8{8, 1.0, max_len};
        const auto h8 = beam_decode_hyp(scorer, Vocabulary::eos_id, beam8);
        const auto hg = greedy_decode_hyp(scorer, Vocabulary::eos_id, max_len);
        require(penalized_score(h8, 1.0) >= penalized_score(hg, 1.0) - 1e-12,
                "beam-8 scored below greedy on " + v.id);
        ++checked;
    }
    require(checked == 50, "expected 50 toy instances");

    // constructed 3-token decoder where greedy is suboptimal
    auto table_scorer = [](const std::vector<int>& prefix) {
        Eigen::VectorXd logp(3);
        auto fill = [&](double p0, double p1, double p2) {
            logp << std::log(p0), std::log(p1), std::log(p2);
        };
        if (prefix.empty()) {
            fill(0.05, 0.60, 0.35);
        } else if (prefix[0] == 1) {
            fill(0.50, 0.25, 0.25);
        } else {
            fill(0.90, 0.05, 0.05);
        }
        return logp;
    };
    DecodeConfig cfg{2, 0.0, 2};
    Hypothesis beam = beam_decode_hyp(table_scorer, 0, cfg);
    // brute force over every complete sequence of length <= 2
    Hypothesis best;
    double best_score = -1e300;
    std::function<void(Hypothesis)> walk = [&](Hypothesis h) {
        const auto logp = table_scorer(h.tokens);
        for (int v = 0; v < 3; ++v) {
            Hypothesis next = h;
            next.tokens.push_back(v);
            next.logprob += logp(v);
            if (v == 0 || static_cast<int>(next.tokens.size()) == cfg.max_len) {
                const double s = penalized_score(next, cfg.length_penalty);
                if (s > best_score) {
                    best_score = s;
                    best = next;
                }
            } else {
                walk(next);
            }
        }
    };
    walk(Hypothesis{});
    require(beam.tokens == best.tokens, "beam-2 missed the brute-force optimum");
    const auto greedy = greedy_decode_hyp(table_scorer, 0, cfg.max_len);
    require(penalized_score(beam, 0.0) > penalized_score(greedy, 0.0),
            "constructed case must separate beam from greedy");
}

struct E2EResult {
    double retrieval{0.0};
    double bleu4{0.0};
    std::string pretrain_log;
    std::string finetune_log;
};

E2EResult run_toy_pipeline(const fs::path& work) {
    fs::create_directories(work);
    const std::string toy = (work / "toy").string();
    const std::string run = (work / "run").string();
    fs::create_directories(run);
    run_cli("make-toy --out " + toy + " --n 200 --vocab 20 --max-len 6 --seed 7");
    const std::string cfg = " --config " + toy + "/toy_config.json";
    const std::string manifest = " --manifest " + toy + "/manifest.jsonl";
    run_cli("gen-desc" + cfg + manifest + " --cache " + run + "/cache.jsonl");
    run_cli("build-feature-store" + cfg + manifest + " --cache " + run + "/cache.jsonl --out " +
            run + "/store.bin");
    run_cli("pretrain" + cfg + manifest + " --store " + run + "/store.bin --cache " + run +
            "/cache.jsonl --out " + run + "/pre");
    run_cli("finetune" + cfg + manifest + " --init " + run + "/pre/checkpoints/best --out " + run +
            "/fine");
    run_cli("translate" + cfg + manifest + " --checkpoint " + run +
            "/fine/checkpoints/best --split test --out " + run + "/test.jsonl");
    run_cli("evaluate --hyp " + run + "/test.jsonl --out " + run + "/eval.json");

    E2EResult r;
    r.retrieval = last_eval_value(fs::path(run) / "pre" / "logs" / "metrics.jsonl", "retrieval_dev");
    const auto eval = nlohmann::json::parse(slurp(fs::path(run) / "eval.json"));
    r.bleu4 = eval.at("bleu4").get<double>();
    r.pretrain_log = slurp(fs::path(run) / "pre" / "logs" / "metrics.jsonl");
    r.finetune_log = slurp(fs::path(run) / "fine" / "logs" / "metrics.jsonl");
    return r;
}

E2EResult g_first_run;  // shared between criteria 7 and 10

void criterion_7(const fs::path& work) {
    const auto t0 = std::chrono::steady_clock::now();
    g_first_run = run_toy_pipeline(work / "a");
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "       (retrieval " << g_first_run.retrieval << ", test BLEU-4 "
              << g_first_run.bleu4 << ", " << secs << " s)\n";
    require(g_first_run.retrieval >= 0.9,
            "dev retrieval " + std::to_string(g_first_run.retrieval) + " < 0.9");
    require(g_first_run.bleu4 >= 80.0,
            "toy test BLEU-4 " + std::to_string(g_first_run.bleu4) + " < 80.0");
    require(secs < 900.0, "toy pipeline exceeded 15 minutes");
}

void criterion_8(const fs::path& work) {
    const fs::path toy = work / "a" / "toy";
    const fs::path run = work / "a" / "run";
    const fs::path out = work / "ablation";
    // reduced epochs keep the five-row grid fast; the shared seed and schedule
    // still reproduce the full-model >= no-pretraining ordering
    run_cli("ablate --config " + (toy / "toy_config.json").string() + " --manifest " +
            (toy / "manifest.jsonl").string() + " --store " + (run / "store.bin").string() +
            " --out " + out.string() +
            " --set mmlp.epochs=3 --set slt.epochs=10");
    const auto rows = nlohmann::json::parse(slurp(out / "ablation_report.json"));
    require(rows.size() == 5, "ablation report must hold five rows");
    double b2 = -1.0, b5 = -1.0;
    for (const auto& row : rows) {
        if (row.at("config") == 2) b2 = row.at("bleu4").get<double>();
        if (row.at("config") == 5) b5 = row.at("bleu4").get<double>();
    }
    std::cout << "       (config(2) BLEU-4 " << b2 << ", config(5) BLEU-4 " << b5 << ")\n";
    require(b2 >= 0.0 && b5 >= 0.0, "rows (2) and (5) missing from the report");
    require(b5 >= b2, "config (5) must score at least config (2)");
}

void criterion_9() {
    testsupport::TempDir dir("cache9");
    Dataset ds = make_toy_dataset(4, 12, 5, 21);
    GenerationOptions gen;
    gen.resize_side = 32;

    // uninterrupted reference run
    DescriptionCache ref((dir / "ref.jsonl"));
    MockMllmClient ref_client;
    for (const auto& v : ds.items) generate_descriptions(v, 3, ref_client, ref, gen);

    // interrupted after 7 requests, then resumed
    DescriptionCache cache((dir / "resume.jsonl"));
    MockMllmClient inner;
    FailAfterClient flaky(inner, 7);
    bool failed = false;
    try {
        for (const auto& v : ds.items) generate_descriptions(v, 3, flaky, cache, gen);
    } catch (const GenerationError&) {
        failed = true;
    }
    require(failed, "injected failure did not surface");
    MockMllmClient healthy;
    for (const auto& v : ds.items) generate_descriptions(v, 3, healthy, cache, gen);
    require(cache.text_map() == ref.text_map(),
            "resumed cache differs from the uninterrupted run");

    // a second full pass issues zero client calls
    MockMllmClient counter;
    for (const auto& v : ds.items) generate_descriptions(v, 3, counter, cache, gen);
    require(counter.call_count() == 0, "second full run still issued client calls");
}

void criterion_10(const fs::path& work) {
    E2EResult second = run_toy_pipeline(work / "b");
    require(second.pretrain_log == g_first_run.pretrain_log,
            "pretrain metric logs differ between identical runs");
    require(second.finetune_log == g_first_run.finetune_log,
            "finetune metric logs differ between identical runs");
    require(second.bleu4 == g_first_run.bleu4, "final BLEU-4 differs between identical runs");
}

}  // namespace

int main() {
    testsupport::TempDir work("acceptance_e2e");
    struct Criterion {
        int id;
        std::string title;
        std::function<void()> fn;
    };
    const std::vector<Criterion> criteria = {
        {1, "loss-value oracles", [] { criterion_1(); }},
        {2, "gradient checks vs central differences", [] { criterion_2(); }},
        {3, "LoRA zero-init identity and merge equivalence", [] { criterion_3(); }},
        {4, "frozen-parameter checksums over 100 steps", [] { criterion_4(); }},
        {5, "metric oracle table", [] { criterion_5(); }},
        {6, "decoding contracts (beam/greedy/brute force)", [] { criterion_6(); }},
        {7, "toy end-to-end pipeline", [&] { criterion_7(work.path()); }},
        {8, "ablation grid ordering", [&] { criterion_8(work.path()); }},
        {9, "description cache interrupt/resume", [] { criterion_9(); }},
        {10, "bit-identical repeat of the toy pipeline", [&] { criterion_10(work.path()); }},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        try {
            c.fn();
            std::cout << "[PASS] criterion " << c.id << ": " << c.title << "\n";
        } catch (const std::exception& e) {
            ++failures;
            std::cout << "[FAIL] criterion " << c.id << ": " << c.title << " -- " << e.what()
                      << "\n";
        }
        std::cout.flush();
    }
    if (failures != 0) {
        std::cout << failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all 10 criteria passed\n";
    return 0;
}
