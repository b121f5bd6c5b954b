#include "tvc/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tvc/ablation.hpp"
#include "tvc/distill.hpp"
#include "tvc/dvr.hpp"
#include "tvc/errors.hpp"
#include "tvc/jsonl.hpp"
#include "tvc/manifest.hpp"
#include "tvc/model.hpp"
#include "tvc/probe.hpp"
#include "tvc/pvc.hpp"
#include "tvc/report.hpp"
#include "tvc/task.hpp"
#include "tvc/train.hpp"
#include "tvc/vocab.hpp"

namespace tvc {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

// Applies a JSON config file onto CLI11 options; every key must name a known
// option of the subcommand.
void apply_config(CLI::App* cmd, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config: " + path);
    ordered_json j = ordered_json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ConfigError("config must be a JSON object: " + path);
    }
    for (const auto& [key, val] : j.items()) {
        CLI::Option* opt = nullptr;
        for (CLI::Option* o : cmd->get_options()) {
            if (o->get_lnames().empty()) continue;
            if (o->get_lnames()[0] == key) {
                opt = o;
                break;
            }
        }
        if (!opt) throw ConfigError("unknown config key '" + key + "' in " + path);
        if (!opt->results().empty()) continue;  // explicit flag wins
        std::string text = val.is_string() ? val.get<std::string>() : val.dump();
        opt->add_result(text);
    }
}

std::string config_hash_of(const ordered_json& effective) {
    return hash_hex(fnv1a64(effective.dump()));
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory: " + dir);
}

std::vector<CorpusItem> load_corpus(const std::string& instances_path,
                                    const std::string& images_path,
                                    const std::string& traces_path) {
    std::vector<TaskInstance> instances = read_instances(instances_path, images_path);
    std::vector<ReasoningTrace> traces = read_traces(traces_path);
    std::vector<CorpusItem> corpus;
    for (const ReasoningTrace& trace : traces) {
        auto it = std::find_if(instances.begin(), instances.end(),
                               [&](const TaskInstance& inst) { return inst.id == trace.id; });
        if (it == instances.end()) throw InputError("trace without instance: " + trace.id);
        CorpusItem item;
        item.instance = *it;
        item.trace = trace;
        item.text_only = trace.image_ref.empty();
        corpus.push_back(std::move(item));
    }
    return corpus;
}

void write_pvc_traces(const std::string& path, const std::vector<PvcOutput>& outputs,
                      const std::vector<std::string>& ids) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open for writing: " + path);
    for (size_t i = 0; i < outputs.size(); ++i) {
        const PvcOutput& o = outputs[i];
        ordered_json injections = ordered_json::array();
        for (const InjectionRecord& r : o.injections) {
            injections.push_back({{"token_offset", r.token_offset},
                                  {"bridge_begin", r.bridge_begin},
                                  {"bridge_len", r.bridge_len},
                                  {"image_begin", r.image_begin},
                                  {"image_len", r.image_len},
                                  {"pool", r.pool}});
        }
        ordered_json markers = ordered_json::array();
        for (const auto& [idx, word] : o.gen.trace.markers) markers.push_back({idx, word});
        ordered_json rec = {
            {"id", ids[i]},
            {"question", o.gen.trace.question},
            {"image_ref", o.gen.trace.image_ref},
            {"steps", o.gen.trace.steps},
            {"markers", markers},
            {"answer", o.gen.trace.answer},
            {"provenance", provenance_name(o.gen.trace.provenance)},
            {"injections", injections},
        };
        out << rec.dump() << '\n';
    }
    if (!out) throw InputError("write failed: " + path);
}

// --- subcommand implementations ------------------------------------------

int cmd_gen(int n, double leak, double markers, double text_only, uint64_t seed,
            const std::string& out_dir) {
    CorpusConfig cfg;
    cfg.n = n;
    cfg.seed = seed;
    cfg.leak_frac = leak;
    cfg.marker_frac = markers;
    cfg.text_only_frac = text_only;
    std::vector<CorpusItem> corpus = gen_corpus(cfg);

    ensure_dir(out_dir);
    std::vector<TaskInstance> instances;
    std::vector<ReasoningTrace> traces;
    for (const CorpusItem& item : corpus) {
        instances.push_back(item.instance);
        traces.push_back(item.trace);
    }
    write_instances(out_dir + "/instances.jsonl", out_dir + "/images.bin", instances);
    write_traces(out_dir + "/traces.jsonl", traces);

    ordered_json effective = {{"cmd", "gen"},       {"n", n},           {"leak", leak},
                              {"markers", markers}, {"text-only", text_only},
                              {"seed", seed}};
    write_manifest(out_dir, config_hash_of(effective),
                   {"instances.jsonl", "images.bin", "traces.jsonl"});
    std::cout << "gen: " << corpus.size() << " items -> " << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& instances_path, const std::string& images_path,
              const std::string& traces_path, int epochs, double lr, uint64_t seed,
              uint64_t model_seed, const std::string& out_dir) {
    std::vector<CorpusItem> corpus = load_corpus(instances_path, images_path, traces_path);
    ModelConfig mc;
    mc.seed = model_seed;
    Model model = Model::init(mc);
    TrainConfig tc;
    tc.epochs = epochs;
    tc.lr = lr;
    tc.seed = seed;
    TrainStats stats = train(model, corpus, tc);

    ensure_dir(out_dir);
    model.save(out_dir + "/model.ckpt");
    write_csv(out_dir + "/train_stats.csv", {"steps", "final_loss", "last_epoch_loss"},
              {{std::to_string(stats.steps), format_number(stats.final_loss),
                format_number(stats.last_epoch_loss)}});

    ordered_json effective = {{"cmd", "train"},   {"instances", instances_path},
                              {"images", images_path}, {"traces", traces_path},
                              {"epochs", epochs}, {"lr", lr},
                              {"seed", seed},     {"model-seed", model_seed}};
    write_manifest(out_dir, config_hash_of(effective), {"model.ckpt", "train_stats.csv"});
    std::cout << "train: " << stats.steps << " steps, last epoch loss "
              << format_number(stats.last_epoch_loss) << "\n";
    return 0;
}

int cmd_ablate(const std::string& model_path, const std::string& instances_path,
               const std::string& images_path, int k, const std::string& mode, int limit,
               bool no_hard_filter, int max_new, const std::string& out_dir) {
    Model model = Model::load(model_path);
    std::vector<TaskInstance> instances = read_instances(instances_path, images_path);
    if (limit > 0 && static_cast<size_t>(limit) < instances.size()) {
        instances.resize(static_cast<size_t>(limit));
    }
    GenerationParams params;
    params.max_new_tokens = max_new;
    if (!no_hard_filter) {
        HardSubset subset = hard_subset(model, instances, params);
        instances = subset.kept;
        if (instances.empty()) throw InputError("hard filter excluded every instance");
    }
    AblationConfig cfg;
    cfg.k_max = k;
    cfg.mode = ablation_mode_from(mode);
    cfg.params = params;
    AblationResult result = run_ablation(model, instances, cfg);

    ensure_dir(out_dir);
    write_ablation_records(out_dir + "/ablation_records.jsonl", result.records);
    write_ablation_summary_csv(out_dir + "/ablation_summary.csv", result);
    std::vector<std::string> labels;
    std::vector<double> values;
    for (const auto& [kk, r] : result.r) {
        labels.push_back("k=" + std::to_string(kk));
        values.push_back(r);
    }
    svg_bar_chart(out_dir + "/ablation.svg", "accuracy vs retained reasoning fraction", labels,
                  values, 100.0);

    ordered_json effective = {{"cmd", "ablate"}, {"model", model_path},
                              {"instances", instances_path}, {"images", images_path},
                              {"k", k},          {"mode", mode},
                              {"limit", limit},  {"no-hard-filter", no_hard_filter},
                              {"max-new", max_new}};
    write_manifest(out_dir, config_hash_of(effective),
                   {"ablation_records.jsonl", "ablation_summary.csv", "ablation.svg"});
    std::cout << "ablate: r_full " << format_number(result.r_full) << ", r(0) "
              << format_number(result.r.at(0)) << "\n";
    return 0;
}

int cmd_probe(const std::string& model_path, const std::string& instances_path,
              const std::string& images_path, int index, int max_new,
              const std::string& out_dir) {
    Model model = Model::load(model_path);
    std::vector<TaskInstance> instances = read_instances(instances_path, images_path);
    if (index < 0 || static_cast<size_t>(index) >= instances.size()) {
        throw InputError("probe index out of range");
    }
    const TaskInstance& inst = instances[static_cast<size_t>(index)];
    GenerationParams params;
    params.max_new_tokens = max_new;
    LayerCurve curve = layer_curve(model, inst, params);

    TaggedTokenSequence prompt = build_prompt(model, inst, true);
    AttentionProbe probe(model.cfg.layers);
    generate(model, prompt, params, &probe);

    ensure_dir(out_dir);
    write_layer_curve_csv(out_dir + "/layer_curve.csv", curve);
    std::string map_name = "token_map_layer" + std::to_string(probe.dense_layer()) + ".csv";
    write_token_map_csv(out_dir + "/" + map_name, probe, prompt.size());

    std::vector<std::vector<double>> curve_grid;
    for (const auto& row : curve.mass) curve_grid.push_back(row);
    svg_heatmap(out_dir + "/layer_curve.svg", "image attention mass (checkpoints x layers)",
                curve_grid, 1.0);
    std::vector<std::vector<double>> map_grid;
    size_t width = 0;
    for (size_t i = static_cast<size_t>(prompt.size()); i < probe.records().size(); ++i) {
        width = std::max(width, probe.records()[i].dense_row.size());
    }
    for (size_t i = static_cast<size_t>(prompt.size()); i < probe.records().size(); ++i) {
        std::vector<double> row = probe.records()[i].dense_row;
        row.resize(width, 0.0);
        map_grid.push_back(std::move(row));
    }
    svg_heatmap(out_dir + "/token_map.svg", "attention over keys (steps x keys)", map_grid, 0.25);

    ordered_json effective = {{"cmd", "probe"},  {"model", model_path},
                              {"instances", instances_path}, {"images", images_path},
                              {"index", index},  {"max-new", max_new}};
    write_manifest(out_dir, config_hash_of(effective),
                   {"layer_curve.csv", map_name, "layer_curve.svg", "token_map.svg"});
    std::cout << "probe: " << curve.generated << " generated steps\n";
    return 0;
}

int cmd_pvc(const std::string& model_path, const std::string& instances_path,
            const std::string& images_path, int limit, int m, const std::string& mode, int pool,
            bool excise_original, const std::string& bridge, const std::string& fractions_text,
            int max_new, const std::string& out_dir) {
    Model model = Model::load(model_path);
    std::vector<TaskInstance> instances = read_instances(instances_path, images_path);
    if (limit > 0 && static_cast<size_t>(limit) < instances.size()) {
        instances.resize(static_cast<size_t>(limit));
    }
    PvcConfig cfg;
    cfg.m = m;
    cfg.pool = pool;
    cfg.excise_original = excise_original;
    cfg.bridge_text = bridge;
    if (mode == "midpoint") {
        cfg.strategy = ReactivationStrategy::Midpoint;
    } else if (mode == "fractions") {
        cfg.strategy = ReactivationStrategy::FixedFractions;
        std::istringstream in(fractions_text);
        std::string tok;
        while (std::getline(in, tok, ',')) cfg.fractions.push_back(std::stod(tok));
    } else if (mode == "reflection") {
        cfg.strategy = ReactivationStrategy::OnReflectionMarker;
    } else {
        throw ConfigError("unknown pvc mode: " + mode);
    }

    GenerationParams params;
    params.max_new_tokens = max_new;
    std::vector<PvcOutput> outputs;
    std::vector<std::string> ids;
    int correct = 0;
    for (const TaskInstance& inst : instances) {
        PvcOutput out = generate_with_pvc(model, build_prompt(model, inst, true), params, cfg);
        out.gen.trace.id = inst.id;
        out.gen.trace.question = inst.question;
        out.gen.trace.image_ref = inst.id;
        correct += grade(out.gen.text, inst.ground_truth).correct ? 1 : 0;
        ids.push_back(inst.id);
        outputs.push_back(std::move(out));
    }

    ensure_dir(out_dir);
    write_pvc_traces(out_dir + "/pvc_traces.jsonl", outputs, ids);
    write_csv(out_dir + "/pvc_summary.csv", {"instances", "correct"},
              {{std::to_string(instances.size()), std::to_string(correct)}});

    ordered_json effective = {{"cmd", "pvc"},       {"model", model_path},
                              {"instances", instances_path}, {"images", images_path},
                              {"limit", limit},     {"pvc.m", m},
                              {"pvc.mode", mode},   {"pvc.pool", pool},
                              {"pvc.excise-original", excise_original},
                              {"pvc.bridge", bridge}, {"pvc.fractions", fractions_text},
                              {"max-new", max_new}};
    write_manifest(out_dir, config_hash_of(effective), {"pvc_traces.jsonl", "pvc_summary.csv"});
    std::cout << "pvc: " << correct << "/" << instances.size() << " correct\n";
    return 0;
}

int cmd_dvr(const std::string& traces_path, const std::string& instances_path,
            const std::string& images_path, int m, const std::string& strategy, uint64_t seed,
            const std::string& bridge, const std::string& out_dir) {
    std::vector<CorpusItem> corpus = load_corpus(instances_path, images_path, traces_path);
    DvrConfig cfg;
    cfg.m = m;
    cfg.seed = seed;
    cfg.bridge_text = bridge;
    if (strategy == "midpoint") {
        cfg.strategy = InjectionStrategy::Midpoint;
    } else if (strategy == "random-reflection") {
        cfg.strategy = InjectionStrategy::RandomReflection;
    } else {
        throw ConfigError("unknown dvr strategy: " + strategy);
    }
    std::vector<CorpusItem> augmented = apply_dvr(corpus, cfg);

    ensure_dir(out_dir);
    std::vector<ReasoningTrace> traces;
    for (const CorpusItem& item : augmented) traces.push_back(item.trace);
    write_traces(out_dir + "/dvr_traces.jsonl", traces);

    ordered_json effective = {{"cmd", "dvr"},     {"traces", traces_path},
                              {"instances", instances_path}, {"images", images_path},
                              {"dvr.m", m},       {"dvr.strategy", strategy},
                              {"dvr.seed", seed}, {"dvr.bridge", bridge}};
    write_manifest(out_dir, config_hash_of(effective), {"dvr_traces.jsonl"});
    std::cout << "dvr: " << traces.size() << " traces augmented\n";
    return 0;
}

int cmd_distill(const std::string& gen_kind, const std::string& gen_table,
                const std::string& judge_table, const std::string& model_path,
                const std::string& instances_path, const std::string& images_path, int n,
                double tau, int min_tokens, int max_tokens, int quota, const std::string& mode,
                const std::string& out_dir) {
    DistillConfig cfg;
    cfg.best_of = n;
    cfg.sample_temperature = tau;
    cfg.min_tokens = min_tokens;
    cfg.max_tokens = max_tokens;
    cfg.marker_quota = quota;
    if (mode == "prune") {
        cfg.prune_mode = PruneMode::Prune;
    } else if (mode == "drop") {
        cfg.prune_mode = PruneMode::Drop;
    } else {
        throw ConfigError("unknown prune mode: " + mode);
    }

    std::unique_ptr<GeneratorPort> gen;
    std::vector<QuestionSpec> questions;
    std::vector<TaskInstance> instances;
    if (gen_kind == "mock") {
        if (gen_table.empty()) throw ConfigError("mock generator needs --gen-table");
        gen = std::make_unique<ScriptedGenerator>(ScriptedGenerator::from_file(gen_table));
        // question set = the judge table's ids, in file order
        std::ifstream in(judge_table);
        if (!in) throw InputError("cannot open: " + judge_table);
        ordered_json j = ordered_json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw InputError("judge table must be a JSON object: " + judge_table);
        }
        for (const auto& [id, val] : j.items()) {
            (void)val;
            questions.push_back(QuestionSpec{id, id});
        }
    } else if (gen_kind == "model") {
        if (model_path.empty() || instances_path.empty()) {
            throw ConfigError("model generator needs --model and --instances");
        }
        instances = read_instances(instances_path, images_path);
        gen = std::make_unique<ModelGenerator>(Model::load(model_path), instances);
        for (const TaskInstance& inst : instances) {
            questions.push_back(QuestionSpec{inst.id, inst.question});
        }
    } else {
        throw ConfigError("unknown generator kind: " + gen_kind);
    }
    if (judge_table.empty()) throw ConfigError("judge needs --judge-table");
    MatchJudge judge = MatchJudge::from_file(judge_table);

    PipelineResult result = run_pipeline(*gen, judge, questions, cfg);
    PipelineReport report = pipeline_report(result);

    ensure_dir(out_dir);
    write_pipeline_items(out_dir + "/distill_corpus.jsonl", result.items);
    write_csv(out_dir + "/distill_report.csv",
              {"questions", "initial_correct", "rescued", "unrescued", "length_dropped",
               "marker_pruned", "final"},
              {{std::to_string(result.questions), std::to_string(result.initial_correct),
                std::to_string(result.rescued), std::to_string(result.unrescued),
                std::to_string(result.length_dropped), std::to_string(result.marker_pruned),
                std::to_string(result.items.size())}});
    svg_histogram(out_dir + "/token_hist.svg", "trace token lengths", report.token_hist);
    svg_histogram(out_dir + "/marker_hist.svg", "reflection markers per trace",
                  report.marker_hist);

    ordered_json effective = {{"cmd", "distill"},   {"gen", gen_kind},
                              {"gen-table", gen_table}, {"judge-table", judge_table},
                              {"model", model_path},    {"instances", instances_path},
                              {"images", images_path},  {"n", n},
                              {"tau", tau},         {"min", min_tokens},
                              {"max", max_tokens},  {"quota", quota},
                              {"mode", mode}};
    write_manifest(out_dir, config_hash_of(effective),
                   {"distill_corpus.jsonl", "distill_report.csv", "token_hist.svg",
                    "marker_hist.svg"});
    std::cout << "distill: " << result.items.size() << "/" << result.questions
              << " traces kept\n";
    return 0;
}

// Reads an ablation summary CSV back; the largest k row is the unablated
// diagnostic and doubles as r_full.
AblationResult read_summary_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open: " + path);
    AblationResult result;
    std::string line;
    if (!std::getline(in, line) || line != "k,r") {
        throw InputError("not an ablation summary: " + path);
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos) throw InputError("malformed summary row in " + path);
        int k = std::stoi(line.substr(0, comma));
        result.r[k] = std::stod(line.substr(comma + 1));
    }
    if (result.r.empty()) throw InputError("empty summary: " + path);
    result.k_max = result.r.rbegin()->first;
    result.r_full = result.r.rbegin()->second;
    return result;
}

int cmd_report(const std::string& a_path, const std::string& label_a, const std::string& b_path,
               const std::string& label_b, const std::string& out_dir) {
    AblationResult a = read_summary_csv(a_path);
    AblationResult b = read_summary_csv(b_path);

    ensure_dir(out_dir);
    write_comparison_csv(out_dir + "/comparison.csv", label_a, a, label_b, b);
    std::vector<std::string> labels;
    std::vector<double> sa, sb;
    for (const auto& [k, r] : a.r) {
        auto it = b.r.find(k);
        if (it == b.r.end()) continue;
        labels.push_back("k=" + std::to_string(k));
        sa.push_back(r);
        sb.push_back(it->second);
    }
    svg_grouped_bar_chart(out_dir + "/comparison.svg", "accuracy vs retained fraction", labels,
                          sa, label_a, sb, label_b, 100.0);

    ordered_json effective = {{"cmd", "report"}, {"a", a_path},       {"label-a", label_a},
                              {"b", b_path},     {"label-b", label_b}};
    write_manifest(out_dir, config_hash_of(effective), {"comparison.csv", "comparison.svg"});
    std::cout << "report: " << labels.size() << " cutoffs compared\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"take-along visual conditioning laboratory"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic corpus");
    int gen_n = 2000;
    double gen_leak = 0.0, gen_markers = 0.0, gen_text_only = 0.0;
    uint64_t gen_seed = 7;
    std::string gen_out = "out_gen", gen_config;
    gen->add_option("--n", gen_n);
    gen->add_option("--leak", gen_leak);
    gen->add_option("--markers", gen_markers);
    gen->add_option("--text-only", gen_text_only);
    gen->add_option("--seed", gen_seed);
    gen->add_option("--out", gen_out);
    gen->add_option("--config", gen_config);

    // train
    auto* tr = app.add_subcommand("train", "train a model on a corpus");
    std::string tr_instances, tr_images, tr_traces, tr_out = "out_train", tr_config;
    int tr_epochs = 10;
    double tr_lr = 3e-4;
    uint64_t tr_seed = 0, tr_model_seed = 0;
    tr->add_option("--instances", tr_instances);
    tr->add_option("--images", tr_images);
    tr->add_option("--traces", tr_traces);
    tr->add_option("--epochs", tr_epochs);
    tr->add_option("--lr", tr_lr);
    tr->add_option("--seed", tr_seed);
    tr->add_option("--model-seed", tr_model_seed);
    tr->add_option("--out", tr_out);
    tr->add_option("--config", tr_config);

    // ablate
    auto* ab = app.add_subcommand("ablate", "progressive visual ablation");
    std::string ab_model, ab_instances, ab_images, ab_mode = "rebuild", ab_out = "out_ablate";
    std::string ab_config;
    int ab_k = 8, ab_limit = 0, ab_max_new = 256;
    bool ab_no_hard = false;
    ab->add_option("--model", ab_model);
    ab->add_option("--instances", ab_instances);
    ab->add_option("--images", ab_images);
    ab->add_option("--k", ab_k);
    ab->add_option("--mode", ab_mode);
    ab->add_option("--limit", ab_limit);
    ab->add_flag("--no-hard-filter", ab_no_hard);
    ab->add_option("--max-new", ab_max_new);
    ab->add_option("--out", ab_out);
    ab->add_option("--config", ab_config);

    // probe
    auto* pr = app.add_subcommand("probe", "attention probes");
    std::string pr_model, pr_instances, pr_images, pr_out = "out_probe", pr_config;
    int pr_index = 0, pr_max_new = 256;
    pr->add_option("--model", pr_model);
    pr->add_option("--instances", pr_instances);
    pr->add_option("--images", pr_images);
    pr->add_option("--index", pr_index);
    pr->add_option("--max-new", pr_max_new);
    pr->add_option("--out", pr_out);
    pr->add_option("--config", pr_config);

    // pvc
    auto* pv = app.add_subcommand("pvc", "generation with periodic visual calibration");
    std::string pv_model, pv_instances, pv_images, pv_mode = "midpoint";
    std::string pv_bridge = kDefaultBridgeText, pv_fractions, pv_out = "out_pvc", pv_config;
    int pv_limit = 0, pv_m = 1, pv_pool = 4, pv_max_new = 256;
    bool pv_excise = false;
    pv->add_option("--model", pv_model);
    pv->add_option("--instances", pv_instances);
    pv->add_option("--images", pv_images);
    pv->add_option("--limit", pv_limit);
    pv->add_option("--pvc.m", pv_m);
    pv->add_option("--pvc.mode", pv_mode);
    pv->add_option("--pvc.pool", pv_pool);
    pv->add_flag("--pvc.excise-original", pv_excise);
    pv->add_option("--pvc.bridge", pv_bridge);
    pv->add_option("--pvc.fractions", pv_fractions);
    pv->add_option("--max-new", pv_max_new);
    pv->add_option("--out", pv_out);
    pv->add_option("--config", pv_config);

    // dvr
    auto* dv = app.add_subcommand("dvr", "reaffirmation-augment a trace corpus");
    std::string dv_traces, dv_instances, dv_images, dv_strategy = "midpoint";
    std::string dv_bridge = kDefaultBridgeText, dv_out = "out_dvr", dv_config;
    int dv_m = 1;
    uint64_t dv_seed = 0;
    dv->add_option("--traces", dv_traces);
    dv->add_option("--instances", dv_instances);
    dv->add_option("--images", dv_images);
    dv->add_option("--dvr.m", dv_m);
    dv->add_option("--dvr.strategy", dv_strategy);
    dv->add_option("--dvr.seed", dv_seed);
    dv->add_option("--dvr.bridge", dv_bridge);
    dv->add_option("--out", dv_out);
    dv->add_option("--config", dv_config);

    // distill
    auto* di = app.add_subcommand("distill", "data curation pipeline");
    std::string di_gen = "mock", di_gen_table, di_judge_table, di_model, di_instances, di_images;
    std::string di_mode = "prune", di_out = "out_distill", di_config;
    int di_n = 8, di_min = 200, di_max = 8000, di_quota = 25;
    double di_tau = 1.0;
    di->add_option("--gen", di_gen);
    di->add_option("--gen-table", di_gen_table);
    di->add_option("--judge-table", di_judge_table);
    di->add_option("--model", di_model);
    di->add_option("--instances", di_instances);
    di->add_option("--images", di_images);
    di->add_option("--n", di_n);
    di->add_option("--tau", di_tau);
    di->add_option("--min", di_min);
    di->add_option("--max", di_max);
    di->add_option("--quota", di_quota);
    di->add_option("--mode", di_mode);
    di->add_option("--out", di_out);
    di->add_option("--config", di_config);

    // report
    auto* re = app.add_subcommand("report", "compare two ablation summaries");
    std::string re_a, re_b, re_label_a = "base", re_label_b = "dvr", re_out = "out_report";
    std::string re_config;
    re->add_option("--a", re_a);
    re->add_option("--b", re_b);
    re->add_option("--label-a", re_label_a);
    re->add_option("--label-b", re_label_b);
    re->add_option("--out", re_out);
    re->add_option("--config", re_config);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
        // config files fill any option the command line left unset
        struct {
            CLI::App* cmd;
            std::string* path;
        } configs[] = {{gen, &gen_config}, {tr, &tr_config}, {ab, &ab_config},
                       {pr, &pr_config},   {pv, &pv_config}, {dv, &dv_config},
                       {di, &di_config},   {re, &re_config}};
        for (const auto& [cmd, path] : configs) {
            if (cmd->parsed() && !path->empty()) {
                apply_config(cmd, *path);
                // re-extract the option values after injecting config results
                for (CLI::Option* o : cmd->get_options()) {
                    if (!o->results().empty()) o->run_callback();
                }
            }
        }

        if (gen->parsed()) {
            return cmd_gen(gen_n, gen_leak, gen_markers, gen_text_only, gen_seed, gen_out);
        }
        if (tr->parsed()) {
            return cmd_train(tr_instances, tr_images, tr_traces, tr_epochs, tr_lr, tr_seed,
                             tr_model_seed, tr_out);
        }
        if (ab->parsed()) {
            return cmd_ablate(ab_model, ab_instances, ab_images, ab_k, ab_mode, ab_limit,
                              ab_no_hard, ab_max_new, ab_out);
        }
        if (pr->parsed()) {
            return cmd_probe(pr_model, pr_instances, pr_images, pr_index, pr_max_new, pr_out);
        }
        if (pv->parsed()) {
            return cmd_pvc(pv_model, pv_instances, pv_images, pv_limit, pv_m, pv_mode, pv_pool,
                           pv_excise, pv_bridge, pv_fractions, pv_max_new, pv_out);
        }
        if (dv->parsed()) {
            return cmd_dvr(dv_traces, dv_instances, dv_images, dv_m, dv_strategy, dv_seed,
                           dv_bridge, dv_out);
        }
        if (di->parsed()) {
            return cmd_distill(di_gen, di_gen_table, di_judge_table, di_model, di_instances,
                               di_images, di_n, di_tau, di_min, di_max, di_quota, di_mode,
                               di_out);
        }
        if (re->parsed()) {
            return cmd_report(re_a, re_label_a, re_b, re_label_b, re_out);
        }
        std::cerr << "error: no subcommand\n";
        return 2;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            std::cout << app.help() << "\n";
            return 0;
        }
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const CheckpointError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 3;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 4;
    }
}

}  // namespace tvc
