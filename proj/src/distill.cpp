#include "tvc/distill.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tvc/dvr.hpp"
#include "tvc/errors.hpp"
#include "tvc/train.hpp"
#include "tvc/vocab.hpp"

namespace tvc {

using nlohmann::json;

namespace {
json parse_json(const std::string& text, const std::string& what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw InputError("malformed JSON in " + what);
    return j;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}
}  // namespace

ScriptedGenerator ScriptedGenerator::from_file(const std::string& path) {
    return from_json_text(slurp(path));
}

ScriptedGenerator ScriptedGenerator::from_json_text(const std::string& json_text) {
    json j = parse_json(json_text, "generator script");
    if (!j.is_object()) throw InputError("generator script must be a JSON object");
    ScriptedGenerator gen;
    for (const auto& [id, val] : j.items()) {
        Entry e;
        if (val.contains("greedy")) e.greedy = val.at("greedy").get<std::string>();
        if (val.contains("samples")) {
            for (const auto& s : val.at("samples")) e.samples.push_back(s.get<std::string>());
        }
        gen.table_.emplace_back(id, std::move(e));
    }
    return gen;
}

const ScriptedGenerator::Entry& ScriptedGenerator::entry(const std::string& id) const {
    for (const auto& [qid, e] : table_) {
        if (qid == id) return e;
    }
    throw InputError("generator script has no entry for question: " + id);
}

std::string ScriptedGenerator::generate_text(const GenRequest& req) {
    const Entry& e = entry(req.question_id);
    if (req.temperature <= 0.0) return e.greedy;
    if (req.seed >= e.samples.size()) {
        throw InputError("generator script has no sample for seed " + std::to_string(req.seed) +
                         " of question " + req.question_id);
    }
    return e.samples[static_cast<size_t>(req.seed)];
}

MatchJudge MatchJudge::from_file(const std::string& path) {
    return from_json_text(slurp(path));
}

MatchJudge MatchJudge::from_json_text(const std::string& json_text) {
    json j = parse_json(json_text, "judge table");
    if (!j.is_object()) throw InputError("judge table must be a JSON object");
    std::vector<std::pair<std::string, std::string>> truths;
    for (const auto& [id, val] : j.items()) truths.emplace_back(id, val.get<std::string>());
    return MatchJudge(std::move(truths));
}

MatchJudge::MatchJudge(std::vector<std::pair<std::string, std::string>> truths)
    : truths_(std::move(truths)) {}

bool MatchJudge::correct(const std::string& question_id, const std::string& text) {
    for (const auto& [id, truth] : truths_) {
        if (id != question_id) continue;
        auto span = extract_answer(text);
        return span && normalize_answer(*span) == normalize_answer(truth);
    }
    throw InputError("judge table has no entry for question: " + question_id);
}

ModelGenerator::ModelGenerator(Model model, std::vector<TaskInstance> instances,
                               int max_new_tokens)
    : model_(std::move(model)), instances_(std::move(instances)), max_new_tokens_(max_new_tokens) {}

const TaskInstance& ModelGenerator::instance(const std::string& id) const {
    for (const auto& inst : instances_) {
        if (inst.id == id) return inst;
    }
    throw InputError("no instance for question: " + id);
}

std::string ModelGenerator::generate_text(const GenRequest& req) {
    const TaskInstance& inst = instance(req.question_id);
    GenerationParams params;
    params.temperature = req.temperature;
    params.seed = req.seed;
    params.max_new_tokens = max_new_tokens_;
    return generate(model_, build_prompt(model_, inst, true), params).text;
}

void DistillConfig::validate() const {
    if (best_of < 1) throw ConfigError("best_of must be >= 1");
    if (sample_temperature <= 0.0) throw ConfigError("sample temperature must be positive");
    if (min_tokens < 0 || max_tokens < min_tokens) throw ConfigError("bad token bounds");
    if (marker_quota < 0) throw ConfigError("marker quota must be >= 0");
}

std::vector<PipelineItem> initial_sample(GeneratorPort& gen, JudgePort& judge,
                                         const std::vector<QuestionSpec>& questions) {
    std::vector<PipelineItem> items;
    for (const QuestionSpec& q : questions) {
        PipelineItem item;
        item.question_id = q.id;
        item.question = q.question;
        item.text = gen.generate_text(GenRequest{q.id, q.question, 0.0, 0});
        item.tokens = token_count(item.text);
        item.correct = judge.correct(q.id, item.text);
        item.stage_log.push_back(item.correct ? "initial:pass" : "initial:fail");
        items.push_back(std::move(item));
    }
    return items;
}

void reject_sample(GeneratorPort& gen, JudgePort& judge, std::vector<PipelineItem>& items,
                   const DistillConfig& cfg) {
    cfg.validate();
    for (PipelineItem& item : items) {
        if (item.correct) continue;
        int best_tokens = -1;
        uint64_t best_seed = 0;
        std::string best_text;
        for (uint64_t seed = 0; seed < static_cast<uint64_t>(cfg.best_of); ++seed) {
            std::string text = gen.generate_text(
                GenRequest{item.question_id, item.question, cfg.sample_temperature, seed});
            if (!judge.correct(item.question_id, text)) continue;
            int tokens = token_count(text);
            if (best_tokens < 0 || tokens < best_tokens) {  // ties keep the smaller seed
                best_tokens = tokens;
                best_seed = seed;
                best_text = text;
            }
        }
        if (best_tokens >= 0) {
            item.text = std::move(best_text);
            item.tokens = best_tokens;
            item.correct = true;
            item.sample_seed = best_seed;
            item.stage_log.push_back("reject:seed=" + std::to_string(best_seed));
        } else {
            item.stage_log.push_back("reject:none");
        }
    }
}

std::vector<PipelineItem> length_filter(const std::vector<PipelineItem>& items,
                                        const DistillConfig& cfg) {
    cfg.validate();
    std::vector<PipelineItem> kept;
    for (const PipelineItem& item : items) {
        if (item.tokens >= cfg.min_tokens && item.tokens <= cfg.max_tokens) {
            kept.push_back(item);
            kept.back().stage_log.push_back("length:pass");
        }
    }
    return kept;
}

int count_reflection_markers(const std::string& text) {
    ReasoningTrace trace;
    trace.steps = split_steps(text);
    return static_cast<int>(find_reflection_points(trace, ReflectionLexicon::defaults()).size());
}

std::vector<PipelineItem> reflection_prune(const std::vector<PipelineItem>& items,
                                           const DistillConfig& cfg) {
    cfg.validate();
    std::vector<PipelineItem> kept;
    for (const PipelineItem& item : items) {
        std::vector<std::string> steps = split_steps(item.text);
        ReasoningTrace trace;
        trace.steps = steps;
        auto points = find_reflection_points(trace, ReflectionLexicon::defaults());
        if (static_cast<int>(points.size()) <= cfg.marker_quota) {
            kept.push_back(item);
            continue;
        }
        if (cfg.prune_mode == PruneMode::Drop) continue;
        // Keep the first marker_quota reflection spans; excess marker steps
        // (marker through the step's sentence terminator) are removed.
        std::vector<bool> remove(steps.size(), false);
        for (size_t i = static_cast<size_t>(cfg.marker_quota); i < points.size(); ++i) {
            remove[static_cast<size_t>(points[i].first)] = true;
        }
        std::string pruned;
        for (size_t i = 0; i < steps.size(); ++i) {
            if (remove[i]) continue;
            if (!pruned.empty()) pruned += ' ';
            pruned += steps[i];
        }
        PipelineItem trimmed = item;
        trimmed.text = std::move(pruned);
        trimmed.tokens = token_count(trimmed.text);
        trimmed.stage_log.push_back("markers:pruned=" +
                                    std::to_string(points.size() - cfg.marker_quota));
        kept.push_back(std::move(trimmed));
    }
    return kept;
}

PipelineResult run_pipeline(GeneratorPort& gen, JudgePort& judge,
                            const std::vector<QuestionSpec>& questions,
                            const DistillConfig& cfg) {
    cfg.validate();
    PipelineResult result;
    result.questions = static_cast<int>(questions.size());

    std::vector<PipelineItem> items = initial_sample(gen, judge, questions);
    for (const auto& item : items) result.initial_correct += item.correct ? 1 : 0;

    reject_sample(gen, judge, items, cfg);
    std::vector<PipelineItem> correct;
    for (const auto& item : items) {
        bool rescued = item.correct && item.stage_log.front() == "initial:fail";
        result.rescued += rescued ? 1 : 0;
        result.unrescued += item.correct ? 0 : 1;
        if (item.correct) correct.push_back(item);
    }

    std::vector<PipelineItem> sized = length_filter(correct, cfg);
    result.length_dropped = static_cast<int>(correct.size() - sized.size());

    std::vector<PipelineItem> pruned = reflection_prune(sized, cfg);
    if (cfg.prune_mode == PruneMode::Drop) {
        result.marker_pruned = static_cast<int>(sized.size() - pruned.size());
    } else {
        for (const auto& item : pruned) {
            if (!item.stage_log.empty() && item.stage_log.back().rfind("markers:", 0) == 0) {
                ++result.marker_pruned;
            }
        }
    }
    result.items = std::move(pruned);
    return result;
}

Histogram histogram(const std::vector<int>& values, const std::vector<int>& bounds) {
    Histogram h;
    h.bounds = bounds;
    h.counts.assign(bounds.size() + 1, 0);
    for (int v : values) {
        size_t bucket = bounds.size();
        for (size_t i = 0; i < bounds.size(); ++i) {
            if (v <= bounds[i]) {
                bucket = i;
                break;
            }
        }
        ++h.counts[bucket];
    }
    return h;
}

PipelineReport pipeline_report(const PipelineResult& result) {
    PipelineReport report;
    report.result = result;
    std::vector<int> tokens, markers;
    for (const auto& item : result.items) {
        tokens.push_back(item.tokens);
        markers.push_back(count_reflection_markers(item.text));
    }
    report.token_hist = histogram(tokens, {200, 500, 1000, 2000, 4000, 8000});
    report.marker_hist = histogram(markers, {10, 25, 50});
    for (int threshold : {10, 25, 50}) {
        int above = 0;
        for (int m : markers) above += m > threshold ? 1 : 0;
        report.over_threshold.emplace_back(threshold, above);
    }
    return report;
}

}  // namespace tvc
