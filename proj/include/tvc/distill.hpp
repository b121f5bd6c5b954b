#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tvc/generate.hpp"
#include "tvc/model.hpp"
#include "tvc/task.hpp"

namespace tvc {

struct GenRequest {
    std::string question_id;
    std::string question;
    double temperature = 0.0;
    uint64_t seed = 0;
};

// Teacher abstraction: produces a reasoning-trace text for a question.
struct GeneratorPort {
    virtual ~GeneratorPort() = default;
    virtual std::string generate_text(const GenRequest& req) = 0;
};

// Verifier abstraction: decides whether a trace answers its question.
struct JudgePort {
    virtual ~JudgePort() = default;
    virtual bool correct(const std::string& question_id, const std::string& text) = 0;
};

// Scripted teacher backed by a JSON table:
// { "<question_id>": { "greedy": "<text>", "samples": ["<text seed 0>", ...] } }
class ScriptedGenerator : public GeneratorPort {
  public:
    static ScriptedGenerator from_file(const std::string& path);
    static ScriptedGenerator from_json_text(const std::string& json_text);
    std::string generate_text(const GenRequest& req) override;

  private:
    struct Entry {
        std::string greedy;
        std::vector<std::string> samples;
    };
    std::vector<std::pair<std::string, Entry>> table_;
    const Entry& entry(const std::string& id) const;
};

// Scripted judge backed by a JSON table of ground truths:
// { "<question_id>": "<answer>" }. Verdict is normalized exact match of the
// extracted answer span.
class MatchJudge : public JudgePort {
  public:
    static MatchJudge from_file(const std::string& path);
    static MatchJudge from_json_text(const std::string& json_text);
    explicit MatchJudge(std::vector<std::pair<std::string, std::string>> truths);
    bool correct(const std::string& question_id, const std::string& text) override;

  private:
    std::vector<std::pair<std::string, std::string>> truths_;
};

// Teacher backed by a trained local model over task instances.
class ModelGenerator : public GeneratorPort {
  public:
    ModelGenerator(Model model, std::vector<TaskInstance> instances, int max_new_tokens = 256);
    std::string generate_text(const GenRequest& req) override;
    const TaskInstance& instance(const std::string& id) const;

  private:
    Model model_;
    std::vector<TaskInstance> instances_;
    int max_new_tokens_;
};

struct QuestionSpec {
    std::string id;
    std::string question;
};

struct PipelineItem {
    std::string question_id;
    std::string question;
    std::string text;
    int tokens = 0;
    bool correct = false;
    uint64_t sample_seed = 0;  // candidate seed chosen by rejection sampling
    std::vector<std::string> stage_log;
};

enum class PruneMode { Prune, Drop };

struct DistillConfig {
    int best_of = 8;
    double sample_temperature = 1.0;
    int min_tokens = 200;   // closed bounds
    int max_tokens = 8000;
    int marker_quota = 25;
    PruneMode prune_mode = PruneMode::Prune;

    void validate() const;
};

// Stage 1: one greedy trace per question, judged.
std::vector<PipelineItem> initial_sample(GeneratorPort& gen, JudgePort& judge,
                                         const std::vector<QuestionSpec>& questions);

// Stage 2: failed items get best-of-N resampling at the sampling temperature;
// among judged-correct candidates the one with the fewest tokens wins, ties
// going to the smallest seed. Items with no correct candidate stay failed.
void reject_sample(GeneratorPort& gen, JudgePort& judge, std::vector<PipelineItem>& items,
                   const DistillConfig& cfg);

// Stage 3: keep items whose token count lies in [min_tokens, max_tokens].
std::vector<PipelineItem> length_filter(const std::vector<PipelineItem>& items,
                                        const DistillConfig& cfg);

// Stage 4: items over the reflection-marker quota are trimmed down to the
// quota (each excess marker's span, marker through its sentence terminator,
// is removed) or dropped outright, per the configured mode.
std::vector<PipelineItem> reflection_prune(const std::vector<PipelineItem>& items,
                                           const DistillConfig& cfg);

int count_reflection_markers(const std::string& text);

struct PipelineResult {
    std::vector<PipelineItem> items;  // the curated set
    int questions = 0;
    int initial_correct = 0;
    int rescued = 0;        // rejected items recovered by resampling
    int unrescued = 0;      // no correct candidate in the budget
    int length_dropped = 0;
    int marker_pruned = 0;  // trimmed traces (Prune) or dropped traces (Drop)
};

PipelineResult run_pipeline(GeneratorPort& gen, JudgePort& judge,
                            const std::vector<QuestionSpec>& questions,
                            const DistillConfig& cfg);

// Histogram over fixed bucket upper bounds (last bucket open-ended).
struct Histogram {
    std::vector<int> bounds;
    std::vector<int> counts;
};

Histogram histogram(const std::vector<int>& values, const std::vector<int>& bounds);

struct PipelineReport {
    PipelineResult result;
    Histogram token_hist;
    Histogram marker_hist;                       // bounds {10, 25, 50}
    std::vector<std::pair<int, int>> over_threshold;  // (threshold, traces above)
};

PipelineReport pipeline_report(const PipelineResult& result);

}  // namespace tvc
