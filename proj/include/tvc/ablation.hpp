#pragma once

#include <map>
#include <string>
#include <vector>

#include "tvc/generate.hpp"
#include "tvc/model.hpp"
#include "tvc/task.hpp"

namespace tvc {

struct GradeResult {
    bool correct = false;
    bool missing_answer = false;  // no answer delimiter in the output
    std::string answer;
};

// Normalized exact match of the extracted answer span against the ground
// truth. A missing delimiter grades as incorrect and is flagged.
GradeResult grade(const std::string& text, const std::string& ground_truth);

// Percent of instances answered correctly under greedy decoding.
double evaluate_accuracy(const Model& model, const std::vector<TaskInstance>& instances,
                         const GenerationParams& params = {}, bool with_image = true);

enum class AblationMode { Rebuild, Excise };

const char* ablation_mode_name(AblationMode mode);
AblationMode ablation_mode_from(const std::string& name);

struct AblationConfig {
    int k_max = 8;  // K cutoffs; k = K is the unablated diagnostic
    AblationMode mode = AblationMode::Rebuild;
    GenerationParams params;  // greedy by default
};

struct AblationRecord {
    std::string id;
    int k = 0;
    int cutoff = 0;      // retained generated tokens
    int prompt_len = 0;  // context entries present when the run continues
    std::string answer;
    bool correct = false;
    bool missing_answer = false;
};

struct AblationResult {
    std::map<int, double> r;  // percent correct at each k in [0, K]
    double r_full = 0.0;      // percent correct of the unablated runs
    std::vector<AblationRecord> records;
    AblationMode mode = AblationMode::Rebuild;
    int k_max = 8;
};

// Mid-reasoning visual-ablation protocol. Per instance: one unablated run,
// then for each k the first floor(k * S / K) generated tokens are retained
// and the image context is removed before the run continues.
// Rebuild: the retained prefix is re-encoded without the image (survivor
// positions preserved). Excise: the prefix is encoded with the image, then
// IMAGE entries are excised from the cache before the final prefix entry is
// fed. k = K regenerates from the full prompt and must match the unablated
// run under greedy decoding.
AblationResult run_ablation(const Model& model, const std::vector<TaskInstance>& instances,
                            const AblationConfig& cfg);

struct HardSubset {
    std::vector<TaskInstance> kept;
    std::vector<std::string> excluded_ids;  // solvable without the image
    double exclusion_rate = 0.0;            // fraction excluded
};

// Text-only screening: instances answered correctly without their image are
// excluded from evaluation.
HardSubset hard_subset(const Model& model, const std::vector<TaskInstance>& instances,
                       const GenerationParams& params = {});

}  // namespace tvc
