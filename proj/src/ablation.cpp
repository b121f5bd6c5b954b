#include "tvc/ablation.hpp"

#include "tvc/errors.hpp"
#include "tvc/train.hpp"
#include "tvc/vocab.hpp"

namespace tvc {

GradeResult grade(const std::string& text, const std::string& ground_truth) {
    GradeResult result;
    auto span = extract_answer(text);
    if (!span) {
        result.missing_answer = true;
        return result;
    }
    result.answer = *span;
    result.correct = normalize_answer(*span) == normalize_answer(ground_truth);
    return result;
}

double evaluate_accuracy(const Model& model, const std::vector<TaskInstance>& instances,
                         const GenerationParams& params, bool with_image) {
    if (instances.empty()) throw InputError("empty evaluation set");
    int correct = 0;
    for (const TaskInstance& inst : instances) {
        GenerationOutput out = generate(model, build_prompt(model, inst, with_image), params);
        correct += grade(out.text, inst.ground_truth).correct ? 1 : 0;
    }
    return 100.0 * correct / static_cast<double>(instances.size());
}

const char* ablation_mode_name(AblationMode mode) {
    return mode == AblationMode::Rebuild ? "rebuild" : "excise";
}

AblationMode ablation_mode_from(const std::string& name) {
    if (name == "rebuild") return AblationMode::Rebuild;
    if (name == "excise") return AblationMode::Excise;
    throw ConfigError("unknown ablation mode: " + name);
}

namespace {

// Continue decoding after the image has been removed from the context.
GenerationOutput continue_without_image(const Model& model, const TaskInstance& inst,
                                        const std::vector<int>& prefix, AblationMode mode,
                                        const GenerationParams& params) {
    if (mode == AblationMode::Rebuild) {
        TaggedTokenSequence seq = build_prompt(model, inst, false);
        if (!prefix.empty()) seq.append_text(prefix, Seg::Text);
        return generate(model, seq, params);
    }
    // Excise: encode with the image, strip IMAGE rows from the cache, then
    // feed the final prefix entry so the continuation logits are computed
    // against the excised context.
    TaggedTokenSequence seq = build_prompt(model, inst, true);
    if (!prefix.empty()) seq.append_text(prefix, Seg::Text);
    const int n = seq.size();
    LayeredKVCache cache = make_cache(model);
    for (int i = 0; i < n - 1; ++i) {
        forward_step(model, cache, model.input_content(seq, i),
                     seq.entries[static_cast<size_t>(i)].pos, seq.tag_of(i));
    }
    cache.excise_segment(Seg::Image);
    Vector logits = forward_step(model, cache, model.input_content(seq, n - 1),
                                 seq.entries[static_cast<size_t>(n - 1)].pos, seq.tag_of(n - 1));
    GenSession session(model, seq.without(Seg::Image), std::move(cache), std::move(logits), params);
    return run_session(session);
}

}  // namespace

AblationResult run_ablation(const Model& model, const std::vector<TaskInstance>& instances,
                            const AblationConfig& cfg) {
    if (cfg.k_max < 1) throw ConfigError("k_max must be >= 1");
    if (instances.empty()) throw InputError("empty ablation set");
    const Vocab& v = Vocab::instance();

    AblationResult result;
    result.mode = cfg.mode;
    result.k_max = cfg.k_max;
    std::map<int, int> correct;
    int full_correct = 0;

    for (const TaskInstance& inst : instances) {
        TaggedTokenSequence prompt = build_prompt(model, inst, true);
        GenerationOutput normal = generate(model, prompt, cfg.params);
        full_correct += grade(normal.text, inst.ground_truth).correct ? 1 : 0;
        const int s = static_cast<int>(normal.tokens.size());

        const int text_prompt_len = build_prompt(model, inst, false).size();
        for (int k = 0; k <= cfg.k_max; ++k) {
            std::string text;
            int cutoff;
            int prompt_len;
            if (k == cfg.k_max) {
                cutoff = s;
                prompt_len = prompt.size();
                text = generate(model, prompt, cfg.params).text;
            } else {
                cutoff = static_cast<int>(static_cast<long>(k) * s / cfg.k_max);
                prompt_len = text_prompt_len + cutoff;
                std::vector<int> prefix(normal.tokens.begin(), normal.tokens.begin() + cutoff);
                GenerationOutput cont =
                    continue_without_image(model, inst, prefix, cfg.mode, cfg.params);
                text = v.decode(prefix);
                if (!text.empty() && !cont.text.empty()) text += ' ';
                text += cont.text;
            }
            GradeResult g = grade(text, inst.ground_truth);
            correct[k] += g.correct ? 1 : 0;
            result.records.push_back(AblationRecord{inst.id, k, cutoff, prompt_len, g.answer,
                                                    g.correct, g.missing_answer});
        }
    }

    const double n = static_cast<double>(instances.size());
    result.r_full = 100.0 * full_correct / n;
    for (const auto& [k, c] : correct) result.r[k] = 100.0 * c / n;
    return result;
}

HardSubset hard_subset(const Model& model, const std::vector<TaskInstance>& instances,
                       const GenerationParams& params) {
    if (instances.empty()) throw InputError("empty screening set");
    HardSubset out;
    for (const TaskInstance& inst : instances) {
        GenerationOutput run = generate(model, build_prompt(model, inst, false), params);
        if (grade(run.text, inst.ground_truth).correct) {
            out.excluded_ids.push_back(inst.id);
        } else {
            out.kept.push_back(inst);
        }
    }
    out.exclusion_rate =
        static_cast<double>(out.excluded_ids.size()) / static_cast<double>(instances.size());
    return out;
}

}  // namespace tvc
