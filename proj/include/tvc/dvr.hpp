#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tvc/task.hpp"
#include "tvc/trace.hpp"

namespace tvc {

struct Model;

// Lexical cues that open a self-reflection step. Matching is token-boundary
// at step starts; case sensitivity is per marker.
struct ReflectionLexicon {
    struct Marker {
        std::string text;
        bool case_sensitive = true;
    };
    std::vector<Marker> markers;

    static const ReflectionLexicon& defaults();
    void validate() const;  // nonempty, no marker is a substring of another
};

inline const std::string kDefaultBridgeText = "Let me see the image again .";

// All lexicon-marker occurrences at step starts, in order.
std::vector<std::pair<int, std::string>> find_reflection_points(const ReasoningTrace& trace,
                                                                const ReflectionLexicon& lexicon);

enum class InjectionStrategy { Midpoint, RandomReflection };

// Step indices to inject at: midpoint -> { floor(0.5 * steps) }; random
// reflection -> m distinct reflection points, seeded. Throws when the trace
// has fewer than m reflection points.
std::vector<int> choose_injection_points(const ReasoningTrace& trace, int m, uint64_t seed,
                                         InjectionStrategy strategy);

// Inserts a new step (bridge text followed by the caption) at each position.
// Marker positions are re-indexed; provenance becomes dvr. Injecting into an
// already-dvr trace throws to prevent double augmentation.
ReasoningTrace inject_reaffirmation(const ReasoningTrace& trace, const std::vector<int>& positions,
                                    const std::string& caption,
                                    const std::string& bridge_text = kDefaultBridgeText);

// Ground-truth scene caption (the desk-scale stand-in for the teacher's
// intrinsic captioning).
std::string caption_for(const Scene& scene);

// Model-generated caption mode: prompts a trained model with the image and
// the caption opener and lets it complete one sentence.
std::string model_caption(const Model& model, const TaskInstance& inst, int max_tokens = 64);

struct DvrConfig {
    int m = 1;
    uint64_t seed = 0;
    InjectionStrategy strategy = InjectionStrategy::Midpoint;
    std::string bridge_text = kDefaultBridgeText;
};

// Corpus-level DVR: augments every image-backed trace with oracle captions;
// text-only traces get an unknown-content caption so the injected layout is
// consistent across both variants.
std::vector<CorpusItem> apply_dvr(const std::vector<CorpusItem>& corpus, const DvrConfig& cfg);

}  // namespace tvc
