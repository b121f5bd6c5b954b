#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tvc/kv_cache.hpp"
#include "tvc/model.hpp"
#include "tvc/sequence.hpp"
#include "tvc/trace.hpp"

namespace tvc {

struct GenerationParams {
    double temperature = 0.0;  // 0 = greedy argmax (lowest index on ties)
    int max_new_tokens = 256;
    uint64_t seed = 0;
    int stop_token = -1;  // -1 = [EOS]
};

// Incremental decoding session: owns the growing sequence, the KV cache and
// the sampling RNG. Mid-generation injections (bridge text, visual tokens)
// are fed through the same step path as sampled tokens.
struct GenSession {
    const Model& model;
    GenerationParams params;
    TaggedTokenSequence seq;
    LayeredKVCache cache;
    std::mt19937_64 rng;
    AttentionObserver* observer = nullptr;
    Vector last_logits;  // next-token logits after the last fed entry

    GenSession(const Model& model, const TaggedTokenSequence& prompt,
               const GenerationParams& params, AttentionObserver* observer = nullptr);

    // Resume from a prepared cache (e.g. after KV surgery). `last_logits`
    // must be the next-token logits consistent with the cache contents.
    GenSession(const Model& model, TaggedTokenSequence seq, LayeredKVCache cache,
               Vector logits, const GenerationParams& params,
               AttentionObserver* observer = nullptr);

    int stop_token() const;
    // Draws from last_logits without feeding (advances the RNG at tau > 0).
    int sample_token();
    // Draws the next token, feeds it as a TEXT entry, returns its id.
    int sample_and_feed();
    // Feeds literal tokens at the current tail positions.
    void feed_text(const std::vector<int>& ids, Seg tag = Seg::Text);
    // Feeds visual content rows (no raw patches) at the current tail positions.
    void feed_visual(const Matrix& content, int rows, int cols, Seg tag = Seg::Image);

    std::string rng_state() const;
    void set_rng_state(const std::string& state);
};

struct GenerationOutput {
    std::vector<int> tokens;       // sampled ids, stop token excluded
    std::string text;              // decoded sampled tokens
    TaggedTokenSequence sequence;  // prompt + sampled entries
    ReasoningTrace trace;          // step-split view with extracted answer
    bool truncated = false;        // hit max_new_tokens before the stop token
};

// Runs a session to the stop token or the token budget. Deterministic for a
// fixed (model, prompt, params) triple.
GenerationOutput generate(const Model& model, const TaggedTokenSequence& prompt,
                          const GenerationParams& params, AttentionObserver* observer = nullptr);

// Samples from an already-prepared session until the stop token or budget.
GenerationOutput run_session(GenSession& session);

// Builds a trace from decoded text: steps, reflection markers, answer.
ReasoningTrace trace_from_text(const std::string& text, Provenance provenance = Provenance::Base);

}  // namespace tvc
