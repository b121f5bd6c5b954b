#pragma once

#include <string>
#include <vector>

#include "tvc/dvr.hpp"
#include "tvc/generate.hpp"
#include "tvc/model.hpp"

namespace tvc {

// Average-pools visual content embeddings over the patch grid with a
// pool x pool kernel (edge blocks partial). Rows are row-major over the
// pooled grid.
Matrix compress_visual_tokens(const Matrix& content, int grid_rows, int grid_cols, int pool);

enum class ReactivationStrategy { Midpoint, FixedFractions, OnReflectionMarker };

struct PvcConfig {
    int m = 1;  // number of reactivations; 0 disables the mechanism
    ReactivationStrategy strategy = ReactivationStrategy::Midpoint;
    std::vector<double> fractions;  // FixedFractions offsets as f * horizon
    int pool = 4;                   // pooling kernel edge
    bool excise_original = false;   // drop existing IMAGE cache entries first
    std::string bridge_text = kDefaultBridgeText;

    void validate() const;
};

// Planned injection offsets (generated-token indices) for the static
// strategies. Midpoint: { floor(0.5 * horizon) }. FixedFractions:
// floor(f_i * horizon), deduplicated ascending. OnReflectionMarker plans
// nothing; it triggers live on generated reflection markers.
std::vector<int> plan_reactivations(int horizon, const PvcConfig& cfg);

struct InjectionRecord {
    int token_offset = 0;  // generated tokens emitted before the injection
    int bridge_begin = 0;  // entry index of the first bridge token
    int bridge_len = 0;
    int image_begin = 0;   // entry index of the first reinjected visual token
    int image_len = 0;
    int pool = 0;
};

// Injects bridge text (BRIDGE-tagged) followed by pooled visual tokens
// (IMAGE-tagged) at the session tail; optionally excises the original IMAGE
// entries from the cache first.
InjectionRecord reactivate(GenSession& session, const Matrix& image_content, int grid_rows,
                           int grid_cols, const PvcConfig& cfg, int token_offset);

struct PvcOutput {
    GenerationOutput gen;
    std::vector<InjectionRecord> injections;
};

// Decoding with take-along visual conditioning. The visual tokens are taken
// from the prompt's IMAGE segment. With m = 0 the output is byte-identical
// to plain generate().
PvcOutput generate_with_pvc(const Model& model, const TaggedTokenSequence& prompt,
                            const GenerationParams& gen_params, const PvcConfig& cfg,
                            AttentionObserver* observer = nullptr);

}  // namespace tvc
