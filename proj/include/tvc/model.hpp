#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tvc/kv_cache.hpp"
#include "tvc/sequence.hpp"

namespace tvc {

struct ModelConfig {
    int layers = 4;
    int heads = 4;
    int model_dim = 128;
    int head_dim = 32;
    int vocab_size = 0;  // 0 = use the task vocabulary size
    int patch_size = 4;
    int max_seq = 320;
    uint64_t seed = 0;

    int patch_pixels() const { return patch_size * patch_size; }
    int mlp_dim() const { return 4 * model_dim; }
    void validate() const;
};

struct LayerParams {
    Vector ln1_g, ln1_b;
    Matrix wq, wk, wv, wo;  // model_dim x model_dim
    Vector bq, bk, bv, bo;
    Vector ln2_g, ln2_b;
    Matrix w1;  // model_dim x mlp_dim
    Vector b1;
    Matrix w2;  // mlp_dim x model_dim
    Vector b2;
};

// Hook for attention instrumentation. Implementations must only read; a
// forward pass behaves identically with or without an observer attached.
struct AttentionObserver {
    virtual ~AttentionObserver() = default;
    // `row` is the head-averaged attention distribution of the current query
    // over cache entries [0, cache.length()).
    virtual void on_attention_row(int layer, const Vector& row, const LayeredKVCache& cache) = 0;
};

// Pre-norm decoder-only transformer with learned absolute position
// embeddings and a linear patch projection as the visual front end.
// Immutable after training; safe to share across concurrent readers.
struct Model {
    ModelConfig cfg;

    Matrix tok_emb;  // vocab x model_dim
    Matrix pos_emb;  // max_seq x model_dim
    Matrix patch_w;  // patch_pixels x model_dim
    Vector patch_b;
    std::vector<LayerParams> blocks;
    Vector lnf_g, lnf_b;
    Matrix w_out;  // model_dim x vocab
    Vector b_out;

    struct ParamRef {
        std::string name;
        double* data;
        Eigen::Index size;
    };
    // Every parameter tensor in declaration order (the checkpoint order).
    std::vector<ParamRef> params();
    Eigen::Index param_count() const;

    static Model init(const ModelConfig& cfg);
    void save(const std::string& path) const;
    static Model load(const std::string& path);

    // Content embedding of one entry (token embedding or visual content);
    // position embedding not yet added.
    Vector input_content(const TaggedTokenSequence& seq, int entry_index) const;
    // Full input embedding: content + position embedding.
    Vector input_embedding(const TaggedTokenSequence& seq, int entry_index) const;
};

// Splits an image into flattened patches, row-major over the patch grid.
Matrix split_patches(const Matrix& image, int patch_size);

// Linear projection of flattened patches (content embeddings, no positions).
Matrix patch_embeddings(const Model& model, const Matrix& patches);

// Encodes an image as an IMAGE-only tagged sequence at positions
// [start_pos, start_pos + patches). Throws DimensionMismatchError when the
// image dimensions are not divisible by the patch size.
TaggedTokenSequence embed_image(const Matrix& image, const Model& model, int start_pos = 0);

// One causal decoding step: appends this entry's K/V to the cache (tagged
// `tag`, original position `pos`) and returns next-token logits. Identical
// within numerical tolerance to a full forward over cache entries + this one.
Vector forward_step(const Model& model, LayeredKVCache& cache, const Vector& content,
                    int pos, Seg tag, AttentionObserver* observer = nullptr);

LayeredKVCache make_cache(const Model& model);

// Feeds a sequence entry-by-entry through forward_step from an empty cache.
LayeredKVCache rebuild(const Model& model, const TaggedTokenSequence& seq,
                       AttentionObserver* observer = nullptr,
                       Vector* last_logits = nullptr);

}  // namespace tvc
