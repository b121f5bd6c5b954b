#pragma once

#include <cstdint>
#include <vector>

#include "tvc/model.hpp"
#include "tvc/task.hpp"

namespace tvc {

// Absolute position of the first reasoning token. The question occupies
// positions [image block, kTraceStartPos - 1); [SEP] sits at
// kTraceStartPos - 1. Anchoring the reasoning region makes scan step k
// occupy identical positions across instances.
inline constexpr int kTraceStartPos = 48;

// Teacher-forced training layout: optional IMAGE block at position 0, then
// question + [SEP] + trace + [EOS] as TEXT. Text positions start after the
// image block whether or not the image is present, so image-ablated layouts
// match image-backed ones.
TaggedTokenSequence build_training_sequence(const Model& model, const TaskInstance& inst,
                                            const ReasoningTrace& trace, bool with_image);

// Which entries contribute to the loss as prediction targets: TEXT-tagged
// text tokens only; IMAGE and BRIDGE entries are masked. Entry 0 is never a
// target.
std::vector<bool> target_mask(const TaggedTokenSequence& seq);

// Mean masked cross-entropy of next-token prediction over the sequence.
double sequence_loss(const Model& model, const TaggedTokenSequence& seq);

// Batched full-sequence forward: next-token logits for every position
// (row t conditions on entries [0, t]). The reference the incremental
// decode path is checked against.
Matrix full_logits(const Model& model, const TaggedTokenSequence& seq);

// A Model whose parameter tensors are zeroed; used as a gradient holder.
Model zeros_like(const Model& model);

// Forward + backward; accumulates into `grads` and returns the loss.
double loss_and_grad(const Model& model, const TaggedTokenSequence& seq, Model& grads);

struct TrainConfig {
    int epochs = 3;
    double lr = 3e-4;
    double clip = 1.0;   // global gradient-norm clip, <= 0 disables
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    bool cosine = true;  // cosine learning-rate decay over all steps
    uint64_t seed = 0;   // shuffling order
    int log_every = 0;   // print running loss every n steps, 0 = silent
};

struct TrainStats {
    double final_loss = 0.0;       // last step's loss
    double last_epoch_loss = 0.0;  // mean loss over the final epoch
    int steps = 0;
};

// Adam over per-item steps. Items flagged text_only are trained without
// their image. Throws DivergenceError on non-finite loss.
TrainStats train(Model& model, const std::vector<CorpusItem>& corpus, const TrainConfig& cfg);

// Central finite differences on `num_params` randomly chosen parameters;
// returns the maximum relative error against the analytic gradient.
double gradient_check(Model& model, const TaggedTokenSequence& seq, int num_params,
                      double fd_eps = 1e-5, uint64_t seed = 0);

// Inference prompt matching the training layout: [image +] question + [SEP].
TaggedTokenSequence build_prompt(const Model& model, const TaskInstance& inst, bool with_image);

}  // namespace tvc
