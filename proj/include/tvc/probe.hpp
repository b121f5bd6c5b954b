#pragma once

#include <string>
#include <vector>

#include "tvc/generate.hpp"
#include "tvc/kv_cache.hpp"
#include "tvc/model.hpp"
#include "tvc/task.hpp"

namespace tvc {

// Fraction of one attention distribution spent on IMAGE-tagged cache entries.
// Throws NormalizationError when the row does not sum to 1 within 1e-5 and
// DimensionMismatchError when the row length disagrees with the cache.
double image_attention_mass(const Vector& row, const LayeredKVCache& cache);

// One fed entry's capture: per-layer image attention mass, plus the dense
// head-averaged row at the designated layer.
struct ProbeRecord {
    int entry_index = 0;
    std::vector<double> image_mass;  // indexed by layer
    std::vector<double> dense_row;   // designated layer only
    std::vector<Seg> key_tags;       // cache tags at capture time
    std::vector<int> key_pos;        // original positions of the keys
};

// Read-only attention recorder. Attaching it must not change outputs; the
// model's step path treats observers as pure sinks.
class AttentionProbe : public AttentionObserver {
  public:
    // dense_layer -1 selects layers / 2.
    explicit AttentionProbe(int layers, int dense_layer = -1);

    void on_attention_row(int layer, const Vector& row, const LayeredKVCache& cache) override;

    const std::vector<ProbeRecord>& records() const { return records_; }
    int dense_layer() const { return dense_layer_; }

  private:
    int layers_;
    int dense_layer_;
    std::vector<ProbeRecord> records_;
};

// Image attention mass sampled at eight generation checkpoints (fractions
// i/8 of the generated length, step index floor(f * s) - 1 clamped to 0).
struct LayerCurve {
    std::vector<double> fractions;
    std::vector<int> steps;               // generated-step indices sampled
    std::vector<std::vector<double>> mass;  // [checkpoint][layer]
    int generated = 0;
};

LayerCurve layer_curve(const Model& model, const TaskInstance& inst,
                       const GenerationParams& params = {});

// Dense attention row of one generated step over cache keys, with metadata.
struct TokenMapEntry {
    int key_index = 0;
    int pos = 0;
    Seg tag = Seg::Text;
    double weight = 0.0;
};

// Throws CaptureMissingError when the step was not captured.
std::vector<TokenMapEntry> token_map(const AttentionProbe& probe, int prompt_len,
                                     int generated_step);

// Exponential fit of the forgetting gap: delta(k) = c * exp(-lambda * k),
// log-linear least squares over points with positive gap. Needs >= 3 such
// points, otherwise InsufficientPointsError.
struct DecayFit {
    double r_full = 0.0;
    double c = 0.0;
    double lambda = 0.0;
    double residual = 0.0;  // rms residual in log space
};

DecayFit fit_decay(const std::vector<std::pair<double, double>>& r_of_k, double r_full);

// Forgetting gap at one cutoff: delta(k) = r_full - r(k).
inline double forgetting_gap(double r_full, double r_k) { return r_full - r_k; }

// Spearman rank correlation (average-rank ties).
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace tvc
