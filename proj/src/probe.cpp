#include "tvc/probe.hpp"

#include <algorithm>
#include <cmath>

#include "tvc/errors.hpp"
#include "tvc/train.hpp"

namespace tvc {

double image_attention_mass(const Vector& row, const LayeredKVCache& cache) {
    if (static_cast<int>(row.size()) != cache.length()) {
        throw DimensionMismatchError("attention row length disagrees with cache length");
    }
    double sum = row.sum();
    if (std::abs(sum - 1.0) > 1e-5) {
        throw NormalizationError("attention row does not sum to 1");
    }
    double mass = 0.0;
    for (Eigen::Index i = 0; i < row.size(); ++i) {
        if (cache.tags[static_cast<size_t>(i)].tag == Seg::Image) mass += row(i);
    }
    return mass;
}

AttentionProbe::AttentionProbe(int layers, int dense_layer)
    : layers_(layers), dense_layer_(dense_layer < 0 ? layers / 2 : dense_layer) {
    if (layers_ < 1 || dense_layer_ < 0 || dense_layer_ >= layers_) {
        throw ConfigError("probe layer selection out of range");
    }
}

void AttentionProbe::on_attention_row(int layer, const Vector& row, const LayeredKVCache& cache) {
    if (layer == 0) {
        ProbeRecord rec;
        rec.entry_index = static_cast<int>(records_.size());
        records_.push_back(std::move(rec));
    }
    ProbeRecord& rec = records_.back();
    rec.image_mass.push_back(image_attention_mass(row, cache));
    if (layer == dense_layer_) {
        rec.dense_row.assign(row.data(), row.data() + row.size());
        rec.key_tags.clear();
        rec.key_pos.clear();
        for (int i = 0; i < cache.length(); ++i) {
            rec.key_tags.push_back(cache.tags[static_cast<size_t>(i)].tag);
            rec.key_pos.push_back(cache.tags[static_cast<size_t>(i)].pos);
        }
    }
}

LayerCurve layer_curve(const Model& model, const TaskInstance& inst,
                       const GenerationParams& params) {
    TaggedTokenSequence prompt = build_prompt(model, inst, true);
    AttentionProbe probe(model.cfg.layers);
    GenerationOutput out = generate(model, prompt, params, &probe);
    int s = static_cast<int>(out.tokens.size());
    if (s < 1) throw InputError("generation produced no tokens to probe");

    LayerCurve curve;
    curve.generated = s;
    for (int i = 1; i <= 8; ++i) {
        double f = static_cast<double>(i) / 8.0;
        int step = std::max(0, static_cast<int>(std::floor(f * s)) - 1);
        const ProbeRecord& rec =
            probe.records()[static_cast<size_t>(prompt.size() + step)];
        curve.fractions.push_back(f);
        curve.steps.push_back(step);
        curve.mass.push_back(rec.image_mass);
    }
    return curve;
}

std::vector<TokenMapEntry> token_map(const AttentionProbe& probe, int prompt_len,
                                     int generated_step) {
    int idx = prompt_len + generated_step;
    if (generated_step < 0 || idx < 0 ||
        idx >= static_cast<int>(probe.records().size())) {
        throw CaptureMissingError("no capture for requested step");
    }
    const ProbeRecord& rec = probe.records()[static_cast<size_t>(idx)];
    if (rec.dense_row.empty()) throw CaptureMissingError("dense row missing for step");
    std::vector<TokenMapEntry> map;
    for (size_t i = 0; i < rec.dense_row.size(); ++i) {
        map.push_back(TokenMapEntry{static_cast<int>(i), rec.key_pos[i], rec.key_tags[i],
                                    rec.dense_row[i]});
    }
    return map;
}

DecayFit fit_decay(const std::vector<std::pair<double, double>>& r_of_k, double r_full) {
    std::vector<std::pair<double, double>> pts;  // (k, ln delta)
    for (const auto& [k, rk] : r_of_k) {
        double delta = r_full - rk;
        if (delta > 0.0) pts.emplace_back(k, std::log(delta));
    }
    if (pts.size() < 3) {
        throw InsufficientPointsError("need >= 3 positive-gap points for a decay fit");
    }
    double n = static_cast<double>(pts.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [x, y] : pts) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-12) {
        throw InsufficientPointsError("degenerate abscissae in decay fit");
    }
    double slope = (n * sxy - sx * sy) / denom;
    double intercept = (sy - slope * sx) / n;

    DecayFit fit;
    fit.r_full = r_full;
    fit.lambda = -slope;
    fit.c = std::exp(intercept);
    double ss = 0.0;
    for (const auto& [x, y] : pts) {
        double e = y - (intercept + slope * x);
        ss += e * e;
    }
    fit.residual = std::sqrt(ss / n);
    return fit;
}

namespace {
std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<size_t> idx(v.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    size_t i = 0;
    while (i < idx.size()) {
        size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t t = i; t <= j; ++t) r[idx[t]] = avg;
        i = j + 1;
    }
    return r;
}
}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw InsufficientPointsError("spearman needs two equal-length series");
    }
    std::vector<double> ra = ranks(a), rb = ranks(b);
    double ma = 0, mb = 0;
    for (size_t i = 0; i < ra.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= static_cast<double>(ra.size());
    mb /= static_cast<double>(rb.size());
    double num = 0, da = 0, db = 0;
    for (size_t i = 0; i < ra.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma) * (ra[i] - ma);
        db += (rb[i] - mb) * (rb[i] - mb);
    }
    if (da == 0.0 || db == 0.0) throw InsufficientPointsError("constant series in spearman");
    return num / std::sqrt(da * db);
}

}  // namespace tvc
