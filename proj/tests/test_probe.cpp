#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tvc/errors.hpp"
#include "tvc/generate.hpp"
#include "tvc/model.hpp"
#include "tvc/probe.hpp"
#include "tvc/task.hpp"
#include "tvc/train.hpp"
#include "tvc/vocab.hpp"

using namespace tvc;

namespace {

Model small_model(int layers = 4, uint64_t seed = 3) {
    ModelConfig cfg;
    cfg.layers = layers;
    cfg.heads = 2;
    cfg.model_dim = 32;
    cfg.head_dim = 16;
    cfg.seed = seed;
    return Model::init(cfg);
}

LayeredKVCache tagged_cache(int n_image, int n_text) {
    LayeredKVCache c(1, 4);
    for (int i = 0; i < n_image + n_text; ++i) {
        c.push_entry(i, i < n_image ? Seg::Image : Seg::Text);
        c.set_kv(0, Vector::Zero(4), Vector::Zero(4));
    }
    return c;
}

}  // namespace

TEST_CASE("uniform attention mass equals the image fraction") {
    LayeredKVCache c = tagged_cache(16, 24);
    Vector row = Vector::Constant(40, 1.0 / 40.0);
    CHECK(image_attention_mass(row, c) == doctest::Approx(0.4).epsilon(1e-12));

    LayeredKVCache none = tagged_cache(0, 10);
    Vector row2 = Vector::Constant(10, 0.1);
    CHECK(image_attention_mass(row2, none) == 0.0);
}

TEST_CASE("attention mass validates its inputs") {
    LayeredKVCache c = tagged_cache(2, 2);
    Vector bad = Vector::Constant(4, 0.3);  // sums to 1.2
    CHECK_THROWS_AS(image_attention_mass(bad, c), NormalizationError);
    Vector wrong_len = Vector::Constant(5, 0.2);
    CHECK_THROWS_AS(image_attention_mass(wrong_len, c), DimensionMismatchError);
}

TEST_CASE("probe rows sum to 1 and match independent recomputation") {
    Model m = small_model();
    TaskInstance inst = gen_instance(5);
    TaggedTokenSequence prompt = build_prompt(m, inst, true);
    AttentionProbe probe(m.cfg.layers);
    GenerationParams params;
    params.max_new_tokens = 8;
    generate(m, prompt, params, &probe);
    REQUIRE_FALSE(probe.records().empty());
    for (const auto& rec : probe.records()) {
        CHECK(rec.image_mass.size() == static_cast<size_t>(m.cfg.layers));
        for (double mass : rec.image_mass) {
            CHECK(mass >= 0.0);
            CHECK(mass <= 1.0 + 1e-9);
        }
        if (rec.dense_row.empty()) continue;
        double sum = 0.0, img = 0.0;
        for (size_t i = 0; i < rec.dense_row.size(); ++i) {
            sum += rec.dense_row[i];
            if (rec.key_tags[i] == Seg::Image) img += rec.dense_row[i];
        }
        CHECK(std::abs(sum - 1.0) < 1e-5);
        // dense capture at the designated layer agrees with the mass series
        CHECK(std::abs(img - rec.image_mass[static_cast<size_t>(probe.dense_layer())]) < 1e-6);
    }
}

TEST_CASE("probe attachment never changes the generation") {
    Model m = small_model();
    TaskInstance inst = gen_instance(6);
    TaggedTokenSequence prompt = build_prompt(m, inst, true);
    GenerationParams params;
    params.max_new_tokens = 16;
    GenerationOutput plain = generate(m, prompt, params);
    AttentionProbe probe(m.cfg.layers);
    GenerationOutput probed = generate(m, prompt, params, &probe);
    CHECK(plain.tokens == probed.tokens);
    CHECK(plain.text == probed.text);
}

TEST_CASE("layer_curve samples eight checkpoints of the generated span") {
    Model m = small_model();
    TaskInstance inst = gen_instance(7);
    GenerationParams params;
    params.max_new_tokens = 16;
    LayerCurve curve = layer_curve(m, inst, params);
    REQUIRE(curve.fractions.size() == 8);
    CHECK(curve.fractions.front() == doctest::Approx(0.125));
    CHECK(curve.fractions.back() == doctest::Approx(1.0));
    int s = curve.generated;
    for (size_t i = 0; i < 8; ++i) {
        int want = std::max(0, static_cast<int>(std::floor(curve.fractions[i] * s)) - 1);
        CHECK(curve.steps[i] == want);
        CHECK(curve.mass[i].size() == static_cast<size_t>(m.cfg.layers));
    }
    CHECK(curve.steps.back() == s - 1);
}

TEST_CASE("token_map exposes the dense capture and its marginals") {
    Model m = small_model();
    TaskInstance inst = gen_instance(8);
    TaggedTokenSequence prompt = build_prompt(m, inst, true);
    AttentionProbe probe(m.cfg.layers);
    GenerationParams params;
    params.max_new_tokens = 6;
    GenerationOutput out = generate(m, prompt, params, &probe);

    for (int step = 0; step < static_cast<int>(out.tokens.size()); ++step) {
        auto map = token_map(probe, prompt.size(), step);
        double sum = 0.0, img = 0.0;
        for (const auto& e : map) {
            sum += e.weight;
            if (e.tag == Seg::Image) img += e.weight;
        }
        CHECK(std::abs(sum - 1.0) < 1e-5);
        const ProbeRecord& rec = probe.records()[static_cast<size_t>(prompt.size() + step)];
        CHECK(std::abs(img - rec.image_mass[static_cast<size_t>(probe.dense_layer())]) < 1e-6);
    }
    CHECK_THROWS_AS(token_map(probe, prompt.size(), 100000), CaptureMissingError);
}

TEST_CASE("fit_decay inverts a synthetic exponential") {
    std::vector<std::pair<double, double>> r;
    double r_full = 90.0, c = 20.0, lambda = 0.8;
    for (int k = 0; k < 8; ++k) {
        r.emplace_back(k, r_full - c * std::exp(-lambda * k));
    }
    DecayFit fit = fit_decay(r, r_full);
    CHECK(std::abs(fit.c - c) / c < 0.01);
    CHECK(std::abs(fit.lambda - lambda) / lambda < 0.01);
    CHECK(fit.residual < 1e-9);
}

TEST_CASE("the anchor pair yields a 2.2-point midpoint gap") {
    double r_full = 43.1;
    double r4 = 40.9;
    CHECK(forgetting_gap(r_full, r4) == doctest::Approx(2.2).epsilon(1e-9));
}

TEST_CASE("fit_decay needs three positive gaps") {
    std::vector<std::pair<double, double>> flat;
    for (int k = 0; k < 8; ++k) flat.emplace_back(k, 50.0);
    CHECK_THROWS_AS(fit_decay(flat, 50.0), InsufficientPointsError);
}

TEST_CASE("spearman handles monotone, reversed and tied series") {
    std::vector<double> k{0, 1, 2, 3, 4};
    std::vector<double> up{10, 20, 30, 40, 50};
    std::vector<double> down{50, 40, 30, 20, 10};
    CHECK(spearman(k, up) == doctest::Approx(1.0));
    CHECK(spearman(k, down) == doctest::Approx(-1.0));
    std::vector<double> tied{10, 10, 30, 40, 50};
    CHECK(spearman(k, tied) > 0.9);
    std::vector<double> flat{1, 1, 1, 1, 1};
    CHECK_THROWS_AS(spearman(k, flat), InsufficientPointsError);
}
