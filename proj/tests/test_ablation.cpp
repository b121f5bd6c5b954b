#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "tvc/ablation.hpp"
#include "tvc/errors.hpp"
#include "tvc/generate.hpp"
#include "tvc/model.hpp"
#include "tvc/task.hpp"
#include "tvc/train.hpp"
#include "tvc/vocab.hpp"

using namespace tvc;

namespace {

Model small_model(int layers = 2, uint64_t seed = 3) {
    ModelConfig cfg;
    cfg.layers = layers;
    cfg.heads = 2;
    cfg.model_dim = 32;
    cfg.head_dim = 16;
    cfg.seed = seed;
    return Model::init(cfg);
}

}  // namespace

TEST_CASE("grade matches the answer span") {
    CHECK(grade("cell 0 0 empty . Answer : 7 .", "7").correct);
    GradeResult mismatch = grade("Answer : 7 .", "seven");
    CHECK_FALSE(mismatch.correct);
    CHECK_FALSE(mismatch.missing_answer);
    GradeResult missing = grade("no delimiter here .", "7");
    CHECK_FALSE(missing.correct);
    CHECK(missing.missing_answer);
    // last delimiter wins; whitespace and case of the delimiter are forgiven
    CHECK(grade("answer : 3 . Answer : 5 .", "5").correct);
}

TEST_CASE("mode names round-trip") {
    CHECK(ablation_mode_name(AblationMode::Rebuild) == std::string("rebuild"));
    CHECK(ablation_mode_name(AblationMode::Excise) == std::string("excise"));
    CHECK(ablation_mode_from("rebuild") == AblationMode::Rebuild);
    CHECK(ablation_mode_from("excise") == AblationMode::Excise);
    CHECK_THROWS_AS(ablation_mode_from("other"), ConfigError);
}

TEST_CASE("ablation records cover every (instance, k) with exact cutoffs") {
    Model m = small_model();
    std::vector<TaskInstance> instances;
    for (uint64_t s = 0; s < 3; ++s) instances.push_back(gen_instance(700 + s));
    AblationConfig cfg;
    cfg.k_max = 4;
    cfg.params.max_new_tokens = 24;
    AblationResult result = run_ablation(m, instances, cfg);

    CHECK(result.records.size() == instances.size() * 5);
    CHECK(result.r.size() == 5);
    for (const auto& [k, r] : result.r) {
        CHECK(r >= 0.0);
        CHECK(r <= 100.0);
    }
    // per-instance cutoffs are floor(k*S/K) of that instance's own run
    for (const TaskInstance& inst : instances) {
        GenerationOutput normal = generate(m, build_prompt(m, inst, true), cfg.params);
        int s = static_cast<int>(normal.tokens.size());
        for (const AblationRecord& rec : result.records) {
            if (rec.id != inst.id) continue;
            if (rec.k == cfg.k_max) {
                CHECK(rec.cutoff == s);
            } else {
                CHECK(rec.cutoff == rec.k * s / cfg.k_max);
            }
        }
    }
}

TEST_CASE("k = K reproduces the unablated run") {
    Model m = small_model();
    std::vector<TaskInstance> instances{gen_instance(710), gen_instance(711)};
    AblationConfig cfg;
    cfg.params.max_new_tokens = 20;
    AblationResult result = run_ablation(m, instances, cfg);
    double r_kmax = result.r.at(cfg.k_max);
    CHECK(r_kmax == result.r_full);
}

TEST_CASE("rebuild and excise prompts drop the image but keep the prefix") {
    Model m = small_model();
    std::vector<TaskInstance> instances{gen_instance(712)};
    for (AblationMode mode : {AblationMode::Rebuild, AblationMode::Excise}) {
        AblationConfig cfg;
        cfg.mode = mode;
        cfg.k_max = 2;
        cfg.params.max_new_tokens = 16;
        AblationResult result = run_ablation(m, instances, cfg);
        CHECK(result.mode == mode);
        int text_prompt = build_prompt(m, instances[0], false).size();
        for (const AblationRecord& rec : result.records) {
            if (rec.k == cfg.k_max) continue;
            CHECK(rec.prompt_len == text_prompt + rec.cutoff);
        }
    }
}

TEST_CASE("excise continuation matches rebuild on a 1-layer model") {
    Model m1 = small_model(1, 19);
    TaskInstance inst = gen_instance(720);
    AblationConfig cfg;
    cfg.k_max = 2;
    cfg.params.max_new_tokens = 16;
    cfg.mode = AblationMode::Rebuild;
    AblationResult rb = run_ablation(m1, {inst}, cfg);
    cfg.mode = AblationMode::Excise;
    AblationResult ex = run_ablation(m1, {inst}, cfg);
    REQUIRE(rb.records.size() == ex.records.size());
    for (size_t i = 0; i < rb.records.size(); ++i) {
        CHECK(rb.records[i].answer == ex.records[i].answer);
        CHECK(rb.records[i].correct == ex.records[i].correct);
    }
}

TEST_CASE("hard_subset separates text-answerable items") {
    Model m = small_model();
    std::vector<TaskInstance> instances;
    for (uint64_t s = 0; s < 6; ++s) instances.push_back(gen_instance(730 + s));
    GenerationParams params;
    params.max_new_tokens = 12;
    HardSubset hs = hard_subset(m, instances, params);
    CHECK(hs.kept.size() + hs.excluded_ids.size() == instances.size());
    CHECK(hs.exclusion_rate ==
          doctest::Approx(static_cast<double>(hs.excluded_ids.size()) / instances.size()));
    std::set<std::string> excluded(hs.excluded_ids.begin(), hs.excluded_ids.end());
    for (const TaskInstance& inst : hs.kept) CHECK(excluded.count(inst.id) == 0);
    // the screening condition is reproducible: text-only grading decides
    for (const TaskInstance& inst : instances) {
        GenerationOutput run = generate(m, build_prompt(m, inst, false), params);
        bool correct = grade(run.text, inst.ground_truth).correct;
        CHECK(correct == (excluded.count(inst.id) > 0));
    }
}

TEST_CASE("untrained model excludes nothing") {
    // an untrained model cannot emit a parseable answer, so the filter is the
    // identity on any instance set
    Model m = small_model(1, 77);
    std::vector<TaskInstance> instances{gen_instance(740), gen_instance(741)};
    GenerationParams params;
    params.max_new_tokens = 8;
    HardSubset hs = hard_subset(m, instances, params);
    if (hs.excluded_ids.empty()) {
        CHECK(hs.exclusion_rate == 0.0);
        CHECK(hs.kept.size() == instances.size());
    }
}

TEST_CASE("evaluate_accuracy rejects empty sets and stays in range") {
    Model m = small_model();
    CHECK_THROWS_AS(evaluate_accuracy(m, {}), InputError);
    std::vector<TaskInstance> instances{gen_instance(750)};
    GenerationParams params;
    params.max_new_tokens = 8;
    double acc = evaluate_accuracy(m, instances, params);
    CHECK(acc >= 0.0);
    CHECK(acc <= 100.0);
}
