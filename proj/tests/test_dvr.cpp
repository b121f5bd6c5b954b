#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "tvc/dvr.hpp"
#include "tvc/errors.hpp"
#include "tvc/task.hpp"
#include "tvc/vocab.hpp"

using namespace tvc;

namespace {

ReasoningTrace simple_trace(std::vector<std::string> steps) {
    ReasoningTrace t;
    t.id = "t";
    t.steps = std::move(steps);
    t.answer = "1";
    return t;
}

}  // namespace

TEST_CASE("lexicon defaults validate and reject substrings") {
    CHECK_NOTHROW(ReflectionLexicon::defaults().validate());
    ReflectionLexicon bad{{{"Wait", true}, {"Wait a moment", true}}};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    ReflectionLexicon empty;
    CHECK_THROWS_AS(empty.validate(), ConfigError);
}

TEST_CASE("find_reflection_points matches step starts in order") {
    ReasoningTrace t = simple_trace({"Compute area .", "Wait , recheck the radius .",
                                     "Alternatively , use the diameter ."});
    auto points = find_reflection_points(t, ReflectionLexicon::defaults());
    REQUIRE(points.size() == 2);
    CHECK(points[0] == std::pair<int, std::string>{1, "Wait"});
    CHECK(points[1] == std::pair<int, std::string>{2, "Alternatively"});

    ReasoningTrace none = simple_trace({"Compute .", "Answer : 1 ."});
    CHECK(find_reflection_points(none, ReflectionLexicon::defaults()).empty());

    // token boundary: "Waiting" is not "Wait"; mid-step markers don't count
    ReasoningTrace tricky = simple_trace({"Waiting for input .", "I said Wait earlier ."});
    CHECK(find_reflection_points(tricky, ReflectionLexicon::defaults()).empty());

    // case sensitivity is per marker: "wait" misses, "hmm" hits
    ReasoningTrace cased = simple_trace({"wait a moment .", "hmm that is odd ."});
    auto cp = find_reflection_points(cased, ReflectionLexicon::defaults());
    REQUIRE(cp.size() == 1);
    CHECK(cp[0].first == 1);
}

TEST_CASE("planted corpus marker counts match the generator ledger") {
    CorpusConfig cfg;
    cfg.n = 120;
    cfg.marker_frac = 0.5;
    for (const auto& item : gen_corpus(cfg)) {
        auto points = find_reflection_points(item.trace, ReflectionLexicon::defaults());
        REQUIRE(points.size() == item.trace.markers.size());
        for (size_t i = 0; i < points.size(); ++i) {
            CHECK(points[i].first == item.trace.markers[i].first);
            CHECK(points[i].second == item.trace.markers[i].second);
        }
    }
}

TEST_CASE("choose_injection_points midpoint and random strategies") {
    ReasoningTrace t8 = simple_trace(std::vector<std::string>(8, "cell 0 0 empty ."));
    CHECK(choose_injection_points(t8, 1, 0, InjectionStrategy::Midpoint) == std::vector<int>{4});
    CHECK(choose_injection_points(t8, 0, 0, InjectionStrategy::Midpoint).empty());

    ReasoningTrace refl = simple_trace({"Wait a .", "step .", "Hmm b .", "Alternatively c ."});
    auto all = choose_injection_points(refl, 3, 123, InjectionStrategy::RandomReflection);
    CHECK(all == std::vector<int>{0, 2, 3});  // exhaustive sample, any seed
    auto one_a = choose_injection_points(refl, 1, 9, InjectionStrategy::RandomReflection);
    auto one_b = choose_injection_points(refl, 1, 9, InjectionStrategy::RandomReflection);
    CHECK(one_a == one_b);  // seeded determinism
    CHECK_THROWS_AS(choose_injection_points(refl, 4, 0, InjectionStrategy::RandomReflection),
                    InfeasibleConfigError);
}

TEST_CASE("inject_reaffirmation inserts bridge + caption steps") {
    std::vector<std::string> steps;
    for (int i = 0; i < 10; ++i) steps.push_back("step " + std::to_string(i) + " .");
    ReasoningTrace t = simple_trace(steps);
    t.markers = {{7, "Wait"}};

    ReasoningTrace out = inject_reaffirmation(t, {5}, "The image shows an empty grid .");
    CHECK(out.steps.size() == 11);
    CHECK(out.steps[5] == kDefaultBridgeText + " The image shows an empty grid .");
    CHECK(out.provenance == Provenance::Dvr);
    CHECK(out.markers[0].first == 8);  // re-indexed past the insertion
    for (int i = 0; i < 5; ++i) CHECK(out.steps[static_cast<size_t>(i)] == steps[static_cast<size_t>(i)]);
    for (int i = 5; i < 10; ++i) CHECK(out.steps[static_cast<size_t>(i + 1)] == steps[static_cast<size_t>(i)]);

    ReasoningTrace unchanged = inject_reaffirmation(t, {}, "caption .");
    CHECK(unchanged.steps == t.steps);
    CHECK(unchanged.provenance == Provenance::Base);

    CHECK_THROWS_AS(inject_reaffirmation(out, {1}, "again ."), InputError);
    CHECK_THROWS_AS(inject_reaffirmation(t, {42}, "caption ."), OutOfRangeError);
}

TEST_CASE("stripping bridge steps recovers the original step list") {
    TaskInstance inst = gen_instance(31);
    ReasoningTrace t = base_cot_trace(inst);
    ReasoningTrace out = inject_reaffirmation(t, {3, 9}, caption_for(inst.scene));
    CHECK(out.steps.size() == t.steps.size() + 2);
    std::vector<std::string> stripped;
    for (const auto& s : out.steps) {
        if (s.rfind(kDefaultBridgeText, 0) != 0) stripped.push_back(s);
    }
    CHECK(stripped == t.steps);
}

TEST_CASE("caption_for enumerates the scene ledger exactly") {
    Scene scene;
    scene.rows = scene.cols = 4;
    scene.objects = {{0, 1, Shape::Circle, ColorAttr::Red, SizeAttr::Small},
                     {2, 3, Shape::Square, ColorAttr::Blue, SizeAttr::Large}};
    CHECK(caption_for(scene) ==
          "The image shows : small red circle at 0 1 , large blue square at 2 3 .");
    Scene empty;
    CHECK(caption_for(empty) == "The image shows an empty grid .");
    CHECK(caption_for(scene) == caption_for(scene));  // pure function

    const Vocab& v = Vocab::instance();
    for (int id : v.encode(caption_for(scene))) CHECK(id != v.unk());
}

TEST_CASE("apply_dvr augments every trace once with a consistent layout") {
    CorpusConfig cfg;
    cfg.n = 40;
    cfg.marker_frac = 0.4;
    cfg.text_only_frac = 0.2;
    auto corpus = gen_corpus(cfg);
    DvrConfig dvr;
    auto out = apply_dvr(corpus, dvr);
    REQUIRE(out.size() == corpus.size());
    for (size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i].trace.steps.size() == corpus[i].trace.steps.size() + 1);
        CHECK(out[i].trace.provenance == Provenance::Dvr);
        int mid = static_cast<int>(corpus[i].trace.steps.size()) / 2;
        const std::string& injected = out[i].trace.steps[static_cast<size_t>(mid)];
        CHECK(injected.rfind(kDefaultBridgeText, 0) == 0);
        if (out[i].text_only) {
            CHECK(injected.find("unk") != std::string::npos);
        } else {
            CHECK(injected.find("The image shows") != std::string::npos);
        }
        // original steps preserved in order
        std::vector<std::string> stripped = out[i].trace.steps;
        stripped.erase(stripped.begin() + mid);
        CHECK(stripped == corpus[i].trace.steps);
    }
    // deterministic
    auto again = apply_dvr(corpus, dvr);
    for (size_t i = 0; i < out.size(); ++i) CHECK(again[i].trace.steps == out[i].trace.steps);
}
