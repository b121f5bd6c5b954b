#include "tvc/dvr.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <sstream>

#include "tvc/errors.hpp"
#include "tvc/generate.hpp"
#include "tvc/model.hpp"
#include "tvc/vocab.hpp"

namespace tvc {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool starts_with_marker(const std::string& step, const ReflectionLexicon::Marker& m) {
    std::string hay = m.case_sensitive ? step : lower(step);
    std::string needle = m.case_sensitive ? m.text : lower(m.text);
    if (hay.size() < needle.size() || hay.compare(0, needle.size(), needle) != 0) return false;
    // token boundary: marker must end the step or be followed by a space
    return hay.size() == needle.size() || hay[needle.size()] == ' ';
}

}  // namespace

const ReflectionLexicon& ReflectionLexicon::defaults() {
    static const ReflectionLexicon lex{{
        {"Wait", true},
        {"Alternatively", true},
        {"Hmm", false},
        {"Let me double-check", false},
    }};
    return lex;
}

void ReflectionLexicon::validate() const {
    if (markers.empty()) throw ConfigError("reflection lexicon is empty");
    for (size_t i = 0; i < markers.size(); ++i) {
        if (markers[i].text.empty()) throw ConfigError("empty reflection marker");
        for (size_t j = 0; j < markers.size(); ++j) {
            if (i == j) continue;
            if (lower(markers[j].text).find(lower(markers[i].text)) != std::string::npos) {
                throw ConfigError("marker '" + markers[i].text + "' is a substring of '" +
                                  markers[j].text + "'");
            }
        }
    }
}

std::vector<std::pair<int, std::string>> find_reflection_points(const ReasoningTrace& trace,
                                                                const ReflectionLexicon& lexicon) {
    lexicon.validate();
    std::vector<std::pair<int, std::string>> points;
    for (size_t i = 0; i < trace.steps.size(); ++i) {
        for (const auto& m : lexicon.markers) {
            if (starts_with_marker(trace.steps[i], m)) {
                points.emplace_back(static_cast<int>(i), m.text);
                break;
            }
        }
    }
    return points;
}

std::vector<int> choose_injection_points(const ReasoningTrace& trace, int m, uint64_t seed,
                                         InjectionStrategy strategy) {
    if (m < 0) throw ConfigError("injection count m must be >= 0");
    if (m == 0) return {};
    if (strategy == InjectionStrategy::Midpoint) {
        if (m != 1) throw ConfigError("midpoint strategy requires m = 1");
        return {static_cast<int>(trace.steps.size()) / 2};
    }
    auto points = find_reflection_points(trace, ReflectionLexicon::defaults());
    if (static_cast<int>(points.size()) < m) {
        throw InfeasibleConfigError("trace has fewer reflection points than m");
    }
    std::vector<int> idx(points.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<int> out;
    for (int i = 0; i < m; ++i) out.push_back(points[static_cast<size_t>(idx[static_cast<size_t>(i)])].first);
    std::sort(out.begin(), out.end());
    return out;
}

ReasoningTrace inject_reaffirmation(const ReasoningTrace& trace, const std::vector<int>& positions,
                                    const std::string& caption, const std::string& bridge_text) {
    if (trace.provenance == Provenance::Dvr) {
        throw InputError("trace already carries a reaffirmation injection");
    }
    for (int p : positions) {
        if (p < 0 || p > static_cast<int>(trace.steps.size())) {
            throw OutOfRangeError("injection position out of range");
        }
    }
    ReasoningTrace out = trace;
    if (positions.empty()) return out;

    std::vector<int> sorted(positions);
    std::sort(sorted.rbegin(), sorted.rend());
    const std::string step = bridge_text + " " + caption;
    for (int p : sorted) {
        out.steps.insert(out.steps.begin() + p, step);
        for (auto& mk : out.markers) {
            if (mk.first >= p) ++mk.first;
        }
    }
    out.provenance = Provenance::Dvr;
    return out;
}

std::string caption_for(const Scene& scene) {
    if (scene.objects.empty()) return "The image shows an empty grid .";
    std::string out = "The image shows :";
    for (size_t i = 0; i < scene.objects.size(); ++i) {
        const SceneObject& o = scene.objects[i];
        if (i > 0) out += " ,";
        out += std::string(" ") + size_word(o.size) + " " + color_word(o.color) + " " +
               shape_word(o.shape) + " at " + std::to_string(o.row) + " " + std::to_string(o.col);
    }
    out += " .";
    return out;
}

std::string model_caption(const Model& model, const TaskInstance& inst, int max_tokens) {
    const Vocab& v = Vocab::instance();
    TaggedTokenSequence seq = embed_image(inst.image, model);
    const std::string opener = "The image shows";
    seq.append_text(v.encode(opener), Seg::Text);
    GenerationParams params;
    params.max_new_tokens = max_tokens;
    GenSession session(model, seq, params);
    std::string out = opener;
    int period = v.id(".");
    for (int i = 0; i < max_tokens; ++i) {
        int tok = session.sample_and_feed();
        if (tok == v.eos()) break;
        out += " " + v.word(tok);
        if (tok == period) break;
    }
    return out;
}

std::vector<CorpusItem> apply_dvr(const std::vector<CorpusItem>& corpus, const DvrConfig& cfg) {
    std::vector<CorpusItem> out;
    out.reserve(corpus.size());
    for (size_t i = 0; i < corpus.size(); ++i) {
        const CorpusItem& item = corpus[i];
        std::string caption =
            item.text_only ? "The image shows : unk ." : caption_for(item.instance.scene);
        auto positions = choose_injection_points(item.trace, cfg.m, cfg.seed + i, cfg.strategy);
        CorpusItem aug = item;
        aug.trace = inject_reaffirmation(item.trace, positions, caption, cfg.bridge_text);
        out.push_back(std::move(aug));
    }
    return out;
}

}  // namespace tvc
