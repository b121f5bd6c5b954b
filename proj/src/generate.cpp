#include "tvc/generate.hpp"

#include <cmath>
#include <sstream>

#include "tvc/dvr.hpp"
#include "tvc/errors.hpp"
#include "tvc/vocab.hpp"

namespace tvc {

GenSession::GenSession(const Model& m, const TaggedTokenSequence& prompt,
                       const GenerationParams& p, AttentionObserver* obs)
    : model(m), params(p), seq(prompt), cache(make_cache(m)), rng(p.seed), observer(obs) {
    if (prompt.empty()) throw InputError("generation prompt is empty");
    seq.check_invariants();
    for (int i = 0; i < seq.size(); ++i) {
        last_logits = forward_step(model, cache, model.input_content(seq, i),
                                   seq.entries[static_cast<size_t>(i)].pos, seq.tag_of(i), observer);
    }
}

GenSession::GenSession(const Model& m, TaggedTokenSequence s, LayeredKVCache c, Vector logits,
                       const GenerationParams& p, AttentionObserver* obs)
    : model(m),
      params(p),
      seq(std::move(s)),
      cache(std::move(c)),
      rng(p.seed),
      observer(obs),
      last_logits(std::move(logits)) {
    if (last_logits.size() != model.cfg.vocab_size) {
        throw DimensionMismatchError("resume logits have wrong vocabulary size");
    }
}

int GenSession::stop_token() const {
    return params.stop_token >= 0 ? params.stop_token : Vocab::instance().eos();
}

int GenSession::sample_token() {
    const Eigen::Index n = last_logits.size();
    if (params.temperature <= 0.0) {
        Eigen::Index best = 0;
        last_logits.maxCoeff(&best);
        return static_cast<int>(best);
    }
    Vector scaled = last_logits / params.temperature;
    scaled.array() -= scaled.maxCoeff();
    Vector probs = scaled.array().exp();
    probs /= probs.sum();
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        acc += probs(i);
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(n - 1);
}

int GenSession::sample_and_feed() {
    int tok = sample_token();
    feed_text({tok});
    return tok;
}

void GenSession::feed_text(const std::vector<int>& ids, Seg tag) {
    int first = seq.size();
    seq.append_text(ids, tag);
    for (int i = first; i < seq.size(); ++i) {
        if (seq.entries[static_cast<size_t>(i)].pos >= model.cfg.max_seq) {
            throw SequenceOverflowError("position exceeds max_seq during generation");
        }
        last_logits = forward_step(model, cache, model.input_content(seq, i),
                                   seq.entries[static_cast<size_t>(i)].pos, tag, observer);
    }
}

void GenSession::feed_visual(const Matrix& content, int rows, int cols, Seg tag) {
    int first = seq.size();
    seq.append_visual(content, Matrix(), seq.next_pos(), rows, cols);
    seq.segments.back().tag = tag;
    for (int i = first; i < seq.size(); ++i) {
        if (seq.entries[static_cast<size_t>(i)].pos >= model.cfg.max_seq) {
            throw SequenceOverflowError("position exceeds max_seq during generation");
        }
        last_logits = forward_step(model, cache, model.input_content(seq, i),
                                   seq.entries[static_cast<size_t>(i)].pos, tag, observer);
    }
}

std::string GenSession::rng_state() const {
    std::ostringstream out;
    out << rng;
    return out.str();
}

void GenSession::set_rng_state(const std::string& state) {
    std::istringstream in(state);
    in >> rng;
    if (in.fail()) throw InputError("malformed rng state");
}

ReasoningTrace trace_from_text(const std::string& text, Provenance provenance) {
    ReasoningTrace trace;
    trace.provenance = provenance;
    trace.steps = split_steps(text);
    trace.markers = find_reflection_points(trace, ReflectionLexicon::defaults());
    trace.answer = extract_answer(text).value_or("");
    return trace;
}

GenerationOutput run_session(GenSession& session) {
    const GenerationParams& params = session.params;
    const Vocab& v = Vocab::instance();
    GenerationOutput out;
    out.truncated = true;
    for (int i = 0; i < params.max_new_tokens; ++i) {
        // context exhausted: end the run truncated rather than overflow
        if (session.seq.next_pos() >= session.model.cfg.max_seq) break;
        int tok = session.sample_and_feed();
        if (tok == session.stop_token()) {
            out.truncated = false;
            break;
        }
        out.tokens.push_back(tok);
    }
    out.text = v.decode(out.tokens);
    out.sequence = session.seq;
    out.trace = trace_from_text(out.text);
    return out;
}

GenerationOutput generate(const Model& model, const TaggedTokenSequence& prompt,
                          const GenerationParams& params, AttentionObserver* observer) {
    GenSession session(model, prompt, params, observer);
    return run_session(session);
}

}  // namespace tvc
