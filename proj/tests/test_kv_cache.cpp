#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <random>

#include "tvc/errors.hpp"
#include "tvc/generate.hpp"
#include "tvc/kv_cache.hpp"
#include "tvc/model.hpp"
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

TaggedTokenSequence random_text(int n, uint64_t seed, int vocab) {
    std::mt19937_64 rng(seed);
    std::vector<int> ids;
    for (int i = 0; i < n; ++i) ids.push_back(static_cast<int>(rng() % static_cast<uint64_t>(vocab)));
    TaggedTokenSequence seq;
    seq.append_text(ids, Seg::Text);
    return seq;
}

}  // namespace

TEST_CASE("truncate identity and annihilation") {
    Model m = small_model();
    TaggedTokenSequence seq = random_text(12, 1, m.cfg.vocab_size);
    LayeredKVCache c = rebuild(m, seq);
    LayeredKVCache full = c;
    c.truncate(c.length());
    CHECK(c.equals(full));
    c.truncate(0);
    CHECK(c.length() == 0);
    for (int l = 0; l < c.layer_count(); ++l) CHECK(c.key_rows(l).rows() == 0);
    CHECK_THROWS_AS(full.truncate(full.length() + 1), OutOfRangeError);
}

TEST_CASE("prefix property: truncate(rebuild(t), p) == rebuild(t[..p]) bit-exact") {
    Model m = small_model();
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 4 + static_cast<int>(rng() % 20);
        TaggedTokenSequence seq = random_text(n, rng(), m.cfg.vocab_size);
        int p = static_cast<int>(rng() % static_cast<uint64_t>(n + 1));
        LayeredKVCache whole = rebuild(m, seq);
        whole.truncate(p);
        LayeredKVCache part = rebuild(m, seq.prefix(p));
        CHECK(whole.equals(part));
    }
}

TEST_CASE("excise is a no-op without matching entries and deletes by tag") {
    Model m = small_model();
    TaggedTokenSequence text = random_text(20, 4, m.cfg.vocab_size);
    LayeredKVCache c = rebuild(m, text);
    LayeredKVCache before = c;
    c.excise_segment(Seg::Image);
    CHECK(c.equals(before));

    Matrix image = Matrix::Random(16, 16);
    TaggedTokenSequence seq = embed_image(image, m);
    std::vector<int> ids;
    for (int i = 0; i < 20; ++i) ids.push_back(i % m.cfg.vocab_size);
    seq.append_text(ids, Seg::Text);
    LayeredKVCache mixed = rebuild(m, seq);
    CHECK(mixed.length() == 36);
    mixed.excise_segment(Seg::Image);
    CHECK(mixed.length() == 20);
    for (const auto& t : mixed.tags) CHECK(t.tag == Seg::Text);
    // survivors keep their original positions
    CHECK(mixed.tags.front().pos == 16);
}

TEST_CASE("excise equals rebuild-without-image on 1 layer, diverges on 4") {
    const Vocab& v = Vocab::instance();
    for (int layers : {1, 4}) {
        Model m = small_model(layers, 11);
        Matrix image = Matrix::Random(16, 16);
        TaggedTokenSequence seq = embed_image(image, m);
        seq.append_text(v.encode("How many red objects are there ?"), Seg::Text);

        LayeredKVCache ca = rebuild(m, seq);
        ca.excise_segment(Seg::Image);
        Vector content = m.tok_emb.row(v.sep()).transpose();
        Vector la = forward_step(m, ca, content, seq.next_pos(), Seg::Text);

        TaggedTokenSequence noimg = seq.without(Seg::Image);
        LayeredKVCache cb = rebuild(m, noimg);
        Vector lb = forward_step(m, cb, content, seq.next_pos(), Seg::Text);

        double diff = (la - lb).cwiseAbs().maxCoeff();
        if (layers == 1) {
            CHECK(diff < 1e-6);
        } else {
            CHECK(diff > 1e-6);
        }
    }
}

TEST_CASE("rebuild of empty sequence is empty") {
    Model m = small_model();
    LayeredKVCache c = rebuild(m, TaggedTokenSequence{});
    CHECK(c.length() == 0);
}

TEST_CASE("rebuild then greedy-continue equals one-shot generate") {
    Model m = small_model();
    TaggedTokenSequence prompt = random_text(8, 21, m.cfg.vocab_size);
    GenerationParams params;
    params.max_new_tokens = 12;
    GenerationOutput direct = generate(m, prompt, params);

    Vector logits;
    LayeredKVCache cache = rebuild(m, prompt, nullptr, &logits);
    GenSession session(m, prompt, cache, logits, params);
    GenerationOutput resumed = run_session(session);
    CHECK(direct.tokens == resumed.tokens);
}

TEST_CASE("snapshot survives mutation of the original") {
    Model m = small_model();
    TaggedTokenSequence seq = random_text(10, 5, m.cfg.vocab_size);
    LayeredKVCache c = rebuild(m, seq);
    CacheSnapshot snap = snapshot(c);
    LayeredKVCache copy = restore(snap);
    c.truncate(3);
    CHECK_FALSE(c.equals(copy));
    LayeredKVCache again = restore(snap);
    CHECK(copy.equals(again));
    CHECK(copy.length() == 10);
}

TEST_CASE("branched restores are independent") {
    Model m = small_model();
    TaggedTokenSequence seq = random_text(6, 6, m.cfg.vocab_size);
    LayeredKVCache c = rebuild(m, seq);
    CacheSnapshot snap = snapshot(c);
    std::vector<LayeredKVCache> branches;
    for (int b = 0; b < 8; ++b) {
        LayeredKVCache br = restore(snap);
        Vector content = m.tok_emb.row(b % m.cfg.vocab_size).transpose();
        forward_step(m, br, content, seq.next_pos(), Seg::Text);
        branches.push_back(std::move(br));
    }
    for (int a = 0; a < 8; ++a) {
        for (int b = a + 1; b < 8; ++b) {
            // distinct appended tokens must leave distinct final rows
            CHECK_FALSE(branches[static_cast<size_t>(a)].equals(branches[static_cast<size_t>(b)]));
        }
        CHECK(branches[static_cast<size_t>(a)].length() == 7);
    }
}

TEST_CASE("snapshot preserves RNG state for sampled replay") {
    Model m = small_model();
    TaggedTokenSequence prompt = random_text(8, 31, m.cfg.vocab_size);
    GenerationParams params;
    params.temperature = 1.0;
    params.seed = 99;
    params.max_new_tokens = 10;
    GenSession sess(m, prompt, params);
    for (int i = 0; i < 3; ++i) sess.sample_and_feed();

    CacheSnapshot snap = snapshot(sess.cache, sess.rng_state());
    TaggedTokenSequence mid_seq = sess.seq;
    Vector mid_logits = sess.last_logits;
    std::vector<int> expect;
    for (int i = 0; i < 5; ++i) expect.push_back(sess.sample_and_feed());

    GenSession replay(m, mid_seq, restore(snap), mid_logits, params);
    replay.set_rng_state(snap.rng_state);
    std::vector<int> got;
    for (int i = 0; i < 5; ++i) got.push_back(replay.sample_and_feed());
    CHECK(expect == got);
}

TEST_CASE("snapshot file round-trip is bit-exact") {
    Model m = small_model();
    TaggedTokenSequence seq = random_text(9, 77, m.cfg.vocab_size);
    LayeredKVCache c = rebuild(m, seq);
    CacheSnapshot snap = snapshot(c, "12345 67");
    const std::string path = "snapshot_roundtrip.bin";
    snap.save(path);
    CacheSnapshot loaded = CacheSnapshot::load(path);
    std::remove(path.c_str());
    CHECK(loaded.cache.equals(c));
    CHECK(loaded.rng_state == snap.rng_state);
}
