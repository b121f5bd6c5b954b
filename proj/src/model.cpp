#include "tvc/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "tvc/errors.hpp"
#include "tvc/vocab.hpp"

namespace tvc {

namespace {

constexpr char kModelMagic[16] = {'T', 'V', 'C', 'M', 'O', 'D', 'E', 'L',
                                  0,   0,   0,   0,   0,   0,   0,   1};
constexpr double kLnEps = 1e-5;

Vector layer_norm(const Vector& x, const Vector& g, const Vector& b) {
    double mu = x.mean();
    Vector c = x.array() - mu;
    double var = c.squaredNorm() / static_cast<double>(x.size());
    double rstd = 1.0 / std::sqrt(var + kLnEps);
    return (c.array() * rstd * g.array() + b.array()).matrix();
}

double gelu(double x) {
    constexpr double kSqrt2OverPi = 0.7978845608028654;
    return 0.5 * x * (1.0 + std::tanh(kSqrt2OverPi * (x + 0.044715 * x * x * x)));
}

}  // namespace

void ModelConfig::validate() const {
    if (layers < 1) throw ConfigError("layers must be >= 1");
    if (heads < 1 || model_dim % heads != 0) throw ConfigError("model_dim must divide by heads");
    if (head_dim * heads != model_dim) throw ConfigError("model_dim != heads * head_dim");
    if (patch_size < 1) throw ConfigError("patch_size must be >= 1");
    if (max_seq < 1) throw ConfigError("max_seq must be >= 1");
    if (vocab_size < 1) throw ConfigError("vocab_size must be >= 1");
    if (vocab_size > 512) throw ConfigError("vocab_size must be <= 512");
}

std::vector<Model::ParamRef> Model::params() {
    std::vector<ParamRef> out;
    auto add = [&](const std::string& name, Matrix& m) {
        out.push_back(ParamRef{name, m.data(), m.size()});
    };
    auto addv = [&](const std::string& name, Vector& v) {
        out.push_back(ParamRef{name, v.data(), v.size()});
    };
    add("tok_emb", tok_emb);
    add("pos_emb", pos_emb);
    add("patch_w", patch_w);
    addv("patch_b", patch_b);
    for (size_t l = 0; l < blocks.size(); ++l) {
        std::string p = "block" + std::to_string(l) + ".";
        LayerParams& blk = blocks[l];
        addv(p + "ln1_g", blk.ln1_g);
        addv(p + "ln1_b", blk.ln1_b);
        add(p + "wq", blk.wq);
        addv(p + "bq", blk.bq);
        add(p + "wk", blk.wk);
        addv(p + "bk", blk.bk);
        add(p + "wv", blk.wv);
        addv(p + "bv", blk.bv);
        add(p + "wo", blk.wo);
        addv(p + "bo", blk.bo);
        addv(p + "ln2_g", blk.ln2_g);
        addv(p + "ln2_b", blk.ln2_b);
        add(p + "w1", blk.w1);
        addv(p + "b1", blk.b1);
        add(p + "w2", blk.w2);
        addv(p + "b2", blk.b2);
    }
    addv("lnf_g", lnf_g);
    addv("lnf_b", lnf_b);
    add("w_out", w_out);
    addv("b_out", b_out);
    return out;
}

Eigen::Index Model::param_count() const {
    Eigen::Index n = 0;
    for (const auto& p : const_cast<Model*>(this)->params()) n += p.size;
    return n;
}

Model Model::init(const ModelConfig& cfg_in) {
    ModelConfig cfg = cfg_in;
    if (cfg.vocab_size == 0) cfg.vocab_size = Vocab::instance().size();
    cfg.validate();

    Model m;
    m.cfg = cfg;
    const int d = cfg.model_dim;
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> dist(0.0, 0.02);
    double resid_scale = 1.0 / std::sqrt(2.0 * cfg.layers);
    auto fill = [&](Matrix& mat, Eigen::Index r, Eigen::Index c, double scale) {
        mat.resize(r, c);
        for (Eigen::Index j = 0; j < c; ++j) {
            for (Eigen::Index i = 0; i < r; ++i) mat(i, j) = dist(rng) * scale;
        }
    };
    m.tok_emb.resize(cfg.vocab_size, d);
    fill(m.tok_emb, cfg.vocab_size, d, 1.0);
    fill(m.pos_emb, cfg.max_seq, d, 1.0);
    fill(m.patch_w, cfg.patch_pixels(), d, 1.0);
    m.patch_b = Vector::Zero(d);
    m.blocks.resize(static_cast<size_t>(cfg.layers));
    for (LayerParams& blk : m.blocks) {
        blk.ln1_g = Vector::Ones(d);
        blk.ln1_b = Vector::Zero(d);
        fill(blk.wq, d, d, 1.0);
        fill(blk.wk, d, d, 1.0);
        fill(blk.wv, d, d, 1.0);
        fill(blk.wo, d, d, resid_scale);
        blk.bq = Vector::Zero(d);
        blk.bk = Vector::Zero(d);
        blk.bv = Vector::Zero(d);
        blk.bo = Vector::Zero(d);
        blk.ln2_g = Vector::Ones(d);
        blk.ln2_b = Vector::Zero(d);
        fill(blk.w1, d, cfg.mlp_dim(), 1.0);
        blk.b1 = Vector::Zero(cfg.mlp_dim());
        fill(blk.w2, cfg.mlp_dim(), d, resid_scale);
        blk.b2 = Vector::Zero(d);
    }
    m.lnf_g = Vector::Ones(d);
    m.lnf_b = Vector::Zero(d);
    fill(m.w_out, d, cfg.vocab_size, 1.0);
    m.b_out = Vector::Zero(cfg.vocab_size);
    return m;
}

void Model::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path);
    out.write(kModelMagic, sizeof(kModelMagic));
    int32_t ints[7] = {cfg.layers, cfg.heads,      cfg.model_dim, cfg.head_dim,
                       cfg.vocab_size, cfg.patch_size, cfg.max_seq};
    out.write(reinterpret_cast<const char*>(ints), sizeof(ints));
    out.write(reinterpret_cast<const char*>(&cfg.seed), 8);
    Model copy = *this;
    uint64_t count = static_cast<uint64_t>(copy.param_count());
    out.write(reinterpret_cast<const char*>(&count), 8);
    for (const auto& p : copy.params()) {
        for (Eigen::Index i = 0; i < p.size; ++i) {
            float f = static_cast<float>(p.data[i]);
            out.write(reinterpret_cast<const char*>(&f), 4);
        }
    }
    if (!out) throw CheckpointError("checkpoint write failed: " + path);
}

Model Model::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw CheckpointError("cannot open checkpoint: " + path);
    auto file_size = static_cast<uint64_t>(in.tellg());
    in.seekg(0);
    char magic[16];
    in.read(magic, 16);
    if (!in || std::memcmp(magic, kModelMagic, 16) != 0) {
        throw CheckpointError("bad checkpoint magic: " + path);
    }
    int32_t ints[7];
    in.read(reinterpret_cast<char*>(ints), sizeof(ints));
    ModelConfig cfg;
    cfg.layers = ints[0];
    cfg.heads = ints[1];
    cfg.model_dim = ints[2];
    cfg.head_dim = ints[3];
    cfg.vocab_size = ints[4];
    cfg.patch_size = ints[5];
    cfg.max_seq = ints[6];
    in.read(reinterpret_cast<char*>(&cfg.seed), 8);
    uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), 8);
    if (!in) throw CheckpointError("checkpoint header truncated: " + path);
    cfg.validate();
    Model m = Model::init(cfg);
    if (count != static_cast<uint64_t>(m.param_count())) {
        throw CheckpointError("checkpoint parameter count mismatch: " + path);
    }
    uint64_t expected = 16 + sizeof(ints) + 8 + 8 + 4 * count;
    if (file_size != expected) throw CheckpointError("checkpoint length mismatch: " + path);
    for (const auto& p : m.params()) {
        for (Eigen::Index i = 0; i < p.size; ++i) {
            float f = 0;
            in.read(reinterpret_cast<char*>(&f), 4);
            p.data[i] = static_cast<double>(f);
        }
    }
    if (!in) throw CheckpointError("checkpoint truncated: " + path);
    return m;
}

Vector Model::input_content(const TaggedTokenSequence& seq, int entry_index) const {
    const auto& e = seq.entries[static_cast<size_t>(entry_index)];
    if (e.id >= 0) return tok_emb.row(e.id).transpose();
    if (seq.has_patches()) {
        return patch_w.transpose() * seq.vpatch.row(e.vrow).transpose() + patch_b;
    }
    return seq.vembed.row(e.vrow).transpose();
}

Vector Model::input_embedding(const TaggedTokenSequence& seq, int entry_index) const {
    const auto& e = seq.entries[static_cast<size_t>(entry_index)];
    if (e.pos >= cfg.max_seq) throw SequenceOverflowError("position beyond max_seq");
    return input_content(seq, entry_index) + pos_emb.row(e.pos).transpose();
}

Matrix split_patches(const Matrix& image, int patch_size) {
    if (image.rows() % patch_size != 0 || image.cols() % patch_size != 0) {
        throw DimensionMismatchError("image dimensions not divisible by patch size");
    }
    Eigen::Index gr = image.rows() / patch_size;
    Eigen::Index gc = image.cols() / patch_size;
    Matrix patches(gr * gc, static_cast<Eigen::Index>(patch_size) * patch_size);
    for (Eigen::Index r = 0; r < gr; ++r) {
        for (Eigen::Index c = 0; c < gc; ++c) {
            Eigen::Index row = r * gc + c;
            for (int i = 0; i < patch_size; ++i) {
                for (int j = 0; j < patch_size; ++j) {
                    patches(row, static_cast<Eigen::Index>(i) * patch_size + j) =
                        image(r * patch_size + i, c * patch_size + j);
                }
            }
        }
    }
    return patches;
}

Matrix patch_embeddings(const Model& model, const Matrix& patches) {
    return (patches * model.patch_w).rowwise() + model.patch_b.transpose();
}

TaggedTokenSequence embed_image(const Matrix& image, const Model& model, int start_pos) {
    Matrix patches = split_patches(image, model.cfg.patch_size);
    TaggedTokenSequence seq;
    int rows = static_cast<int>(image.rows()) / model.cfg.patch_size;
    int cols = static_cast<int>(image.cols()) / model.cfg.patch_size;
    seq.append_visual(patch_embeddings(model, patches), patches, start_pos, rows, cols);
    return seq;
}

LayeredKVCache make_cache(const Model& model) {
    return LayeredKVCache(model.cfg.layers, model.cfg.model_dim);
}

Vector forward_step(const Model& model, LayeredKVCache& cache, const Vector& content,
                    int pos, Seg tag, AttentionObserver* observer) {
    const ModelConfig& cfg = model.cfg;
    if (cache.length() >= cfg.max_seq) throw SequenceOverflowError("cache full: max_seq reached");
    if (pos < 0 || pos >= cfg.max_seq) throw SequenceOverflowError("position beyond max_seq");

    const int hd = cfg.head_dim;
    Vector x = content + model.pos_emb.row(pos).transpose();
    cache.push_entry(pos, tag);
    const int len = cache.length();

    for (int l = 0; l < cfg.layers; ++l) {
        const LayerParams& blk = model.blocks[static_cast<size_t>(l)];
        Vector h = layer_norm(x, blk.ln1_g, blk.ln1_b);
        Vector q = blk.wq.transpose() * h + blk.bq;
        Vector k = blk.wk.transpose() * h + blk.bk;
        Vector v = blk.wv.transpose() * h + blk.bv;
        cache.set_kv(l, k, v);

        auto keys = cache.key_rows(l);
        auto vals = cache.value_rows(l);
        Vector attn(cfg.model_dim);
        Vector avg_row = observer ? Vector::Zero(len).eval() : Vector();
        for (int hidx = 0; hidx < cfg.heads; ++hidx) {
            auto kb = keys.middleCols(hidx * hd, hd);
            auto vb = vals.middleCols(hidx * hd, hd);
            Vector scores = kb * q.segment(hidx * hd, hd) / std::sqrt(static_cast<double>(hd));
            Vector probs = (scores.array() - scores.maxCoeff()).exp().matrix();
            probs /= probs.sum();
            attn.segment(hidx * hd, hd) = vb.transpose() * probs;
            if (observer) avg_row += probs / cfg.heads;
        }
        if (observer) observer->on_attention_row(l, avg_row, cache);
        x += blk.wo.transpose() * attn + blk.bo;

        Vector h2 = layer_norm(x, blk.ln2_g, blk.ln2_b);
        Vector pre = blk.w1.transpose() * h2 + blk.b1;
        Vector act = pre.unaryExpr([](double t) { return gelu(t); });
        x += blk.w2.transpose() * act + blk.b2;
    }
    Vector f = layer_norm(x, model.lnf_g, model.lnf_b);
    return model.w_out.transpose() * f + model.b_out;
}

LayeredKVCache rebuild(const Model& model, const TaggedTokenSequence& seq,
                       AttentionObserver* observer, Vector* last_logits) {
    LayeredKVCache cache = make_cache(model);
    for (int i = 0; i < seq.size(); ++i) {
        Vector logits = forward_step(model, cache, model.input_content(seq, i),
                                     seq.entries[static_cast<size_t>(i)].pos,
                                     seq.tag_of(i), observer);
        if (last_logits && i == seq.size() - 1) *last_logits = logits;
    }
    return cache;
}

}  // namespace tvc
