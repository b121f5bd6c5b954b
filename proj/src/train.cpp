#include "tvc/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "tvc/errors.hpp"
#include "tvc/vocab.hpp"

namespace tvc {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

struct LnCache {
    Matrix xhat;
    Vector rstd;
};

Matrix ln_forward(const Matrix& x, const Vector& g, const Vector& b, LnCache& c) {
    const Eigen::Index t = x.rows(), d = x.cols();
    c.xhat.resize(t, d);
    c.rstd.resize(t);
    Matrix y(t, d);
    for (Eigen::Index i = 0; i < t; ++i) {
        double mu = x.row(i).mean();
        Eigen::RowVectorXd cc = x.row(i).array() - mu;
        double var = cc.squaredNorm() / static_cast<double>(d);
        double rstd = 1.0 / std::sqrt(var + kLnEps);
        c.xhat.row(i) = cc * rstd;
        c.rstd(i) = rstd;
        y.row(i) = (c.xhat.row(i).array() * g.transpose().array()) + b.transpose().array();
    }
    return y;
}

// Returns dX; accumulates parameter gradients.
Matrix ln_backward(const Matrix& dy, const LnCache& c, const Vector& g, Vector& dg, Vector& db) {
    const Eigen::Index t = dy.rows(), d = dy.cols();
    Matrix dx(t, d);
    for (Eigen::Index i = 0; i < t; ++i) {
        dg.array() += (dy.row(i).array() * c.xhat.row(i).array()).transpose();
        db.array() += dy.row(i).transpose().array();
        Eigen::RowVectorXd dxh = dy.row(i).array() * g.transpose().array();
        double m1 = dxh.mean();
        double m2 = (dxh.array() * c.xhat.row(i).array()).mean();
        dx.row(i) = c.rstd(i) * (dxh.array() - m1 - c.xhat.row(i).array() * m2);
    }
    return dx;
}

double gelu(double x) {
    return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x)));
}

double gelu_grad(double x) {
    double u = kGeluC * (x + 0.044715 * x * x * x);
    double th = std::tanh(u);
    double du = kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
    return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du;
}

struct LayerCache {
    Matrix x_in;
    LnCache ln1;
    Matrix h, q, k, v;
    std::vector<Matrix> probs;  // per head, t x t, strictly causal zeros above diagonal
    Matrix attn, x_mid;
    LnCache ln2;
    Matrix h2, pre, act;
};

struct ForwardCache {
    Matrix x0;
    std::vector<LayerCache> layers;
    LnCache lnf;
    Matrix f;
    Matrix logits;
};

void forward_full(const Model& model, const TaggedTokenSequence& seq, ForwardCache& fc) {
    const ModelConfig& cfg = model.cfg;
    const int t = seq.size();
    const int hd = cfg.head_dim;
    if (t < 2) throw InputError("training sequence needs at least two entries");

    fc.x0.resize(t, cfg.model_dim);
    for (int i = 0; i < t; ++i) fc.x0.row(i) = model.input_embedding(seq, i).transpose();

    Matrix x = fc.x0;
    fc.layers.assign(static_cast<size_t>(cfg.layers), LayerCache{});
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    for (int l = 0; l < cfg.layers; ++l) {
        const LayerParams& blk = model.blocks[static_cast<size_t>(l)];
        LayerCache& lc = fc.layers[static_cast<size_t>(l)];
        lc.x_in = x;
        lc.h = ln_forward(x, blk.ln1_g, blk.ln1_b, lc.ln1);
        lc.q = (lc.h * blk.wq).rowwise() + blk.bq.transpose();
        lc.k = (lc.h * blk.wk).rowwise() + blk.bk.transpose();
        lc.v = (lc.h * blk.wv).rowwise() + blk.bv.transpose();

        lc.attn.resize(t, cfg.model_dim);
        lc.probs.assign(static_cast<size_t>(cfg.heads), Matrix());
        for (int hidx = 0; hidx < cfg.heads; ++hidx) {
            auto qh = lc.q.middleCols(hidx * hd, hd);
            auto kh = lc.k.middleCols(hidx * hd, hd);
            auto vh = lc.v.middleCols(hidx * hd, hd);
            Matrix s = qh * kh.transpose() * scale;
            Matrix& p = lc.probs[static_cast<size_t>(hidx)];
            p = Matrix::Zero(t, t);
            for (int i = 0; i < t; ++i) {
                auto row = s.row(i).head(i + 1);
                Eigen::RowVectorXd e = (row.array() - row.maxCoeff()).exp();
                p.row(i).head(i + 1) = e / e.sum();
            }
            lc.attn.middleCols(hidx * hd, hd) = p * vh;
        }
        x = lc.x_in + ((lc.attn * blk.wo).rowwise() + blk.bo.transpose()).eval();
        lc.x_mid = x;

        lc.h2 = ln_forward(x, blk.ln2_g, blk.ln2_b, lc.ln2);
        lc.pre = (lc.h2 * blk.w1).rowwise() + blk.b1.transpose();
        lc.act = lc.pre.unaryExpr([](double v) { return gelu(v); });
        x = lc.x_mid + ((lc.act * blk.w2).rowwise() + blk.b2.transpose()).eval();
    }
    fc.f = ln_forward(x, model.lnf_g, model.lnf_b, fc.lnf);
    fc.logits = (fc.f * model.w_out).rowwise() + model.b_out.transpose();
}

// Mean cross-entropy over masked targets; fills dlogits when given.
double masked_ce(const TaggedTokenSequence& seq, const Matrix& logits, Matrix* dlogits) {
    std::vector<bool> mask = target_mask(seq);
    const int t = seq.size();
    int count = 0;
    for (int i = 1; i < t; ++i) count += mask[static_cast<size_t>(i)] ? 1 : 0;
    if (count == 0) throw InputError("no unmasked targets in training sequence");

    if (dlogits) *dlogits = Matrix::Zero(logits.rows(), logits.cols());
    double loss = 0.0;
    for (int i = 1; i < t; ++i) {
        if (!mask[static_cast<size_t>(i)]) continue;
        int target = seq.entries[static_cast<size_t>(i)].id;
        Eigen::RowVectorXd row = logits.row(i - 1);
        double mx = row.maxCoeff();
        Eigen::RowVectorXd e = (row.array() - mx).exp();
        double z = e.sum();
        loss += std::log(z) + mx - row(target);
        if (dlogits) {
            dlogits->row(i - 1) += e / (z * count);
            (*dlogits)(i - 1, target) -= 1.0 / count;
        }
    }
    return loss / count;
}

void backward_full(const Model& model, const TaggedTokenSequence& seq, const ForwardCache& fc,
                   const Matrix& dlogits, Model& grads) {
    const ModelConfig& cfg = model.cfg;
    const int t = seq.size();
    const int hd = cfg.head_dim;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    grads.w_out += fc.f.transpose() * dlogits;
    grads.b_out += dlogits.colwise().sum().transpose();
    Matrix df = dlogits * model.w_out.transpose();
    Matrix dx = ln_backward(df, fc.lnf, model.lnf_g, grads.lnf_g, grads.lnf_b);

    for (int l = cfg.layers - 1; l >= 0; --l) {
        const LayerParams& blk = model.blocks[static_cast<size_t>(l)];
        LayerParams& gblk = grads.blocks[static_cast<size_t>(l)];
        const LayerCache& lc = fc.layers[static_cast<size_t>(l)];

        // MLP residual branch
        Matrix dact = dx * blk.w2.transpose();
        gblk.w2 += lc.act.transpose() * dx;
        gblk.b2 += dx.colwise().sum().transpose();
        Matrix dpre = dact.array() * lc.pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
        Matrix dh2 = dpre * blk.w1.transpose();
        gblk.w1 += lc.h2.transpose() * dpre;
        gblk.b1 += dpre.colwise().sum().transpose();
        Matrix dx_mid = dx + ln_backward(dh2, lc.ln2, blk.ln2_g, gblk.ln2_g, gblk.ln2_b);

        // attention residual branch
        Matrix dattn = dx_mid * blk.wo.transpose();
        gblk.wo += lc.attn.transpose() * dx_mid;
        gblk.bo += dx_mid.colwise().sum().transpose();

        Matrix dq = Matrix::Zero(t, cfg.model_dim);
        Matrix dk = Matrix::Zero(t, cfg.model_dim);
        Matrix dv = Matrix::Zero(t, cfg.model_dim);
        for (int hidx = 0; hidx < cfg.heads; ++hidx) {
            auto qh = lc.q.middleCols(hidx * hd, hd);
            auto kh = lc.k.middleCols(hidx * hd, hd);
            auto vh = lc.v.middleCols(hidx * hd, hd);
            const Matrix& p = lc.probs[static_cast<size_t>(hidx)];
            auto da = dattn.middleCols(hidx * hd, hd);
            Matrix dp = da * vh.transpose();
            dv.middleCols(hidx * hd, hd) = p.transpose() * da;
            Matrix ds(t, t);
            for (int i = 0; i < t; ++i) {
                double dot = dp.row(i).dot(p.row(i));
                ds.row(i) = p.row(i).array() * (dp.row(i).array() - dot);
            }
            dq.middleCols(hidx * hd, hd) = ds * kh * scale;
            dk.middleCols(hidx * hd, hd) = ds.transpose() * qh * scale;
        }
        Matrix dh = dq * blk.wq.transpose() + dk * blk.wk.transpose() + dv * blk.wv.transpose();
        gblk.wq += lc.h.transpose() * dq;
        gblk.bq += dq.colwise().sum().transpose();
        gblk.wk += lc.h.transpose() * dk;
        gblk.bk += dk.colwise().sum().transpose();
        gblk.wv += lc.h.transpose() * dv;
        gblk.bv += dv.colwise().sum().transpose();
        dx = dx_mid + ln_backward(dh, lc.ln1, blk.ln1_g, gblk.ln1_g, gblk.ln1_b);
    }

    for (int i = 0; i < t; ++i) {
        const auto& e = seq.entries[static_cast<size_t>(i)];
        grads.pos_emb.row(e.pos) += dx.row(i);
        if (e.id >= 0) {
            grads.tok_emb.row(e.id) += dx.row(i);
        } else if (seq.has_patches()) {
            grads.patch_w += seq.vpatch.row(e.vrow).transpose() * dx.row(i);
            grads.patch_b += dx.row(i).transpose();
        }
    }
}

double grad_norm(Model& grads) {
    double sq = 0.0;
    for (const auto& p : grads.params()) {
        for (Eigen::Index i = 0; i < p.size; ++i) sq += p.data[i] * p.data[i];
    }
    return std::sqrt(sq);
}

void scale_grads(Model& grads, double factor) {
    for (const auto& p : grads.params()) {
        for (Eigen::Index i = 0; i < p.size; ++i) p.data[i] *= factor;
    }
}

void zero_grads(Model& grads) {
    for (const auto& p : grads.params()) std::fill(p.data, p.data + p.size, 0.0);
}

}  // namespace

TaggedTokenSequence build_training_sequence(const Model& model, const TaskInstance& inst,
                                            const ReasoningTrace& trace, bool with_image) {
    const Vocab& v = Vocab::instance();
    int ps = model.cfg.patch_size;
    if (inst.image.rows() % ps != 0 || inst.image.cols() % ps != 0) {
        throw DimensionMismatchError("image dimensions not divisible by patch size");
    }
    int npatch = static_cast<int>(inst.image.rows() / ps * (inst.image.cols() / ps));

    TaggedTokenSequence seq;
    if (with_image) seq = embed_image(inst.image, model);
    std::vector<int> qids = v.encode(inst.question);
    if (npatch + static_cast<int>(qids.size()) > kTraceStartPos - 1) {
        throw SequenceOverflowError("question does not fit before the reasoning region");
    }
    seq.append_text_at(qids, npatch, Seg::Text);
    // The reasoning region is anchored at a fixed absolute position so the
    // k-th reasoning token occupies the same position in every instance,
    // independent of question length.
    seq.append_text_at({v.sep()}, kTraceStartPos - 1, Seg::Text);
    std::vector<int> body = v.encode(trace.full_text());
    body.push_back(v.eos());
    seq.append_text_at(body, kTraceStartPos, Seg::Text);
    seq.check_invariants();
    return seq;
}

TaggedTokenSequence build_prompt(const Model& model, const TaskInstance& inst, bool with_image) {
    const Vocab& v = Vocab::instance();
    int ps = model.cfg.patch_size;
    int npatch = static_cast<int>(inst.image.rows() / ps * (inst.image.cols() / ps));
    TaggedTokenSequence seq;
    if (with_image) seq = embed_image(inst.image, model);
    std::vector<int> qids = v.encode(inst.question);
    if (npatch + static_cast<int>(qids.size()) > kTraceStartPos - 1) {
        throw SequenceOverflowError("question does not fit before the reasoning region");
    }
    seq.append_text_at(qids, npatch, Seg::Text);
    seq.append_text_at({v.sep()}, kTraceStartPos - 1, Seg::Text);
    return seq;
}

std::vector<bool> target_mask(const TaggedTokenSequence& seq) {
    std::vector<bool> mask(static_cast<size_t>(seq.size()), false);
    for (int i = 1; i < seq.size(); ++i) {
        mask[static_cast<size_t>(i)] =
            seq.tag_of(i) == Seg::Text && seq.entries[static_cast<size_t>(i)].id >= 0;
    }
    return mask;
}

double sequence_loss(const Model& model, const TaggedTokenSequence& seq) {
    ForwardCache fc;
    forward_full(model, seq, fc);
    return masked_ce(seq, fc.logits, nullptr);
}

Matrix full_logits(const Model& model, const TaggedTokenSequence& seq) {
    ForwardCache fc;
    forward_full(model, seq, fc);
    return fc.logits;
}

Model zeros_like(const Model& model) {
    Model z = model;
    zero_grads(z);
    return z;
}

double loss_and_grad(const Model& model, const TaggedTokenSequence& seq, Model& grads) {
    ForwardCache fc;
    forward_full(model, seq, fc);
    Matrix dlogits;
    double loss = masked_ce(seq, fc.logits, &dlogits);
    backward_full(model, seq, fc, dlogits, grads);
    return loss;
}

TrainStats train(Model& model, const std::vector<CorpusItem>& corpus, const TrainConfig& cfg) {
    if (corpus.empty()) throw InputError("empty training corpus");
    if (cfg.epochs < 1 || cfg.lr < 0.0) throw ConfigError("bad training configuration");

    Model grads = zeros_like(model);
    auto prefs = model.params();
    auto grefs = grads.params();
    const Eigen::Index nparam = model.param_count();
    std::vector<double> m(static_cast<size_t>(nparam), 0.0);
    std::vector<double> v(static_cast<size_t>(nparam), 0.0);

    std::vector<size_t> order(corpus.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(cfg.seed);

    const long total = static_cast<long>(cfg.epochs) * static_cast<long>(corpus.size());
    TrainStats stats;
    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (size_t idx : order) {
            const CorpusItem& item = corpus[idx];
            TaggedTokenSequence seq =
                build_training_sequence(model, item.instance, item.trace, !item.text_only);
            zero_grads(grads);
            double loss = loss_and_grad(model, seq, grads);
            if (!std::isfinite(loss)) throw DivergenceError("non-finite training loss");
            epoch_loss += loss;
            stats.final_loss = loss;

            if (cfg.clip > 0.0) {
                double norm = grad_norm(grads);
                if (norm > cfg.clip) scale_grads(grads, cfg.clip / norm);
            }
            double lr = cfg.lr;
            if (cfg.cosine && total > 1) {
                lr *= 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(step) /
                                            static_cast<double>(total - 1)));
            }
            ++step;
            double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            size_t flat = 0;
            for (size_t pi = 0; pi < prefs.size(); ++pi) {
                double* w = prefs[pi].data;
                const double* g = grefs[pi].data;
                for (Eigen::Index i = 0; i < prefs[pi].size; ++i, ++flat) {
                    m[flat] = cfg.beta1 * m[flat] + (1.0 - cfg.beta1) * g[i];
                    v[flat] = cfg.beta2 * v[flat] + (1.0 - cfg.beta2) * g[i] * g[i];
                    w[i] -= lr * (m[flat] / bc1) / (std::sqrt(v[flat] / bc2) + cfg.adam_eps);
                }
            }
            if (cfg.log_every > 0 && step % cfg.log_every == 0) {
                std::fprintf(stderr, "step %ld/%ld loss %.4f\n", step, total, loss);
            }
        }
        stats.last_epoch_loss = epoch_loss / static_cast<double>(corpus.size());
    }
    stats.steps = static_cast<int>(step);
    return stats;
}

double gradient_check(Model& model, const TaggedTokenSequence& seq, int num_params,
                      double fd_eps, uint64_t seed) {
    Model grads = zeros_like(model);
    loss_and_grad(model, seq, grads);
    auto prefs = model.params();
    auto grefs = grads.params();
    const Eigen::Index nparam = model.param_count();

    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (int n = 0; n < num_params; ++n) {
        Eigen::Index flat = static_cast<Eigen::Index>(rng() % static_cast<uint64_t>(nparam));
        size_t pi = 0;
        Eigen::Index off = flat;
        while (off >= prefs[pi].size) {
            off -= prefs[pi].size;
            ++pi;
        }
        double* w = prefs[pi].data + off;
        double analytic = grefs[pi].data[off];
        double saved = *w;
        *w = saved + fd_eps;
        double lp = sequence_loss(model, seq);
        *w = saved - fd_eps;
        double lm = sequence_loss(model, seq);
        *w = saved;
        double fd = (lp - lm) / (2.0 * fd_eps);
        double rel = std::abs(fd - analytic) / std::max(std::abs(fd) + std::abs(analytic), 1e-8);
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace tvc
