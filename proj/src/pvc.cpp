#include "tvc/pvc.hpp"

#include <algorithm>
#include <cmath>

#include "tvc/errors.hpp"
#include "tvc/vocab.hpp"

namespace tvc {

Matrix compress_visual_tokens(const Matrix& content, int grid_rows, int grid_cols, int pool) {
    if (pool < 1) throw ConfigError("pool must be >= 1");
    if (grid_rows < 1 || grid_cols < 1 ||
        content.rows() != static_cast<Eigen::Index>(grid_rows) * grid_cols) {
        throw DimensionMismatchError("visual token count disagrees with the grid");
    }
    int out_rows = (grid_rows + pool - 1) / pool;
    int out_cols = (grid_cols + pool - 1) / pool;
    Matrix pooled = Matrix::Zero(static_cast<Eigen::Index>(out_rows) * out_cols, content.cols());
    for (int br = 0; br < out_rows; ++br) {
        for (int bc = 0; bc < out_cols; ++bc) {
            int r1 = std::min(grid_rows, (br + 1) * pool);
            int c1 = std::min(grid_cols, (bc + 1) * pool);
            int count = 0;
            auto acc = pooled.row(static_cast<Eigen::Index>(br) * out_cols + bc);
            for (int r = br * pool; r < r1; ++r) {
                for (int c = bc * pool; c < c1; ++c) {
                    acc += content.row(static_cast<Eigen::Index>(r) * grid_cols + c);
                    ++count;
                }
            }
            acc /= static_cast<double>(count);
        }
    }
    return pooled;
}

void PvcConfig::validate() const {
    if (m < 0) throw ConfigError("reactivation count m must be >= 0");
    if (pool < 1) throw ConfigError("pool must be >= 1");
    if (strategy == ReactivationStrategy::Midpoint && m > 1) {
        throw ConfigError("midpoint strategy supports at most one reactivation");
    }
    if (strategy == ReactivationStrategy::FixedFractions) {
        if (static_cast<int>(fractions.size()) != m) {
            throw ConfigError("fixed fractions must provide exactly m offsets");
        }
        for (double f : fractions) {
            if (f < 0.0 || f >= 1.0) throw ConfigError("fractions must lie in [0, 1)");
        }
    }
    if (bridge_text.empty()) throw ConfigError("bridge text must be nonempty");
}

std::vector<int> plan_reactivations(int horizon, const PvcConfig& cfg) {
    cfg.validate();
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (cfg.m == 0 || cfg.strategy == ReactivationStrategy::OnReflectionMarker) return {};
    std::vector<int> offsets;
    if (cfg.strategy == ReactivationStrategy::Midpoint) {
        offsets.push_back(horizon / 2);
    } else {
        for (double f : cfg.fractions) offsets.push_back(static_cast<int>(std::floor(f * horizon)));
        std::sort(offsets.begin(), offsets.end());
        offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());
    }
    return offsets;
}

InjectionRecord reactivate(GenSession& session, const Matrix& image_content, int grid_rows,
                           int grid_cols, const PvcConfig& cfg, int token_offset) {
    if (cfg.excise_original) session.cache.excise_segment(Seg::Image);
    Matrix pooled = compress_visual_tokens(image_content, grid_rows, grid_cols, cfg.pool);
    int out_rows = (grid_rows + cfg.pool - 1) / cfg.pool;
    int out_cols = (grid_cols + cfg.pool - 1) / cfg.pool;

    InjectionRecord rec;
    rec.token_offset = token_offset;
    rec.pool = cfg.pool;
    std::vector<int> bridge_ids = Vocab::instance().encode(cfg.bridge_text);
    rec.bridge_begin = session.seq.size();
    rec.bridge_len = static_cast<int>(bridge_ids.size());
    session.feed_text(bridge_ids, Seg::Bridge);
    rec.image_begin = session.seq.size();
    rec.image_len = static_cast<int>(pooled.rows());
    session.feed_visual(pooled, out_rows, out_cols, Seg::Image);
    return rec;
}

PvcOutput generate_with_pvc(const Model& model, const TaggedTokenSequence& prompt,
                            const GenerationParams& gen_params, const PvcConfig& cfg,
                            AttentionObserver* observer) {
    cfg.validate();
    Matrix image_content;
    int grid_rows = prompt.grid_rows, grid_cols = prompt.grid_cols;
    if (cfg.m > 0) {
        std::vector<Eigen::Index> rows;
        for (const auto& e : prompt.entries) {
            if (e.id < 0) rows.push_back(e.vrow);
        }
        if (rows.empty()) throw InputError("prompt carries no visual tokens to reactivate");
        image_content.resize(static_cast<Eigen::Index>(rows.size()), prompt.vembed.cols());
        for (size_t i = 0; i < rows.size(); ++i) {
            image_content.row(static_cast<Eigen::Index>(i)) = prompt.vembed.row(rows[i]);
        }
    }

    GenSession session(model, prompt, gen_params, observer);
    std::vector<int> planned = plan_reactivations(gen_params.max_new_tokens, cfg);
    const ReflectionLexicon& lexicon = ReflectionLexicon::defaults();

    PvcOutput out;
    out.gen.truncated = true;
    int injections_done = 0;
    std::string cur_step;
    for (int t = 0; t < gen_params.max_new_tokens; ++t) {
        if (injections_done < cfg.m &&
            std::find(planned.begin(), planned.end(), t) != planned.end()) {
            out.injections.push_back(
                reactivate(session, image_content, grid_rows, grid_cols, cfg, t));
            ++injections_done;
        }
        int tok = session.sample_and_feed();
        if (tok == session.stop_token()) {
            out.gen.truncated = false;
            break;
        }
        out.gen.tokens.push_back(tok);

        if (cfg.strategy == ReactivationStrategy::OnReflectionMarker && injections_done < cfg.m) {
            const std::string& word = Vocab::instance().word(tok);
            if (!cur_step.empty()) cur_step += ' ';
            cur_step += word;
            if (word == "." || word == "!" || word == "?") {
                ReasoningTrace probe;
                probe.steps.push_back(cur_step);
                if (!find_reflection_points(probe, lexicon).empty()) {
                    out.injections.push_back(
                        reactivate(session, image_content, grid_rows, grid_cols, cfg, t + 1));
                    ++injections_done;
                }
                cur_step.clear();
            }
        }
    }
    out.gen.text = Vocab::instance().decode(out.gen.tokens);
    out.gen.sequence = session.seq;
    out.gen.trace = trace_from_text(out.gen.text, out.injections.empty() ? Provenance::Base
                                                                         : Provenance::Pvc);
    return out;
}

}  // namespace tvc
