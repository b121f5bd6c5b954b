#include "tvc/sequence.hpp"

#include <algorithm>

#include "tvc/errors.hpp"

namespace tvc {

const char* seg_name(Seg tag) {
    switch (tag) {
        case Seg::Image: return "IMAGE";
        case Seg::Bridge: return "BRIDGE";
        case Seg::Text: return "TEXT";
    }
    return "?";
}

int TaggedTokenSequence::next_pos() const {
    int p = 0;
    for (const Entry& e : entries) p = std::max(p, e.pos + 1);
    return p;
}

void TaggedTokenSequence::append_text(const std::vector<int>& ids, Seg tag) {
    append_text_at(ids, next_pos(), tag);
}

void TaggedTokenSequence::append_text_at(const std::vector<int>& ids, int start_pos, Seg tag) {
    if (ids.empty()) return;
    int begin = size();
    for (size_t i = 0; i < ids.size(); ++i) {
        entries.push_back(Entry{ids[i], start_pos + static_cast<int>(i), -1});
    }
    if (!segments.empty() && segments.back().tag == tag && segments.back().end == begin) {
        segments.back().end = size();
    } else {
        segments.push_back(Segment{begin, size(), tag});
    }
}

void TaggedTokenSequence::append_visual(const Matrix& content, const Matrix& patches,
                                        int start_pos, int rows, int cols) {
    if (content.rows() != static_cast<Eigen::Index>(rows) * cols) {
        throw DimensionMismatchError("visual token count does not match grid shape");
    }
    int begin = size();
    int vbase = static_cast<int>(vembed.rows());
    if (vembed.rows() == 0) {
        vembed = content;
        vpatch = patches;
    } else {
        Matrix merged(vembed.rows() + content.rows(), content.cols());
        merged << vembed, content;
        vembed = std::move(merged);
        if (vpatch.rows() > 0 && patches.rows() == content.rows()) {
            Matrix mp(vpatch.rows() + patches.rows(), vpatch.cols());
            mp << vpatch, patches;
            vpatch = std::move(mp);
        } else {
            vpatch.resize(0, 0);  // patches no longer cover all visual rows
        }
    }
    for (int i = 0; i < content.rows(); ++i) {
        entries.push_back(Entry{-1, start_pos + i, vbase + i});
    }
    segments.push_back(Segment{begin, size(), Seg::Image});
    if (grid_rows == 0) {
        grid_rows = rows;
        grid_cols = cols;
    }
}

TaggedTokenSequence TaggedTokenSequence::without(Seg tag) const {
    TaggedTokenSequence out;
    out.grid_rows = tag == Seg::Image ? 0 : grid_rows;
    out.grid_cols = tag == Seg::Image ? 0 : grid_cols;
    std::vector<int> keep_vrows;
    std::vector<int> vrow_map(static_cast<size_t>(vembed.rows()), -1);
    for (const Segment& s : segments) {
        if (s.tag == tag) continue;
        int begin = out.size();
        for (int i = s.begin; i < s.end; ++i) {
            Entry e = entries[static_cast<size_t>(i)];
            if (e.vrow >= 0) {
                if (vrow_map[static_cast<size_t>(e.vrow)] < 0) {
                    vrow_map[static_cast<size_t>(e.vrow)] = static_cast<int>(keep_vrows.size());
                    keep_vrows.push_back(e.vrow);
                }
                e.vrow = vrow_map[static_cast<size_t>(e.vrow)];
            }
            out.entries.push_back(e);
        }
        out.segments.push_back(Segment{begin, out.size(), s.tag});
    }
    if (!keep_vrows.empty()) {
        out.vembed.resize(static_cast<Eigen::Index>(keep_vrows.size()), vembed.cols());
        for (size_t i = 0; i < keep_vrows.size(); ++i) out.vembed.row(static_cast<Eigen::Index>(i)) = vembed.row(keep_vrows[i]);
        if (has_patches()) {
            out.vpatch.resize(static_cast<Eigen::Index>(keep_vrows.size()), vpatch.cols());
            for (size_t i = 0; i < keep_vrows.size(); ++i) out.vpatch.row(static_cast<Eigen::Index>(i)) = vpatch.row(keep_vrows[i]);
        }
    }
    return out;
}

TaggedTokenSequence TaggedTokenSequence::prefix(int n) const {
    if (n < 0 || n > size()) throw OutOfRangeError("prefix length out of range");
    TaggedTokenSequence out;
    out.entries.assign(entries.begin(), entries.begin() + n);
    out.vembed = vembed;
    out.vpatch = vpatch;
    out.grid_rows = grid_rows;
    out.grid_cols = grid_cols;
    for (const Segment& s : segments) {
        if (s.begin >= n) break;
        out.segments.push_back(Segment{s.begin, std::min(s.end, n), s.tag});
    }
    return out;
}

std::vector<int> TaggedTokenSequence::text_ids() const {
    std::vector<int> ids;
    for (const Entry& e : entries) {
        if (e.id >= 0) ids.push_back(e.id);
    }
    return ids;
}

Seg TaggedTokenSequence::tag_of(int entry_index) const {
    for (const Segment& s : segments) {
        if (entry_index >= s.begin && entry_index < s.end) return s.tag;
    }
    throw OutOfRangeError("entry not covered by any segment");
}

void TaggedTokenSequence::check_invariants() const {
    int covered = 0;
    for (size_t i = 0; i < segments.size(); ++i) {
        const Segment& s = segments[i];
        if (s.begin != covered || s.end < s.begin) {
            throw OutOfRangeError("segments must be ordered, disjoint and covering");
        }
        covered = s.end;
    }
    if (covered != size()) throw OutOfRangeError("segments do not cover all entries");
    for (const Entry& e : entries) {
        if ((e.id >= 0) == (e.vrow >= 0)) throw OutOfRangeError("entry must be text xor visual");
        if (e.vrow >= vembed.rows()) throw OutOfRangeError("visual row out of range");
    }
}

}  // namespace tvc
