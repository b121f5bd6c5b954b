#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace tvc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Seg { Image, Bridge, Text };

const char* seg_name(Seg tag);

struct Segment {
    int begin = 0;  // entry index, inclusive
    int end = 0;    // entry index, exclusive
    Seg tag = Seg::Text;
};

// A token sequence annotated with modality segments. Each entry is either a
// text token id or a visual entry referencing a row of `vembed` (content
// embedding, position embedding not included) and optionally `vpatch` (raw
// flattened patch pixels, required for training so gradients reach the patch
// projection). Entries carry explicit absolute positions: removing a segment
// keeps the survivors' positions, so position information is preserved.
struct TaggedTokenSequence {
    struct Entry {
        int id = -1;    // text token id, -1 for visual entries
        int pos = 0;    // absolute position (row of the position table)
        int vrow = -1;  // row into vembed/vpatch, -1 for text entries
    };

    std::vector<Entry> entries;
    Matrix vembed;  // visual content embeddings, one row per visual entry
    Matrix vpatch;  // raw patches, same row indexing (0x0 when unavailable)
    std::vector<Segment> segments;
    int grid_rows = 0;
    int grid_cols = 0;

    int size() const { return static_cast<int>(entries.size()); }
    bool empty() const { return entries.empty(); }
    int next_pos() const;  // max entry position + 1 (0 when empty)

    void append_text(const std::vector<int>& ids, Seg tag);
    void append_text_at(const std::vector<int>& ids, int start_pos, Seg tag);
    void append_visual(const Matrix& content, const Matrix& patches,
                       int start_pos, int rows, int cols);

    // Removes all entries of a segment tag; survivor positions are kept.
    TaggedTokenSequence without(Seg tag) const;
    // Entries [0, n) with their segments clipped.
    TaggedTokenSequence prefix(int n) const;

    std::vector<int> text_ids() const;  // ids of text entries, in order
    Seg tag_of(int entry_index) const;
    bool has_patches() const { return vpatch.rows() == vembed.rows(); }

    void check_invariants() const;  // throws on malformed segment structure
};

}  // namespace tvc
