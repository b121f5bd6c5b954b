#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tvc/sequence.hpp"

namespace tvc {

// Per-layer key/value blocks for incremental decoding, plus per-entry
// (original position, segment tag) metadata. All surgery (truncate, excise,
// snapshot/restore) operates on this structure. Original positions are never
// renumbered by surgery; survivors keep the position their K/V were computed
// with.
struct LayeredKVCache {
    struct TagEntry {
        int pos = 0;
        Seg tag = Seg::Text;
    };

    // rows = entries, cols = heads * head_dim
    std::vector<Matrix> keys;
    std::vector<Matrix> values;
    std::vector<TagEntry> tags;

    LayeredKVCache() = default;
    LayeredKVCache(int layers, int width);

    int layer_count() const { return static_cast<int>(keys.size()); }
    int length() const { return len_; }
    int width() const { return keys.empty() ? 0 : static_cast<int>(keys[0].cols()); }

    // Views of the live rows (capacity may be larger than length).
    Eigen::Block<const Matrix> key_rows(int layer) const;
    Eigen::Block<const Matrix> value_rows(int layer) const;

    // One decoding step appends one entry: push_entry first, then set_kv for
    // every layer (writes the freshly pushed row).
    void push_entry(int pos, Seg tag);
    void set_kv(int layer, const Vector& k, const Vector& v);

    void truncate(int keep);      // first `keep` entries survive
    void excise_segment(Seg tag); // delete all entries with this tag, every layer

    std::vector<int> positions_of(Seg tag) const;  // cache indices, not positions

    bool equals(const LayeredKVCache& other) const;  // bit-equal live contents

    void check_invariants() const;

  private:
    int len_ = 0;
    void ensure_capacity(int rows);
};

// Deep copy of a cache plus the RNG state of the owning generation session.
// Restoring and replaying identical inputs reproduces identical outputs.
struct CacheSnapshot {
    LayeredKVCache cache;
    std::string rng_state;  // serialized mt19937_64 state ("" when not captured)

    void save(const std::string& path) const;
    static CacheSnapshot load(const std::string& path);
};

CacheSnapshot snapshot(const LayeredKVCache& cache, const std::string& rng_state = "");
LayeredKVCache restore(const CacheSnapshot& snap);

}  // namespace tvc
