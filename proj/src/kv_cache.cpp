#include "tvc/kv_cache.hpp"

#include <cstring>
#include <fstream>

#include "tvc/errors.hpp"

namespace tvc {

namespace {
constexpr char kSnapshotMagic[16] = {'T', 'V', 'C', 'S', 'N', 'A', 'P', '1',
                                     0,   0,   0,   0,   0,   0,   0,   1};
}

LayeredKVCache::LayeredKVCache(int layers, int width)
    : keys(static_cast<size_t>(layers)), values(static_cast<size_t>(layers)) {
    for (int l = 0; l < layers; ++l) {
        keys[static_cast<size_t>(l)].resize(0, width);
        values[static_cast<size_t>(l)].resize(0, width);
    }
}

Eigen::Block<const Matrix> LayeredKVCache::key_rows(int layer) const {
    const Matrix& m = keys[static_cast<size_t>(layer)];
    return m.topRows(len_);
}

Eigen::Block<const Matrix> LayeredKVCache::value_rows(int layer) const {
    const Matrix& m = values[static_cast<size_t>(layer)];
    return m.topRows(len_);
}

void LayeredKVCache::ensure_capacity(int rows) {
    for (size_t l = 0; l < keys.size(); ++l) {
        if (keys[l].rows() < rows) {
            Eigen::Index cap = std::max<Eigen::Index>(rows, keys[l].rows() * 2);
            keys[l].conservativeResize(cap, Eigen::NoChange);
            values[l].conservativeResize(cap, Eigen::NoChange);
        }
    }
}

void LayeredKVCache::push_entry(int pos, Seg tag) {
    ensure_capacity(len_ + 1);
    tags.push_back(TagEntry{pos, tag});
    ++len_;
}

void LayeredKVCache::set_kv(int layer, const Vector& k, const Vector& v) {
    keys[static_cast<size_t>(layer)].row(len_ - 1) = k.transpose();
    values[static_cast<size_t>(layer)].row(len_ - 1) = v.transpose();
}

void LayeredKVCache::truncate(int keep) {
    if (keep < 0 || keep > len_) throw OutOfRangeError("truncate: keep > cache length");
    len_ = keep;
    tags.resize(static_cast<size_t>(keep));
}

void LayeredKVCache::excise_segment(Seg tag) {
    std::vector<int> keep;
    keep.reserve(static_cast<size_t>(len_));
    for (int i = 0; i < len_; ++i) {
        if (tags[static_cast<size_t>(i)].tag != tag) keep.push_back(i);
    }
    if (static_cast<int>(keep.size()) == len_) return;
    for (size_t l = 0; l < keys.size(); ++l) {
        for (size_t j = 0; j < keep.size(); ++j) {
            if (static_cast<int>(j) != keep[j]) {
                keys[l].row(static_cast<Eigen::Index>(j)) = keys[l].row(keep[j]);
                values[l].row(static_cast<Eigen::Index>(j)) = values[l].row(keep[j]);
            }
        }
    }
    std::vector<TagEntry> kept_tags;
    kept_tags.reserve(keep.size());
    for (int i : keep) kept_tags.push_back(tags[static_cast<size_t>(i)]);
    tags = std::move(kept_tags);
    len_ = static_cast<int>(keep.size());
}

std::vector<int> LayeredKVCache::positions_of(Seg tag) const {
    std::vector<int> out;
    for (int i = 0; i < len_; ++i) {
        if (tags[static_cast<size_t>(i)].tag == tag) out.push_back(i);
    }
    return out;
}

bool LayeredKVCache::equals(const LayeredKVCache& other) const {
    if (layer_count() != other.layer_count() || len_ != other.len_) return false;
    for (int i = 0; i < len_; ++i) {
        if (tags[static_cast<size_t>(i)].pos != other.tags[static_cast<size_t>(i)].pos ||
            tags[static_cast<size_t>(i)].tag != other.tags[static_cast<size_t>(i)].tag) {
            return false;
        }
    }
    for (int l = 0; l < layer_count(); ++l) {
        if ((key_rows(l).array() != other.key_rows(l).array()).any()) return false;
        if ((value_rows(l).array() != other.value_rows(l).array()).any()) return false;
    }
    return true;
}

void LayeredKVCache::check_invariants() const {
    if (static_cast<int>(tags.size()) != len_) {
        throw OutOfRangeError("tag list length != cache length");
    }
    for (const Matrix& m : keys) {
        if (m.rows() < len_) throw OutOfRangeError("layer shorter than cache length");
    }
}

CacheSnapshot snapshot(const LayeredKVCache& cache, const std::string& rng_state) {
    CacheSnapshot snap;
    snap.cache = cache;
    // Drop capacity slack so snapshots are compact values.
    for (size_t l = 0; l < snap.cache.keys.size(); ++l) {
        snap.cache.keys[l].conservativeResize(cache.length(), Eigen::NoChange);
        snap.cache.values[l].conservativeResize(cache.length(), Eigen::NoChange);
    }
    snap.rng_state = rng_state;
    return snap;
}

LayeredKVCache restore(const CacheSnapshot& snap) {
    return snap.cache;
}

void CacheSnapshot::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot open snapshot file for writing: " + path);
    out.write(kSnapshotMagic, sizeof(kSnapshotMagic));
    auto put_i64 = [&](int64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
    put_i64(cache.layer_count());
    put_i64(cache.width());
    put_i64(cache.length());
    for (int i = 0; i < cache.length(); ++i) {
        put_i64(cache.tags[static_cast<size_t>(i)].pos);
        put_i64(static_cast<int64_t>(cache.tags[static_cast<size_t>(i)].tag));
    }
    for (int l = 0; l < cache.layer_count(); ++l) {
        for (int i = 0; i < cache.length(); ++i) {
            for (int c = 0; c < cache.width(); ++c) {
                double k = cache.keys[static_cast<size_t>(l)](i, c);
                double v = cache.values[static_cast<size_t>(l)](i, c);
                out.write(reinterpret_cast<const char*>(&k), 8);
                out.write(reinterpret_cast<const char*>(&v), 8);
            }
        }
    }
    put_i64(static_cast<int64_t>(rng_state.size()));
    out.write(rng_state.data(), static_cast<std::streamsize>(rng_state.size()));
    if (!out) throw CheckpointError("snapshot write failed: " + path);
}

CacheSnapshot CacheSnapshot::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open snapshot file: " + path);
    char magic[16];
    in.read(magic, 16);
    if (!in || std::memcmp(magic, kSnapshotMagic, 16) != 0) {
        throw CheckpointError("bad snapshot magic: " + path);
    }
    auto get_i64 = [&]() {
        int64_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    int layers = static_cast<int>(get_i64());
    int width = static_cast<int>(get_i64());
    int len = static_cast<int>(get_i64());
    CacheSnapshot snap;
    snap.cache = LayeredKVCache(layers, width);
    for (int i = 0; i < len; ++i) {
        int pos = static_cast<int>(get_i64());
        Seg tag = static_cast<Seg>(get_i64());
        snap.cache.tags.push_back(LayeredKVCache::TagEntry{pos, tag});
    }
    for (size_t l = 0; l < snap.cache.keys.size(); ++l) {
        snap.cache.keys[l].resize(len, width);
        snap.cache.values[l].resize(len, width);
        for (int i = 0; i < len; ++i) {
            for (int c = 0; c < width; ++c) {
                double k = 0, v = 0;
                in.read(reinterpret_cast<char*>(&k), 8);
                in.read(reinterpret_cast<char*>(&v), 8);
                snap.cache.keys[l](i, c) = k;
                snap.cache.values[l](i, c) = v;
            }
        }
    }
    int64_t rng_len = get_i64();
    snap.rng_state.resize(static_cast<size_t>(rng_len));
    in.read(snap.rng_state.data(), rng_len);
    if (!in) throw CheckpointError("snapshot truncated: " + path);
    // length counter lives behind append_tag; patch it via truncate-from-full
    LayeredKVCache rebuilt(layers, width);
    for (const auto& t : snap.cache.tags) rebuilt.push_entry(t.pos, t.tag);
    rebuilt.keys = snap.cache.keys;
    rebuilt.values = snap.cache.values;
    snap.cache = std::move(rebuilt);
    return snap;
}

}  // namespace tvc
