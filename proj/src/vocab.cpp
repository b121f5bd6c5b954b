#include "tvc/vocab.hpp"

#include <sstream>

namespace tvc {

Vocab::Vocab() {
    const char* fixed[] = {
        "[PAD]", "[SEP]", "[EOS]", "[UNK]",
        "0", "1", "2", "3", "4", "5", "6", "7", "8",
        "9", "10", "11", "12", "13", "14", "15", "16",
        ".", ",", ":", ";", "?", "(", ")",
        "How", "many", "objects", "remain", "after", "removing", "all",
        "are", "there", "answer", "Answer",
        "cell", "empty", "keep", "skip", "count", "unk",
        "cm", "cx", "sm", "sx",
        "red", "green", "blue", "yellow",
        "circle", "square", "triangle", "circles", "squares", "triangles",
        "small", "large",
        "Wait", "Alternatively", "Hmm", "maybe", "was", "is", "the",
        "Let", "me", "double-check", "see", "image", "again",
        "The", "shows", "an", "grid", "at", "look",
    };
    for (const char* w : fixed) {
        index_[w] = static_cast<int>(words_.size());
        words_.emplace_back(w);
    }
    pad_ = index_.at("[PAD]");
    sep_ = index_.at("[SEP]");
    eos_ = index_.at("[EOS]");
    unk_ = index_.at("[UNK]");
}

const Vocab& Vocab::instance() {
    static const Vocab v;
    return v;
}

int Vocab::id(std::string_view word) const {
    auto it = index_.find(std::string(word));
    return it == index_.end() ? unk_ : it->second;
}

bool Vocab::contains(std::string_view word) const {
    return index_.count(std::string(word)) > 0;
}

const std::string& Vocab::word(int id) const {
    return words_.at(static_cast<size_t>(id));
}

std::vector<int> Vocab::encode(std::string_view text) const {
    std::vector<int> out;
    std::istringstream in{std::string(text)};
    std::string w;
    while (in >> w) out.push_back(id(w));
    return out;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int t : ids) {
        if (!out.empty()) out += ' ';
        out += word(t);
    }
    return out;
}

int token_count(std::string_view text) {
    const Vocab& v = Vocab::instance();
    int n = 0;
    for (int t : v.encode(text)) {
        if (t != v.pad() && t != v.sep()) ++n;
    }
    return n;
}

}  // namespace tvc
