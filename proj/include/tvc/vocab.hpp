#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tvc {

// Fixed closed vocabulary shared by the synthetic task, the model and the
// data pipeline. Word-level: text is split on whitespace, every emitted
// word (including punctuation) is its own token. Unknown words map to [UNK].
class Vocab {
  public:
    static const Vocab& instance();

    int size() const { return static_cast<int>(words_.size()); }
    int id(std::string_view word) const;      // [UNK] id when absent
    bool contains(std::string_view word) const;
    const std::string& word(int id) const;

    std::vector<int> encode(std::string_view text) const;
    std::string decode(const std::vector<int>& ids) const;

    int pad() const { return pad_; }
    int sep() const { return sep_; }
    int eos() const { return eos_; }
    int unk() const { return unk_; }

  private:
    Vocab();
    std::vector<std::string> words_;
    std::unordered_map<std::string, int> index_;
    int pad_ = 0, sep_ = 0, eos_ = 0, unk_ = 0;
};

// Token count per the pipeline's length function: every token except the
// reserved [PAD] and [SEP] symbols.
int token_count(std::string_view text);

}  // namespace tvc
