#include "tvc/trace.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "tvc/errors.hpp"

namespace tvc {

const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::Base: return "base";
        case Provenance::Dvr: return "dvr";
        case Provenance::Pvc: return "pvc";
    }
    return "?";
}

Provenance provenance_from(const std::string& name) {
    if (name == "base") return Provenance::Base;
    if (name == "dvr") return Provenance::Dvr;
    if (name == "pvc") return Provenance::Pvc;
    throw InputError("unknown provenance: " + name);
}

std::string ReasoningTrace::full_text() const {
    std::string out;
    for (const auto& s : steps) {
        if (!out.empty()) out += ' ';
        out += s;
    }
    return out;
}

namespace {
std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}
}  // namespace

std::optional<std::string> extract_answer(const std::string& text) {
    std::vector<std::string> words;
    std::istringstream in(text);
    std::string w;
    while (in >> w) words.push_back(w);
    // last "answer :" (or "answer:") occurrence
    int at = -1;
    for (size_t i = 0; i < words.size(); ++i) {
        std::string lw = lower(words[i]);
        if (lw == "answer:" || (lw == "answer" && i + 1 < words.size() && words[i + 1] == ":")) {
            at = static_cast<int>(i);
        }
    }
    if (at < 0) return std::nullopt;
    size_t start = static_cast<size_t>(at) + (lower(words[static_cast<size_t>(at)]) == "answer:" ? 1 : 2);
    std::string span;
    for (size_t i = start; i < words.size(); ++i) {
        if (words[i] == "." || words[i] == "!" || words[i] == "?") break;
        if (!span.empty()) span += ' ';
        span += words[i];
    }
    return span;
}

std::string normalize_answer(const std::string& text) {
    std::string out;
    std::istringstream in(text);
    std::string w;
    while (in >> w) {
        if (!out.empty()) out += ' ';
        out += lower(w);
    }
    return out;
}

std::vector<std::string> split_steps(const std::string& text) {
    std::vector<std::string> steps;
    std::string cur;
    std::istringstream in(text);
    std::string w;
    while (in >> w) {
        if (!cur.empty()) cur += ' ';
        cur += w;
        if (w == "." || w == "!" || w == "?") {
            steps.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) steps.push_back(cur);
    return steps;
}

}  // namespace tvc
