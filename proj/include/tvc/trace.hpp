#pragma once

#include <optional>
#include <string>
#include <vector>

namespace tvc {

enum class Provenance { Base, Dvr, Pvc };

const char* provenance_name(Provenance p);
Provenance provenance_from(const std::string& name);

// A question plus a step-segmented reasoning text: the unit the DVR
// transformation and the pipeline filters operate on.
struct ReasoningTrace {
    std::string id;
    std::string question;
    std::string image_ref;
    std::vector<std::string> steps;
    std::vector<std::pair<int, std::string>> markers;  // (step index, marker)
    std::string answer;
    Provenance provenance = Provenance::Base;

    std::string full_text() const;  // question omitted; steps joined by spaces
};

// Extracts the final-answer span: text after the last "Answer :" delimiter
// (case-insensitive on the delimiter word), up to the next sentence
// terminator. nullopt when the delimiter is absent.
std::optional<std::string> extract_answer(const std::string& text);

// Case- and whitespace-normalized form used for answer comparison.
std::string normalize_answer(const std::string& text);

// Splits space-separated token text into steps ending at "." terminators.
std::vector<std::string> split_steps(const std::string& text);

}  // namespace tvc
