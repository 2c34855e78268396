#include "conmask/tokenizer.hpp"

#include <algorithm>
#include <iterator>

namespace conmask {

namespace {

// Function words only. Single letters are deliberately absent: they are
// usually initials ("J. Smith") and carry identity.
constexpr std::string_view kStopWords[] = {
    "about", "after", "all",   "also",  "am",    "an",    "and",   "any",   "are",    "as",
    "at",    "be",    "been",  "being", "but",   "by",    "can",   "could", "did",    "do",
    "does",  "for",   "from",  "had",   "has",   "have",  "if",    "in",    "into",   "is",
    "it",    "its",   "may",   "might", "must",  "no",    "nor",   "not",   "of",     "on",
    "or",    "our",   "over",  "shall", "should", "so",   "such",  "than",  "that",   "the",
    "their", "them",  "then",  "there", "these", "they",  "this",  "those", "to",     "too",
    "under", "until", "up",    "upon",  "very",  "was",   "were",  "what",  "when",   "where",
    "which", "while", "who",   "whom",  "whose", "why",   "will",  "with",  "would",  "onto",
    "via"};

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

}  // namespace

bool is_stop_word(std::string_view token) {
  return std::find(std::begin(kStopWords), std::end(kStopWords), token) != std::end(kStopWords);
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty() && !is_stop_word(current)) out.push_back(current);
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_word_byte(c)) {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
    } else {
      flush();
    }
  }
  flush();
  return out;
}

}  // namespace conmask
