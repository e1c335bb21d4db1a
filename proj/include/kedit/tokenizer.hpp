#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kedit {

// Word-level vocabulary over a closed corpus. Text is lowercased; whitespace
// separates words and every other non-alphanumeric character is its own token.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kControl = 2;  // "("
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";
  static constexpr std::string_view kControlToken = "(";

  Vocabulary();

  // Reserved ids first, then every distinct word of `texts` in sorted order.
  static Vocabulary build(std::span<const std::string> texts);
  static Vocabulary from_words(std::vector<std::string> words);

  // Throws EmptyInput when the text has no tokens.
  std::vector<int> tokenize(std::string_view text) const;
  std::string detokenize(std::span<const int> ids) const;

  int id(std::string_view word) const;  // kUnk when absent
  bool contains(std::string_view word) const;
  const std::string& word(int id) const;
  std::size_t size() const noexcept { return words_.size(); }
  const std::vector<std::string>& words() const noexcept { return words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, int, std::less<>> ids_;
};

// Lowercased segmentation shared by the tokenizer and the text metrics.
std::vector<std::string> split_words(std::string_view text);

struct SubjectSpan {
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
  std::size_t last() const noexcept { return end; }
};

// Last contiguous occurrence of `subject` in `prompt`. Throws SubjectNotFound.
SubjectSpan find_subject_span(std::span<const int> prompt, std::span<const int> subject);

}  // namespace kedit
