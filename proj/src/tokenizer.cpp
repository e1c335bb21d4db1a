#include "kedit/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "kedit/error.hpp"

namespace kedit {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      flush();
    } else if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
      out.emplace_back(1, raw);
    }
  }
  flush();
  return out;
}

Vocabulary::Vocabulary() {
  words_ = {std::string(kPadToken), std::string(kUnkToken), std::string(kControlToken)};
  for (std::size_t i = 0; i < words_.size(); ++i) ids_.emplace(words_[i], static_cast<int>(i));
}

Vocabulary Vocabulary::build(std::span<const std::string> texts) {
  std::set<std::string> distinct;
  for (const auto& t : texts) {
    for (auto& w : split_words(t)) distinct.insert(std::move(w));
  }
  Vocabulary v;
  for (const auto& w : distinct) {
    if (v.ids_.contains(w)) continue;
    v.ids_.emplace(w, static_cast<int>(v.words_.size()));
    v.words_.push_back(w);
  }
  return v;
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
  if (words.size() < 3 || words[kPad] != kPadToken || words[kUnk] != kUnkToken || words[kControl] != kControlToken) {
    throw Error(ErrorCode::kParse, "vocabulary must start with the reserved tokens");
  }
  Vocabulary v;
  v.words_ = std::move(words);
  v.ids_.clear();
  for (std::size_t i = 0; i < v.words_.size(); ++i) {
    if (!v.ids_.emplace(v.words_[i], static_cast<int>(i)).second) {
      throw Error(ErrorCode::kParse, "duplicate vocabulary entry '" + v.words_[i] + "'");
    }
  }
  return v;
}

std::vector<int> Vocabulary::tokenize(std::string_view text) const {
  const auto words = split_words(text);
  if (words.empty()) throw Error(ErrorCode::kEmptyInput, "text has no tokens");
  std::vector<int> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(id(w));
  return ids;
}

std::string Vocabulary::detokenize(std::span<const int> ids) const {
  std::string out;
  for (int i : ids) {
    if (!out.empty()) out.push_back(' ');
    out += word(i);
  }
  return out;
}

int Vocabulary::id(std::string_view w) const {
  const auto it = ids_.find(w);
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view w) const { return ids_.find(w) != ids_.end(); }

const std::string& Vocabulary::word(int i) const {
  if (i < 0 || static_cast<std::size_t>(i) >= words_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "token id out of range");
  }
  return words_[static_cast<std::size_t>(i)];
}

SubjectSpan find_subject_span(std::span<const int> prompt, std::span<const int> subject) {
  if (prompt.empty() || subject.empty()) throw Error(ErrorCode::kEmptyInput, "prompt and subject must be non-empty");
  if (subject.size() <= prompt.size()) {
    for (std::size_t start = prompt.size() - subject.size() + 1; start-- > 0;) {
      if (std::equal(subject.begin(), subject.end(), prompt.begin() + static_cast<std::ptrdiff_t>(start))) {
        return {start, start + subject.size() - 1};
      }
    }
  }
  throw Error(ErrorCode::kSubjectNotFound, "subject tokens do not occur in the prompt");
}

}  // namespace kedit
