#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ktrees/matrix.hpp"

namespace ktrees::conllu {

struct Token {
  std::string sentence_id;
  int token_index = 0;  // 1-based
  std::string surface_form;
  std::string deprel;  // universal part only

  bool operator==(const Token&) const = default;
};

struct Sentence {
  std::string sentence_id;
  std::vector<Token> tokens;
  Split split = Split::Train;
};

using RelationLabel = std::string;

/// Parse CoNLL-U text. Range lines ("3-4") and empty nodes ("5.1") are
/// skipped; the deprel column is cut at its first ':'. Sentences without a
/// "# sent_id" comment get "<split>-<ordinal>" as identifier.
std::vector<Sentence> parse_conllu(std::istream& in, Split split = Split::Train);
std::vector<Sentence> parse_conllu(std::string_view text, Split split = Split::Train);
std::vector<Sentence> read_conllu_file(const std::string& path, Split split);

/// Minimal CoNLL-U rendering: ID, FORM and DEPREL populated, other columns "_".
std::string to_conllu(const std::vector<Sentence>& sentences);

/// Relations present at least once in both splits, sorted.
std::vector<RelationLabel> relation_inventory(const std::vector<Sentence>& train,
                                              const std::vector<Sentence>& test);

std::size_t count_positives(const std::vector<Sentence>& sentences, std::string_view relation);

std::size_t count_tokens(const std::vector<Sentence>& sentences);

}  // namespace ktrees::conllu
