#include "ktrees/conllu.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "ktrees/error.hpp"

namespace ktrees::conllu {
namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

class SentenceAssembler {
 public:
  explicit SentenceAssembler(Split split) : split_(split) {}

  void comment(std::string_view line) {
    // "# sent_id = xyz"
    auto body = trim(line.substr(1));
    constexpr std::string_view key = "sent_id";
    if (body.substr(0, key.size()) != key) return;
    body = trim(body.substr(key.size()));
    if (body.empty() || body.front() != '=') return;
    pending_id_ = std::string(trim(body.substr(1)));
  }

  void token(std::size_t line_no, std::string_view line) {
    const auto fields = split_tabs(line);
    if (fields.size() < 10) {
      throw ParseError(line_no, "expected 10 tab-separated fields, got " +
                                    std::to_string(fields.size()));
    }
    const auto id = fields[0];
    if (id.find('-') != std::string_view::npos || id.find('.') != std::string_view::npos) {
      return;
    }
    int index = 0;
    const auto [ptr, ec] = std::from_chars(id.data(), id.data() + id.size(), index);
    if (ec != std::errc{} || ptr != id.data() + id.size() || index < 1) {
      throw ParseError(line_no, "unparsable token ID '" + std::string(id) + "'");
    }
    const auto expected = static_cast<int>(tokens_.size()) + 1;
    if (index != expected) {
      throw ParseError(line_no, "token ID " + std::to_string(index) + " out of sequence, expected " +
                                    std::to_string(expected));
    }
    auto deprel = fields[7];
    deprel = deprel.substr(0, deprel.find(':'));
    if (deprel.empty() || deprel == "_") {
      throw ParseError(line_no, "missing DEPREL");
    }
    Token t;
    t.token_index = index;
    t.surface_form = std::string(fields[1]);
    t.deprel = std::string(deprel);
    tokens_.push_back(std::move(t));
    started_ = true;
  }

  void finish(std::vector<Sentence>& out) {
    if (!started_) {
      pending_id_.reset();
      return;
    }
    Sentence s;
    s.split = split_;
    s.sentence_id = pending_id_ ? *pending_id_
                                : std::string(to_string(split_)) + "-" + std::to_string(out.size() + 1);
    for (auto& t : tokens_) t.sentence_id = s.sentence_id;
    s.tokens = std::move(tokens_);
    out.push_back(std::move(s));
    tokens_.clear();
    pending_id_.reset();
    started_ = false;
  }

 private:
  Split split_;
  std::optional<std::string> pending_id_;
  std::vector<Token> tokens_;
  bool started_ = false;
};

}  // namespace

std::vector<Sentence> parse_conllu(std::istream& in, Split split) {
  std::vector<Sentence> out;
  SentenceAssembler assembler(split);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) {
      assembler.finish(out);
    } else if (line.front() == '#') {
      assembler.comment(line);
    } else {
      assembler.token(line_no, line);
    }
  }
  assembler.finish(out);
  return out;
}

std::vector<Sentence> parse_conllu(std::string_view text, Split split) {
  std::istringstream in{std::string(text)};
  return parse_conllu(in, split);
}

std::vector<Sentence> read_conllu_file(const std::string& path, Split split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open CoNLL-U file " + path);
  try {
    return parse_conllu(in, split);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path + ": " + std::string(e.what()));
  }
}

std::string to_conllu(const std::vector<Sentence>& sentences) {
  std::ostringstream out;
  for (const auto& s : sentences) {
    out << "# sent_id = " << s.sentence_id << '\n';
    for (const auto& t : s.tokens) {
      const int head = t.deprel == "root" ? 0 : 1;
      out << t.token_index << '\t' << t.surface_form << "\t_\t_\t_\t_\t" << head << '\t' << t.deprel
          << "\t_\t_\n";
    }
    out << '\n';
  }
  return out.str();
}

std::vector<RelationLabel> relation_inventory(const std::vector<Sentence>& train,
                                              const std::vector<Sentence>& test) {
  auto collect = [](const std::vector<Sentence>& sentences) {
    std::set<std::string> rels;
    for (const auto& s : sentences)
      for (const auto& t : s.tokens) rels.insert(t.deprel);
    return rels;
  };
  const auto a = collect(train);
  const auto b = collect(test);
  std::vector<RelationLabel> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::size_t count_positives(const std::vector<Sentence>& sentences, std::string_view relation) {
  std::size_t n = 0;
  for (const auto& s : sentences)
    for (const auto& t : s.tokens)
      if (t.deprel == relation) ++n;
  return n;
}

std::size_t count_tokens(const std::vector<Sentence>& sentences) {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.tokens.size();
  return n;
}

}  // namespace ktrees::conllu
