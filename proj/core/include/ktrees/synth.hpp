#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ktrees/conllu.hpp"
#include "ktrees/repr_store.hpp"

namespace ktrees::repr {

/// Where the planted relation signal lives.
///  Repr: each relation is a half-space along its own direction in repr space.
///  KnowledgeNeurons: each relation is a band |kn_j| < band on one knowledge
///  neuron, with all other tokens pushed outside it. Linear models on repr
///  see a symmetric band and cannot separate it.
enum class SignalMode { Repr, KnowledgeNeurons };

struct SynthSpec {
  std::size_t n_sentences = 60;
  std::size_t min_tokens = 6;
  std::size_t max_tokens = 14;
  std::size_t d = 16;
  std::size_t h = 48;
  std::vector<std::string> relations{"nsubj", "obj", "iobj", "amod", "advmod", "det", "case", "obl"};
  SignalMode mode = SignalMode::KnowledgeNeurons;
  Split split = Split::Train;
  /// Half-width of the in-band region (kn mode) or the margin (repr mode).
  double band = 1.0;
};

struct SynthOutput {
  ReprBundle bundle;
  std::vector<conllu::Sentence> sentences;
};

/// Deterministic for a fixed seed. The FFN matrix depends on the seed only,
/// so train and test splits drawn from one seed share it. Relation k is
/// drawn with weight k + 1, which spreads dataset sizes across the cohort.
SynthOutput synth_bundle(std::uint64_t seed, const SynthSpec& spec);

const char* to_string(SignalMode mode);
SignalMode signal_mode_from_string(const std::string& name);

}  // namespace ktrees::repr
