#pragma once

// Reference-based text metrics for the held-out prediction study:
// ROUGE-L (LCS F1), an exact-match METEOR, and greedy-cosine BertScore.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scenedialog/backends.hpp"

namespace scenedialog {

using Tokens = std::vector<std::string>;

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

// F1 of LCS precision and recall; 0 when either side is empty.
double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference);
double rouge_l(std::string_view candidate, std::string_view reference);

struct MeteorAlignment {
  int matches = 0;
  int chunks = 0;
};

// Maximum one-to-one exact unigram alignment, choosing among maximal
// alignments one with the fewest chunks (runs contiguous in both sequences).
MeteorAlignment meteor_align(std::span<const std::string> candidate,
                             std::span<const std::string> reference);

// Fmean = 10PR / (R + 9P), penalty = 0.5 (chunks / m)^3, score = Fmean (1 - penalty).
double meteor_score(const MeteorAlignment& alignment, std::size_t candidate_len,
                    std::size_t reference_len);
double meteor(std::span<const std::string> candidate, std::span<const std::string> reference);
double meteor(std::string_view candidate, std::string_view reference);

// Greedy cosine matching over per-token embeddings. nullopt ("unavailable")
// when no embedding backend is configured.
std::optional<double> bert_score(std::string_view candidate, std::string_view reference,
                                 const EmbeddingClient& embedder);
// Same, over precomputed embeddings.
double bert_score_from_embeddings(const TokenEmbeddings& candidate,
                                  const TokenEmbeddings& reference);

}  // namespace scenedialog
