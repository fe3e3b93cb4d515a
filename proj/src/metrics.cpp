#include "scenedialog/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

#include "scenedialog/errors.hpp"
#include "scenedialog/text.hpp"

namespace scenedialog {

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(candidate, reference));
  const double p = lcs / static_cast<double>(candidate.size());
  const double r = lcs / static_cast<double>(reference.size());
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

double rouge_l(std::string_view candidate, std::string_view reference) {
  return rouge_l(tokenize(candidate), tokenize(reference));
}

namespace {

// Depth-first search over candidate positions with memoization on
// (position, ref position matched at the previous candidate, used refs).
// Only alignments of maximum size are generated: a candidate token may stay
// unmatched only while its type has surplus occurrences.
class ChunkMinimizer {
 public:
  ChunkMinimizer(std::span<const std::string> cand, std::span<const std::string> ref)
      : cand_(cand), ref_(ref), used_(ref.size(), false) {
    std::map<std::string, int> ref_count;
    for (const auto& t : ref) ref_count[t]++;
    std::map<std::string, int> cand_count;
    for (const auto& t : cand) cand_count[t]++;
    for (const auto& [tok, c] : cand_count) {
      const int r = ref_count.count(tok) ? ref_count[tok] : 0;
      skips_[tok] = c - std::min(c, r);
      matches_ += std::min(c, r);
    }
    for (std::size_t j = 0; j < ref.size(); ++j) positions_[ref[j]].push_back(static_cast<int>(j));
  }

  MeteorAlignment solve() {
    if (matches_ == 0) return {0, 0};
    const int chunks = search(0, -1);
    return {matches_, chunks};
  }

 private:
  static constexpr int kInf = std::numeric_limits<int>::max() / 2;

  std::string key(std::size_t i, int prev_j) const {
    std::string k = std::to_string(i) + ":" + std::to_string(prev_j) + ":";
    k.reserve(k.size() + used_.size());
    for (bool u : used_) k.push_back(u ? '1' : '0');
    return k;
  }

  int search(std::size_t i, int prev_j) {
    if (i == cand_.size()) return 0;
    const std::string k = key(i, prev_j);
    if (auto it = memo_.find(k); it != memo_.end()) return it->second;

    const std::string& tok = cand_[i];
    int best = kInf;
    auto pos = positions_.find(tok);
    if (pos != positions_.end()) {
      for (int j : pos->second) {
        if (used_[j]) continue;
        used_[j] = true;
        const int opens = (prev_j >= 0 && j == prev_j + 1) ? 0 : 1;
        best = std::min(best, opens + search(i + 1, j));
        used_[j] = false;
      }
    }
    int& skips = skips_[tok];
    if (skips > 0) {
      --skips;
      best = std::min(best, search(i + 1, -1));
      ++skips;
    }
    memo_.emplace(k, best);
    return best;
  }

  std::span<const std::string> cand_, ref_;
  std::vector<bool> used_;
  std::map<std::string, int> skips_;
  std::map<std::string, std::vector<int>> positions_;
  std::unordered_map<std::string, int> memo_;
  int matches_ = 0;
};

}  // namespace

MeteorAlignment meteor_align(std::span<const std::string> candidate,
                             std::span<const std::string> reference) {
  return ChunkMinimizer(candidate, reference).solve();
}

double meteor_score(const MeteorAlignment& a, std::size_t candidate_len, std::size_t reference_len) {
  if (a.matches == 0 || candidate_len == 0 || reference_len == 0) return 0.0;
  const double m = a.matches;
  const double p = m / static_cast<double>(candidate_len);
  const double r = m / static_cast<double>(reference_len);
  const double fmean = 10.0 * p * r / (r + 9.0 * p);
  const double frag = static_cast<double>(a.chunks) / m;
  const double penalty = 0.5 * frag * frag * frag;
  return fmean * (1.0 - penalty);
}

double meteor(std::span<const std::string> candidate, std::span<const std::string> reference) {
  return meteor_score(meteor_align(candidate, reference), candidate.size(), reference.size());
}

double meteor(std::string_view candidate, std::string_view reference) {
  return meteor(tokenize(candidate), tokenize(reference));
}

double bert_score_from_embeddings(const TokenEmbeddings& candidate,
                                  const TokenEmbeddings& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  auto norm = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };
  auto cosine = [&](const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw MalformedResponseError("embedding dimensions differ");
    const double na = norm(a), nb = norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return std::clamp(dot / (na * nb), -1.0, 1.0);
  };
  std::vector<std::vector<double>> sim(candidate.size(), std::vector<double>(reference.size()));
  for (std::size_t i = 0; i < candidate.size(); ++i)
    for (std::size_t j = 0; j < reference.size(); ++j) sim[i][j] = cosine(candidate[i], reference[j]);

  double precision = 0.0;
  for (std::size_t i = 0; i < candidate.size(); ++i)
    precision += *std::max_element(sim[i].begin(), sim[i].end());
  precision /= static_cast<double>(candidate.size());

  double recall = 0.0;
  for (std::size_t j = 0; j < reference.size(); ++j) {
    double best = -1.0;
    for (std::size_t i = 0; i < candidate.size(); ++i) best = std::max(best, sim[i][j]);
    recall += best;
  }
  recall /= static_cast<double>(reference.size());

  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

std::optional<double> bert_score(std::string_view candidate, std::string_view reference,
                                 const EmbeddingClient& embedder) {
  if (!embedder.backend) return std::nullopt;
  if (tokenize(candidate).empty() || tokenize(reference).empty()) return 0.0;
  try {
    auto c = embedder(EmbeddingRequest{std::string(candidate), embedder.config.model_id});
    auto r = embedder(EmbeddingRequest{std::string(reference), embedder.config.model_id});
    return bert_score_from_embeddings(c, r);
  } catch (const BackendUnavailable&) {
    return std::nullopt;
  }
}

}  // namespace scenedialog
