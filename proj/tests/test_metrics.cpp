#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "scenedialog/metrics.hpp"
#include "scenedialog/scripted.hpp"

using namespace scenedialog;

namespace {

// Plain recursion over both sequences, no table.
std::size_t lcs_oracle(const Tokens& a, const Tokens& b, std::size_t i = 0, std::size_t j = 0) {
  if (i == a.size() || j == b.size()) return 0;
  if (a[i] == b[j]) return 1 + lcs_oracle(a, b, i + 1, j + 1);
  return std::max(lcs_oracle(a, b, i + 1, j), lcs_oracle(a, b, i, j + 1));
}

double f1(double lcs, double n, double m) {
  if (n == 0 || m == 0 || lcs == 0) return 0;
  double p = lcs / n, r = lcs / m;
  return 2 * p * r / (p + r);
}

// Every one-to-one exact matching; keep the largest, then the fewest chunks.
std::pair<int, int> meteor_oracle(const Tokens& c, const Tokens& r) {
  int best_m = 0, best_chunks = 0;
  std::vector<int> match(c.size(), -1);
  std::vector<bool> used(r.size(), false);
  std::function<void(std::size_t)> go = [&](std::size_t i) {
    if (i == c.size()) {
      int m = 0, chunks = 0, prev_j = -2;
      bool prev_matched = false;
      for (std::size_t k = 0; k < c.size(); ++k) {
        if (match[k] < 0) {
          prev_matched = false;
          continue;
        }
        ++m;
        if (!(prev_matched && match[k] == prev_j + 1)) ++chunks;
        prev_j = match[k];
        prev_matched = true;
      }
      if (m > best_m || (m == best_m && m > 0 && chunks < best_chunks)) {
        best_m = m;
        best_chunks = chunks;
      }
      return;
    }
    go(i + 1);
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (used[j] || r[j] != c[i]) continue;
      used[j] = true;
      match[i] = static_cast<int>(j);
      go(i + 1);
      match[i] = -1;
      used[j] = false;
    }
  };
  go(0);
  return {best_m, best_chunks};
}

double meteor_formula(int m, int chunks, double n_c, double n_r) {
  if (m == 0) return 0;
  double p = m / n_c, r = m / n_r;
  double fmean = 10 * p * r / (r + 9 * p);
  return fmean * (1 - 0.5 * std::pow(static_cast<double>(chunks) / m, 3));
}

Tokens random_tokens(std::mt19937& rng, int max_len) {
  static const Tokens vocab{"a", "b", "c", "d"};
  std::uniform_int_distribution<int> len(0, max_len), w(0, 3);
  Tokens t(static_cast<std::size_t>(len(rng)));
  for (auto& x : t) x = vocab[static_cast<std::size_t>(w(rng))];
  return t;
}

}  // namespace

TEST(RougeL, Examples) {
  EXPECT_EQ(rouge_l(std::string_view("the cat"), std::string_view("the dog")), 0.5);
  EXPECT_EQ(rouge_l(std::string_view("a b c"), std::string_view("A, b. C!")), 1.0);
  EXPECT_EQ(rouge_l(std::string_view("a b"), std::string_view("c d")), 0.0);
  EXPECT_EQ(rouge_l(std::string_view(""), std::string_view("c d")), 0.0);
}

TEST(RougeL, MatchesOracleAndIsSymmetric) {
  std::mt19937 rng(11);
  for (int i = 0; i < 500; ++i) {
    auto a = random_tokens(rng, 8), b = random_tokens(rng, 8);
    EXPECT_EQ(lcs_length(a, b), lcs_oracle(a, b));
    const double expected = f1(static_cast<double>(lcs_oracle(a, b)), a.size(), b.size());
    EXPECT_NEAR(rouge_l(a, b), expected, 1e-12);
    EXPECT_NEAR(rouge_l(a, b), rouge_l(b, a), 1e-15);
    EXPECT_GE(rouge_l(a, b), 0.0);
    EXPECT_LE(rouge_l(a, b), 1.0);
  }
}

TEST(Meteor, IdenticalSequencesExact) {
  for (int m : {1, 2, 4, 8}) {
    Tokens x;
    for (int i = 0; i < m; ++i) x.push_back("w" + std::to_string(i % 3));
    EXPECT_EQ(meteor(x, x), 1.0 - 0.5 / (static_cast<double>(m) * m * m)) << m;
  }
  EXPECT_EQ(meteor(std::string_view("one two three four"), std::string_view("one two three four")),
            0.9921875);
  EXPECT_EQ(meteor(std::string_view("solo"), std::string_view("solo")), 0.5);
  EXPECT_EQ(meteor(std::string_view("a b"), std::string_view("c d")), 0.0);
}

TEST(Meteor, MatchesBruteForceAlignment) {
  std::mt19937 rng(5);
  for (int i = 0; i < 500; ++i) {
    auto c = random_tokens(rng, 8), r = random_tokens(rng, 8);
    auto [m, chunks] = meteor_oracle(c, r);
    auto a = meteor_align(c, r);
    EXPECT_EQ(a.matches, m);
    EXPECT_EQ(a.chunks, chunks);
    EXPECT_NEAR(meteor(c, r), meteor_formula(m, chunks, c.size(), r.size()), 1e-12);
    EXPECT_GE(meteor(c, r), 0.0);
    EXPECT_LE(meteor(c, r), 1.0);
  }
}

TEST(Meteor, PrefersFewerChunks) {
  // "the" could align to either occurrence; the contiguous choice gives 1 chunk.
  Tokens c{"the", "cat", "sat"}, r{"the", "dog", "the", "cat", "sat"};
  auto a = meteor_align(c, r);
  EXPECT_EQ(a.matches, 3);
  EXPECT_EQ(a.chunks, 1);
}

TEST(BertScore, IdenticalIsOne) {
  EmbeddingClient e{std::make_shared<ScriptedEmbeddingBackend>(32), {}, nullptr};
  auto s = bert_score("the quick brown fox", "the quick brown fox", e);
  ASSERT_TRUE(s);
  EXPECT_NEAR(*s, 1.0, 1e-12);
}

TEST(BertScore, OrthogonalIsZero) {
  auto b = std::make_shared<ScriptedEmbeddingBackend>(4, false);
  b->set("a", {1, 0, 0, 0});
  b->set("b", {0, 1, 0, 0});
  b->set("c", {0, 0, 1, 0});
  b->set("d", {0, 0, 0, 1});
  EmbeddingClient e{b, {}, nullptr};
  EXPECT_EQ(*bert_score("a b", "c d", e), 0.0);
  // one shared token out of two on each side: P = R = 0.5
  EXPECT_NEAR(*bert_score("a b", "a c", e), 0.5, 1e-12);
}

TEST(BertScore, UnavailableWithoutBackend) {
  EmbeddingClient none;
  EXPECT_FALSE(bert_score("a", "a", none).has_value());
}

TEST(BertScore, GreedyMatchingOracle) {
  TokenEmbeddings c{{1, 0}, {0.6, 0.8}}, r{{0, 1}};
  // cos: (1,0)-(0,1)=0, (0.6,0.8)-(0,1)=0.8; P = (0 + 0.8) / 2, R = 0.8
  const double p = 0.4, rc = 0.8;
  EXPECT_NEAR(bert_score_from_embeddings(c, r), 2 * p * rc / (p + rc), 1e-12);
}
