#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "saekit/retrieval.hpp"

using namespace saekit;

namespace {

SaeEmbedding emb(const std::string& id,
                 std::vector<std::pair<LatentId, float>> entries) {
  SaeEmbedding e;
  e.doc_id = id;
  e.entries = std::move(entries);
  return e;
}

// Brute-force scoring oracle: full softmax + normalization + stable sort.
std::vector<std::string> score_oracle(
    const std::vector<SaeEmbedding>& embs,
    const std::vector<std::pair<LatentId, double>>& candidates, double T) {
  double max_sim = candidates[0].second;
  for (const auto& [id, sim] : candidates) max_sim = std::max(max_sim, sim);
  std::map<LatentId, double> weight;
  double total = 0.0;
  for (const auto& [id, sim] : candidates) {
    weight[id] = std::exp((sim - max_sim) / T);
    total += weight[id];
  }
  for (auto& [id, w] : weight) w /= total;
  std::map<LatentId, double> cmax;
  for (const auto& e : embs) {
    for (const auto& [id, v] : e.entries) {
      if (weight.count(id) != 0) cmax[id] = std::max(cmax[id], static_cast<double>(v));
    }
  }
  std::vector<std::pair<double, std::string>> scored;
  for (const auto& e : embs) {
    double s = 0.0;
    for (const auto& [id, v] : e.entries) {
      auto it = weight.find(id);
      if (it != weight.end() && cmax[id] > 0.0) s += it->second * v / cmax[id];
    }
    scored.emplace_back(-s, e.doc_id);
  }
  std::sort(scored.begin(), scored.end());
  std::vector<std::string> out;
  for (auto& [s, id] : scored) out.push_back(id);
  return out;
}

std::vector<SaeEmbedding> random_embeddings(uint64_t seed, size_t n, LatentId d) {
  Rng rng(seed);
  std::vector<SaeEmbedding> embs;
  for (size_t i = 0; i < n; ++i) {
    SaeEmbedding e;
    e.doc_id = "doc" + std::to_string(i);
    for (LatentId l = 0; l < d; ++l) {
      if (rng.bernoulli(0.3)) e.entries.emplace_back(l, static_cast<float>(rng.uniform(0.1, 4.0)));
    }
    embs.push_back(std::move(e));
  }
  return embs;
}

LatentCatalog axis_catalog() {
  LatentCatalog c;
  auto add = [&](LatentId id, double x, double y) {
    LatentCatalogEntry e;
    e.latent_id = id;
    e.label = "l" + std::to_string(id);
    const double n = std::sqrt(x * x + y * y);
    e.label_vec = {x / n, y / n};
    c.insert(std::move(e));
  };
  add(0, 1.0, 0.0);
  add(1, 1.0, 0.2);
  add(2, 0.0, 1.0);
  add(3, -1.0, 0.0);
  return c;
}

}  // namespace

TEST_CASE("candidate selection follows the catalog top-k") {
  const auto catalog = axis_catalog();
  const auto cands = select_candidate_latents({1.0, 0.0}, catalog, 2);
  REQUIRE(cands.size() == 2);
  CHECK(cands[0].first == 0);
  CHECK(cands[1].first == 1);
  CHECK(cands[0].second == doctest::Approx(1.0));
}

TEST_CASE("rerank hook may subset but not invent candidates") {
  const auto catalog = axis_catalog();
  RerankFn keep_second = [](const std::vector<std::pair<LatentId, double>>& in) {
    return std::vector<std::pair<LatentId, double>>{in[1]};
  };
  const auto cands = select_candidate_latents({1.0, 0.0}, catalog, 2, &keep_second);
  REQUIRE(cands.size() == 1);
  CHECK(cands[0].first == 1);

  RerankFn invent = [](const std::vector<std::pair<LatentId, double>>&) {
    return std::vector<std::pair<LatentId, double>>{{99, 1.0}};
  };
  CHECK_THROWS_AS(select_candidate_latents({1.0, 0.0}, catalog, 2, &invent),
                  InvalidArgument);
}

TEST_CASE("document scoring on a hand-checked corpus") {
  const std::vector<SaeEmbedding> embs = {
      emb("a", {{0, 2.0f}}),            // latent 0 at corpus max
      emb("b", {{0, 1.0f}, {1, 4.0f}}), // half of 0's max plus all of 1's
      emb("c", {{5, 9.0f}}),            // irrelevant latent only
  };
  const std::vector<std::pair<LatentId, double>> cands = {{0, 1.0}, {1, 1.0}};
  const auto r = score_documents(embs, cands, 0.2, "q");
  CHECK(r.query_id == "q");
  CHECK_FALSE(r.all_zero);
  // Equal sims -> equal weights 0.5. a: 0.5*1 = 0.5; b: 0.5*0.5 + 0.5*1 = 0.75.
  CHECK(r.ranked_doc_ids == std::vector<std::string>{"b", "a", "c"});
  CHECK(r.scores[0] == doctest::Approx(0.75));
  CHECK(r.scores[1] == doctest::Approx(0.5));
  CHECK(r.scores[2] == doctest::Approx(0.0));
  REQUIRE(r.latents_used.size() == 2);
  CHECK(r.latents_used[0].second == doctest::Approx(0.5));
}

TEST_CASE("scoring matches the brute-force oracle on random corpora") {
  for (uint64_t trial = 0; trial < 10; ++trial) {
    const auto embs = random_embeddings(7000 + trial, 40, 12);
    Rng rng(7100 + trial);
    std::vector<std::pair<LatentId, double>> cands;
    for (LatentId l = 0; l < 12; ++l) {
      if (rng.bernoulli(0.4)) cands.emplace_back(l, rng.uniform(-1.0, 1.0));
    }
    if (cands.empty()) cands.emplace_back(0, 0.5);
    const auto r = score_documents(embs, cands, 0.2);
    CHECK(r.ranked_doc_ids == score_oracle(embs, cands, 0.2));
    CHECK(std::is_sorted(r.scores.rbegin(), r.scores.rend()));
  }
}

TEST_CASE("softmax weights are invariant to a similarity shift") {
  const auto embs = random_embeddings(7200, 25, 8);
  const std::vector<std::pair<LatentId, double>> a = {{0, 0.9}, {1, 0.4}, {2, 0.1}};
  std::vector<std::pair<LatentId, double>> b = a;
  for (auto& [id, sim] : b) sim += 5.0;
  const auto ra = score_documents(embs, a, 0.2);
  const auto rb = score_documents(embs, b, 0.2);
  CHECK(ra.ranked_doc_ids == rb.ranked_doc_ids);
  for (size_t i = 0; i < ra.latents_used.size(); ++i) {
    CHECK(ra.latents_used[i].second ==
          doctest::Approx(rb.latents_used[i].second).epsilon(1e-9));
  }
}

TEST_CASE("low temperature concentrates weight on the best candidate") {
  const auto embs = random_embeddings(7300, 25, 8);
  const std::vector<std::pair<LatentId, double>> cands = {{0, 0.9}, {1, 0.5}};
  const auto r = score_documents(embs, cands, 1e-4);
  CHECK(r.latents_used[0].second == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.latents_used[1].second == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("all-zero rankings are flagged") {
  const std::vector<SaeEmbedding> embs = {emb("a", {{5, 1.0f}}), emb("b", {})};
  const auto r = score_documents(embs, {{0, 1.0}}, 0.2);
  CHECK(r.all_zero);
  // Zero scores tie-break by doc id.
  CHECK(r.ranked_doc_ids == std::vector<std::string>{"a", "b"});
}

TEST_CASE("scoring validates its arguments") {
  const auto embs = random_embeddings(7400, 5, 4);
  CHECK_THROWS_AS(score_documents(embs, {}, 0.2), InvalidArgument);
  CHECK_THROWS_AS(score_documents(embs, {{0, 1.0}}, 0.0), InvalidArgument);
}

TEST_CASE("average precision reference values") {
  // Relevant at ranks 1 and 3 of 2 relevant: (1/1 + 2/3) / 2 = 5/6.
  CHECK(average_precision({true, false, true}, 2) == doctest::Approx(5.0 / 6.0));
  CHECK(average_precision({false, false, true}, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(average_precision({true, true}, 2) == doctest::Approx(1.0));
  // Missing relevant docs drag AP down via the n_relevant denominator.
  CHECK(average_precision({true}, 2) == doctest::Approx(0.5));
  CHECK_THROWS_AS(average_precision({true}, 0), InvalidArgument);
}

TEST_CASE("precision at k pads short lists with non-relevant") {
  CHECK(precision_at_k({true, false, true, true}, 3) == doctest::Approx(2.0 / 3.0));
  CHECK(precision_at_k({true}, 4) == doctest::Approx(0.25));
  CHECK(precision_at_k({}, 5) == doctest::Approx(0.0));
  CHECK_THROWS_AS(precision_at_k({true}, 0), InvalidArgument);
}

TEST_CASE("mean metric averages per-query values") {
  CHECK(mean_metric({1.0, 0.0, 0.5}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(mean_metric({}), InvalidArgument);
}

TEST_CASE("rrf fusion matches a hand computation") {
  // Two rankings; k_rrf = 60.
  const std::vector<std::vector<std::string>> rankings = {{"a", "b", "c"},
                                                          {"b", "a"}};
  const auto fused = rrf_fuse(rankings, 60.0);
  // a: 1/61 + 1/62; b: 1/62 + 1/61 (tie, id order); c: 1/63.
  REQUIRE(fused.size() == 3);
  CHECK(fused[0] == "a");
  CHECK(fused[1] == "b");
  CHECK(fused[2] == "c");

  // Make b strictly better.
  const auto fused2 = rrf_fuse({{"a", "b"}, {"b", "a"}, {"b"}}, 60.0);
  CHECK(fused2[0] == "b");
  CHECK_THROWS_AS(rrf_fuse({}), InvalidArgument);
}

TEST_CASE("rrf: a doc missing from one ranking contributes nothing there") {
  const auto fused = rrf_fuse({{"x"}, {"y"}}, 60.0);
  // Both score 1/61; tie broken by id.
  CHECK(fused == std::vector<std::string>{"x", "y"});
}

TEST_CASE("rbo of identical rankings is 1 at any depth") {
  const std::vector<std::string> r = {"a", "b", "c", "d"};
  CHECK(rbo(r, r, 0.98, 50) == doctest::Approx(1.0));
  CHECK(rbo(r, r, 0.5, 2) == doctest::Approx(1.0));
}

TEST_CASE("rbo of disjoint rankings is 0") {
  CHECK(rbo({"a", "b"}, {"c", "d"}, 0.98, 50) == doctest::Approx(0.0));
}

TEST_CASE("rbo hand computation at small depth") {
  // A = [a, b], B = [b, a], p = 0.5, depth = 2.
  // d=1: overlap 0 -> 0; d=2: overlap 2 -> 2/2 = 1.
  // weighted = 1*0 + 0.5*1 = 0.5; norm = 1.5 -> 1/3.
  CHECK(rbo({"a", "b"}, {"b", "a"}, 0.5, 2) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("rbo is symmetric and swap-sensitive") {
  Rng rng(555);
  std::vector<std::string> a, b;
  for (int i = 0; i < 20; ++i) a.push_back("d" + std::to_string(i));
  b = a;
  for (size_t i = b.size(); i > 1; --i) {
    std::swap(b[i - 1], b[rng.uniform_index(i)]);
  }
  CHECK(rbo(a, b, 0.98, 50) == doctest::Approx(rbo(b, a, 0.98, 50)));
  // A swap near the top hurts more than one near the bottom.
  auto top_swapped = a;
  std::swap(top_swapped[0], top_swapped[1]);
  auto bottom_swapped = a;
  std::swap(bottom_swapped[18], bottom_swapped[19]);
  CHECK(rbo(a, top_swapped, 0.9, 20) < rbo(a, bottom_swapped, 0.9, 20));
  CHECK_THROWS_AS(rbo(a, b, 1.0, 50), InvalidArgument);
}

TEST_CASE("nap rescales ap against the base rate") {
  CHECK(nap(1.0, 0.1) == doctest::Approx(1.0));
  CHECK(nap(0.1, 0.1) == doctest::Approx(0.0));
  CHECK(nap(0.55, 0.1) == doctest::Approx(0.5));
  CHECK(nap(0.05, 0.1) < 0.0);
  CHECK_THROWS_AS(nap(0.5, 1.0), InvalidArgument);
}
