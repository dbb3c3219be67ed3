#include "saekit/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace saekit {

std::vector<std::pair<LatentId, double>> select_candidate_latents(
    const std::vector<double>& query_vec, const LatentCatalog& catalog,
    size_t k_candidates, const RerankFn* rerank) {
  if (k_candidates < 1) {
    throw InvalidArgument("select_candidate_latents: k_candidates must be >= 1");
  }
  auto candidates = catalog.top_k_latents(query_vec, k_candidates);
  if (rerank == nullptr || !*rerank) return candidates;

  auto reranked = (*rerank)(candidates);
  std::unordered_set<LatentId> allowed;
  for (const auto& [id, sim] : candidates) allowed.insert(id);
  std::string offending;
  for (const auto& [id, sim] : reranked) {
    if (allowed.count(id) == 0) {
      offending += (offending.empty() ? "" : ", ") + std::to_string(id);
    }
  }
  if (!offending.empty()) {
    throw InvalidArgument(
        "select_candidate_latents: rerank returned latents outside the "
        "candidate set: " + offending);
  }
  return reranked;
}

RetrievalRanking score_documents(
    const std::vector<SaeEmbedding>& embs,
    const std::vector<std::pair<LatentId, double>>& candidates, double temperature,
    const std::string& query_id) {
  if (candidates.empty()) throw InvalidArgument("score_documents: no candidates");
  if (!(temperature > 0.0)) {
    throw InvalidArgument("score_documents: temperature must be > 0");
  }

  // Softmax over similarities with temperature; max-shifted for stability.
  double max_sim = candidates[0].second;
  for (const auto& [id, sim] : candidates) max_sim = std::max(max_sim, sim);
  std::vector<double> weights(candidates.size());
  double total = 0.0;
  for (size_t c = 0; c < candidates.size(); ++c) {
    weights[c] = std::exp((candidates[c].second - max_sim) / temperature);
    total += weights[c];
  }
  for (auto& w : weights) w /= total;

  // Per-latent corpus max for activation normalization.
  std::unordered_map<LatentId, double> corpus_max;
  std::unordered_map<LatentId, size_t> slot;
  for (size_t c = 0; c < candidates.size(); ++c) {
    corpus_max.emplace(candidates[c].first, 0.0);
    slot.emplace(candidates[c].first, c);
  }
  for (const auto& e : embs) {
    for (const auto& [id, value] : e.entries) {
      auto it = corpus_max.find(id);
      if (it != corpus_max.end() && value > it->second) it->second = value;
    }
  }

  RetrievalRanking ranking;
  ranking.query_id = query_id;
  for (size_t c = 0; c < candidates.size(); ++c) {
    ranking.latents_used.emplace_back(candidates[c].first, weights[c]);
  }

  std::vector<std::pair<double, const std::string*>> scored;
  scored.reserve(embs.size());
  bool any_nonzero = false;
  for (const auto& e : embs) {
    double score = 0.0;
    for (const auto& [id, value] : e.entries) {
      auto it = slot.find(id);
      if (it == slot.end()) continue;
      const double cmax = corpus_max.at(id);
      if (cmax > 0.0) score += weights[it->second] * (value / cmax);
    }
    if (score != 0.0) any_nonzero = true;
    scored.emplace_back(score, &e.doc_id);
  }
  ranking.all_zero = !any_nonzero;

  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return *a.second < *b.second;
  });
  for (const auto& [score, id] : scored) {
    ranking.ranked_doc_ids.push_back(*id);
    ranking.scores.push_back(score);
  }
  return ranking;
}

double average_precision(const std::vector<bool>& relevance_flags,
                         size_t n_relevant) {
  if (n_relevant == 0) throw InvalidArgument("average_precision: zero relevant");
  double sum = 0.0;
  size_t hits = 0;
  for (size_t rank = 0; rank < relevance_flags.size(); ++rank) {
    if (relevance_flags[rank]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  return sum / static_cast<double>(n_relevant);
}

double precision_at_k(const std::vector<bool>& relevance_flags, size_t k) {
  if (k == 0) throw InvalidArgument("precision_at_k: k must be >= 1");
  size_t hits = 0;
  // Flags shorter than k count as non-relevant padding.
  for (size_t rank = 0; rank < k && rank < relevance_flags.size(); ++rank) {
    if (relevance_flags[rank]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

double mean_metric(const std::vector<double>& per_query) {
  if (per_query.empty()) throw InvalidArgument("mean_metric: empty input");
  return std::accumulate(per_query.begin(), per_query.end(), 0.0) /
         static_cast<double>(per_query.size());
}

std::vector<std::string> rrf_fuse(
    const std::vector<std::vector<std::string>>& rankings, double k_rrf) {
  if (rankings.empty()) throw InvalidArgument("rrf_fuse: no rankings");
  std::unordered_map<std::string, double> score;
  for (const auto& ranking : rankings) {
    for (size_t rank = 0; rank < ranking.size(); ++rank) {
      score[ranking[rank]] += 1.0 / (k_rrf + static_cast<double>(rank + 1));
    }
  }
  std::vector<std::pair<double, std::string>> scored;
  scored.reserve(score.size());
  for (auto& [id, s] : score) scored.emplace_back(s, id);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::string> fused;
  fused.reserve(scored.size());
  for (auto& [s, id] : scored) fused.push_back(std::move(id));
  return fused;
}

double rbo(const std::vector<std::string>& ranking_a,
           const std::vector<std::string>& ranking_b, double p, size_t depth) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("rbo: p must be in (0, 1)");
  if (depth < 1) throw InvalidArgument("rbo: depth must be >= 1");

  // Evaluate only as deep as the longer ranking: past that point the
  // agreement can never grow, and normalizing over phantom depths would keep
  // identical rankings from scoring 1.
  depth = std::min(depth, std::max(ranking_a.size(), ranking_b.size()));
  if (depth == 0) return 1.0;  // two empty rankings agree trivially

  // Incremental overlap |A_{1..d} ∩ B_{1..d}|; elements within each ranking
  // are assumed unique.
  std::unordered_set<std::string> seen_a, seen_b;
  size_t overlap = 0;
  double weighted = 0.0, norm = 0.0;
  double weight = 1.0;  // p^{d-1}
  for (size_t d = 1; d <= depth; ++d) {
    const std::string* x = d - 1 < ranking_a.size() ? &ranking_a[d - 1] : nullptr;
    const std::string* y = d - 1 < ranking_b.size() ? &ranking_b[d - 1] : nullptr;
    if (x != nullptr && y != nullptr && *x == *y) {
      ++overlap;
      seen_a.insert(*x);
      seen_b.insert(*y);
    } else {
      if (x != nullptr) {
        if (seen_b.count(*x) != 0) ++overlap;
        seen_a.insert(*x);
      }
      if (y != nullptr) {
        if (seen_a.count(*y) != 0) ++overlap;
        seen_b.insert(*y);
      }
    }
    weighted += weight * static_cast<double>(overlap) / static_cast<double>(d);
    norm += weight;
    weight *= p;
  }
  if (norm == 0.0) return 0.0;
  return weighted / norm;
}

double nap(double ap, double base_rate) {
  if (base_rate >= 1.0) throw InvalidArgument("nap: base rate must be < 1");
  return (ap - base_rate) / (1.0 - base_rate);
}

}  // namespace saekit
