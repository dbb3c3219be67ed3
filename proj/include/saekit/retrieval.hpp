#pragma once

#include <functional>
#include <string>
#include <vector>

#include "saekit/catalog.hpp"
#include "saekit/store.hpp"

namespace saekit {

struct RetrievalRanking {
  std::string query_id;
  std::vector<std::string> ranked_doc_ids;            // best first
  std::vector<double> scores;                         // non-increasing
  std::vector<std::pair<LatentId, double>> latents_used;  // (latent, weight)
  bool all_zero = false;  // flagged when no candidate fired anywhere
};

// Optional LLM rerank hook: receives the candidate list, returns a
// subset/reorder of it.
using RerankFn = std::function<std::vector<std::pair<LatentId, double>>(
    const std::vector<std::pair<LatentId, double>>&)>;

// Candidate latents by label-query cosine; when a reranker is supplied its
// output replaces the list but must be a subset of it.
std::vector<std::pair<LatentId, double>> select_candidate_latents(
    const std::vector<double>& query_vec, const LatentCatalog& catalog,
    size_t k_candidates, const RerankFn* rerank = nullptr);

// score(d) = sum_i softmax(sim_i / T) * v_hat(d, i), with each candidate
// latent's activations normalized by its corpus maximum. Full-corpus ranking,
// descending, ties by doc id.
RetrievalRanking score_documents(
    const std::vector<SaeEmbedding>& embs,
    const std::vector<std::pair<LatentId, double>>& candidates, double temperature,
    const std::string& query_id = "");

double average_precision(const std::vector<bool>& relevance_flags,
                         size_t n_relevant);
double precision_at_k(const std::vector<bool>& relevance_flags, size_t k);
double mean_metric(const std::vector<double>& per_query);

// Reciprocal rank fusion: score(d) = sum_r 1 / (k_rrf + rank_r(d)), ranks
// 1-based; docs missing from a ranking contribute 0 for it.
std::vector<std::string> rrf_fuse(
    const std::vector<std::vector<std::string>>& rankings, double k_rrf = 60.0);

// Truncated rank-biased overlap, normalized so identical prefixes score 1 at
// any depth.
double rbo(const std::vector<std::string>& ranking_a,
           const std::vector<std::string>& ranking_b, double p = 0.98,
           size_t depth = 50);

// Normalized average precision: (ap - f) / (1 - f).
double nap(double ap, double base_rate);

}  // namespace saekit
