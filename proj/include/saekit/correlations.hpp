#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "saekit/catalog.hpp"
#include "saekit/sae.hpp"
#include "saekit/store.hpp"

namespace saekit {

// Joint document counts for latent pairs (i < j), stored as a sorted vector
// of (packed key, count) to keep the full pair map compact at corpus scale.
class PairCounts {
 public:
  static uint64_t key(LatentId i, LatentId j) {
    return (static_cast<uint64_t>(i) << 32) | j;
  }

  explicit PairCounts(std::vector<std::pair<uint64_t, uint32_t>> sorted)
      : counts_(std::move(sorted)) {}
  PairCounts() = default;

  uint32_t at(LatentId i, LatentId j) const;
  size_t size() const { return counts_.size(); }
  const std::vector<std::pair<uint64_t, uint32_t>>& entries() const {
    return counts_;
  }

 private:
  std::vector<std::pair<uint64_t, uint32_t>> counts_;
};

// Exact joint document counts for all latent pairs whose marginal frequency
// is >= min_freq, via per-document pair expansion with sharded accumulation.
PairCounts cooccurrence_counts(const InvertedIndex& idx, double min_freq,
                               size_t n_threads = 0);

// Normalized pointwise mutual information over document counts; natural log
// internally (the value is base-invariant). n_ij = 0 maps to -1 and
// P(i,j) = 1 maps to +1, keeping the statistic total.
double npmi(uint64_t n_i, uint64_t n_j, uint64_t n_ij, uint64_t n_docs);

// CO = max(P(i|j), P(j|i)).
double conditional_occurrence(uint64_t n_i, uint64_t n_j, uint64_t n_ij);

struct PairStats {
  LatentId i = 0, j = 0;  // i < j
  uint64_t n_i = 0, n_j = 0, n_ij = 0;
  double npmi = 0.0;
  double co = 0.0;
  std::optional<double> label_sim;
  double trivial_fraction = 0.0;
  std::vector<std::string> example_doc_ids;  // up to 2 co-occurring docs
};

struct CorrelationParams {
  double npmi_min = 0.6;
  double sim_max = 0.2;
  double min_freq = 0.002;
  double trivial_max = 1.0;  // 1.0 disables the trivial-pair filter
  bool lenient = false;      // pairs without label vectors pass the sim filter
  size_t trivial_sample = 1000;  // max co-occurring docs examined per pair
};

// Pairs with high NPMI but low label similarity, non-trivial token overlap,
// and sufficient frequency; sorted by NPMI descending. `activations` (keyed
// by doc_id) enables the trivial-pair filter; `excluded` removes latents
// flagged as syntactic upstream.
std::vector<PairStats> find_correlated_pairs(
    const InvertedIndex& idx, const LatentCatalog& catalog,
    const CorrelationParams& params,
    const std::unordered_map<std::string, const DocActivations*>* activations =
        nullptr,
    const std::unordered_set<LatentId>* excluded = nullptr);

// Fraction of examined co-occurring docs where every co-activation of the
// pair lies on the same or adjacent token.
double trivial_fraction(LatentId i, LatentId j,
                        const std::vector<const DocActivations*>& cooccurring_docs);

// NPMI over judgment-derived occurrence counts.
double verified_npmi(const std::vector<bool>& judgments_i,
                     const std::vector<bool>& judgments_j);

}  // namespace saekit
