#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "saekit/common.hpp"
#include "saekit/gateway.hpp"
#include "saekit/sae.hpp"

namespace saekit {

enum class LabelProvenance { kOriginal, kRelabeled };

struct LatentCatalogEntry {
  LatentId latent_id = 0;
  std::string label;
  std::vector<double> label_vec;  // unit norm when present; empty = no vector
  LabelProvenance provenance = LabelProvenance::kOriginal;

  bool has_vector() const { return !label_vec.empty(); }
};

// Latent id -> label (+ optional unit-norm label embedding). Immutable after
// load; similarity queries are exhaustive scans over entries with vectors.
class LatentCatalog {
 public:
  void insert(LatentCatalogEntry entry);

  const LatentCatalogEntry* find(LatentId id) const;
  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<LatentCatalogEntry>& entries() const { return entries_; }

  // Cosine similarity of two labeled latents' vectors.
  double label_similarity(LatentId i, LatentId j) const;

  // k highest-cosine entries against a unit query vector, descending,
  // ties broken by lower latent id. Entries without vectors are skipped.
  std::vector<std::pair<LatentId, double>> top_k_latents(
      const std::vector<double>& query_vec, size_t k) const;

  // Union over keyphrases of per-keyphrase top-k id sets, sorted.
  std::vector<LatentId> union_keyphrase_latents(
      const std::vector<std::vector<double>>& keyphrase_vecs, size_t k) const;

 private:
  std::vector<LatentCatalogEntry> entries_;
  std::unordered_map<LatentId, size_t> by_id_;
};

// Catalog JSONL I/O. In lenient mode malformed lines are reported to stderr
// and skipped; in strict mode they abort the load.
LatentCatalog load_catalog(const std::string& path, bool lenient = false);
void save_catalog(const LatentCatalog& catalog, const std::string& path);

// Builds a relabel task: marked activating exhibits plus plain non-activating
// ones. Tokens where the latent fires are wrapped in << >>.
AnnotationTask make_relabel_task(
    LatentId latent, const std::vector<DocActivations>& activating,
    const std::vector<std::string>& activating_texts,
    const std::vector<std::string>& non_activating_texts,
    const std::string& template_id = "relabel.v1");

double cosine(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace saekit
