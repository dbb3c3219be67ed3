#pragma once

#include <string>
#include <vector>

#include "saekit/catalog.hpp"
#include "saekit/gateway.hpp"
#include "saekit/store.hpp"

namespace saekit {

struct DiffEntry {
  LatentId latent_id = 0;
  double freq_target = 0.0;
  double freq_other = 0.0;
  double delta = 0.0;  // freq_target - freq_other
  std::vector<std::string> activating_doc_ids;      // up to 2
  std::vector<std::string> non_activating_doc_ids;  // up to 2
};

// Latents ranked by frequency difference between two corpora; entries with
// |delta| >= min_delta, target-enriched first.
std::vector<DiffEntry> diff_pair(const InvertedIndex& idx_target,
                                 const InvertedIndex& idx_other,
                                 double min_delta = 0.03);

// freq_other is the per-latent maximum frequency across the other corpora.
std::vector<DiffEntry> diff_one_vs_rest(
    const InvertedIndex& idx_target,
    const std::vector<const InvertedIndex*>& idx_others, double min_delta = 0.03);

// First n entries by delta descending, ties by lower latent id.
std::vector<DiffEntry> top_diff_latents(std::vector<DiffEntry> entries,
                                        size_t n = 200);

// Bundles labeled top-diff latents with activating/non-activating examples
// into a summarize task for the gateway. Unlabeled entries are skipped with a
// warning; the bundle is still produced.
struct HypothesisBundle {
  AnnotationTask task;
  std::vector<LatentId> skipped;  // entries dropped for missing labels
};
HypothesisBundle export_hypothesis_bundle(
    const std::vector<DiffEntry>& entries, const LatentCatalog& catalog,
    const std::vector<CorpusDoc>& corpus_texts, const std::string& query,
    size_t max_bundle_bytes = 1 << 20,
    const std::string& template_id = "summarize_diff.v1");

// Verified frequency difference: counts YES judgments per dataset.
double verified_frequency_difference(const std::vector<bool>& judgments_target,
                                     const std::vector<bool>& judgments_other);

}  // namespace saekit
