#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "saekit/catalog.hpp"
#include "saekit/sae.hpp"

namespace saekit {

struct DiffPlant {
  LatentId latent = 0;
  double rate_a = 0.0;
  double rate_b = 0.0;
};

struct PairPlant {
  LatentId i = 0, j = 0;
  double joint_rate = 0.0;
  double label_sim_target = 0.0;
};

struct BlocksPlant {
  size_t k = 2;
  size_t latents_per_block = 4;
  double noise = 0.0;
};

struct RelevancePlant {
  LatentId latent = 0;
  size_t n_relevant = 0;
};

// Directives for planting recoverable structure into a generated corpus.
struct SynthSpec {
  size_t n_docs = 1000;
  uint32_t d_sae = 256;
  double background_rate = 0.01;
  uint64_t seed = 0;
  uint32_t tokens_min = 6;
  uint32_t tokens_max = 24;
  size_t label_dim = 32;
  std::vector<DiffPlant> diffs;
  std::vector<PairPlant> pairs;
  std::vector<BlocksPlant> blocks;
  std::vector<RelevancePlant> relevance;

  static SynthSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Everything planted, exactly as generated, for recovery scoring.
struct GroundTruth {
  uint64_t seed = 0;
  std::vector<DiffPlant> diffs;
  std::vector<std::pair<LatentId, LatentId>> pairs;
  // One entry per blocks directive: the latent ids per block, the per-doc
  // block assignment (per corpus), and the shared axis direction whose
  // nearest catalog labels are exactly this axis's latents.
  struct Axis {
    std::vector<std::vector<LatentId>> block_latents;
    std::map<std::string, std::vector<int>> assignment;
    std::vector<double> axis_vec;
  };
  std::vector<Axis> axes;
  struct Relevance {
    LatentId latent = 0;
    std::vector<std::string> relevant_doc_ids;
  };
  std::vector<Relevance> relevance;

  nlohmann::json to_json() const;
  static GroundTruth from_json(const nlohmann::json& j);
};

struct GeneratedData {
  // "main", or "A"/"B" when diff plants are present.
  std::map<std::string, std::vector<DocActivations>> corpora;
  GroundTruth truth;
  LatentCatalog catalog;
};

// Deterministic given spec.seed; per-document substreams keep the output
// independent of thread count.
GeneratedData generate(const SynthSpec& spec);

// ---------------------------------------------------------------------------
// Recovery scoring.
// ---------------------------------------------------------------------------

struct SetRecovery {
  double precision = 0.0;
  double recall = 0.0;
  size_t n_found = 0;
  size_t n_planted = 0;
};

SetRecovery pair_recovery(const std::vector<std::pair<LatentId, LatentId>>& found,
                          const std::vector<std::pair<LatentId, LatentId>>& planted);

// 1-based rank of the planted latent in a ranked latent list; 0 if absent.
size_t rank_of_latent(const std::vector<LatentId>& ranked, LatentId planted);

// MAP of a ranking against a relevant doc-id set.
double map_against_truth(const std::vector<std::string>& ranked_doc_ids,
                         const std::vector<std::string>& relevant_doc_ids);

}  // namespace saekit
