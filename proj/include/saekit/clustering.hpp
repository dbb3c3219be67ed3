#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "saekit/catalog.hpp"
#include "saekit/diffing.hpp"
#include "saekit/store.hpp"

namespace saekit {

struct ClusterResult {
  size_t n_clusters = 0;
  std::vector<int> assignment;  // doc ordinal -> cluster index
  std::vector<double> mean_intra_similarity;  // per cluster
  uint64_t seed = 0;
};

struct ClusterDescription {
  int cluster = 0;
  std::vector<DiffEntry> top_latents;       // 5 by member-vs-rest diff
  std::vector<std::string> central_doc_ids; // 5 highest mean intra-similarity
  std::string label;                        // gateway-produced, optional
};

// Pairwise Jaccard similarity of active-latent sets. Unit diagonal; a pair of
// empty sets scores 0.
Eigen::MatrixXd jaccard_matrix(const std::vector<BinaryEmbedding>& embs);

// Normalized-symmetric-Laplacian spectral embedding (top-k eigenvectors of
// D^{-1/2} S D^{-1/2}, rows renormalized) followed by seeded k-means++ with
// at most 300 iterations. Deterministic given (S, k, seed).
ClusterResult spectral_cluster(const Eigen::MatrixXd& S, size_t k, uint64_t seed);

struct TargetedClusterResult {
  ClusterResult clusters;           // over kept docs only
  std::vector<uint32_t> kept;       // original ordinals of clustered docs
  std::vector<std::string> dropped; // doc ids empty after latent filtering
  std::vector<LatentId> latents;    // the union keyphrase latent set
};

// Restrict embeddings to latents near the keyphrases, drop docs left empty,
// then cluster the filtered binary embeddings.
TargetedClusterResult targeted_cluster(
    const std::vector<SaeEmbedding>& embs, const LatentCatalog& catalog,
    const std::vector<std::vector<double>>& keyphrase_vecs, size_t k_latents,
    size_t k_clusters, uint64_t seed);

// Top-5 member-vs-rest diff latents plus the 5 most central members.
ClusterDescription describe_cluster(int cluster, const ClusterResult& result,
                                    const std::vector<BinaryEmbedding>& embs,
                                    const Eigen::MatrixXd& S);

// z-score of the cluster's conductance in a mutual-kNN cosine graph over
// dense vectors, against random same-size member sets. Lower = tighter.
double conductance_zscore(const std::vector<uint32_t>& members,
                          const std::vector<std::vector<double>>& dense_vecs,
                          size_t n_random = 100, size_t knn_k = 15,
                          uint64_t seed = 0);

// Maximum-mass assignment of clusters to labels (Hungarian algorithm).
// Returns for each row (cluster) the matched column, or -1 when there are
// more rows than columns.
std::vector<int> align_clusters(const Eigen::MatrixXd& confusion);

// Fraction of each original cluster that the judged assignment keeps.
std::vector<double> per_cluster_accuracy(const std::vector<int>& original,
                                         const std::vector<int>& judged,
                                         size_t n_clusters);

// Adjusted Rand index between two labelings (used by recovery evaluation).
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace saekit
