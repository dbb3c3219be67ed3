#include "saekit/clustering.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace saekit {

namespace {

double jaccard(const std::vector<LatentId>& a, const std::vector<LatentId>& b) {
  if (a.empty() && b.empty()) return 0.0;
  size_t inter = 0;
  size_t ia = 0, ib = 0;
  while (ia < a.size() && ib < b.size()) {
    if (a[ia] == b[ib]) {
      ++inter;
      ++ia;
      ++ib;
    } else if (a[ia] < b[ib]) {
      ++ia;
    } else {
      ++ib;
    }
  }
  const size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Seeded k-means++ on row vectors; at most 300 Lloyd iterations.
std::vector<int> kmeans(const Eigen::MatrixXd& points, size_t k, uint64_t seed) {
  const size_t n = points.rows();
  Rng rng(splitmix64(seed ^ 0x6b6d65616e73ULL));

  // k-means++ init.
  std::vector<size_t> centers_idx;
  centers_idx.push_back(rng.uniform_index(n));
  Eigen::VectorXd dist2 = Eigen::VectorXd::Constant(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    dist2[i] = (points.row(i) - points.row(centers_idx[0])).squaredNorm();
  }
  while (centers_idx.size() < k) {
    const double total = dist2.sum();
    size_t chosen;
    if (total <= 0.0) {
      chosen = rng.uniform_index(n);
    } else {
      double r = rng.uniform() * total;
      chosen = n - 1;
      for (size_t i = 0; i < n; ++i) {
        r -= dist2[i];
        if (r <= 0.0) {
          chosen = i;
          break;
        }
      }
    }
    centers_idx.push_back(chosen);
    for (size_t i = 0; i < n; ++i) {
      dist2[i] = std::min(
          dist2[i], (points.row(i) - points.row(chosen)).squaredNorm());
    }
  }

  Eigen::MatrixXd centers(k, points.cols());
  for (size_t c = 0; c < k; ++c) centers.row(c) = points.row(centers_idx[c]);

  std::vector<int> assignment(n, 0);
  for (int iter = 0; iter < 300; ++iter) {
    bool changed = false;
    for (size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (size_t c = 0; c < k; ++c) {
        const double d = (points.row(i) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      if (assignment[i] != best) {
        assignment[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;

    centers.setZero();
    std::vector<size_t> sizes(k, 0);
    for (size_t i = 0; i < n; ++i) {
      centers.row(assignment[i]) += points.row(i);
      ++sizes[assignment[i]];
    }
    for (size_t c = 0; c < k; ++c) {
      if (sizes[c] > 0) {
        centers.row(c) /= static_cast<double>(sizes[c]);
      } else {
        // Re-seed an emptied center on the point farthest from its center.
        size_t far = 0;
        double far_d = -1.0;
        for (size_t i = 0; i < n; ++i) {
          const double d =
              (points.row(i) - centers.row(assignment[i])).squaredNorm();
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        centers.row(c) = points.row(far);
      }
    }
  }
  return assignment;
}

}  // namespace

Eigen::MatrixXd jaccard_matrix(const std::vector<BinaryEmbedding>& embs) {
  const size_t n = embs.size();
  if (n < 2) throw InvalidArgument("jaccard_matrix: need at least 2 docs");
  Eigen::MatrixXd S(n, n);
  for (size_t a = 0; a < n; ++a) {
    S(a, a) = 1.0;
    for (size_t b = a + 1; b < n; ++b) {
      const double v = jaccard(embs[a].active, embs[b].active);
      S(a, b) = v;
      S(b, a) = v;
    }
  }
  return S;
}

ClusterResult spectral_cluster(const Eigen::MatrixXd& S, size_t k, uint64_t seed) {
  const size_t n = S.rows();
  if (S.cols() != static_cast<Eigen::Index>(n)) {
    throw InvalidArgument("spectral_cluster: similarity matrix not square");
  }
  if (k < 2) throw InvalidArgument("spectral_cluster: k must be >= 2");
  if (k > n) throw InvalidArgument("spectral_cluster: k exceeds number of docs");

  // Normalized symmetric Laplacian embedding. Zero-degree (isolated) rows get
  // unit degree so normalization stays finite; their spectral rows end up at
  // the origin and k-means attaches them to the nearest centroid.
  Eigen::VectorXd degree = S.rowwise().sum();
  Eigen::VectorXd inv_sqrt(n);
  for (size_t i = 0; i < n; ++i) {
    inv_sqrt[i] = degree[i] > 0.0 ? 1.0 / std::sqrt(degree[i]) : 1.0;
  }
  const Eigen::MatrixXd normalized =
      inv_sqrt.asDiagonal() * S * inv_sqrt.asDiagonal();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(normalized);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("spectral_cluster: eigendecomposition failed");
  }
  // Eigen returns eigenvalues ascending; take the top k columns.
  Eigen::MatrixXd embedding =
      solver.eigenvectors().rightCols(static_cast<Eigen::Index>(k));

  // Fix eigenvector sign for determinism: largest-magnitude entry positive.
  for (Eigen::Index c = 0; c < embedding.cols(); ++c) {
    Eigen::Index arg = 0;
    embedding.col(c).cwiseAbs().maxCoeff(&arg);
    if (embedding(arg, c) < 0.0) embedding.col(c) = -embedding.col(c);
  }

  // Row renormalization.
  for (size_t i = 0; i < n; ++i) {
    const double norm = embedding.row(i).norm();
    if (norm > 0.0) embedding.row(i) /= norm;
  }

  ClusterResult result;
  result.n_clusters = k;
  result.seed = seed;
  result.assignment = kmeans(embedding, k, seed);

  result.mean_intra_similarity.assign(k, 0.0);
  std::vector<size_t> pair_counts(k, 0);
  for (size_t a = 0; a < n; ++a) {
    for (size_t b = a + 1; b < n; ++b) {
      if (result.assignment[a] == result.assignment[b]) {
        result.mean_intra_similarity[result.assignment[a]] += S(a, b);
        ++pair_counts[result.assignment[a]];
      }
    }
  }
  for (size_t c = 0; c < k; ++c) {
    if (pair_counts[c] > 0) {
      result.mean_intra_similarity[c] /= static_cast<double>(pair_counts[c]);
    } else {
      result.mean_intra_similarity[c] = 1.0;  // singleton cluster
    }
  }
  return result;
}

TargetedClusterResult targeted_cluster(
    const std::vector<SaeEmbedding>& embs, const LatentCatalog& catalog,
    const std::vector<std::vector<double>>& keyphrase_vecs, size_t k_latents,
    size_t k_clusters, uint64_t seed) {
  const std::vector<LatentId> keep =
      catalog.union_keyphrase_latents(keyphrase_vecs, k_latents);

  TargetedClusterResult out;
  out.latents = keep;
  std::vector<BinaryEmbedding> filtered;
  for (uint32_t ord = 0; ord < embs.size(); ++ord) {
    BinaryEmbedding b = binarize(filter_latents(embs[ord], keep));
    if (b.active.empty()) {
      out.dropped.push_back(embs[ord].doc_id);
      continue;
    }
    out.kept.push_back(ord);
    filtered.push_back(std::move(b));
  }
  if (filtered.empty()) {
    throw InvalidArgument("targeted_cluster: all docs empty after latent filtering");
  }
  out.clusters = spectral_cluster(jaccard_matrix(filtered), k_clusters, seed);
  return out;
}

ClusterDescription describe_cluster(int cluster, const ClusterResult& result,
                                    const std::vector<BinaryEmbedding>& embs,
                                    const Eigen::MatrixXd& S) {
  std::vector<BinaryEmbedding> members, rest;
  std::vector<size_t> member_idx;
  for (size_t i = 0; i < embs.size(); ++i) {
    if (result.assignment[i] == cluster) {
      members.push_back(embs[i]);
      member_idx.push_back(i);
    } else {
      rest.push_back(embs[i]);
    }
  }
  if (members.empty() || rest.empty()) {
    throw InvalidArgument("describe_cluster: cluster must be non-empty and non-total");
  }

  ClusterDescription desc;
  desc.cluster = cluster;
  desc.top_latents =
      top_diff_latents(diff_pair(build_index(members), build_index(rest), 0.0), 5);

  // Central members: highest mean similarity to the other members.
  std::vector<std::pair<double, size_t>> centrality;
  for (size_t a : member_idx) {
    double total = 0.0;
    for (size_t b : member_idx) {
      if (a != b) total += S(a, b);
    }
    const double mean = member_idx.size() > 1
                            ? total / static_cast<double>(member_idx.size() - 1)
                            : 1.0;
    centrality.emplace_back(mean, a);
  }
  std::sort(centrality.begin(), centrality.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second < y.second;
  });
  for (size_t k = 0; k < std::min<size_t>(5, centrality.size()); ++k) {
    desc.central_doc_ids.push_back(embs[centrality[k].second].doc_id);
  }
  return desc;
}

double conductance_zscore(const std::vector<uint32_t>& members,
                          const std::vector<std::vector<double>>& dense_vecs,
                          size_t n_random, size_t knn_k, uint64_t seed) {
  const size_t n = dense_vecs.size();
  if (members.size() <= 1 || members.size() >= n) {
    throw InvalidArgument("conductance_zscore: cluster size must be in (1, n)");
  }

  // Mutual-kNN graph with cosine weights. Negative cosines are clamped to 0
  // so volumes stay non-negative.
  Eigen::MatrixXd sim(n, n);
  for (size_t a = 0; a < n; ++a) {
    sim(a, a) = 0.0;
    for (size_t b = a + 1; b < n; ++b) {
      const double c = std::max(0.0, cosine(dense_vecs[a], dense_vecs[b]));
      sim(a, b) = c;
      sim(b, a) = c;
    }
  }
  std::vector<std::vector<size_t>> knn(n);
  for (size_t a = 0; a < n; ++a) {
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    order.erase(order.begin() + a);
    const size_t kk = std::min(knn_k, order.size());
    std::partial_sort(order.begin(), order.begin() + kk, order.end(),
                      [&](size_t x, size_t y) {
                        if (sim(a, x) != sim(a, y)) return sim(a, x) > sim(a, y);
                        return x < y;
                      });
    order.resize(kk);
    std::sort(order.begin(), order.end());
    knn[a] = std::move(order);
  }
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
  for (size_t a = 0; a < n; ++a) {
    for (size_t b : knn[a]) {
      if (b > a && std::binary_search(knn[b].begin(), knn[b].end(), a)) {
        W(a, b) = sim(a, b);
        W(b, a) = sim(a, b);
      }
    }
  }
  const Eigen::VectorXd degree = W.rowwise().sum();

  auto conductance = [&](const std::vector<uint32_t>& set) {
    std::vector<char> inside(n, 0);
    for (uint32_t m : set) inside[m] = 1;
    double cut = 0.0, vol_in = 0.0;
    for (size_t a = 0; a < n; ++a) {
      if (inside[a]) vol_in += degree[a];
      for (size_t b = a + 1; b < n; ++b) {
        if (W(a, b) > 0.0 && inside[a] != inside[b]) cut += W(a, b);
      }
    }
    const double vol_out = degree.sum() - vol_in;
    const double denom = std::min(vol_in, vol_out);
    if (cut == 0.0) return 0.0;
    if (denom <= 0.0) return 1.0;
    return cut / denom;
  };

  const double phi = conductance(members);

  Rng rng(splitmix64(seed ^ 0x636f6e64ULL));
  std::vector<double> random_phi;
  random_phi.reserve(n_random);
  std::vector<uint32_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (size_t r = 0; r < n_random; ++r) {
    // Partial Fisher-Yates draw of a random same-size member set.
    for (size_t k = 0; k < members.size(); ++k) {
      const size_t pick = k + rng.uniform_index(n - k);
      std::swap(pool[k], pool[pick]);
    }
    random_phi.push_back(
        conductance({pool.begin(), pool.begin() + members.size()}));
  }
  const double mean =
      std::accumulate(random_phi.begin(), random_phi.end(), 0.0) /
      static_cast<double>(random_phi.size());
  double var = 0.0;
  for (double v : random_phi) var += (v - mean) * (v - mean);
  var /= static_cast<double>(random_phi.size());
  const double sd = std::sqrt(var);
  if (sd == 0.0) return 0.0;
  return (phi - mean) / sd;
}

std::vector<int> align_clusters(const Eigen::MatrixXd& confusion) {
  const size_t rows = confusion.rows();
  const size_t cols = confusion.cols();
  if (rows == 0 || cols == 0) throw InvalidArgument("align_clusters: empty matrix");
  if (confusion.minCoeff() < 0.0) {
    throw InvalidArgument("align_clusters: negative confusion mass");
  }

  // Hungarian algorithm (potentials form) on a square padded cost matrix,
  // minimizing negated mass.
  const size_t n = std::max(rows, cols);
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  for (size_t r = 0; r < rows; ++r) {
    for (size_t c = 0; c < cols; ++c) cost[r][c] = -confusion(r, c);
  }

  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<size_t> match(n + 1, 0);  // column -> matched row (1-based)
  for (size_t r = 1; r <= n; ++r) {
    match[0] = r;
    size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    std::vector<size_t> way(n + 1, 0);
    do {
      used[j0] = 1;
      const size_t i0 = match[j0];
      double delta = kInf;
      size_t j1 = 0;
      for (size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> out(rows, -1);
  for (size_t j = 1; j <= n; ++j) {
    const size_t r = match[j];
    if (r >= 1 && r <= rows && j <= cols) out[r - 1] = static_cast<int>(j - 1);
  }
  return out;
}

std::vector<double> per_cluster_accuracy(const std::vector<int>& original,
                                         const std::vector<int>& judged,
                                         size_t n_clusters) {
  if (original.size() != judged.size() || original.empty()) {
    throw InvalidArgument("per_cluster_accuracy: doc set mismatch");
  }
  std::vector<size_t> kept(n_clusters, 0), sizes(n_clusters, 0);
  for (size_t d = 0; d < original.size(); ++d) {
    const int c = original[d];
    if (c < 0 || static_cast<size_t>(c) >= n_clusters) {
      throw InvalidArgument("per_cluster_accuracy: cluster index out of range");
    }
    ++sizes[c];
    if (judged[d] == c) ++kept[c];
  }
  std::vector<double> acc(n_clusters, 0.0);
  for (size_t c = 0; c < n_clusters; ++c) {
    if (sizes[c] > 0) {
      acc[c] = static_cast<double>(kept[c]) / static_cast<double>(sizes[c]);
    }
  }
  return acc;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw InvalidArgument("adjusted_rand_index: labelings must be equal-length");
  }
  std::unordered_map<int, std::unordered_map<int, uint64_t>> table;
  std::unordered_map<int, uint64_t> row_sums, col_sums;
  for (size_t i = 0; i < a.size(); ++i) {
    ++table[a[i]][b[i]];
    ++row_sums[a[i]];
    ++col_sums[b[i]];
  }
  auto choose2 = [](uint64_t x) {
    return static_cast<double>(x) * static_cast<double>(x - 1) / 2.0;
  };
  double sum_cells = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& [r, inner] : table) {
    for (const auto& [c, count] : inner) sum_cells += choose2(count);
  }
  for (const auto& [r, count] : row_sums) sum_rows += choose2(count);
  for (const auto& [c, count] : col_sums) sum_cols += choose2(count);
  const double total = choose2(a.size());
  const double expected = sum_rows * sum_cols / total;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;  // both labelings degenerate
  return (sum_cells - expected) / (max_index - expected);
}

}  // namespace saekit
