#include "saekit/correlations.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace saekit {

uint32_t PairCounts::at(LatentId i, LatentId j) const {
  if (i > j) std::swap(i, j);
  const uint64_t k = key(i, j);
  auto it = std::lower_bound(counts_.begin(), counts_.end(), k,
                             [](const auto& e, uint64_t v) { return e.first < v; });
  if (it == counts_.end() || it->first != k) return 0;
  return it->second;
}

PairCounts cooccurrence_counts(const InvertedIndex& idx, double min_freq,
                               size_t n_threads) {
  if (idx.n_docs == 0) throw InvalidArgument("cooccurrence_counts: empty corpus");
  if (min_freq < 0.0 || min_freq >= 1.0) {
    throw InvalidArgument("cooccurrence_counts: min_freq must be in [0,1)");
  }
  if (n_threads == 0) {
    n_threads = std::max<size_t>(1, std::thread::hardware_concurrency());
  }

  // Qualifying latents and the forward corpus restricted to them.
  std::vector<std::vector<LatentId>> active_by_doc(idx.n_docs);
  for (const auto& [id, postings] : idx.postings) {
    const double freq =
        static_cast<double>(postings.size()) / static_cast<double>(idx.n_docs);
    if (freq < min_freq) continue;
    for (uint32_t ord : postings) active_by_doc[ord].push_back(id);
  }
  for (auto& active : active_by_doc) std::sort(active.begin(), active.end());

  // Pair expansion sharded by the low bits of i. Each worker emits packed
  // keys into thread-local shard buffers; shards are then sorted and
  // run-length counted independently, bounding both memory and merge cost.
  constexpr size_t kShards = 32;
  std::vector<std::vector<std::vector<uint64_t>>> local(n_threads);
  for (auto& shards : local) shards.resize(kShards);

  std::vector<std::thread> workers;
  workers.reserve(n_threads);
  const size_t chunk = (idx.n_docs + n_threads - 1) / n_threads;
  for (size_t t = 0; t < n_threads; ++t) {
    workers.emplace_back([&, t]() {
      auto& shards = local[t];
      const size_t begin = t * chunk;
      const size_t end = std::min(idx.n_docs, begin + chunk);
      for (size_t d = begin; d < end; ++d) {
        const auto& active = active_by_doc[d];
        for (size_t a = 0; a + 1 < active.size(); ++a) {
          const uint64_t hi = static_cast<uint64_t>(active[a]) << 32;
          auto& shard = shards[active[a] % kShards];
          for (size_t b = a + 1; b < active.size(); ++b) {
            shard.push_back(hi | active[b]);
          }
        }
      }
    });
  }
  for (auto& w : workers) w.join();

  std::vector<std::vector<std::pair<uint64_t, uint32_t>>> shard_counts(kShards);
  std::atomic<size_t> next_shard{0};
  auto reducer = [&]() {
    for (;;) {
      const size_t s = next_shard.fetch_add(1);
      if (s >= kShards) return;
      size_t total = 0;
      for (size_t t = 0; t < n_threads; ++t) total += local[t][s].size();
      std::vector<uint64_t> keys;
      keys.reserve(total);
      for (size_t t = 0; t < n_threads; ++t) {
        keys.insert(keys.end(), local[t][s].begin(), local[t][s].end());
        local[t][s].clear();
        local[t][s].shrink_to_fit();
      }
      std::sort(keys.begin(), keys.end());
      auto& out = shard_counts[s];
      for (size_t k = 0; k < keys.size();) {
        size_t run = k + 1;
        while (run < keys.size() && keys[run] == keys[k]) ++run;
        out.emplace_back(keys[k], static_cast<uint32_t>(run - k));
        k = run;
      }
    }
  };
  workers.clear();
  for (size_t t = 0; t < n_threads; ++t) workers.emplace_back(reducer);
  for (auto& w : workers) w.join();

  size_t total_pairs = 0;
  for (const auto& sc : shard_counts) total_pairs += sc.size();
  std::vector<std::pair<uint64_t, uint32_t>> merged;
  merged.reserve(total_pairs);
  for (auto& sc : shard_counts) {
    merged.insert(merged.end(), sc.begin(), sc.end());
    sc.clear();
    sc.shrink_to_fit();
  }
  std::sort(merged.begin(), merged.end());
  return PairCounts(std::move(merged));
}

double npmi(uint64_t n_i, uint64_t n_j, uint64_t n_ij, uint64_t n_docs) {
  if (n_i < 1 || n_j < 1 || n_docs < 1) {
    throw InvalidArgument("npmi: marginal counts and n_docs must be >= 1");
  }
  if (n_ij > std::min(n_i, n_j) || n_i > n_docs || n_j > n_docs) {
    throw InvalidArgument("npmi: inconsistent counts");
  }
  if (n_ij == 0) return -1.0;
  const double p_ij = static_cast<double>(n_ij) / static_cast<double>(n_docs);
  if (p_ij >= 1.0) return 1.0;
  const double p_i = static_cast<double>(n_i) / static_cast<double>(n_docs);
  const double p_j = static_cast<double>(n_j) / static_cast<double>(n_docs);
  const double pmi = std::log(p_ij / (p_i * p_j));
  return pmi / -std::log(p_ij);
}

double conditional_occurrence(uint64_t n_i, uint64_t n_j, uint64_t n_ij) {
  if (n_i < 1 || n_j < 1) {
    throw InvalidArgument("conditional_occurrence: zero marginal count");
  }
  const double p_i_given_j = static_cast<double>(n_ij) / static_cast<double>(n_j);
  const double p_j_given_i = static_cast<double>(n_ij) / static_cast<double>(n_i);
  return std::max(p_i_given_j, p_j_given_i);
}

double trivial_fraction(
    LatentId i, LatentId j,
    const std::vector<const DocActivations*>& cooccurring_docs) {
  if (cooccurring_docs.empty()) {
    throw InvalidArgument("trivial_fraction: no docs supplied");
  }
  size_t trivial = 0;
  for (const DocActivations* doc : cooccurring_docs) {
    std::vector<uint32_t> tokens_i, tokens_j;
    for (const auto& tok : doc->tokens) {
      for (const auto& [id, value] : tok.entries) {
        if (id == i) tokens_i.push_back(tok.token_index);
        if (id == j) tokens_j.push_back(tok.token_index);
      }
    }
    if (tokens_i.empty() || tokens_j.empty()) {
      throw InvalidArgument("trivial_fraction: pair does not co-occur in doc '" +
                            doc->doc_id + "'");
    }
    // Trivial when every activation of one latent sits on the same or an
    // adjacent token of some activation of the other.
    bool all_adjacent = true;
    for (uint32_t ti : tokens_i) {
      bool near = false;
      for (uint32_t tj : tokens_j) {
        const uint32_t lo = std::min(ti, tj), hi = std::max(ti, tj);
        if (hi - lo <= 1) {
          near = true;
          break;
        }
      }
      if (!near) {
        all_adjacent = false;
        break;
      }
    }
    if (all_adjacent) {
      for (uint32_t tj : tokens_j) {
        bool near = false;
        for (uint32_t ti : tokens_i) {
          const uint32_t lo = std::min(ti, tj), hi = std::max(ti, tj);
          if (hi - lo <= 1) {
            near = true;
            break;
          }
        }
        if (!near) {
          all_adjacent = false;
          break;
        }
      }
    }
    if (all_adjacent) ++trivial;
  }
  return static_cast<double>(trivial) / static_cast<double>(cooccurring_docs.size());
}

std::vector<PairStats> find_correlated_pairs(
    const InvertedIndex& idx, const LatentCatalog& catalog,
    const CorrelationParams& params,
    const std::unordered_map<std::string, const DocActivations*>* activations,
    const std::unordered_set<LatentId>* excluded) {
  if (idx.n_docs == 0) throw InvalidArgument("find_correlated_pairs: empty corpus");
  if (!params.lenient) {
    bool any_vec = false;
    for (const auto& e : catalog.entries()) {
      if (e.has_vector()) {
        any_vec = true;
        break;
      }
    }
    if (!any_vec) {
      throw InvalidArgument(
          "find_correlated_pairs: catalog has no label vectors (strict mode)");
    }
  }

  const PairCounts counts = cooccurrence_counts(idx, params.min_freq);

  std::vector<PairStats> out;
  for (const auto& [key, n_ij] : counts.entries()) {
    const LatentId i = static_cast<LatentId>(key >> 32);
    const LatentId j = static_cast<LatentId>(key & 0xffffffffu);
    if (excluded != nullptr &&
        (excluded->count(i) != 0 || excluded->count(j) != 0)) {
      continue;
    }

    PairStats s;
    s.i = i;
    s.j = j;
    s.n_i = idx.postings.at(i).size();
    s.n_j = idx.postings.at(j).size();
    s.n_ij = n_ij;
    s.npmi = npmi(s.n_i, s.n_j, s.n_ij, idx.n_docs);
    if (s.npmi < params.npmi_min) continue;
    s.co = conditional_occurrence(s.n_i, s.n_j, s.n_ij);

    const LatentCatalogEntry* ci = catalog.find(i);
    const LatentCatalogEntry* cj = catalog.find(j);
    if (ci != nullptr && cj != nullptr && ci->has_vector() && cj->has_vector()) {
      s.label_sim = cosine(ci->label_vec, cj->label_vec);
      if (*s.label_sim > params.sim_max) continue;
    } else if (!params.lenient) {
      continue;  // strict mode: pairs without vectors cannot pass the filter
    }

    // Co-occurring docs (ordered intersection of postings).
    std::vector<uint32_t> joint;
    const auto& pi = idx.postings.at(i);
    const auto& pj = idx.postings.at(j);
    std::set_intersection(pi.begin(), pi.end(), pj.begin(), pj.end(),
                          std::back_inserter(joint));
    for (size_t k = 0; k < joint.size() && s.example_doc_ids.size() < 2; ++k) {
      s.example_doc_ids.push_back(idx.doc_ids[joint[k]]);
    }

    if (activations != nullptr && params.trivial_max < 1.0) {
      std::vector<const DocActivations*> docs;
      for (size_t k = 0; k < joint.size() && docs.size() < params.trivial_sample;
           ++k) {
        auto it = activations->find(idx.doc_ids[joint[k]]);
        if (it != activations->end()) docs.push_back(it->second);
      }
      if (!docs.empty()) {
        s.trivial_fraction = trivial_fraction(i, j, docs);
        if (s.trivial_fraction > params.trivial_max) continue;
      }
    }
    out.push_back(std::move(s));
  }

  std::sort(out.begin(), out.end(), [](const PairStats& a, const PairStats& b) {
    if (a.npmi != b.npmi) return a.npmi > b.npmi;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  return out;
}

double verified_npmi(const std::vector<bool>& judgments_i,
                     const std::vector<bool>& judgments_j) {
  if (judgments_i.size() != judgments_j.size() || judgments_i.empty()) {
    throw InvalidArgument("verified_npmi: judgment vectors must be equal-length");
  }
  uint64_t n_i = 0, n_j = 0, n_ij = 0;
  for (size_t d = 0; d < judgments_i.size(); ++d) {
    n_i += judgments_i[d] ? 1 : 0;
    n_j += judgments_j[d] ? 1 : 0;
    n_ij += (judgments_i[d] && judgments_j[d]) ? 1 : 0;
  }
  if (n_i == 0 || n_j == 0) {
    throw InvalidArgument("verified_npmi: a judgment vector is all-false");
  }
  return npmi(n_i, n_j, n_ij, judgments_i.size());
}

}  // namespace saekit
