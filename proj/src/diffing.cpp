#include "saekit/diffing.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>
#include <unordered_map>

namespace saekit {

namespace {

using json = nlohmann::json;

// Stable ordering for diff reports: delta descending, then lower latent id.
bool diff_order(const DiffEntry& a, const DiffEntry& b) {
  if (a.delta != b.delta) return a.delta > b.delta;
  return a.latent_id < b.latent_id;
}

void attach_examples(DiffEntry& entry, const InvertedIndex& idx_target) {
  const auto it = idx_target.postings.find(entry.latent_id);
  if (it != idx_target.postings.end()) {
    for (size_t k = 0; k < it->second.size() && entry.activating_doc_ids.size() < 2;
         ++k) {
      entry.activating_doc_ids.push_back(idx_target.doc_ids[it->second[k]]);
    }
  }
  // Non-activating examples: first target docs absent from the postings.
  const std::vector<uint32_t> empty;
  const auto& postings = it != idx_target.postings.end() ? it->second : empty;
  size_t cursor = 0;
  for (uint32_t ord = 0;
       ord < idx_target.n_docs && entry.non_activating_doc_ids.size() < 2; ++ord) {
    while (cursor < postings.size() && postings[cursor] < ord) ++cursor;
    if (cursor < postings.size() && postings[cursor] == ord) continue;
    entry.non_activating_doc_ids.push_back(idx_target.doc_ids[ord]);
  }
}

}  // namespace

std::vector<DiffEntry> diff_pair(const InvertedIndex& idx_target,
                                 const InvertedIndex& idx_other,
                                 double min_delta) {
  if (idx_target.n_docs == 0 || idx_other.n_docs == 0) {
    throw InvalidArgument("diff_pair: empty corpus");
  }
  std::set<LatentId> universe;
  for (const auto& [id, postings] : idx_target.postings) universe.insert(id);
  for (const auto& [id, postings] : idx_other.postings) universe.insert(id);

  std::vector<DiffEntry> entries;
  for (LatentId id : universe) {
    DiffEntry e;
    e.latent_id = id;
    e.freq_target = latent_frequency(idx_target, id);
    e.freq_other = latent_frequency(idx_other, id);
    e.delta = e.freq_target - e.freq_other;
    if (std::abs(e.delta) < min_delta) continue;
    attach_examples(e, idx_target);
    entries.push_back(std::move(e));
  }
  std::sort(entries.begin(), entries.end(), diff_order);
  return entries;
}

std::vector<DiffEntry> diff_one_vs_rest(
    const InvertedIndex& idx_target,
    const std::vector<const InvertedIndex*>& idx_others, double min_delta) {
  if (idx_others.empty()) throw InvalidArgument("diff_one_vs_rest: no other corpora");
  if (idx_target.n_docs == 0) throw InvalidArgument("diff_one_vs_rest: empty corpus");
  for (const auto* other : idx_others) {
    if (other == nullptr || other->n_docs == 0) {
      throw InvalidArgument("diff_one_vs_rest: empty corpus");
    }
  }

  std::set<LatentId> universe;
  for (const auto& [id, postings] : idx_target.postings) universe.insert(id);
  for (const auto* other : idx_others) {
    for (const auto& [id, postings] : other->postings) universe.insert(id);
  }

  std::vector<DiffEntry> entries;
  for (LatentId id : universe) {
    DiffEntry e;
    e.latent_id = id;
    e.freq_target = latent_frequency(idx_target, id);
    e.freq_other = 0.0;
    for (const auto* other : idx_others) {
      e.freq_other = std::max(e.freq_other, latent_frequency(*other, id));
    }
    e.delta = e.freq_target - e.freq_other;
    if (std::abs(e.delta) < min_delta) continue;
    attach_examples(e, idx_target);
    entries.push_back(std::move(e));
  }
  std::sort(entries.begin(), entries.end(), diff_order);
  return entries;
}

std::vector<DiffEntry> top_diff_latents(std::vector<DiffEntry> entries, size_t n) {
  std::sort(entries.begin(), entries.end(), diff_order);
  if (entries.size() > n) entries.resize(n);
  return entries;
}

HypothesisBundle export_hypothesis_bundle(const std::vector<DiffEntry>& entries,
                                          const LatentCatalog& catalog,
                                          const std::vector<CorpusDoc>& corpus_texts,
                                          const std::string& query,
                                          size_t max_bundle_bytes,
                                          const std::string& template_id) {
  std::unordered_map<std::string, const std::string*> text_by_id;
  for (const auto& doc : corpus_texts) text_by_id.emplace(doc.doc_id, &doc.text);

  auto text_for = [&](const std::string& doc_id) -> std::string {
    auto it = text_by_id.find(doc_id);
    return it == text_by_id.end() ? std::string{} : *it->second;
  };

  HypothesisBundle bundle;
  json exhibits = json::array();
  size_t budget = 0;
  for (const auto& entry : entries) {
    const LatentCatalogEntry* cat = catalog.find(entry.latent_id);
    if (cat == nullptr || cat->label.empty()) {
      std::cerr << "warning: latent " << entry.latent_id
                << " has no label, skipped from hypothesis bundle\n";
      bundle.skipped.push_back(entry.latent_id);
      continue;
    }
    if (entry.activating_doc_ids.empty() || entry.non_activating_doc_ids.empty()) {
      std::cerr << "warning: latent " << entry.latent_id
                << " lacks examples, skipped from hypothesis bundle\n";
      bundle.skipped.push_back(entry.latent_id);
      continue;
    }
    json exhibit = {{"latent_id", entry.latent_id},
                    {"label", cat->label},
                    {"delta", entry.delta},
                    {"freq_target", entry.freq_target},
                    {"freq_other", entry.freq_other},
                    {"activating_example", text_for(entry.activating_doc_ids[0])},
                    {"non_activating_example",
                     text_for(entry.non_activating_doc_ids[0])}};
    const size_t cost = exhibit.dump().size();
    if (budget + cost > max_bundle_bytes) break;
    budget += cost;
    exhibits.push_back(std::move(exhibit));
  }

  bundle.task.kind = TaskKind::kSummarize;
  bundle.task.template_id = template_id;
  bundle.task.payload = {{"query", query}, {"exhibits", std::move(exhibits)}};
  return bundle;
}

double verified_frequency_difference(const std::vector<bool>& judgments_target,
                                     const std::vector<bool>& judgments_other) {
  if (judgments_target.empty() || judgments_other.empty()) {
    throw InvalidArgument("verified_frequency_difference: empty judgments");
  }
  const auto frac = [](const std::vector<bool>& v) {
    size_t yes = 0;
    for (bool b : v) yes += b ? 1 : 0;
    return static_cast<double>(yes) / static_cast<double>(v.size());
  };
  return frac(judgments_target) - frac(judgments_other);
}

}  // namespace saekit
