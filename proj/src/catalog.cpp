#include "saekit/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace saekit {

using json = nlohmann::json;

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw InvalidArgument("cosine: dimension mismatch (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
  }
  double dot = 0.0;
  for (size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return dot;
}

void LatentCatalog::insert(LatentCatalogEntry entry) {
  if (entry.has_vector()) {
    double norm2 = 0.0;
    for (double v : entry.label_vec) norm2 += v * v;
    if (std::abs(std::sqrt(norm2) - 1.0) > 1e-6) {
      throw InvalidArgument("label_vec for latent " + std::to_string(entry.latent_id) +
                            " is not unit-norm");
    }
  }
  auto it = by_id_.find(entry.latent_id);
  if (it != by_id_.end()) {
    std::cerr << "warning: duplicate catalog entry for latent " << entry.latent_id
              << ", last wins\n";
    entries_[it->second] = std::move(entry);
    return;
  }
  by_id_.emplace(entry.latent_id, entries_.size());
  entries_.push_back(std::move(entry));
}

const LatentCatalogEntry* LatentCatalog::find(LatentId id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &entries_[it->second];
}

double LatentCatalog::label_similarity(LatentId i, LatentId j) const {
  const LatentCatalogEntry* a = find(i);
  const LatentCatalogEntry* b = find(j);
  if (a == nullptr || !a->has_vector()) {
    throw InvalidArgument("latent " + std::to_string(i) + " has no label vector");
  }
  if (b == nullptr || !b->has_vector()) {
    throw InvalidArgument("latent " + std::to_string(j) + " has no label vector");
  }
  return cosine(a->label_vec, b->label_vec);
}

std::vector<std::pair<LatentId, double>> LatentCatalog::top_k_latents(
    const std::vector<double>& query_vec, size_t k) const {
  if (k < 1) throw InvalidArgument("top_k_latents: k must be >= 1");
  if (entries_.empty()) throw InvalidArgument("top_k_latents: empty catalog");
  std::vector<std::pair<LatentId, double>> scored;
  for (const auto& e : entries_) {
    if (!e.has_vector()) continue;
    scored.emplace_back(e.latent_id, cosine(query_vec, e.label_vec));
  }
  auto better = [](const std::pair<LatentId, double>& a,
                   const std::pair<LatentId, double>& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  };
  const size_t keep = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + keep, scored.end(), better);
  scored.resize(keep);
  return scored;
}

std::vector<LatentId> LatentCatalog::union_keyphrase_latents(
    const std::vector<std::vector<double>>& keyphrase_vecs, size_t k) const {
  if (keyphrase_vecs.empty()) {
    throw InvalidArgument("union_keyphrase_latents: no keyphrase vectors");
  }
  std::set<LatentId> ids;
  for (const auto& vec : keyphrase_vecs) {
    for (const auto& [id, sim] : top_k_latents(vec, k)) ids.insert(id);
  }
  return {ids.begin(), ids.end()};
}

LatentCatalog load_catalog(const std::string& path, bool lenient) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open catalog: " + path);
  LatentCatalog catalog;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      LatentCatalogEntry e;
      e.latent_id = j.at("latent_id").get<LatentId>();
      e.label = j.at("label").get<std::string>();
      if (j.contains("label_vec") && !j.at("label_vec").is_null()) {
        e.label_vec = j.at("label_vec").get<std::vector<double>>();
      }
      const std::string prov = j.value("provenance", "original");
      if (prov == "relabeled") {
        e.provenance = LabelProvenance::kRelabeled;
      } else if (prov == "original") {
        e.provenance = LabelProvenance::kOriginal;
      } else {
        throw FormatError("unknown provenance: " + prov);
      }
      catalog.insert(std::move(e));
    } catch (const std::exception& e) {
      const std::string msg =
          "catalog line " + std::to_string(lineno) + ": " + e.what();
      if (!lenient) throw FormatError(msg);
      std::cerr << "warning: skipping " << msg << '\n';
    }
  }
  return catalog;
}

void save_catalog(const LatentCatalog& catalog, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path);
  for (const auto& e : catalog.entries()) {
    json j = {{"latent_id", e.latent_id},
              {"label", e.label},
              {"provenance",
               e.provenance == LabelProvenance::kRelabeled ? "relabeled"
                                                           : "original"}};
    if (e.has_vector()) j["label_vec"] = e.label_vec;
    out << j.dump() << '\n';
  }
}

namespace {

bool latent_active_at(const DocActivations& doc, uint32_t token_index,
                      LatentId latent) {
  for (const auto& tok : doc.tokens) {
    if (tok.token_index != token_index) continue;
    for (const auto& [id, value] : tok.entries) {
      if (id == latent) return true;
    }
  }
  return false;
}

bool latent_active_anywhere(const DocActivations& doc, LatentId latent) {
  for (const auto& tok : doc.tokens) {
    for (const auto& [id, value] : tok.entries) {
      if (id == latent) return true;
    }
  }
  return false;
}

// Activation spans are marked at whitespace-token granularity; token_index is
// taken to index whitespace tokens of the text.
std::string mark_activations(const std::string& text, const DocActivations& doc,
                             LatentId latent) {
  std::istringstream in(text);
  std::string word;
  std::string out;
  uint32_t index = 0;
  while (in >> word) {
    if (!out.empty()) out += ' ';
    if (latent_active_at(doc, index, latent)) {
      out += "<<" + word + ">>";
    } else {
      out += word;
    }
    ++index;
  }
  return out;
}

}  // namespace

AnnotationTask make_relabel_task(LatentId latent,
                                 const std::vector<DocActivations>& activating,
                                 const std::vector<std::string>& activating_texts,
                                 const std::vector<std::string>& non_activating_texts,
                                 const std::string& template_id) {
  if (activating.size() != activating_texts.size()) {
    throw InvalidArgument("make_relabel_task: activations/texts count mismatch");
  }
  json positives = json::array();
  for (size_t i = 0; i < activating.size(); ++i) {
    if (!latent_active_anywhere(activating[i], latent)) {
      throw InvalidArgument("make_relabel_task: doc '" + activating[i].doc_id +
                            "' supplied as activating but latent " +
                            std::to_string(latent) + " is inactive");
    }
    positives.push_back(mark_activations(activating_texts[i], activating[i], latent));
  }
  json negatives = json::array();
  for (const auto& text : non_activating_texts) negatives.push_back(text);

  AnnotationTask task;
  task.kind = TaskKind::kRelabel;
  task.template_id = template_id;
  task.payload = {{"latent_id", latent},
                  {"positive_samples", std::move(positives)},
                  {"negative_samples", std::move(negatives)}};
  return task;
}

}  // namespace saekit
