#include <CLI11.hpp>
#include <Eigen/Core>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "saekit/catalog.hpp"
#include "saekit/clustering.hpp"
#include "saekit/correlations.hpp"
#include "saekit/diffing.hpp"
#include "saekit/gateway.hpp"
#include "saekit/retrieval.hpp"
#include "saekit/sae.hpp"
#include "saekit/store.hpp"
#include "saekit/synth.hpp"

namespace {

using json = nlohmann::json;
using namespace saekit;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInput = 2;
constexpr int kExitGateway = 3;
constexpr const char* kVersion = "0.1.0";

// Flags win over config-file values; config values win over defaults.
struct ConfigLayer {
  json values = json::object();

  void load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open config file: " + path);
    try {
      values = json::parse(in);
    } catch (const json::exception& e) {
      throw FormatError(std::string("config file: ") + e.what());
    }
  }

  template <typename T>
  void apply(const CLI::App& app, const std::string& flag, T& target) const {
    const CLI::Option* opt = app.get_option_no_throw(flag);
    if (opt == nullptr) return;       // subcommand does not take this option
    if (opt->count() > 0) return;     // explicit flag wins
    const std::string key = flag.substr(2);  // strip leading "--"
    if (values.contains(key)) target = values.at(key).get<T>();
  }
};

void write_report(const json& report, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path);
  out << report.dump(2) << '\n';
  // Timestamps live in a sidecar so the report itself stays byte-stable
  // across reruns.
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  const json meta = {
      {"written_unix_ms",
       std::chrono::duration_cast<std::chrono::milliseconds>(now).count()}};
  std::ofstream meta_out(path + ".meta.json", std::ios::trunc);
  meta_out << meta.dump(2) << '\n';
}

std::unique_ptr<Gateway> make_gateway(bool mock, const std::string& provider_config,
                                      const std::string& cache_dir) {
  GatewayOptions options;
  options.cache_dir = cache_dir;
  if (mock) {
    return std::make_unique<Gateway>(std::make_unique<MockProvider>(), options);
  }
  if (provider_config.empty()) {
    throw InvalidArgument("live gateway requires --provider-config (or use --mock)");
  }
  return std::make_unique<Gateway>(
      std::make_unique<HttpProvider>(load_provider_config(provider_config)),
      options);
}

std::vector<double> normalized_or_throw(std::vector<double> vec,
                                        const std::string& what) {
  double norm2 = 0.0;
  for (double v : vec) norm2 += v * v;
  if (norm2 <= 0.0) throw FormatError(what + ": zero vector");
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& v : vec) v *= inv;
  return vec;
}

// Query/keyphrase lines: {"query_id"?, "text"?, "vec"?}. Missing vectors are
// filled through the gateway's embed task.
struct QueryEntry {
  std::string query_id;
  std::string text;
  std::vector<double> vec;
};

std::vector<QueryEntry> load_queries(const std::string& path, Gateway* gateway,
                                     size_t embed_dim) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open query file: " + path);
  std::vector<QueryEntry> queries;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError("query line " + std::to_string(lineno) + ": " + e.what());
    }
    QueryEntry q;
    q.query_id = j.value("query_id", "q" + std::to_string(lineno));
    q.text = j.value("text", "");
    if (j.contains("vec")) {
      q.vec = normalized_or_throw(j.at("vec").get<std::vector<double>>(),
                                  "query " + q.query_id);
    } else {
      if (gateway == nullptr) {
        throw InvalidArgument("query '" + q.query_id +
                              "' has no vector and no gateway is configured");
      }
      AnnotationTask task;
      task.kind = TaskKind::kEmbed;
      task.template_id = "embed.v1";
      task.payload = {{"prompt", q.text}, {"dim", embed_dim}};
      q.vec = gateway->submit(task).content.at("vec").get<std::vector<double>>();
    }
    queries.push_back(std::move(q));
  }
  return queries;
}

json entry_to_json(const DiffEntry& e, const LatentCatalog* catalog) {
  json j = {{"latent_id", e.latent_id},
            {"freq_target", e.freq_target},
            {"freq_other", e.freq_other},
            {"delta", e.delta},
            {"examples",
             {{"activating", e.activating_doc_ids},
              {"non_activating", e.non_activating_doc_ids}}}};
  if (catalog != nullptr) {
    const LatentCatalogEntry* cat = catalog->find(e.latent_id);
    if (cat != nullptr) j["label"] = cat->label;
  }
  return j;
}

// -------------------------------------------------------------------------
// Subcommands.
// -------------------------------------------------------------------------

int cmd_embed(const std::string& activations_path,
              const std::string& hidden_states_path,
              const std::string& weights_path, const std::string& out_path) {
  std::vector<SaeEmbedding> embs;
  uint32_t d_sae = 0;

  if (!activations_path.empty()) {
    for_each_activation_doc(activations_path, [&](DocActivations&& doc) {
      for (const auto& tok : doc.tokens) {
        for (const auto& [id, value] : tok.entries) {
          d_sae = std::max(d_sae, id + 1);
        }
      }
      embs.push_back(pool_document(doc));
    });
  } else if (!hidden_states_path.empty()) {
    if (weights_path.empty()) {
      throw InvalidArgument("--hidden-states requires --weights");
    }
    const SaeWeights weights = load_weights(weights_path);
    d_sae = weights.d_sae();
    std::ifstream in(hidden_states_path);
    if (!in) throw FormatError("cannot open hidden states: " + hidden_states_path);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw FormatError("hidden-state line " + std::to_string(lineno) + ": " +
                          e.what());
      }
      DocActivations doc;
      doc.doc_id = j.at("id").get<std::string>();
      uint32_t t = 0;
      for (const auto& state : j.at("hidden")) {
        auto values = state.get<std::vector<float>>();
        Eigen::VectorXf x =
            Eigen::Map<Eigen::VectorXf>(values.data(), values.size());
        doc.tokens.push_back(encode(x, weights, t++));
      }
      embs.push_back(pool_document(doc));
    }
  } else {
    throw InvalidArgument("embed needs --activations or --hidden-states");
  }

  write_embedding_store(embs, d_sae, out_path);
  size_t total_active = 0;
  for (const auto& e : embs) total_active += e.entries.size();
  std::cout << "embedded " << embs.size() << " docs, mean active latents "
            << (embs.empty() ? 0.0
                             : static_cast<double>(total_active) /
                                   static_cast<double>(embs.size()))
            << "\n";
  return kExitOk;
}

InvertedIndex load_index(const std::string& store_path) {
  return build_index(binarize_all(read_embedding_store(store_path)));
}

int cmd_diff(const std::string& target_path,
             const std::vector<std::string>& other_paths, double min_delta,
             size_t top_n, const std::string& catalog_path,
             const std::string& out_path) {
  if (other_paths.empty()) throw InvalidArgument("diff needs at least one --others");
  const InvertedIndex target = load_index(target_path);
  std::vector<InvertedIndex> others;
  others.reserve(other_paths.size());
  for (const auto& p : other_paths) others.push_back(load_index(p));

  std::vector<DiffEntry> entries;
  if (others.size() == 1) {
    entries = diff_pair(target, others[0], min_delta);
  } else {
    std::vector<const InvertedIndex*> ptrs;
    for (const auto& idx : others) ptrs.push_back(&idx);
    entries = diff_one_vs_rest(target, ptrs, min_delta);
  }
  entries = top_diff_latents(std::move(entries), top_n);

  std::optional<LatentCatalog> catalog;
  if (!catalog_path.empty()) catalog = load_catalog(catalog_path);

  json report = {{"version", kVersion},
                 {"target", target_path},
                 {"others", other_paths},
                 {"min_delta", min_delta},
                 {"top_n", top_n},
                 {"entries", json::array()}};
  for (const auto& e : entries) {
    report["entries"].push_back(
        entry_to_json(e, catalog ? &*catalog : nullptr));
  }
  write_report(report, out_path);
  std::cout << "diff: " << entries.size() << " latents above |delta| >= "
            << min_delta << "\n";
  return kExitOk;
}

int cmd_corr(const std::string& store_path, const std::string& catalog_path,
             const std::string& activations_path, const CorrelationParams& params,
             const std::string& out_path) {
  const InvertedIndex idx = load_index(store_path);
  LatentCatalog catalog;
  if (!catalog_path.empty()) catalog = load_catalog(catalog_path);

  std::vector<DocActivations> activation_docs;
  std::unordered_map<std::string, const DocActivations*> activation_map;
  const std::unordered_map<std::string, const DocActivations*>* activations =
      nullptr;
  if (!activations_path.empty()) {
    activation_docs = read_activations(activations_path);
    for (const auto& doc : activation_docs) {
      activation_map.emplace(doc.doc_id, &doc);
    }
    activations = &activation_map;
  }

  const auto pairs = find_correlated_pairs(idx, catalog, params, activations);

  json report = {{"version", kVersion},
                 {"thresholds",
                  {{"npmi_min", params.npmi_min},
                   {"sim_max", params.sim_max},
                   {"min_freq", params.min_freq},
                   {"trivial_max", params.trivial_max},
                   {"lenient", params.lenient}}},
                 {"n_docs", idx.n_docs},
                 {"pairs", json::array()}};
  for (const auto& p : pairs) {
    json pj = {{"i", p.i},
               {"j", p.j},
               {"n_i", p.n_i},
               {"n_j", p.n_j},
               {"n_ij", p.n_ij},
               {"npmi", p.npmi},
               {"co", p.co},
               {"trivial_fraction", p.trivial_fraction},
               {"example_doc_ids", p.example_doc_ids}};
    if (p.label_sim) pj["label_sim"] = *p.label_sim;
    const LatentCatalogEntry* ci = catalog.find(p.i);
    const LatentCatalogEntry* cj = catalog.find(p.j);
    if (ci != nullptr) pj["label_i"] = ci->label;
    if (cj != nullptr) pj["label_j"] = cj->label;
    report["pairs"].push_back(std::move(pj));
  }
  write_report(report, out_path);
  std::cout << "corr: " << pairs.size() << " pairs surfaced\n";
  return kExitOk;
}

int cmd_cluster(const std::string& store_path, size_t k_clusters, uint64_t seed,
                const std::string& catalog_path,
                const std::string& keyphrases_path, size_t k_latents,
                const std::string& dense_vecs_path, bool mock,
                const std::string& provider_config, const std::string& cache_dir,
                const std::string& out_path) {
  const std::vector<SaeEmbedding> embs = read_embedding_store(store_path);
  if (k_clusters > embs.size()) {
    throw InvalidArgument("k-clusters exceeds number of documents");
  }

  json report = {{"version", kVersion},
                 {"params",
                  {{"k_clusters", k_clusters},
                   {"seed", seed},
                   {"k_latents", k_latents},
                   {"targeted", !keyphrases_path.empty()}}}};

  std::vector<BinaryEmbedding> clustered;
  std::vector<std::string> dropped;
  ClusterResult result;

  if (!keyphrases_path.empty()) {
    if (catalog_path.empty()) {
      throw InvalidArgument("targeted clustering requires --catalog");
    }
    const LatentCatalog catalog = load_catalog(catalog_path);
    std::unique_ptr<Gateway> gateway;
    // Keyphrases reuse the query file shape; vectors filled via the gateway.
    std::vector<std::vector<double>> keyphrase_vecs;
    {
      std::optional<size_t> dim;
      for (const auto& e : catalog.entries()) {
        if (e.has_vector()) {
          dim = e.label_vec.size();
          break;
        }
      }
      if (!dim) throw InvalidArgument("catalog has no label vectors");
      if (mock || !provider_config.empty()) {
        gateway = make_gateway(mock, provider_config, cache_dir);
      }
      for (const auto& q : load_queries(keyphrases_path, gateway.get(), *dim)) {
        keyphrase_vecs.push_back(q.vec);
      }
    }
    TargetedClusterResult targeted = targeted_cluster(
        embs, catalog, keyphrase_vecs, k_latents, k_clusters, seed);
    result = std::move(targeted.clusters);
    dropped = std::move(targeted.dropped);
    report["params"]["latent_filter"] = targeted.latents;
    for (uint32_t ord : targeted.kept) {
      clustered.push_back(binarize(filter_latents(embs[ord], targeted.latents)));
    }
  } else {
    // Docs with empty binarized embeddings carry no signal; drop them with a
    // report before clustering.
    for (const auto& e : embs) {
      BinaryEmbedding b = binarize(e);
      if (b.active.empty()) {
        dropped.push_back(e.doc_id);
      } else {
        clustered.push_back(std::move(b));
      }
    }
    if (clustered.size() < k_clusters) {
      throw InvalidArgument("fewer non-empty docs than clusters");
    }
    result = spectral_cluster(jaccard_matrix(clustered), k_clusters, seed);
  }

  const Eigen::MatrixXd S = jaccard_matrix(clustered);
  report["dropped_docs"] = dropped;
  report["assignment"] = json::object();
  for (size_t i = 0; i < clustered.size(); ++i) {
    report["assignment"][clustered[i].doc_id] = result.assignment[i];
  }
  report["mean_intra_similarity"] = result.mean_intra_similarity;

  report["clusters"] = json::array();
  for (size_t c = 0; c < k_clusters; ++c) {
    size_t size = 0;
    for (int a : result.assignment) size += (a == static_cast<int>(c)) ? 1 : 0;
    json cj = {{"cluster", c}, {"size", size}};
    if (size > 0 && size < clustered.size()) {
      const ClusterDescription desc =
          describe_cluster(static_cast<int>(c), result, clustered, S);
      cj["top_latents"] = json::array();
      for (const auto& e : desc.top_latents) {
        cj["top_latents"].push_back(entry_to_json(e, nullptr));
      }
      cj["central_doc_ids"] = desc.central_doc_ids;
    }
    report["clusters"].push_back(std::move(cj));
  }

  if (!dense_vecs_path.empty()) {
    std::ifstream in(dense_vecs_path);
    if (!in) throw FormatError("cannot open dense vectors: " + dense_vecs_path);
    std::unordered_map<std::string, std::vector<double>> by_id;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        json j = json::parse(line);
        by_id[j.at("id").get<std::string>()] =
            j.at("vec").get<std::vector<double>>();
      } catch (const json::exception& e) {
        throw FormatError("dense-vec line " + std::to_string(lineno) + ": " +
                          e.what());
      }
    }
    std::vector<std::vector<double>> dense;
    for (const auto& b : clustered) {
      auto it = by_id.find(b.doc_id);
      if (it == by_id.end()) {
        throw InvalidArgument("missing dense vector for doc '" + b.doc_id + "'");
      }
      dense.push_back(it->second);
    }
    report["conductance_zscores"] = json::array();
    for (size_t c = 0; c < k_clusters; ++c) {
      std::vector<uint32_t> members;
      for (uint32_t i = 0; i < clustered.size(); ++i) {
        if (result.assignment[i] == static_cast<int>(c)) members.push_back(i);
      }
      if (members.size() <= 1 || members.size() >= clustered.size()) {
        report["conductance_zscores"].push_back(nullptr);
      } else {
        report["conductance_zscores"].push_back(
            conductance_zscore(members, dense, 100, 15, seed));
      }
    }
  }

  write_report(report, out_path);
  std::cout << "cluster: " << clustered.size() << " docs into " << k_clusters
            << " clusters (" << dropped.size() << " dropped)\n";
  return kExitOk;
}

int cmd_retrieve(const std::string& store_path, const std::string& catalog_path,
                 const std::string& queries_path, const std::string& judgments_path,
                 size_t k_candidates, double temperature, bool mock,
                 const std::string& provider_config, const std::string& cache_dir,
                 const std::string& out_path) {
  const std::vector<SaeEmbedding> embs = read_embedding_store(store_path);
  const LatentCatalog catalog = load_catalog(catalog_path);

  std::optional<size_t> dim;
  for (const auto& e : catalog.entries()) {
    if (e.has_vector()) {
      dim = e.label_vec.size();
      break;
    }
  }
  if (!dim) throw InvalidArgument("catalog has no label vectors");

  std::unique_ptr<Gateway> gateway;
  if (mock || !provider_config.empty()) {
    gateway = make_gateway(mock, provider_config, cache_dir);
  }
  const std::vector<QueryEntry> queries =
      load_queries(queries_path, gateway.get(), *dim);
  if (queries.empty()) throw InvalidArgument("no queries supplied");

  // Relevance judgments: query_id -> set of relevant doc ids.
  std::unordered_map<std::string, std::vector<std::string>> relevant;
  if (!judgments_path.empty()) {
    std::ifstream in(judgments_path);
    if (!in) throw FormatError("cannot open judgments: " + judgments_path);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        json j = json::parse(line);
        if (j.at("relevant").get<int>() != 0) {
          relevant[j.at("query_id").get<std::string>()].push_back(
              j.at("doc_id").get<std::string>());
        }
      } catch (const json::exception& e) {
        throw FormatError("judgment line " + std::to_string(lineno) + ": " +
                          e.what());
      }
    }
  }

  json report = {{"version", kVersion},
                 {"params",
                  {{"k_candidates", k_candidates}, {"temperature", temperature}}},
                 {"rankings", json::array()}};
  std::vector<double> aps, p50s;
  for (const auto& q : queries) {
    const auto candidates = select_candidate_latents(q.vec, catalog, k_candidates);
    RetrievalRanking ranking = score_documents(embs, candidates, temperature,
                                               q.query_id);
    json rj = {{"query_id", q.query_id},
               {"all_zero", ranking.all_zero},
               {"latents_used", json::array()},
               {"ranked_doc_ids", ranking.ranked_doc_ids},
               {"scores", ranking.scores}};
    for (const auto& [id, weight] : ranking.latents_used) {
      rj["latents_used"].push_back({{"latent_id", id}, {"weight", weight}});
    }
    auto rel_it = relevant.find(q.query_id);
    if (rel_it != relevant.end() && !rel_it->second.empty()) {
      std::unordered_set<std::string> rel_set(rel_it->second.begin(),
                                              rel_it->second.end());
      std::vector<bool> flags;
      flags.reserve(ranking.ranked_doc_ids.size());
      for (const auto& id : ranking.ranked_doc_ids) {
        flags.push_back(rel_set.count(id) != 0);
      }
      const double ap = average_precision(flags, rel_set.size());
      const double p50 = precision_at_k(flags, 50);
      rj["ap"] = ap;
      rj["p_at_50"] = p50;
      aps.push_back(ap);
      p50s.push_back(p50);
    }
    report["rankings"].push_back(std::move(rj));
  }
  if (!aps.empty()) {
    report["map"] = mean_metric(aps);
    report["mp_at_50"] = mean_metric(p50s);
  }
  write_report(report, out_path);
  std::cout << "retrieve: " << queries.size() << " queries";
  if (!aps.empty()) std::cout << ", MAP " << mean_metric(aps);
  std::cout << "\n";
  return kExitOk;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
  std::ifstream in(spec_path);
  if (!in) throw FormatError("cannot open synth spec: " + spec_path);
  json spec_json;
  try {
    spec_json = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(std::string("synth spec: ") + e.what());
  }
  const SynthSpec spec = SynthSpec::from_json(spec_json);
  const GeneratedData data = generate(spec);

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  for (const auto& [name, docs] : data.corpora) {
    write_activations_binary(docs, spec.d_sae,
                             (dir / (name + ".saea")).string());
  }
  save_catalog(data.catalog, (dir / "catalog.jsonl").string());
  write_report(data.truth.to_json(), (dir / "truth.json").string());
  write_report(spec.to_json(), (dir / "spec.json").string());
  std::cout << "synth: " << data.corpora.size() << " corpora of " << spec.n_docs
            << " docs written to " << out_dir << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& report_path, const std::string& truth_path,
             const std::string& kind, const std::string& out_path) {
  auto load = [](const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open: " + path);
    try {
      return json::parse(in);
    } catch (const json::exception& e) {
      throw FormatError(path + ": " + e.what());
    }
  };
  const json report = load(report_path);
  const GroundTruth truth = GroundTruth::from_json(load(truth_path));

  json out = {{"version", kVersion}, {"kind", kind}};
  if (kind == "corr") {
    std::vector<std::pair<LatentId, LatentId>> found;
    for (const auto& p : report.at("pairs")) {
      found.emplace_back(p.at("i").get<LatentId>(), p.at("j").get<LatentId>());
    }
    const SetRecovery r = pair_recovery(found, truth.pairs);
    out["precision"] = r.precision;
    out["recall"] = r.recall;
    out["n_found"] = r.n_found;
    out["n_planted"] = r.n_planted;
  } else if (kind == "diff") {
    std::vector<LatentId> ranked;
    for (const auto& e : report.at("entries")) {
      ranked.push_back(e.at("latent_id").get<LatentId>());
    }
    out["ranks"] = json::array();
    for (const auto& d : truth.diffs) {
      out["ranks"].push_back(
          {{"latent", d.latent}, {"rank", rank_of_latent(ranked, d.latent)}});
    }
  } else if (kind == "cluster") {
    if (truth.axes.empty()) throw InvalidArgument("truth has no cluster axes");
    // Doc order in the report assignment follows the generated corpus order.
    const auto& assignment = report.at("assignment");
    out["ari"] = json::array();
    for (const auto& axis : truth.axes) {
      for (const auto& [corpus, planted] : axis.assignment) {
        std::vector<int> got, want;
        for (size_t ord = 0; ord < planted.size(); ++ord) {
          const std::string doc_id = corpus + ":" + std::to_string(ord);
          if (assignment.contains(doc_id)) {
            got.push_back(assignment.at(doc_id).get<int>());
            want.push_back(planted[ord]);
          }
        }
        out["ari"].push_back(
            {{"corpus", corpus}, {"ari", adjusted_rand_index(got, want)}});
      }
    }
  } else if (kind == "retrieve") {
    out["map"] = json::array();
    for (const auto& rel : truth.relevance) {
      for (const auto& rj : report.at("rankings")) {
        const auto ranked =
            rj.at("ranked_doc_ids").get<std::vector<std::string>>();
        out["map"].push_back(
            {{"latent", rel.latent},
             {"query_id", rj.at("query_id").get<std::string>()},
             {"map", map_against_truth(ranked, rel.relevant_doc_ids)}});
      }
    }
  } else {
    throw InvalidArgument("eval kind must be corr|diff|cluster|retrieve");
  }
  write_report(out, out_path);
  std::cout << "eval: " << out.dump() << "\n";
  return kExitOk;
}

size_t peak_rss_kb() {
  std::ifstream in("/proc/self/status");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("VmHWM:", 0) == 0) {
      return std::stoul(line.substr(6));
    }
  }
  return 0;
}

int cmd_bench(size_t n_docs, uint32_t d_sae, double mean_active, double min_freq,
              size_t threads, uint64_t seed, const std::string& out_path) {
  SynthSpec spec;
  spec.n_docs = n_docs;
  spec.d_sae = d_sae;
  spec.background_rate = mean_active / static_cast<double>(d_sae);
  spec.seed = seed;

  const auto gen_start = std::chrono::steady_clock::now();
  const GeneratedData data = generate(spec);
  std::vector<BinaryEmbedding> embs;
  for (const auto& doc : data.corpora.at("main")) {
    embs.push_back(binarize(pool_document(doc)));
  }
  const InvertedIndex idx = build_index(embs);
  const auto count_start = std::chrono::steady_clock::now();
  const PairCounts counts = cooccurrence_counts(idx, min_freq, threads);
  const auto end = std::chrono::steady_clock::now();

  const double gen_s =
      std::chrono::duration<double>(count_start - gen_start).count();
  const double count_s = std::chrono::duration<double>(end - count_start).count();
  const json report = {{"version", kVersion},
                       {"n_docs", n_docs},
                       {"d_sae", d_sae},
                       {"mean_active_target", mean_active},
                       {"min_freq", min_freq},
                       {"threads", threads},
                       {"n_pairs", counts.size()},
                       {"generate_seconds", gen_s},
                       {"count_seconds", count_s},
                       {"peak_rss_kb", peak_rss_kb()}};
  if (!out_path.empty()) write_report(report, out_path);
  std::cout << report.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SAE embedding analytics toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (flags win)")
      ->configurable(false);
  ConfigLayer config;

  // Shared option storage.
  std::string weights, activations, hidden_states, catalog_path, corpus, out;
  std::string store, queries_path, judgments_path, keyphrases_path, dense_vecs;
  std::vector<std::string> others;
  std::string provider_config, cache_dir, spec_path, report_path, truth_path;
  std::string eval_kind;
  double min_delta = 0.03, npmi_min = 0.6, sim_max = 0.2, min_freq = 0.002;
  double trivial_max = 1.0, temperature = 0.2;
  size_t top_n = 200, k_latents = 100, k_clusters = 2, k_candidates = 50;
  uint64_t seed = 0;
  size_t threads = 0;
  bool mock = false, lenient = false;
  size_t bench_docs = 10000;
  uint32_t bench_dsae = 65536;
  double bench_active = 300.0;

  auto* c_embed = app.add_subcommand("embed", "Pool activations into an embedding store");
  c_embed->add_option("--activations", activations, "SAEA or JSONL activation file");
  c_embed->add_option("--hidden-states", hidden_states, "JSONL dense hidden states");
  c_embed->add_option("--weights", weights, "SAEW weight container");
  c_embed->add_option("--out", out, "output store path")->required();

  auto* c_diff = app.add_subcommand("diff", "Rank latents by frequency difference");
  c_diff->add_option("--store", store, "target embedding store")->required();
  c_diff->add_option("--others", others, "comparison stores (1 = pairwise)")
      ->required();
  c_diff->add_option("--min-delta", min_delta, "frequency difference threshold");
  c_diff->add_option("--top-n", top_n, "entries kept");
  c_diff->add_option("--catalog", catalog_path, "catalog for labels");
  c_diff->add_option("--out", out, "report path")->required();

  auto* c_corr = app.add_subcommand("corr", "Mine correlated latent pairs");
  c_corr->add_option("--store", store, "embedding store")->required();
  c_corr->add_option("--catalog", catalog_path, "latent catalog");
  c_corr->add_option("--activations", activations,
                     "token-level activations (enables trivial-pair filter)");
  c_corr->add_option("--npmi-min", npmi_min, "NPMI threshold");
  c_corr->add_option("--sim-max", sim_max, "label similarity ceiling");
  c_corr->add_option("--min-freq", min_freq, "minimum latent frequency");
  c_corr->add_option("--trivial-max", trivial_max, "trivial-fraction ceiling");
  c_corr->add_flag("--lenient", lenient, "pairs without vectors pass the sim filter");
  c_corr->add_option("--out", out, "report path")->required();

  auto* c_cluster = app.add_subcommand("cluster", "Spectral-cluster binarized embeddings");
  c_cluster->add_option("--store", store, "embedding store")->required();
  c_cluster->add_option("--k-clusters", k_clusters, "number of clusters")->required();
  c_cluster->add_option("--seed", seed, "clustering seed");
  c_cluster->add_option("--catalog", catalog_path, "catalog (targeted mode)");
  c_cluster->add_option("--keyphrases", keyphrases_path,
                        "keyphrase JSONL (targeted mode)");
  c_cluster->add_option("--k-latents", k_latents, "latents kept per keyphrase");
  c_cluster->add_option("--dense-vecs", dense_vecs,
                        "dense vector JSONL for conductance z-scores");
  c_cluster->add_flag("--mock", mock, "use the deterministic mock gateway");
  c_cluster->add_option("--provider-config", provider_config, "live provider config");
  c_cluster->add_option("--cache-dir", cache_dir, "gateway cache directory");
  c_cluster->add_option("--out", out, "report path")->required();

  auto* c_retrieve = app.add_subcommand("retrieve", "Property-based document ranking");
  c_retrieve->add_option("--store", store, "embedding store")->required();
  c_retrieve->add_option("--catalog", catalog_path, "latent catalog")->required();
  c_retrieve->add_option("--queries", queries_path, "query JSONL")->required();
  c_retrieve->add_option("--judgments", judgments_path, "relevance judgments JSONL");
  c_retrieve->add_option("--k-latents", k_candidates, "candidate latents per query");
  c_retrieve->add_option("--temperature", temperature, "softmax temperature");
  c_retrieve->add_flag("--mock", mock, "use the deterministic mock gateway");
  c_retrieve->add_option("--provider-config", provider_config, "live provider config");
  c_retrieve->add_option("--cache-dir", cache_dir, "gateway cache directory");
  c_retrieve->add_option("--out", out, "report path")->required();

  auto* c_synth = app.add_subcommand("synth", "Generate a planted synthetic corpus");
  c_synth->add_option("--spec", spec_path, "synth spec JSON")->required();
  c_synth->add_option("--out", out, "output directory")->required();

  auto* c_eval = app.add_subcommand("eval", "Score a report against ground truth");
  c_eval->add_option("--report", report_path, "analysis report")->required();
  c_eval->add_option("--truth", truth_path, "ground truth JSON")->required();
  c_eval->add_option("--kind", eval_kind, "corr|diff|cluster|retrieve")->required();
  c_eval->add_option("--out", out, "metrics path")->required();

  auto* c_bench = app.add_subcommand("bench", "Co-occurrence counting benchmark");
  c_bench->add_option("--n-docs", bench_docs, "corpus size");
  c_bench->add_option("--d-sae", bench_dsae, "dictionary size");
  c_bench->add_option("--mean-active", bench_active, "mean active latents per doc");
  c_bench->add_option("--min-freq", min_freq, "minimum latent frequency");
  c_bench->add_option("--threads", threads, "worker threads (0 = cores)");
  c_bench->add_option("--seed", seed, "generation seed");
  c_bench->add_option("--out", out, "optional report path");

  // Allow `saekit <sub> --config ...`: options the subcommand does not define
  // fall through to the top-level app.
  for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInput;
  }

  try {
    if (!config_path.empty()) config.load(config_path);
    CLI::App* sub = app.get_subcommands().front();
    // Config-file values fill in flags the user did not pass.
    config.apply(*sub, "--min-delta", min_delta);
    config.apply(*sub, "--npmi-min", npmi_min);
    config.apply(*sub, "--sim-max", sim_max);
    config.apply(*sub, "--min-freq", min_freq);
    config.apply(*sub, "--trivial-max", trivial_max);
    config.apply(*sub, "--temperature", temperature);
    config.apply(*sub, "--k-latents", k_latents);
    config.apply(*sub, "--k-clusters", k_clusters);
    config.apply(*sub, "--seed", seed);
    config.apply(*sub, "--threads", threads);
    config.apply(*sub, "--cache-dir", cache_dir);
    config.apply(*sub, "--provider-config", provider_config);

    if (sub == c_embed) {
      return cmd_embed(activations, hidden_states, weights, out);
    }
    if (sub == c_diff) {
      return cmd_diff(store, others, min_delta, top_n, catalog_path, out);
    }
    if (sub == c_corr) {
      CorrelationParams params;
      params.npmi_min = npmi_min;
      params.sim_max = sim_max;
      params.min_freq = min_freq;
      params.trivial_max = trivial_max;
      params.lenient = lenient;
      return cmd_corr(store, catalog_path, activations, params, out);
    }
    if (sub == c_cluster) {
      return cmd_cluster(store, k_clusters, seed, catalog_path, keyphrases_path,
                         k_latents, dense_vecs, mock, provider_config, cache_dir,
                         out);
    }
    if (sub == c_retrieve) {
      return cmd_retrieve(store, catalog_path, queries_path, judgments_path,
                          k_candidates, temperature, mock, provider_config,
                          cache_dir, out);
    }
    if (sub == c_synth) return cmd_synth(spec_path, out);
    if (sub == c_eval) return cmd_eval(report_path, truth_path, eval_kind, out);
    if (sub == c_bench) {
      return cmd_bench(bench_docs, bench_dsae, bench_active, min_freq, threads,
                       seed, out);
    }
    std::cerr << "error: unknown subcommand\n";
    return kExitInput;
  } catch (const GatewayError& e) {
    std::cerr << "gateway error: " << e.what() << "\n";
    return kExitGateway;
  } catch (const FormatError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const InvalidArgument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
