#include "saekit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_set>

namespace saekit {

using json = nlohmann::json;

SynthSpec SynthSpec::from_json(const json& j) {
  SynthSpec s;
  s.n_docs = j.at("n_docs").get<size_t>();
  s.d_sae = j.at("d_sae").get<uint32_t>();
  s.background_rate = j.value("background_rate", 0.01);
  s.seed = j.value("seed", uint64_t{0});
  s.tokens_min = j.value("tokens_min", uint32_t{6});
  s.tokens_max = j.value("tokens_max", uint32_t{24});
  s.label_dim = j.value("label_dim", size_t{32});
  for (const auto& p : j.value("plants", json::array())) {
    const std::string type = p.at("type").get<std::string>();
    if (type == "diff") {
      s.diffs.push_back({p.at("latent").get<LatentId>(), p.at("rate_a").get<double>(),
                         p.at("rate_b").get<double>()});
    } else if (type == "pair") {
      s.pairs.push_back({p.at("i").get<LatentId>(), p.at("j").get<LatentId>(),
                         p.at("joint_rate").get<double>(),
                         p.value("label_sim_target", 0.0)});
    } else if (type == "blocks") {
      s.blocks.push_back({p.at("k").get<size_t>(),
                          p.at("latents_per_block").get<size_t>(),
                          p.value("noise", 0.0)});
    } else if (type == "relevance") {
      s.relevance.push_back(
          {p.at("latent").get<LatentId>(), p.at("n_relevant").get<size_t>()});
    } else {
      throw FormatError("unknown plant type: " + type);
    }
  }
  return s;
}

json SynthSpec::to_json() const {
  json plants = json::array();
  for (const auto& p : diffs) {
    plants.push_back({{"type", "diff"}, {"latent", p.latent},
                      {"rate_a", p.rate_a}, {"rate_b", p.rate_b}});
  }
  for (const auto& p : pairs) {
    plants.push_back({{"type", "pair"}, {"i", p.i}, {"j", p.j},
                      {"joint_rate", p.joint_rate},
                      {"label_sim_target", p.label_sim_target}});
  }
  for (const auto& p : blocks) {
    plants.push_back({{"type", "blocks"}, {"k", p.k},
                      {"latents_per_block", p.latents_per_block},
                      {"noise", p.noise}});
  }
  for (const auto& p : relevance) {
    plants.push_back({{"type", "relevance"}, {"latent", p.latent},
                      {"n_relevant", p.n_relevant}});
  }
  return {{"n_docs", n_docs},       {"d_sae", d_sae},
          {"background_rate", background_rate}, {"seed", seed},
          {"tokens_min", tokens_min}, {"tokens_max", tokens_max},
          {"label_dim", label_dim}, {"plants", std::move(plants)}};
}

json GroundTruth::to_json() const {
  json j;
  j["seed"] = seed;
  j["diffs"] = json::array();
  for (const auto& d : diffs) {
    j["diffs"].push_back(
        {{"latent", d.latent}, {"rate_a", d.rate_a}, {"rate_b", d.rate_b}});
  }
  j["pairs"] = json::array();
  for (const auto& [i, jj] : pairs) j["pairs"].push_back({{"i", i}, {"j", jj}});
  j["axes"] = json::array();
  for (const auto& axis : axes) {
    json a = {{"block_latents", axis.block_latents}, {"axis_vec", axis.axis_vec}};
    a["assignment"] = json::object();
    for (const auto& [corpus, assign] : axis.assignment) {
      a["assignment"][corpus] = assign;
    }
    j["axes"].push_back(std::move(a));
  }
  j["relevance"] = json::array();
  for (const auto& r : relevance) {
    j["relevance"].push_back(
        {{"latent", r.latent}, {"relevant_doc_ids", r.relevant_doc_ids}});
  }
  return j;
}

GroundTruth GroundTruth::from_json(const json& j) {
  GroundTruth t;
  t.seed = j.value("seed", uint64_t{0});
  for (const auto& d : j.value("diffs", json::array())) {
    t.diffs.push_back({d.at("latent").get<LatentId>(), d.at("rate_a").get<double>(),
                       d.at("rate_b").get<double>()});
  }
  for (const auto& p : j.value("pairs", json::array())) {
    t.pairs.emplace_back(p.at("i").get<LatentId>(), p.at("j").get<LatentId>());
  }
  for (const auto& a : j.value("axes", json::array())) {
    Axis axis;
    axis.block_latents =
        a.at("block_latents").get<std::vector<std::vector<LatentId>>>();
    axis.axis_vec = a.at("axis_vec").get<std::vector<double>>();
    for (const auto& [corpus, assign] : a.at("assignment").items()) {
      axis.assignment[corpus] = assign.get<std::vector<int>>();
    }
    t.axes.push_back(std::move(axis));
  }
  for (const auto& r : j.value("relevance", json::array())) {
    Relevance rel;
    rel.latent = r.at("latent").get<LatentId>();
    rel.relevant_doc_ids =
        r.at("relevant_doc_ids").get<std::vector<std::string>>();
    t.relevance.push_back(std::move(rel));
  }
  return t;
}

namespace {

std::vector<double> random_unit_vec(Rng& rng, size_t dim) {
  std::vector<double> v(dim);
  double norm2 = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    norm2 += x * x;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
  return v;
}

void normalize(std::vector<double>& v) {
  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
}

// Unit vector with the requested cosine against `base`, built in the plane
// spanned by base and a fresh random direction.
std::vector<double> vec_with_cosine(Rng& rng, const std::vector<double>& base,
                                    double target_cos) {
  std::vector<double> other = random_unit_vec(rng, base.size());
  double dot = 0.0;
  for (size_t d = 0; d < base.size(); ++d) dot += base[d] * other[d];
  std::vector<double> ortho(base.size());
  for (size_t d = 0; d < base.size(); ++d) ortho[d] = other[d] - dot * base[d];
  normalize(ortho);
  const double sin_part = std::sqrt(std::max(0.0, 1.0 - target_cos * target_cos));
  std::vector<double> out(base.size());
  for (size_t d = 0; d < base.size(); ++d) {
    out[d] = target_cos * base[d] + sin_part * ortho[d];
  }
  normalize(out);
  return out;
}

void validate_spec(const SynthSpec& spec) {
  if (spec.n_docs == 0 || spec.d_sae == 0) {
    throw InvalidArgument("synth spec: n_docs and d_sae must be positive");
  }
  if (spec.background_rate < 0.0 || spec.background_rate > 1.0) {
    throw InvalidArgument("synth spec: background_rate outside [0,1]");
  }
  if (spec.tokens_min < 4 || spec.tokens_max < spec.tokens_min) {
    throw InvalidArgument("synth spec: need tokens_max >= tokens_min >= 4");
  }
  for (const auto& p : spec.diffs) {
    if (p.rate_a < 0 || p.rate_a > 1 || p.rate_b < 0 || p.rate_b > 1) {
      throw InvalidArgument("synth spec: diff rates outside [0,1]");
    }
    if (p.latent >= spec.d_sae) throw InvalidArgument("synth spec: diff latent out of range");
  }
  for (const auto& p : spec.pairs) {
    if (p.joint_rate < 0 || p.joint_rate > 1) {
      throw InvalidArgument("synth spec: pair joint_rate outside [0,1]");
    }
    if (p.i >= spec.d_sae || p.j >= spec.d_sae || p.i == p.j) {
      throw InvalidArgument("synth spec: bad pair latents");
    }
  }
  for (const auto& p : spec.relevance) {
    if (p.latent >= spec.d_sae) {
      throw InvalidArgument("synth spec: relevance latent out of range");
    }
    if (p.n_relevant > spec.n_docs) {
      throw InvalidArgument("synth spec: n_relevant exceeds n_docs");
    }
  }
}

}  // namespace

GeneratedData generate(const SynthSpec& spec) {
  validate_spec(spec);

  // Allocate block latent ids from the top of the dictionary, below any
  // explicitly planted ids.
  std::set<LatentId> reserved;
  for (const auto& p : spec.diffs) reserved.insert(p.latent);
  for (const auto& p : spec.pairs) {
    reserved.insert(p.i);
    reserved.insert(p.j);
  }
  for (const auto& p : spec.relevance) reserved.insert(p.latent);

  GroundTruth truth;
  truth.seed = spec.seed;
  truth.diffs = spec.diffs;
  for (const auto& p : spec.pairs) {
    truth.pairs.emplace_back(std::min(p.i, p.j), std::max(p.i, p.j));
  }

  LatentId next_block_latent = spec.d_sae;
  auto alloc_latent = [&]() {
    while (next_block_latent > 0) {
      --next_block_latent;
      if (reserved.count(next_block_latent) == 0) {
        reserved.insert(next_block_latent);
        return next_block_latent;
      }
    }
    throw InvalidArgument("synth spec: dictionary too small for block plants");
  };
  for (const auto& b : spec.blocks) {
    GroundTruth::Axis axis;
    axis.block_latents.resize(b.k);
    for (size_t block = 0; block < b.k; ++block) {
      for (size_t l = 0; l < b.latents_per_block; ++l) {
        axis.block_latents[block].push_back(alloc_latent());
      }
      std::sort(axis.block_latents[block].begin(), axis.block_latents[block].end());
    }
    truth.axes.push_back(std::move(axis));
  }

  const std::vector<std::string> corpus_names =
      spec.diffs.empty() ? std::vector<std::string>{"main"}
                         : std::vector<std::string>{"A", "B"};

  // Relevance plants: global choice of relevant doc ordinals (first corpus).
  std::vector<std::vector<char>> relevant_flags;  // per plant, per ordinal
  {
    Rng rng(substream_seed(spec.seed, 0xfeedULL));
    for (size_t r = 0; r < spec.relevance.size(); ++r) {
      std::vector<uint32_t> pool(spec.n_docs);
      for (uint32_t d = 0; d < spec.n_docs; ++d) pool[d] = d;
      for (size_t k = 0; k < spec.relevance[r].n_relevant; ++k) {
        const size_t pick = k + rng.uniform_index(spec.n_docs - k);
        std::swap(pool[k], pool[pick]);
      }
      std::vector<char> flags(spec.n_docs, 0);
      for (size_t k = 0; k < spec.relevance[r].n_relevant; ++k) flags[pool[k]] = 1;
      relevant_flags.push_back(std::move(flags));
    }
  }

  GeneratedData out;
  truth.relevance.resize(spec.relevance.size());
  for (size_t r = 0; r < spec.relevance.size(); ++r) {
    truth.relevance[r].latent = spec.relevance[r].latent;
  }

  for (size_t ci = 0; ci < corpus_names.size(); ++ci) {
    const std::string& corpus = corpus_names[ci];
    std::vector<DocActivations> docs;
    docs.reserve(spec.n_docs);
    std::vector<std::vector<int>> axis_assign(spec.blocks.size());

    for (uint32_t ord = 0; ord < spec.n_docs; ++ord) {
      Rng rng(substream_seed(spec.seed, (uint64_t{ci} << 40) | ord));
      DocActivations doc;
      doc.doc_id = corpus + ":" + std::to_string(ord);
      const uint32_t n_tokens =
          spec.tokens_min +
          static_cast<uint32_t>(rng.uniform_index(spec.tokens_max - spec.tokens_min + 1));

      // token -> activations, assembled at the end.
      std::map<uint32_t, std::map<LatentId, float>> grid;
      auto place = [&](LatentId latent, uint32_t token) {
        grid[token].emplace(latent,
                            static_cast<float>(rng.log_uniform(0.1, 5.0)));
      };
      auto place_random = [&](LatentId latent) {
        place(latent, static_cast<uint32_t>(rng.uniform_index(n_tokens)));
      };

      // Background: Bernoulli(rate) per latent via geometric skipping,
      // skipping ids reserved by plants.
      if (spec.background_rate > 0.0) {
        uint64_t pos = rng.next_success(0, spec.background_rate);
        while (pos < spec.d_sae) {
          if (reserved.count(static_cast<LatentId>(pos)) == 0) {
            place_random(static_cast<LatentId>(pos));
          }
          pos = rng.next_success(pos + 1, spec.background_rate);
        }
      }

      for (const auto& p : spec.diffs) {
        const double rate = corpus == "A" ? p.rate_a : p.rate_b;
        if (rng.bernoulli(rate)) place_random(p.latent);
      }
      for (const auto& p : spec.pairs) {
        if (rng.bernoulli(p.joint_rate)) {
          // Non-adjacent tokens, so the pair survives the trivial filter.
          place(p.i, 0);
          place(p.j, 3);
        }
      }
      for (size_t a = 0; a < spec.blocks.size(); ++a) {
        const auto& b = spec.blocks[a];
        const int block = static_cast<int>(rng.uniform_index(b.k));
        axis_assign[a].push_back(block);
        for (size_t bl = 0; bl < b.k; ++bl) {
          const double rate =
              bl == static_cast<size_t>(block) ? 1.0 - b.noise : b.noise;
          for (LatentId latent : truth.axes[a].block_latents[bl]) {
            if (rng.bernoulli(rate)) place_random(latent);
          }
        }
      }
      if (ci == 0) {
        for (size_t r = 0; r < spec.relevance.size(); ++r) {
          if (relevant_flags[r][ord]) {
            place_random(spec.relevance[r].latent);
            truth.relevance[r].relevant_doc_ids.push_back(doc.doc_id);
          }
        }
      }

      for (auto& [token, entries] : grid) {
        TokenActivationRecord rec;
        rec.token_index = token;
        rec.entries.assign(entries.begin(), entries.end());
        doc.tokens.push_back(std::move(rec));
      }
      docs.push_back(std::move(doc));
    }

    for (size_t a = 0; a < spec.blocks.size(); ++a) {
      truth.axes[a].assignment[corpus] = std::move(axis_assign[a]);
    }
    out.corpora.emplace(corpus, std::move(docs));
  }

  // Synthetic catalog: orthogonal vectors for planted pairs, shared axis
  // directions for block latents, independent random directions elsewhere.
  Rng cat_rng(substream_seed(spec.seed, 0xca7a106ULL));
  auto add_entry = [&](LatentId id, const std::string& label,
                       std::vector<double> vec) {
    LatentCatalogEntry e;
    e.latent_id = id;
    e.label = label;
    e.label_vec = std::move(vec);
    out.catalog.insert(std::move(e));
  };

  std::unordered_set<LatentId> cataloged;
  for (const auto& p : spec.pairs) {
    const std::vector<double> base = random_unit_vec(cat_rng, spec.label_dim);
    add_entry(p.i, "planted pair latent " + std::to_string(p.i), base);
    add_entry(p.j, "planted pair latent " + std::to_string(p.j),
              vec_with_cosine(cat_rng, base, p.label_sim_target));
    cataloged.insert(p.i);
    cataloged.insert(p.j);
  }
  for (size_t a = 0; a < truth.axes.size(); ++a) {
    auto& axis = truth.axes[a];
    axis.axis_vec = random_unit_vec(cat_rng, spec.label_dim);
    for (const auto& block : axis.block_latents) {
      for (LatentId latent : block) {
        // Tightly scattered around the axis direction (cos ~ 0.97).
        add_entry(latent, "axis " + std::to_string(a) + " latent " +
                              std::to_string(latent),
                  vec_with_cosine(cat_rng, axis.axis_vec, 0.97));
        cataloged.insert(latent);
      }
    }
  }
  for (const auto& p : spec.relevance) {
    if (cataloged.insert(p.latent).second) {
      add_entry(p.latent, "relevance latent " + std::to_string(p.latent),
                random_unit_vec(cat_rng, spec.label_dim));
    }
  }
  for (const auto& p : spec.diffs) {
    if (cataloged.insert(p.latent).second) {
      add_entry(p.latent, "diff latent " + std::to_string(p.latent),
                random_unit_vec(cat_rng, spec.label_dim));
    }
  }
  for (LatentId id = 0; id < spec.d_sae; ++id) {
    if (cataloged.count(id) == 0) {
      add_entry(id, "background latent " + std::to_string(id),
                random_unit_vec(cat_rng, spec.label_dim));
    }
  }

  out.truth = std::move(truth);
  return out;
}

SetRecovery pair_recovery(
    const std::vector<std::pair<LatentId, LatentId>>& found,
    const std::vector<std::pair<LatentId, LatentId>>& planted) {
  auto norm = [](std::pair<LatentId, LatentId> p) {
    if (p.first > p.second) std::swap(p.first, p.second);
    return p;
  };
  std::set<std::pair<LatentId, LatentId>> planted_set;
  for (const auto& p : planted) planted_set.insert(norm(p));
  std::set<std::pair<LatentId, LatentId>> found_set;
  for (const auto& p : found) found_set.insert(norm(p));

  size_t hits = 0;
  for (const auto& p : found_set) {
    if (planted_set.count(p) != 0) ++hits;
  }
  SetRecovery r;
  r.n_found = found_set.size();
  r.n_planted = planted_set.size();
  r.precision = found_set.empty()
                    ? 1.0
                    : static_cast<double>(hits) / static_cast<double>(found_set.size());
  r.recall = planted_set.empty()
                 ? 1.0
                 : static_cast<double>(hits) / static_cast<double>(planted_set.size());
  return r;
}

size_t rank_of_latent(const std::vector<LatentId>& ranked, LatentId planted) {
  for (size_t r = 0; r < ranked.size(); ++r) {
    if (ranked[r] == planted) return r + 1;
  }
  return 0;
}

double map_against_truth(const std::vector<std::string>& ranked_doc_ids,
                         const std::vector<std::string>& relevant_doc_ids) {
  if (relevant_doc_ids.empty()) {
    throw InvalidArgument("map_against_truth: no relevant docs");
  }
  std::unordered_set<std::string> relevant(relevant_doc_ids.begin(),
                                           relevant_doc_ids.end());
  std::vector<bool> flags;
  flags.reserve(ranked_doc_ids.size());
  for (const auto& id : ranked_doc_ids) flags.push_back(relevant.count(id) != 0);
  double sum = 0.0;
  size_t hits = 0;
  for (size_t rank = 0; rank < flags.size(); ++rank) {
    if (flags[rank]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  return sum / static_cast<double>(relevant.size());
}

}  // namespace saekit
