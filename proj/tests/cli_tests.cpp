// End-to-end checks of the CLI binary: exit-code contract, full pipelines on
// synthetic corpora, dual-route embedding equality, and config-file merging.

#include <Eigen/Dense>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include <nlohmann/json.hpp>

#include "saekit/sae.hpp"
#include "saekit/store.hpp"
#include "saekit/synth.hpp"

using namespace saekit;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string g_cli;
fs::path g_dir;
int g_failures = 0;

void check(bool ok, const std::string& what) {
  std::cout << (ok ? "ok" : "FAIL") << ": " << what << "\n";
  if (!ok) ++g_failures;
}

int run(const std::string& args) {
  const std::string cmd = g_cli + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return status < 0 ? status : WEXITSTATUS(status);
}

std::string path(const std::string& name) { return (g_dir / name).string(); }

json load_json(const std::string& p) {
  std::ifstream in(p);
  return json::parse(in);
}

bool files_equal(const std::string& a, const std::string& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  return fa && fb && sa.str() == sb.str();
}

void exit_codes() {
  check(run("--version") == 0, "exit 0: --version");
  check(run("definitely-not-a-subcommand") == 2, "exit 2: unknown subcommand");
  check(run("diff --store a") == 2, "exit 2: missing required flag");
  check(run("embed --activations " + path("nope.saea") + " --out " +
            path("x.saea")) == 2,
        "exit 2: missing input file");

  // Truncated binary container.
  {
    std::vector<DocActivations> docs(3);
    for (int d = 0; d < 3; ++d) {
      docs[d].doc_id = "t" + std::to_string(d);
      TokenActivationRecord rec;
      rec.entries = {{0, 1.0f}, {5, 2.0f}};
      docs[d].tokens.push_back(rec);
    }
    write_activations_binary(docs, 16, path("whole.saea"));
    std::ifstream in(path("whole.saea"), std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string bytes = buf.str();
    std::ofstream(path("cut.saea"), std::ios::binary)
        << bytes.substr(0, bytes.size() - 7);
    check(run("embed --activations " + path("cut.saea") + " --out " +
              path("cut_store.saea")) == 2,
          "exit 2: truncated activation file");
  }

  // Unreachable live provider -> gateway failure.
  {
    std::ofstream(path("dead_provider.json"))
        << json{{"endpoint", "http://127.0.0.1:9/v1/annotate"},
                {"model", "m"},
                {"timeout_s", 1.0},
                {"retries", 0}}
               .dump();
    std::ofstream(path("kp_text.jsonl"))
        << json{{"query_id", "k"}, {"text", "keyphrase"}}.dump() << "\n";
    const int rc =
        run("cluster --store " + path("gen_blocks/store.saea") +
            " --k-clusters 2 --catalog " + path("gen_blocks/catalog.jsonl") +
            " --keyphrases " + path("kp_text.jsonl") +
            " --k-latents 6 --provider-config " + path("dead_provider.json") +
            " --out " + path("dead.json"));
    check(rc == 3, "exit 3: unreachable provider endpoint");
  }
}

void pair_pipeline() {
  SynthSpec spec;
  spec.n_docs = 400;
  spec.d_sae = 128;
  spec.background_rate = 0.02;
  spec.seed = 11;
  spec.pairs.push_back({30, 31, 0.2, 0.0});
  std::ofstream(path("pair_spec.json")) << spec.to_json().dump(2) << "\n";

  check(run("synth --spec " + path("pair_spec.json") + " --out " +
            path("gen_pair")) == 0,
        "synth: pair corpus generated");
  check(run("embed --activations " + path("gen_pair/main.saea") + " --out " +
            path("gen_pair/store.saea")) == 0,
        "embed: pair corpus pooled");
  check(run("corr --store " + path("gen_pair/store.saea") + " --catalog " +
            path("gen_pair/catalog.jsonl") + " --activations " +
            path("gen_pair/main.saea") +
            " --npmi-min 0.8 --trivial-max 0.9 --out " + path("corr.json")) == 0,
        "corr: pair mining runs");
  check(run("eval --report " + path("corr.json") + " --truth " +
            path("gen_pair/truth.json") + " --kind corr --out " +
            path("corr_eval.json")) == 0,
        "eval: corr report scored");
  const json metrics = load_json(path("corr_eval.json"));
  check(metrics.at("recall").get<double>() == 1.0,
        "corr pipeline recovers the planted pair (recall 1.0)");
  check(metrics.at("precision").get<double>() >= 0.9,
        "corr pipeline precision >= 0.9");
}

void diff_pipeline() {
  SynthSpec spec;
  spec.n_docs = 600;
  spec.d_sae = 128;
  spec.background_rate = 0.02;
  spec.seed = 12;
  spec.diffs.push_back({9, 0.5, 0.05});
  std::ofstream(path("diff_spec.json")) << spec.to_json().dump(2) << "\n";

  check(run("synth --spec " + path("diff_spec.json") + " --out " +
            path("gen_diff")) == 0,
        "synth: diff corpora generated");
  check(run("embed --activations " + path("gen_diff/A.saea") + " --out " +
            path("gen_diff/A_store.saea")) == 0,
        "embed: corpus A pooled");
  check(run("embed --activations " + path("gen_diff/B.saea") + " --out " +
            path("gen_diff/B_store.saea")) == 0,
        "embed: corpus B pooled");
  check(run("diff --store " + path("gen_diff/A_store.saea") + " --others " +
            path("gen_diff/B_store.saea") + " --out " + path("diff.json")) == 0,
        "diff: report written");
  check(run("eval --report " + path("diff.json") + " --truth " +
            path("gen_diff/truth.json") + " --kind diff --out " +
            path("diff_eval.json")) == 0,
        "eval: diff report scored");
  const json metrics = load_json(path("diff_eval.json"));
  check(metrics.at("ranks").at(0).at("rank").get<size_t>() == 1,
        "diff pipeline ranks the planted latent first");
}

void cluster_pipeline() {
  SynthSpec spec;
  spec.n_docs = 200;
  spec.d_sae = 128;
  spec.background_rate = 0.01;
  spec.seed = 13;
  spec.blocks.push_back({3, 4, 0.05});
  std::ofstream(path("blocks_spec.json")) << spec.to_json().dump(2) << "\n";

  check(run("synth --spec " + path("blocks_spec.json") + " --out " +
            path("gen_blocks")) == 0,
        "synth: block corpus generated");
  check(run("embed --activations " + path("gen_blocks/main.saea") + " --out " +
            path("gen_blocks/store.saea")) == 0,
        "embed: block corpus pooled");
  {
    const json truth = load_json(path("gen_blocks/truth.json"));
    std::ofstream(path("axis.jsonl"))
        << json{{"query_id", "axis"},
                {"vec", truth.at("axes").at(0).at("axis_vec")}}
               .dump()
        << "\n";
  }
  check(run("cluster --store " + path("gen_blocks/store.saea") +
            " --k-clusters 3 --seed 7 --catalog " +
            path("gen_blocks/catalog.jsonl") + " --keyphrases " +
            path("axis.jsonl") + " --k-latents 12 --mock --out " +
            path("cluster.json")) == 0,
        "cluster: targeted clustering runs");
  check(run("eval --report " + path("cluster.json") + " --truth " +
            path("gen_blocks/truth.json") + " --kind cluster --out " +
            path("cluster_eval.json")) == 0,
        "eval: cluster report scored");
  const json metrics = load_json(path("cluster_eval.json"));
  check(metrics.at("ari").at(0).at("ari").get<double>() >= 0.9,
        "cluster pipeline recovers the planted blocks (ARI >= 0.9)");
}

void retrieve_pipeline() {
  SynthSpec spec;
  spec.n_docs = 300;
  spec.d_sae = 128;
  spec.background_rate = 0.02;
  spec.seed = 14;
  spec.relevance.push_back({40, 50});
  std::ofstream(path("rel_spec.json")) << spec.to_json().dump(2) << "\n";

  check(run("synth --spec " + path("rel_spec.json") + " --out " +
            path("gen_rel")) == 0,
        "synth: relevance corpus generated");
  check(run("embed --activations " + path("gen_rel/main.saea") + " --out " +
            path("gen_rel/store.saea")) == 0,
        "embed: relevance corpus pooled");
  {
    // Query with the planted latent's own label vector; judgments from truth.
    json label_vec;
    std::ifstream cat(path("gen_rel/catalog.jsonl"));
    std::string line;
    while (std::getline(cat, line)) {
      const json entry = json::parse(line);
      if (entry.at("latent_id").get<LatentId>() == 40) {
        label_vec = entry.at("label_vec");
        break;
      }
    }
    std::ofstream(path("rel_query.jsonl"))
        << json{{"query_id", "probe"}, {"vec", label_vec}}.dump() << "\n";
    const json truth = load_json(path("gen_rel/truth.json"));
    std::ofstream jf(path("rel_judgments.jsonl"));
    for (const auto& id : truth.at("relevance").at(0).at("relevant_doc_ids")) {
      jf << json{{"query_id", "probe"}, {"doc_id", id}, {"relevant", 1}}.dump()
         << "\n";
    }
  }
  check(run("retrieve --store " + path("gen_rel/store.saea") + " --catalog " +
            path("gen_rel/catalog.jsonl") + " --queries " +
            path("rel_query.jsonl") + " --judgments " +
            path("rel_judgments.jsonl") +
            " --k-latents 1 --temperature 0.2 --mock --out " +
            path("retrieve.json")) == 0,
        "retrieve: ranking runs");
  const json report = load_json(path("retrieve.json"));
  check(report.at("map").get<double>() == 1.0,
        "retrieve pipeline reaches MAP 1.0 on the planted latent");
  check(run("eval --report " + path("retrieve.json") + " --truth " +
            path("gen_rel/truth.json") + " --kind retrieve --out " +
            path("retrieve_eval.json")) == 0,
        "eval: retrieve report scored");
  const json metrics = load_json(path("retrieve_eval.json"));
  check(metrics.at("map").at(0).at("map").get<double>() == 1.0,
        "eval confirms MAP 1.0 against ground truth");
}

void dual_route_embed() {
  // The hidden-state route (encode via weights) and the precomputed-activation
  // route must produce byte-identical stores.
  const uint32_t d_model = 8, d_sae = 24;
  Rng rng(99);
  SaeWeights::RowMajorMatrix w_enc(d_sae, d_model), w_dec(d_model, d_sae);
  Eigen::VectorXf b_enc(d_sae), b_dec(d_model);
  for (uint32_t i = 0; i < d_sae; ++i) {
    for (uint32_t j = 0; j < d_model; ++j) {
      w_enc(i, j) = static_cast<float>(rng.normal());
      w_dec(j, i) = static_cast<float>(rng.normal());
    }
  }
  for (uint32_t i = 0; i < d_sae; ++i) b_enc[i] = static_cast<float>(rng.normal() * 0.2);
  for (uint32_t j = 0; j < d_model; ++j) b_dec[j] = 0.0f;
  const SaeWeights w(w_enc, b_enc, w_dec, b_dec, ActivationKind::kRelu);
  save_weights(w, path("weights.saew"));

  std::vector<DocActivations> docs;
  std::ofstream hs(path("hidden.jsonl"));
  for (int d = 0; d < 12; ++d) {
    DocActivations doc;
    doc.doc_id = "h" + std::to_string(d);
    json states = json::array();
    for (uint32_t t = 0; t < 5; ++t) {
      Eigen::VectorXf x(d_model);
      json sj = json::array();
      for (uint32_t j = 0; j < d_model; ++j) {
        x[j] = static_cast<float>(rng.normal());
        sj.push_back(x[j]);
      }
      states.push_back(sj);
      doc.tokens.push_back(encode(x, w, t));
    }
    hs << json{{"id", doc.doc_id}, {"hidden", states}}.dump() << "\n";
    docs.push_back(std::move(doc));
  }
  hs.close();
  write_activations_binary(docs, d_sae, path("precomputed.saea"));

  check(run("embed --hidden-states " + path("hidden.jsonl") + " --weights " +
            path("weights.saew") + " --out " + path("route1.saea")) == 0,
        "embed: hidden-state route runs");
  check(run("embed --activations " + path("precomputed.saea") + " --out " +
            path("route2.saea")) == 0,
        "embed: activation route runs");
  check(files_equal(path("route1.saea"), path("route2.saea")),
        "dual-route embedding stores are byte-identical");
}

void config_merge() {
  std::ofstream(path("corr_config.json")) << json{{"npmi-min", 0.9}}.dump();
  const std::string base =
      "corr --config " + path("corr_config.json") + " --store " +
      path("gen_pair/store.saea") + " --catalog " + path("gen_pair/catalog.jsonl");

  check(run(base + " --out " + path("corr_cfg1.json")) == 0,
        "corr: config-file run");
  check(load_json(path("corr_cfg1.json"))
                .at("thresholds")
                .at("npmi_min")
                .get<double>() == 0.9,
        "config file fills unset flags");

  check(run(base + " --npmi-min 0.7 --out " + path("corr_cfg2.json")) == 0,
        "corr: config-plus-flag run");
  check(load_json(path("corr_cfg2.json"))
                .at("thresholds")
                .at("npmi_min")
                .get<double>() == 0.7,
        "explicit flags win over the config file");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: cli_tests <path-to-cli>\n";
    return 2;
  }
  g_cli = argv[1];
  g_dir = fs::temp_directory_path() / ("saekit_cli_" + std::to_string(::getpid()));
  fs::remove_all(g_dir);
  fs::create_directories(g_dir);

  pair_pipeline();
  diff_pipeline();
  cluster_pipeline();  // also prepares gen_blocks used by exit_codes
  retrieve_pipeline();
  dual_route_embed();
  config_merge();
  exit_codes();

  fs::remove_all(g_dir);
  if (g_failures > 0) {
    std::cout << g_failures << " CLI check(s) failed\n";
    return 1;
  }
  std::cout << "all CLI checks passed\n";
  return 0;
}
