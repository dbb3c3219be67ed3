#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "saekit/catalog.hpp"

using namespace saekit;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::vector<double> unit2(double x, double y) {
  const double n = std::sqrt(x * x + y * y);
  return {x / n, y / n};
}

LatentCatalogEntry entry(LatentId id, const std::string& label,
                         std::vector<double> vec = {}) {
  LatentCatalogEntry e;
  e.latent_id = id;
  e.label = label;
  e.label_vec = std::move(vec);
  return e;
}

}  // namespace

TEST_CASE("cosine of unit vectors is the plain dot product") {
  CHECK(cosine({1, 0}, {0, 1}) == doctest::Approx(0.0));
  CHECK(cosine({1, 0}, {1, 0}) == doctest::Approx(1.0));
  CHECK(cosine(unit2(1, 1), {1, 0}) == doctest::Approx(std::sqrt(0.5)));
  CHECK_THROWS_AS(cosine({1, 0}, {1, 0, 0}), InvalidArgument);
}

TEST_CASE("insert rejects non-unit label vectors") {
  LatentCatalog c;
  CHECK_THROWS_AS(c.insert(entry(0, "bad", {0.5, 0.5})), InvalidArgument);
  c.insert(entry(0, "ok", unit2(3, 4)));
  CHECK(c.size() == 1);
}

TEST_CASE("duplicate insert keeps the last entry") {
  LatentCatalog c;
  c.insert(entry(5, "first"));
  c.insert(entry(5, "second"));
  CHECK(c.size() == 1);
  CHECK(c.find(5)->label == "second");
}

TEST_CASE("label_similarity computes cosine and rejects missing vectors") {
  LatentCatalog c;
  c.insert(entry(1, "x", {1.0, 0.0}));
  c.insert(entry(2, "y", {0.0, 1.0}));
  c.insert(entry(3, "no-vec"));
  CHECK(c.label_similarity(1, 2) == doctest::Approx(0.0));
  CHECK(c.label_similarity(1, 1) == doctest::Approx(1.0));
  CHECK_THROWS_AS(c.label_similarity(1, 3), InvalidArgument);
  CHECK_THROWS_AS(c.label_similarity(1, 99), InvalidArgument);
}

TEST_CASE("top_k_latents orders by cosine with lower-id tie break") {
  LatentCatalog c;
  c.insert(entry(10, "east", {1.0, 0.0}));
  c.insert(entry(3, "also-east", {1.0, 0.0}));
  c.insert(entry(7, "north", {0.0, 1.0}));
  c.insert(entry(8, "diag", unit2(1, 1)));
  c.insert(entry(9, "unlabeled"));
  const auto top = c.top_k_latents({1.0, 0.0}, 3);
  REQUIRE(top.size() == 3);
  CHECK(top[0].first == 3);   // cosine 1, lower id first
  CHECK(top[1].first == 10);  // cosine 1
  CHECK(top[2].first == 8);   // cosine sqrt(1/2)
  CHECK(top[0].second == doctest::Approx(1.0));
  CHECK(top[2].second == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("top_k against a brute-force oracle on random catalogs") {
  Rng rng(1234);
  LatentCatalog c;
  std::vector<std::pair<LatentId, std::vector<double>>> raw;
  for (LatentId id = 0; id < 60; ++id) {
    std::vector<double> v(4);
    double n2 = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      n2 += x * x;
    }
    for (auto& x : v) x /= std::sqrt(n2);
    raw.emplace_back(id, v);
    c.insert(entry(id, "l" + std::to_string(id), v));
  }
  std::vector<double> q(4);
  double qn = 0.0;
  for (auto& x : q) {
    x = rng.normal();
    qn += x * x;
  }
  for (auto& x : q) x /= std::sqrt(qn);

  // Oracle: score everything, full stable sort.
  std::vector<std::pair<LatentId, double>> all;
  for (const auto& [id, v] : raw) all.emplace_back(id, cosine(q, v));
  std::sort(all.begin(), all.end(), [](auto& a, auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  const auto got = c.top_k_latents(q, 10);
  REQUIRE(got.size() == 10);
  for (size_t i = 0; i < 10; ++i) {
    CHECK(got[i].first == all[i].first);
    CHECK(got[i].second == doctest::Approx(all[i].second));
  }
}

TEST_CASE("top_k grows monotonically with k") {
  Rng rng(5);
  LatentCatalog c;
  for (LatentId id = 0; id < 20; ++id) {
    c.insert(entry(id, "l", unit2(rng.normal(), rng.normal())));
  }
  const auto q = unit2(0.3, 0.7);
  auto prev = c.top_k_latents(q, 1);
  for (size_t k = 2; k <= 20; ++k) {
    auto cur = c.top_k_latents(q, k);
    REQUIRE(cur.size() == k);
    for (size_t i = 0; i < prev.size(); ++i) CHECK(cur[i].first == prev[i].first);
    prev = cur;
  }
}

TEST_CASE("union_keyphrase_latents unions per-keyphrase top-k sets") {
  LatentCatalog c;
  c.insert(entry(0, "east", {1.0, 0.0}));
  c.insert(entry(1, "north", {0.0, 1.0}));
  c.insert(entry(2, "west", {-1.0, 0.0}));
  const auto u = c.union_keyphrase_latents({{1.0, 0.0}, {0.0, 1.0}}, 1);
  CHECK(u == std::vector<LatentId>{0, 1});
  CHECK_THROWS_AS(c.union_keyphrase_latents({}, 1), InvalidArgument);
}

TEST_CASE("catalog jsonl round-trips entries and provenance") {
  LatentCatalog c;
  c.insert(entry(4, "has vec", unit2(2, -1)));
  auto e = entry(11, "relabeled one");
  e.provenance = LabelProvenance::kRelabeled;
  c.insert(std::move(e));
  const std::string path = temp_path("saekit_test_catalog.jsonl");
  save_catalog(c, path);
  const auto back = load_catalog(path);
  REQUIRE(back.size() == 2);
  CHECK(back.find(4)->label == "has vec");
  CHECK(back.find(4)->label_vec == c.find(4)->label_vec);
  CHECK(back.find(11)->provenance == LabelProvenance::kRelabeled);
  CHECK(back.find(11)->has_vector() == false);
  std::filesystem::remove(path);
}

TEST_CASE("lenient load skips malformed lines, strict load throws") {
  const std::string path = temp_path("saekit_test_catalog_bad.jsonl");
  std::ofstream(path) << R"({"latent_id": 1, "label": "good"})" << "\n"
                      << "{broken\n"
                      << R"({"latent_id": 2, "label": "also good"})" << "\n";
  CHECK_THROWS_AS(load_catalog(path, false), FormatError);
  const auto c = load_catalog(path, true);
  CHECK(c.size() == 2);
  CHECK(c.find(1) != nullptr);
  CHECK(c.find(2) != nullptr);
  std::filesystem::remove(path);
}

TEST_CASE("relabel task marks activating tokens with << >>") {
  DocActivations doc;
  doc.doc_id = "d";
  doc.tokens.resize(3);
  for (uint32_t t = 0; t < 3; ++t) doc.tokens[t].token_index = t;
  doc.tokens[1].entries = {{42, 1.0f}};
  const auto task = make_relabel_task(42, {doc}, {"alpha beta gamma"}, {"plain text"});
  CHECK(task.kind == TaskKind::kRelabel);
  CHECK(task.template_id == "relabel.v1");
  CHECK(task.payload.at("latent_id") == 42);
  REQUIRE(task.payload.at("positive_samples").size() == 1);
  CHECK(task.payload.at("positive_samples")[0] == "alpha <<beta>> gamma");
  CHECK(task.payload.at("negative_samples")[0] == "plain text");
}

TEST_CASE("relabel task rejects a non-activating positive sample") {
  DocActivations doc;
  doc.doc_id = "d";
  doc.tokens.resize(1);
  doc.tokens[0].entries = {{7, 1.0f}};
  CHECK_THROWS_AS(make_relabel_task(42, {doc}, {"text"}, {}), InvalidArgument);
}

TEST_CASE("identical relabel tasks share a task id") {
  DocActivations doc;
  doc.doc_id = "d";
  doc.tokens.resize(1);
  doc.tokens[0].entries = {{1, 1.0f}};
  const auto a = make_relabel_task(1, {doc}, {"word"}, {"neg"});
  const auto b = make_relabel_task(1, {doc}, {"word"}, {"neg"});
  const auto c = make_relabel_task(1, {doc}, {"word"}, {"other neg"});
  CHECK(a.task_id() == b.task_id());
  CHECK(a.task_id() != c.task_id());
}
