#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "saekit/common.hpp"

namespace saekit {

enum class TaskKind {
  kRelabel,
  kJudge,
  kSummarize,
  kClassifySyntactic,
  kAssignCluster,
  kEmbed,
};

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& s);

// A unit of external model work. task_id is a stable content hash of
// (kind, template_id, payload), so identical tasks dedupe and cache together.
struct AnnotationTask {
  TaskKind kind;
  std::string template_id;
  nlohmann::json payload;

  std::string task_id() const;
};

enum class ResultProvider { kLive, kMock, kCache };

struct AnnotationResult {
  std::string task_id;
  TaskKind kind;
  nlohmann::json content;  // {"label"}, {"answer","reasoning"}, {"summary"},
                           // {"class"}, {"cluster"}, or {"vec"}
  ResultProvider provider = ResultProvider::kMock;
};

// Either a result or a per-task error message; submit_batch never aborts
// wholesale on one bad task.
struct TaskOutcome {
  std::optional<AnnotationResult> result;
  std::string error;
  bool ok() const { return result.has_value(); }
};

struct ProviderConfig {
  std::string endpoint;
  std::string model;
  std::string auth_env_var;  // name of the env var holding the API key
  double timeout_s = 60.0;
  int retries = 2;
};

ProviderConfig load_provider_config(const std::string& path);

class Provider {
 public:
  virtual ~Provider() = default;
  virtual AnnotationResult run(const AnnotationTask& task) = 0;
};

// Pure function of the task: equal tasks produce bit-equal results across
// runs and platforms. Judge answers come from the task hash parity; embed
// vectors are hash-seeded points on the unit sphere.
class MockProvider : public Provider {
 public:
  AnnotationResult run(const AnnotationTask& task) override;
};

// Chat-completion-style HTTP provider (plain text in/out plus embeddings).
class HttpProvider : public Provider {
 public:
  explicit HttpProvider(ProviderConfig config);
  AnnotationResult run(const AnnotationTask& task) override;

 private:
  ProviderConfig config_;
};

// Parses a judge response: the final "ANSWER:" line wins and must carry YES
// or NO; anything else is a parse error.
bool parse_judge_answer(const std::string& text);

struct GatewayOptions {
  std::string cache_dir;  // empty disables the cache
  size_t max_payload_bytes = 1 << 20;
};

// Single choke-point for external model services: dedupe, response cache,
// bounded concurrency. Safe for concurrent submission.
class Gateway {
 public:
  Gateway(std::unique_ptr<Provider> provider, GatewayOptions options);

  AnnotationResult submit(const AnnotationTask& task);
  std::vector<TaskOutcome> submit_batch(const std::vector<AnnotationTask>& tasks,
                                        size_t max_in_flight);

  size_t provider_calls() const { return provider_calls_; }

 private:
  std::optional<AnnotationResult> cache_lookup(const std::string& task_id) const;
  void cache_store(const AnnotationResult& result) const;

  std::unique_ptr<Provider> provider_;
  GatewayOptions options_;
  size_t provider_calls_ = 0;
};

}  // namespace saekit
