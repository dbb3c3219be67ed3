#include "saekit/gateway.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <httplib.h>

namespace saekit {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kRelabel: return "relabel";
    case TaskKind::kJudge: return "judge";
    case TaskKind::kSummarize: return "summarize";
    case TaskKind::kClassifySyntactic: return "classify_syntactic";
    case TaskKind::kAssignCluster: return "assign_cluster";
    case TaskKind::kEmbed: return "embed";
  }
  return "relabel";
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "relabel") return TaskKind::kRelabel;
  if (s == "judge") return TaskKind::kJudge;
  if (s == "summarize") return TaskKind::kSummarize;
  if (s == "classify_syntactic") return TaskKind::kClassifySyntactic;
  if (s == "assign_cluster") return TaskKind::kAssignCluster;
  if (s == "embed") return TaskKind::kEmbed;
  throw InvalidArgument("unknown task kind: " + s);
}

std::string AnnotationTask::task_id() const {
  // json::dump sorts object keys, so the hash is canonical.
  return content_hash_hex(to_string(kind) + "\x1f" + template_id + "\x1f" +
                          payload.dump());
}

ProviderConfig load_provider_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open provider config: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(std::string("provider config: ") + e.what());
  }
  ProviderConfig c;
  c.endpoint = j.at("endpoint").get<std::string>();
  c.model = j.at("model").get<std::string>();
  c.auth_env_var = j.value("auth_env_var", std::string{});
  c.timeout_s = j.value("timeout_s", 60.0);
  c.retries = j.value("retries", 2);
  return c;
}

bool parse_judge_answer(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::string last_answer;
  while (std::getline(in, line)) {
    auto pos = line.find("ANSWER:");
    if (pos != std::string::npos) {
      last_answer = line.substr(pos + 7);
    }
  }
  // Trim whitespace around the verdict.
  const auto first = last_answer.find_first_not_of(" \t\r");
  const auto last = last_answer.find_last_not_of(" \t\r");
  if (first == std::string::npos) {
    throw GatewayError("judge response lacks an ANSWER line");
  }
  const std::string verdict = last_answer.substr(first, last - first + 1);
  if (verdict == "YES") return true;
  if (verdict == "NO") return false;
  throw GatewayError("judge ANSWER is neither YES nor NO: '" + verdict + "'");
}

// ---------------------------------------------------------------------------
// Mock provider.
// ---------------------------------------------------------------------------

AnnotationResult MockProvider::run(const AnnotationTask& task) {
  AnnotationResult res;
  res.task_id = task.task_id();
  res.kind = task.kind;
  res.provider = ResultProvider::kMock;
  const uint64_t h = fnv1a64(res.task_id);

  switch (task.kind) {
    case TaskKind::kRelabel:
      res.content = {{"label", "mock label " + res.task_id.substr(0, 8)}};
      break;
    case TaskKind::kJudge:
      res.content = {{"answer", (h & 1) != 0},
                     {"reasoning", "mock verdict from task hash parity"}};
      break;
    case TaskKind::kSummarize:
      res.content = {{"summary", "mock summary " + res.task_id.substr(0, 8)}};
      break;
    case TaskKind::kClassifySyntactic:
      res.content = {{"class", (h & 1) != 0 ? "syntactic" : "semantic"}};
      break;
    case TaskKind::kAssignCluster: {
      const uint64_t n = task.payload.value("n_clusters", 1);
      res.content = {{"cluster", n == 0 ? 0 : h % n}};
      break;
    }
    case TaskKind::kEmbed: {
      const size_t dim = task.payload.value("dim", size_t{64});
      Rng rng(splitmix64(h));
      std::vector<double> vec(dim);
      double norm2 = 0.0;
      for (auto& v : vec) {
        v = rng.normal();
        norm2 += v * v;
      }
      const double inv = 1.0 / std::sqrt(norm2);
      for (auto& v : vec) v *= inv;
      res.content = {{"vec", vec}};
      break;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// HTTP provider.
// ---------------------------------------------------------------------------

HttpProvider::HttpProvider(ProviderConfig config) : config_(std::move(config)) {}

namespace {

// Renders the task into a single user message; templates are resolved by the
// caller into payload["prompt"].
std::string render_prompt(const AnnotationTask& task) {
  if (task.payload.contains("prompt")) {
    return task.payload.at("prompt").get<std::string>();
  }
  return task.payload.dump();
}

std::pair<std::string, std::string> split_endpoint(const std::string& url) {
  // "https://host[:port]" + path
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw GatewayError("bad endpoint URL: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

AnnotationResult HttpProvider::run(const AnnotationTask& task) {
  auto [host, path] = split_endpoint(config_.endpoint);
  httplib::Client client(host);
  client.set_read_timeout(static_cast<time_t>(config_.timeout_s),
                          static_cast<time_t>(
                              (config_.timeout_s - std::floor(config_.timeout_s)) * 1e6));
  httplib::Headers headers;
  if (!config_.auth_env_var.empty()) {
    const char* key = std::getenv(config_.auth_env_var.c_str());
    if (key == nullptr) {
      throw GatewayError("API key env var not set: " + config_.auth_env_var);
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  json body;
  if (task.kind == TaskKind::kEmbed) {
    body = {{"model", config_.model},
            {"input", render_prompt(task)}};
  } else {
    body = {{"model", config_.model},
            {"messages", json::array({{{"role", "user"},
                                       {"content", render_prompt(task)}}})}};
  }

  std::string last_error;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    auto http_res = client.Post(path, headers, body.dump(), "application/json");
    if (!http_res) {
      last_error = "transport failure: " + httplib::to_string(http_res.error());
      continue;
    }
    if (http_res->status != 200) {
      last_error = "HTTP " + std::to_string(http_res->status);
      if (http_res->status >= 400 && http_res->status < 500 &&
          http_res->status != 429) {
        break;  // client errors other than rate limits are not retryable
      }
      continue;
    }

    json reply;
    try {
      reply = json::parse(http_res->body);
    } catch (const json::exception& e) {
      throw GatewayError(std::string("malformed provider JSON: ") + e.what() +
                         " (task " + task.task_id() + ")");
    }

    AnnotationResult res;
    res.task_id = task.task_id();
    res.kind = task.kind;
    res.provider = ResultProvider::kLive;
    if (task.kind == TaskKind::kEmbed) {
      auto vec = reply.at("data").at(0).at("embedding").get<std::vector<double>>();
      double norm2 = 0.0;
      for (double v : vec) norm2 += v * v;
      if (norm2 <= 0.0) throw GatewayError("zero embedding from provider");
      const double inv = 1.0 / std::sqrt(norm2);
      for (auto& v : vec) v *= inv;
      res.content = {{"vec", vec}};
      return res;
    }
    const std::string text =
        reply.at("choices").at(0).at("message").at("content").get<std::string>();
    switch (task.kind) {
      case TaskKind::kJudge:
        res.content = {{"answer", parse_judge_answer(text)}, {"reasoning", text}};
        break;
      case TaskKind::kRelabel:
        res.content = {{"label", text}};
        break;
      case TaskKind::kSummarize:
        res.content = {{"summary", text}};
        break;
      case TaskKind::kClassifySyntactic:
        res.content = {{"class", text}};
        break;
      case TaskKind::kAssignCluster:
        res.content = {{"cluster", std::stoul(text)}};
        break;
      default:
        break;
    }
    return res;
  }
  throw GatewayError("provider failed after retries (" + last_error + "), task " +
                     task.task_id());
}

// ---------------------------------------------------------------------------
// Gateway.
// ---------------------------------------------------------------------------

Gateway::Gateway(std::unique_ptr<Provider> provider, GatewayOptions options)
    : provider_(std::move(provider)), options_(std::move(options)) {
  if (!options_.cache_dir.empty()) {
    fs::create_directories(options_.cache_dir);
  }
}

std::optional<AnnotationResult> Gateway::cache_lookup(
    const std::string& task_id) const {
  if (options_.cache_dir.empty()) return std::nullopt;
  const fs::path path = fs::path(options_.cache_dir) / (task_id + ".json");
  std::ifstream in(path);
  if (!in) return std::nullopt;
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception&) {
    return std::nullopt;  // corrupt entry: fall through to the provider
  }
  AnnotationResult res;
  res.task_id = j.at("task_id").get<std::string>();
  res.kind = task_kind_from_string(j.at("kind").get<std::string>());
  res.content = j.at("content");
  res.provider = ResultProvider::kCache;
  return res;
}

void Gateway::cache_store(const AnnotationResult& result) const {
  if (options_.cache_dir.empty()) return;
  const json j = {{"task_id", result.task_id},
                  {"kind", to_string(result.kind)},
                  {"content", result.content}};
  const fs::path final_path =
      fs::path(options_.cache_dir) / (result.task_id + ".json");
  // Atomic publish: write a temp file, then rename.
  const fs::path tmp_path =
      final_path.string() + ".tmp." +
      std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp_path, std::ios::trunc);
    out << j.dump(2) << '\n';
  }
  std::error_code ec;
  fs::rename(tmp_path, final_path, ec);
  if (ec) fs::remove(tmp_path, ec);
}

AnnotationResult Gateway::submit(const AnnotationTask& task) {
  if (task.payload.dump().size() > options_.max_payload_bytes) {
    throw InvalidArgument("task payload exceeds size budget");
  }
  const std::string id = task.task_id();
  if (auto cached = cache_lookup(id)) return *cached;
  AnnotationResult res = provider_->run(task);
  ++provider_calls_;
  cache_store(res);
  return res;
}

std::vector<TaskOutcome> Gateway::submit_batch(
    const std::vector<AnnotationTask>& tasks, size_t max_in_flight) {
  if (max_in_flight < 1) throw InvalidArgument("max_in_flight must be >= 1");

  // Dedupe by task id: one provider call per unique task.
  std::vector<std::string> ids;
  ids.reserve(tasks.size());
  std::unordered_map<std::string, size_t> first_index;
  std::vector<size_t> unique_indices;
  for (size_t i = 0; i < tasks.size(); ++i) {
    ids.push_back(tasks[i].task_id());
    if (first_index.emplace(ids[i], i).second) unique_indices.push_back(i);
  }

  std::unordered_map<std::string, TaskOutcome> outcomes_by_id;
  outcomes_by_id.reserve(unique_indices.size());
  std::mutex mu;
  std::atomic<size_t> next{0};
  std::atomic<size_t> calls{0};

  auto worker = [&]() {
    for (;;) {
      const size_t slot = next.fetch_add(1);
      if (slot >= unique_indices.size()) return;
      const AnnotationTask& task = tasks[unique_indices[slot]];
      TaskOutcome outcome;
      try {
        const std::string id = ids[unique_indices[slot]];
        if (task.payload.dump().size() > options_.max_payload_bytes) {
          throw InvalidArgument("task payload exceeds size budget");
        }
        if (auto cached = cache_lookup(id)) {
          outcome.result = *cached;
        } else {
          outcome.result = provider_->run(task);
          calls.fetch_add(1);
          cache_store(*outcome.result);
        }
      } catch (const std::exception& e) {
        outcome.error = e.what();
      }
      std::lock_guard<std::mutex> lock(mu);
      outcomes_by_id.emplace(ids[unique_indices[slot]], std::move(outcome));
    }
  };

  const size_t n_threads = std::min(max_in_flight, unique_indices.size());
  std::vector<std::thread> threads;
  threads.reserve(n_threads);
  for (size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  provider_calls_ += calls.load();

  std::vector<TaskOutcome> out;
  out.reserve(tasks.size());
  for (const auto& id : ids) out.push_back(outcomes_by_id.at(id));
  return out;
}

}  // namespace saekit
