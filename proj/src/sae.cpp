#include "saekit/sae.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numeric>

#include <nlohmann/json.hpp>

namespace saekit {

namespace {

using json = nlohmann::json;

constexpr char kMagic[4] = {'S', 'A', 'E', 'W'};
constexpr uint32_t kVersion = 1;

void check_finite(const float* data, size_t n, const std::string& name) {
  for (size_t i = 0; i < n; ++i) {
    if (!std::isfinite(data[i])) {
      throw FormatError("non-finite value in tensor " + name + " at index " +
                        std::to_string(i));
    }
  }
}

uint32_t read_u32(std::istream& in, const char* what) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw FormatError(std::string("truncated file reading ") + what);
  return v;
}

void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

}  // namespace

std::string to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::kRelu: return "relu";
    case ActivationKind::kTopK: return "topk";
    case ActivationKind::kBatchTopK: return "batchtopk";
  }
  return "relu";
}

ActivationKind activation_kind_from_string(const std::string& s) {
  if (s == "relu") return ActivationKind::kRelu;
  if (s == "topk") return ActivationKind::kTopK;
  if (s == "batchtopk") return ActivationKind::kBatchTopK;
  throw FormatError("unknown activation kind: " + s);
}

SaeWeights::SaeWeights(RowMajorMatrix w_enc, Eigen::VectorXf b_enc,
                       RowMajorMatrix w_dec, Eigen::VectorXf b_dec,
                       ActivationKind kind, uint32_t top_k)
    : w_enc_(std::move(w_enc)),
      b_enc_(std::move(b_enc)),
      w_dec_(std::move(w_dec)),
      b_dec_(std::move(b_dec)),
      kind_(kind),
      top_k_(top_k) {
  const auto d_sae = w_enc_.rows();
  const auto d_model = w_enc_.cols();
  if (d_sae <= 0 || d_model <= 0) throw InvalidArgument("empty weight matrices");
  if (b_enc_.size() != d_sae || w_dec_.rows() != d_model ||
      w_dec_.cols() != d_sae || b_dec_.size() != d_model) {
    throw InvalidArgument("inconsistent weight dimensions");
  }
  if ((kind_ == ActivationKind::kTopK || kind_ == ActivationKind::kBatchTopK) &&
      top_k_ == 0) {
    throw InvalidArgument("topk activation requires k >= 1");
  }
  if (d_sae < d_model) {
    std::cerr << "warning: d_sae (" << d_sae << ") < d_model (" << d_model
              << "): dictionary is not overcomplete\n";
  }
}

SaeWeights load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open weight file: " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("malformed header: bad magic in " + path);
  }
  const uint32_t version = read_u32(in, "version");
  if (version != kVersion) {
    throw FormatError("unsupported weight container version " +
                      std::to_string(version));
  }
  const uint32_t header_len = read_u32(in, "header length");
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), header_len);
  if (!in) throw FormatError("truncated header in " + path);

  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed header JSON: ") + e.what());
  }

  const uint64_t d_model = header.at("d_model").get<uint64_t>();
  const uint64_t d_sae = header.at("d_sae").get<uint64_t>();
  if (d_model == 0 || d_sae == 0) throw FormatError("zero dimension in header");
  const auto& act = header.at("activation");
  const ActivationKind kind =
      activation_kind_from_string(act.at("kind").get<std::string>());
  uint32_t top_k = 0;
  if (act.contains("k")) top_k = act.at("k").get<uint32_t>();

  auto read_blob = [&](float* dst, uint64_t count, const std::string& name) {
    in.read(reinterpret_cast<char*>(dst),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (static_cast<uint64_t>(in.gcount()) != count * sizeof(float)) {
      throw FormatError("tensor length mismatch for " + name);
    }
    check_finite(dst, count, name);
  };

  SaeWeights::RowMajorMatrix w_enc(d_sae, d_model);
  Eigen::VectorXf b_enc(d_sae);
  SaeWeights::RowMajorMatrix w_dec(d_model, d_sae);
  Eigen::VectorXf b_dec(d_model);
  read_blob(w_enc.data(), d_sae * d_model, "w_enc");
  read_blob(b_enc.data(), d_sae, "b_enc");
  read_blob(w_dec.data(), d_model * d_sae, "w_dec");
  read_blob(b_dec.data(), d_model, "b_dec");

  // Trailing bytes indicate a corrupt writer.
  in.peek();
  if (!in.eof()) throw FormatError("trailing bytes after tensors in " + path);

  return SaeWeights(std::move(w_enc), std::move(b_enc), std::move(w_dec),
                    std::move(b_dec), kind, top_k);
}

void save_weights(const SaeWeights& w, const std::string& path) {
  json act = {{"kind", to_string(w.activation_kind())}};
  if (w.activation_kind() != ActivationKind::kRelu) act["k"] = w.top_k();
  json header = {{"d_model", w.d_model()},
                 {"d_sae", w.d_sae()},
                 {"activation", act},
                 {"tensors", {"w_enc", "b_enc", "w_dec", "b_dec"}}};
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path);
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u32(out, static_cast<uint32_t>(header_text.size()));
  out.write(header_text.data(),
            static_cast<std::streamsize>(header_text.size()));

  auto write_blob = [&](const float* src, uint64_t count) {
    out.write(reinterpret_cast<const char*>(src),
              static_cast<std::streamsize>(count * sizeof(float)));
  };
  write_blob(w.w_enc().data(), uint64_t{w.d_sae()} * w.d_model());
  write_blob(w.b_enc().data(), w.d_sae());
  write_blob(w.w_dec().data(), uint64_t{w.d_model()} * w.d_sae());
  write_blob(w.b_dec().data(), w.d_model());
  if (!out) throw FormatError("write failed: " + path);
}

TokenActivationRecord encode(const Eigen::VectorXf& x, const SaeWeights& w,
                             uint32_t token_index) {
  if (x.size() != w.d_model()) {
    throw InvalidArgument("encode: input length " + std::to_string(x.size()) +
                          " != d_model " + std::to_string(w.d_model()));
  }
  if (!x.allFinite()) throw InvalidArgument("encode: non-finite input");

  const Eigen::VectorXf pre = w.w_enc() * x + w.b_enc();

  TokenActivationRecord rec;
  rec.token_index = token_index;
  if (w.activation_kind() == ActivationKind::kRelu) {
    for (Eigen::Index i = 0; i < pre.size(); ++i) {
      if (pre[i] > 0.0f) rec.entries.emplace_back(static_cast<LatentId>(i), pre[i]);
    }
    return rec;
  }

  // topk / batchtopk: keep the k largest positive pre-activations.
  std::vector<LatentId> positive;
  for (Eigen::Index i = 0; i < pre.size(); ++i) {
    if (pre[i] > 0.0f) positive.push_back(static_cast<LatentId>(i));
  }
  const size_t k = std::min<size_t>(w.top_k(), positive.size());
  // Larger value wins; equal values resolved by lower latent id.
  std::partial_sort(positive.begin(), positive.begin() + k, positive.end(),
                    [&pre](LatentId a, LatentId b) {
                      if (pre[a] != pre[b]) return pre[a] > pre[b];
                      return a < b;
                    });
  positive.resize(k);
  std::sort(positive.begin(), positive.end());
  for (LatentId id : positive) rec.entries.emplace_back(id, pre[id]);
  return rec;
}

Eigen::VectorXf decode(const TokenActivationRecord& a, const SaeWeights& w) {
  Eigen::VectorXf x = w.b_dec();
  for (const auto& [id, value] : a.entries) {
    if (id >= w.d_sae()) {
      throw InvalidArgument("decode: latent id " + std::to_string(id) +
                            " out of range (d_sae=" + std::to_string(w.d_sae()) +
                            ")");
    }
    x += value * w.w_dec().col(id);
  }
  return x;
}

float reconstruction_error(const Eigen::VectorXf& x, const SaeWeights& w) {
  return (x - decode(encode(x, w), w)).norm();
}

}  // namespace saekit
