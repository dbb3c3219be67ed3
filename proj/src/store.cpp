#include "saekit/store.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace saekit {

namespace {

using json = nlohmann::json;

constexpr char kMagic[4] = {'S', 'A', 'E', 'A'};
constexpr uint32_t kVersion = 1;

struct Cursor {
  std::istream& in;
  uint64_t offset = 0;

  template <typename T>
  T read(const char* what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) {
      throw FormatError(std::string("truncated activation file reading ") +
                        what + " at byte offset " + std::to_string(offset));
    }
    offset += sizeof(T);
    return v;
  }

  std::string read_string(size_t len, const char* what) {
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    if (!in) {
      throw FormatError(std::string("truncated activation file reading ") +
                        what + " at byte offset " + std::to_string(offset));
    }
    offset += len;
    return s;
  }
};

void validate_record(const TokenActivationRecord& rec, uint32_t d_sae,
                     size_t doc_ordinal) {
  LatentId prev = 0;
  bool first = true;
  for (const auto& [id, value] : rec.entries) {
    if (!first && id <= prev) {
      throw FormatError("doc " + std::to_string(doc_ordinal) +
                        ": latent ids not strictly increasing in token " +
                        std::to_string(rec.token_index));
    }
    if (d_sae != 0 && id >= d_sae) {
      throw FormatError("doc " + std::to_string(doc_ordinal) + ": latent id " +
                        std::to_string(id) + " >= d_sae " + std::to_string(d_sae));
    }
    if (!(value > 0.0f) || !std::isfinite(value)) {
      throw FormatError("doc " + std::to_string(doc_ordinal) +
                        ": non-positive or non-finite activation value");
    }
    prev = id;
    first = false;
  }
}

void validate_doc(const DocActivations& doc, uint32_t d_sae, size_t ordinal) {
  uint32_t prev_token = 0;
  bool first = true;
  for (const auto& tok : doc.tokens) {
    if (!first && tok.token_index <= prev_token) {
      throw FormatError("doc " + std::to_string(ordinal) +
                        ": token indices not strictly increasing");
    }
    validate_record(tok, d_sae, ordinal);
    prev_token = tok.token_index;
    first = false;
  }
}

}  // namespace

SaeEmbedding pool_document(const DocActivations& d) {
  // A document with no tokens (nothing fired anywhere) pools to an empty
  // embedding rather than an error; downstream stages treat it as all-zero.
  std::map<LatentId, float> max_by_latent;
  for (const auto& tok : d.tokens) {
    for (const auto& [id, value] : tok.entries) {
      auto [it, inserted] = max_by_latent.emplace(id, value);
      if (!inserted && value > it->second) it->second = value;
    }
  }
  SaeEmbedding e;
  e.doc_id = d.doc_id;
  e.entries.assign(max_by_latent.begin(), max_by_latent.end());
  return e;
}

BinaryEmbedding binarize(const SaeEmbedding& e) {
  BinaryEmbedding b;
  b.doc_id = e.doc_id;
  b.active.reserve(e.entries.size());
  for (const auto& [id, value] : e.entries) {
    if (value > 0.0f) b.active.push_back(id);
  }
  return b;
}

std::vector<BinaryEmbedding> binarize_all(const std::vector<SaeEmbedding>& embs) {
  std::vector<BinaryEmbedding> out;
  out.reserve(embs.size());
  for (const auto& e : embs) out.push_back(binarize(e));
  return out;
}

InvertedIndex build_index(const std::vector<BinaryEmbedding>& embs) {
  InvertedIndex idx;
  idx.n_docs = embs.size();
  idx.doc_ids.reserve(embs.size());
  std::unordered_set<std::string> seen;
  for (uint32_t ord = 0; ord < embs.size(); ++ord) {
    const auto& e = embs[ord];
    if (!seen.insert(e.doc_id).second) {
      throw InvalidArgument("build_index: duplicate doc_id '" + e.doc_id + "'");
    }
    idx.doc_ids.push_back(e.doc_id);
    for (LatentId id : e.active) idx.postings[id].push_back(ord);
  }
  return idx;
}

double latent_frequency(const InvertedIndex& idx, LatentId i) {
  if (idx.n_docs == 0) throw InvalidArgument("latent_frequency: empty corpus");
  auto it = idx.postings.find(i);
  if (it == idx.postings.end()) return 0.0;
  return static_cast<double>(it->second.size()) / static_cast<double>(idx.n_docs);
}

SaeEmbedding filter_latents(const SaeEmbedding& e,
                            const std::vector<LatentId>& keep_sorted) {
  SaeEmbedding out;
  out.doc_id = e.doc_id;
  for (const auto& entry : e.entries) {
    if (std::binary_search(keep_sorted.begin(), keep_sorted.end(), entry.first)) {
      out.entries.push_back(entry);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// SAEA binary format.
// ---------------------------------------------------------------------------

void for_each_activation_doc_binary(
    std::istream& in, const std::function<void(DocActivations&&)>& fn) {
  Cursor cur{in};
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("bad magic: not an SAEA activation file");
  }
  cur.offset = 4;
  const uint32_t version = cur.read<uint32_t>("version");
  if (version != kVersion) {
    throw FormatError("unsupported SAEA version " + std::to_string(version));
  }
  const uint32_t d_sae = cur.read<uint32_t>("d_sae");
  const uint64_t n_docs = cur.read<uint64_t>("n_docs");

  std::unordered_set<std::string> seen;
  for (uint64_t ord = 0; ord < n_docs; ++ord) {
    DocActivations doc;
    const uint16_t id_len = cur.read<uint16_t>("doc_id length");
    doc.doc_id = cur.read_string(id_len, "doc_id");
    if (!seen.insert(doc.doc_id).second) {
      throw FormatError("duplicate doc_id '" + doc.doc_id + "' at doc " +
                        std::to_string(ord));
    }
    const uint32_t n_tokens = cur.read<uint32_t>("token count");
    doc.tokens.reserve(n_tokens);
    for (uint32_t t = 0; t < n_tokens; ++t) {
      TokenActivationRecord rec;
      rec.token_index = t;
      const uint32_t n_entries = cur.read<uint32_t>("entry count");
      rec.entries.reserve(n_entries);
      for (uint32_t k = 0; k < n_entries; ++k) {
        const uint32_t latent = cur.read<uint32_t>("latent id");
        const float value = cur.read<float>("activation value");
        rec.entries.emplace_back(latent, value);
      }
      doc.tokens.push_back(std::move(rec));
    }
    validate_doc(doc, d_sae, ord);
    fn(std::move(doc));
  }
}

std::vector<DocActivations> read_activations_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open activation file: " + path);
  std::vector<DocActivations> docs;
  for_each_activation_doc_binary(in, [&](DocActivations&& d) {
    docs.push_back(std::move(d));
  });
  return docs;
}

void write_activations_binary(const std::vector<DocActivations>& docs,
                              uint32_t d_sae, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path);
  auto put = [&](const void* p, size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  };
  put(kMagic, 4);
  const uint32_t version = kVersion;
  put(&version, 4);
  put(&d_sae, 4);
  const uint64_t n_docs = docs.size();
  put(&n_docs, 8);
  for (size_t ord = 0; ord < docs.size(); ++ord) {
    const auto& doc = docs[ord];
    try {
      validate_doc(doc, d_sae, ord);
    } catch (const FormatError& e) {
      throw InvalidArgument(std::string("write_activations_binary: ") + e.what());
    }
    if (doc.doc_id.size() > UINT16_MAX) {
      throw InvalidArgument("doc_id too long: " + doc.doc_id.substr(0, 64));
    }
    const uint16_t id_len = static_cast<uint16_t>(doc.doc_id.size());
    put(&id_len, 2);
    put(doc.doc_id.data(), id_len);
    const uint32_t n_tokens = static_cast<uint32_t>(doc.tokens.size());
    put(&n_tokens, 4);
    for (const auto& tok : doc.tokens) {
      const uint32_t n_entries = static_cast<uint32_t>(tok.entries.size());
      put(&n_entries, 4);
      for (const auto& [id, value] : tok.entries) {
        put(&id, 4);
        put(&value, 4);
      }
    }
  }
  if (!out) throw FormatError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// JSONL formats.
// ---------------------------------------------------------------------------

std::vector<DocActivations> read_activations_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open activation file: " + path);
  std::vector<DocActivations> docs;
  std::unordered_set<std::string> seen;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
    }
    DocActivations doc;
    doc.doc_id = j.at("id").get<std::string>();
    if (!seen.insert(doc.doc_id).second) {
      throw FormatError("line " + std::to_string(lineno) + ": duplicate doc_id '" +
                        doc.doc_id + "'");
    }
    uint32_t t = 0;
    for (const auto& tok : j.at("tokens")) {
      TokenActivationRecord rec;
      rec.token_index = t++;
      for (const auto& entry : tok) {
        rec.entries.emplace_back(entry.at(0).get<uint32_t>(),
                                 entry.at(1).get<float>());
      }
      doc.tokens.push_back(std::move(rec));
    }
    try {
      validate_doc(doc, 0, docs.size());
    } catch (const FormatError& e) {
      throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

void write_activations_jsonl(const std::vector<DocActivations>& docs,
                             const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path);
  for (const auto& doc : docs) {
    json tokens = json::array();
    for (const auto& tok : doc.tokens) {
      json entries = json::array();
      for (const auto& [id, value] : tok.entries) {
        entries.push_back({id, value});
      }
      tokens.push_back(std::move(entries));
    }
    json j = {{"id", doc.doc_id}, {"tokens", std::move(tokens)}};
    out << j.dump() << '\n';
  }
  if (!out) throw FormatError("write failed: " + path);
}

std::vector<DocActivations> read_activations(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open activation file: " + path);
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  if (in && std::memcmp(magic, kMagic, 4) == 0) {
    return read_activations_binary(path);
  }
  return read_activations_jsonl(path);
}

void for_each_activation_doc(const std::string& path,
                             const std::function<void(DocActivations&&)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open activation file: " + path);
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  if (in && std::memcmp(magic, kMagic, 4) == 0) {
    in.seekg(0);
    for_each_activation_doc_binary(in, fn);
    return;
  }
  for (auto& doc : read_activations_jsonl(path)) fn(std::move(doc));
}

// ---------------------------------------------------------------------------
// Embedding store (SAEA framing, one pooled token per doc).
// ---------------------------------------------------------------------------

std::vector<SaeEmbedding> read_embedding_store(const std::string& path) {
  std::vector<SaeEmbedding> embs;
  for (auto& doc : read_activations_binary(path)) {
    if (doc.tokens.size() != 1) {
      throw FormatError("embedding store doc '" + doc.doc_id +
                        "' has " + std::to_string(doc.tokens.size()) +
                        " tokens, expected 1");
    }
    SaeEmbedding e;
    e.doc_id = std::move(doc.doc_id);
    e.entries = std::move(doc.tokens[0].entries);
    embs.push_back(std::move(e));
  }
  return embs;
}

void write_embedding_store(const std::vector<SaeEmbedding>& embs, uint32_t d_sae,
                           const std::string& path) {
  std::vector<DocActivations> docs;
  docs.reserve(embs.size());
  for (const auto& e : embs) {
    DocActivations doc;
    doc.doc_id = e.doc_id;
    TokenActivationRecord rec;
    rec.token_index = 0;
    rec.entries = e.entries;
    doc.tokens.push_back(std::move(rec));
    docs.push_back(std::move(doc));
  }
  write_activations_binary(docs, d_sae, path);
}

std::vector<CorpusDoc> read_corpus_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open corpus file: " + path);
  std::vector<CorpusDoc> docs;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      docs.push_back({j.at("id").get<std::string>(), j.at("text").get<std::string>()});
    } catch (const json::exception& e) {
      throw FormatError("corpus line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

}  // namespace saekit
