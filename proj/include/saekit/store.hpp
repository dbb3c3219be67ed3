#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "saekit/common.hpp"
#include "saekit/sae.hpp"

namespace saekit {

// Per-document sparse embedding: for every latent, the maximum activation
// across the document's tokens. Entries sorted by latent id, values > 0.
struct SaeEmbedding {
  std::string doc_id;
  std::vector<std::pair<LatentId, float>> entries;
};

// Presence-only view of an embedding: the sorted set of active latents.
struct BinaryEmbedding {
  std::string doc_id;
  std::vector<LatentId> active;
};

// Immutable postings over a corpus of binary embeddings: latent id -> strictly
// increasing doc ordinals. Performance substrate for frequency and
// co-occurrence queries.
struct InvertedIndex {
  size_t n_docs = 0;
  std::vector<std::string> doc_ids;  // ordinal -> doc id
  std::unordered_map<LatentId, std::vector<uint32_t>> postings;
};

SaeEmbedding pool_document(const DocActivations& d);
BinaryEmbedding binarize(const SaeEmbedding& e);
InvertedIndex build_index(const std::vector<BinaryEmbedding>& embs);
double latent_frequency(const InvertedIndex& idx, LatentId i);
SaeEmbedding filter_latents(const SaeEmbedding& e, const std::vector<LatentId>& keep_sorted);

// -------------------------------------------------------------------------
// File formats.
// -------------------------------------------------------------------------

// Binary activation container ("SAEA"): per doc, per token, sparse
// (latent_id, value) pairs, little-endian.
std::vector<DocActivations> read_activations_binary(const std::string& path);
void write_activations_binary(const std::vector<DocActivations>& docs,
                              uint32_t d_sae, const std::string& path);

// JSONL activations: {"id": str, "tokens": [[[latent_id, value], ...], ...]}.
std::vector<DocActivations> read_activations_jsonl(const std::string& path);
void write_activations_jsonl(const std::vector<DocActivations>& docs,
                             const std::string& path);

// Sniffs SAEA magic vs JSONL and dispatches.
std::vector<DocActivations> read_activations(const std::string& path);

// Streaming variant; invokes the callback per document in file order.
void for_each_activation_doc(const std::string& path,
                             const std::function<void(DocActivations&&)>& fn);

// Embedding store file: SAEA framing with n_tokens fixed to 1 (the pooled vector).
std::vector<SaeEmbedding> read_embedding_store(const std::string& path);
void write_embedding_store(const std::vector<SaeEmbedding>& embs, uint32_t d_sae,
                           const std::string& path);

// Corpus JSONL: {"id": str, "text": str}.
struct CorpusDoc {
  std::string doc_id;
  std::string text;
};
std::vector<CorpusDoc> read_corpus_jsonl(const std::string& path);

std::vector<BinaryEmbedding> binarize_all(const std::vector<SaeEmbedding>& embs);

}  // namespace saekit
