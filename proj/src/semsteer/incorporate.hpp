#pragma once

#include <map>
#include <string>
#include <vector>

#include "semsteer/corpus.hpp"
#include "semsteer/providers/embedder.hpp"
#include "semsteer/types.hpp"

namespace semsteer::incorporate {

/// Exact composition formats:
///   append            DOC "\n\n" AUG
///   prepend           AUG "\n\n" DOC
///   tagged_append     "<ORG>\n" DOC "\n</ORG>\n\n" AUG
///   tagged_prepend    AUG "\n\n<ORG>\n" DOC "\n</ORG>"
///   augmentation_only AUG
std::string compose_text(const std::string& doc_text, const std::string& aug_text, TextStrategy strategy);

/// `target_word_count` words drawn uniformly with replacement from the
/// whitespace-delimited words of `doc_text`, joined by single spaces.
std::string random_augmentation(const std::string& doc_text, std::size_t target_word_count, std::uint64_t seed);

/// (1 - alpha) * base + alpha * aug, componentwise, without renormalization.
/// alpha = 0 and alpha = 1 return the corresponding input unchanged.
EmbeddingVector blend(const EmbeddingVector& base, const EmbeddingVector& aug, double alpha);

/// Base embeddings of every document, corpus order.
std::vector<EmbeddingVector> base_embeddings(const DocumentStore& docs, providers::Embedder& embedder);

/// Steered records in corpus order. Documents without an augmentation keep
/// steered == base. With control = random_text, every augmentation text is
/// replaced by a word-count-matched random_augmentation of its own document
/// (seed mixed from config.rng_seed and the document id) before use.
std::vector<EmbeddingRecord> steer_representations(const DocumentStore& docs, const std::vector<EmbeddingVector>& base,
                                                   const std::map<DocId, DocAugmentation>& augmentations,
                                                   providers::Embedder& embedder, const IncorporationConfig& config);

/// The augmentation text actually incorporated for one document under `config`.
std::string effective_augmentation_text(const Document& doc, const DocAugmentation& aug, const IncorporationConfig& config);

} // namespace semsteer::incorporate
