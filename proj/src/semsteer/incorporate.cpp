#include "semsteer/incorporate.hpp"

#include <algorithm>
#include <cmath>

#include "semsteer/error.hpp"
#include "semsteer/util.hpp"

namespace semsteer::incorporate {

std::string compose_text(const std::string& doc_text, const std::string& aug_text, TextStrategy strategy) {
    switch (strategy) {
    case TextStrategy::append: return doc_text + "\n\n" + aug_text;
    case TextStrategy::prepend: return aug_text + "\n\n" + doc_text;
    case TextStrategy::tagged_append: return "<ORG>\n" + doc_text + "\n</ORG>\n\n" + aug_text;
    case TextStrategy::tagged_prepend: return aug_text + "\n\n<ORG>\n" + doc_text + "\n</ORG>";
    case TextStrategy::augmentation_only: return aug_text;
    }
    fail(ErrorKind::internal, "unhandled text strategy");
}

std::string random_augmentation(const std::string& doc_text, std::size_t target_word_count, std::uint64_t seed) {
    const auto words = split_words(doc_text);
    if (words.empty()) fail(ErrorKind::data, "random augmentation needs a document with at least one word");
    if (target_word_count == 0) fail(ErrorKind::usage, "random augmentation word count must be >= 1");
    Rng rng(seed);
    std::string out;
    for (std::size_t i = 0; i < target_word_count; ++i) {
        if (i) out.push_back(' ');
        out += words[static_cast<std::size_t>(rng.below(words.size()))];
    }
    return out;
}

EmbeddingVector blend(const EmbeddingVector& base, const EmbeddingVector& aug, double alpha) {
    if (base.dim() != aug.dim()) {
        fail(ErrorKind::data, "blend dimension mismatch: " + std::to_string(base.dim()) + " vs " + std::to_string(aug.dim()));
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorKind::usage, "alpha must lie in [0,1], got " + std::to_string(alpha));
    if (alpha == 0.0) return base;
    if (alpha == 1.0) return aug;
    EmbeddingVector out{std::vector<double>(base.dim())};
    for (std::size_t i = 0; i < base.dim(); ++i) {
        const double b = base.values[i], a = aug.values[i];
        const double v = (1.0 - alpha) * b + alpha * a;
        // Rounding may land one ulp outside the segment; the exact value never does.
        out.values[i] = std::clamp(v, std::min(a, b), std::max(a, b));
    }
    return out;
}

std::vector<EmbeddingVector> base_embeddings(const DocumentStore& docs, providers::Embedder& embedder) {
    std::vector<std::string> texts;
    texts.reserve(docs.size());
    for (const auto& d : docs.documents()) texts.push_back(d.text);
    return providers::embed_texts(embedder, texts);
}

std::string effective_augmentation_text(const Document& doc, const DocAugmentation& aug, const IncorporationConfig& config) {
    if (config.control == ControlKind::none) return aug.augmentation_text;
    const auto n = split_words(aug.augmentation_text).size();
    return random_augmentation(doc.text, std::max<std::size_t>(n, 1), mix_seed(config.rng_seed, doc.id));
}

std::vector<EmbeddingRecord> steer_representations(const DocumentStore& docs, const std::vector<EmbeddingVector>& base,
                                                   const std::map<DocId, DocAugmentation>& augmentations,
                                                   providers::Embedder& embedder, const IncorporationConfig& config) {
    validate(config);
    if (base.size() != docs.size()) {
        fail(ErrorKind::data, "missing base embeddings: have " + std::to_string(base.size()) + " for " +
                                  std::to_string(docs.size()) + " documents");
    }
    const std::size_t dim = base.empty() ? 0 : base.front().dim();

    std::vector<EmbeddingRecord> records(docs.size());
    std::vector<std::size_t> augmented;
    std::vector<std::string> aug_texts;
    std::vector<std::string> composed;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        const auto& doc = docs.documents()[i];
        records[i].doc_id = doc.id;
        records[i].base = base[i];
        records[i].steered = base[i];
        const auto it = augmentations.find(doc.id);
        if (it == augmentations.end()) continue;
        augmented.push_back(i);
        aug_texts.push_back(effective_augmentation_text(doc, it->second, config));
        if (config.mode == IncorporationMode::text) composed.push_back(compose_text(doc.text, aug_texts.back(), config.text_strategy));
    }
    if (augmented.empty()) return records;

    std::vector<EmbeddingVector> aug_vecs;
    std::vector<EmbeddingVector> composed_vecs;
    try {
        aug_vecs = providers::embed_texts(embedder, aug_texts, dim);
        if (!composed.empty()) composed_vecs = providers::embed_texts(embedder, composed, dim);
    } catch (const Error& e) {
        nlohmann::json ids = nlohmann::json::array();
        for (auto i : augmented) ids.push_back(docs.documents()[i].id);
        fail(e.kind(), std::string("embedding steered texts failed: ") + e.what(), {{"stage", "incorporate"}, {"doc_ids", ids}});
    }

    for (std::size_t k = 0; k < augmented.size(); ++k) {
        auto& rec = records[augmented[k]];
        rec.aug = aug_vecs[k];
        if (config.mode == IncorporationMode::text) {
            rec.steered = composed_vecs[k];
        } else {
            rec.steered = blend(rec.base, aug_vecs[k], config.alpha);
            if (config.normalize && config.alpha != 0.0) {
                double n2 = 0.0;
                for (double x : rec.steered.values) n2 += x * x;
                if (n2 > 0.0) {
                    const double inv = 1.0 / std::sqrt(n2);
                    for (double& x : rec.steered.values) x *= inv;
                }
            }
        }
    }
    return records;
}

} // namespace semsteer::incorporate
