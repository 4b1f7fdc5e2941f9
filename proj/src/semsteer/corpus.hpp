#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "semsteer/types.hpp"

namespace semsteer {

/// Ordered, immutable document collection. This is the only view of a corpus
/// that the steering path ever sees; reference labels live in ReferenceGrouping.
class DocumentStore {
public:
    DocumentStore() = default;
    DocumentStore(std::string name, std::vector<Document> documents);

    const std::string& name() const noexcept { return name_; }
    const std::vector<Document>& documents() const noexcept { return documents_; }
    std::size_t size() const noexcept { return documents_.size(); }

    bool contains(const DocId& id) const { return index_.contains(id); }
    std::size_t index_of(const DocId& id) const;
    const Document& at(const DocId& id) const { return documents_[index_of(id)]; }

private:
    std::string name_;
    std::vector<Document> documents_;
    std::unordered_map<DocId, std::size_t> index_;
};

/// Evaluation-only labels. Consulted by metrics and the simulation harness.
class ReferenceGrouping {
public:
    ReferenceGrouping() = default;
    explicit ReferenceGrouping(std::map<DocId, std::string> labels);

    const std::map<DocId, std::string>& labels() const noexcept { return labels_; }
    std::optional<std::string> label_of(const DocId& id) const;
    bool empty() const noexcept { return labels_.empty(); }

    /// label -> member ids, members in the order given by `order`.
    std::map<std::string, std::vector<DocId>> groups(const DocumentStore& order) const;

private:
    std::map<DocId, std::string> labels_;
};

enum class CorpusFormat { jsonl, csv };

CorpusFormat parse_corpus_format(std::string_view s);

struct Corpus {
    DocumentStore store;
    ReferenceGrouping reference;

    const std::string& name() const noexcept { return store.name(); }
    std::size_t size() const noexcept { return store.size(); }
    std::map<std::string, std::vector<DocId>> reference_groups() const { return reference.groups(store); }
};

/// Builds a corpus from in-memory documents and optional labels, enforcing the
/// id uniqueness and nonempty-text invariants.
Corpus make_corpus(std::string name, std::vector<Document> documents, std::map<DocId, std::string> labels = {});

/// Loads JSONL (`{"id","text","group"?}` per line) or CSV (header `id,text,group`).
/// Errors carry the offending line number.
Corpus load_corpus(const std::string& path, CorpusFormat format);
Corpus parse_corpus(std::string_view contents, CorpusFormat format, std::string name);

/// JSONL serialization in corpus order (reference labels included as "group").
std::string to_jsonl(const Corpus& corpus);

} // namespace semsteer
