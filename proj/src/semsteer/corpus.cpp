#include "semsteer/corpus.hpp"

#include <filesystem>

#include "semsteer/error.hpp"
#include "semsteer/util.hpp"

namespace semsteer {

DocumentStore::DocumentStore(std::string name, std::vector<Document> documents)
    : name_(std::move(name)), documents_(std::move(documents)) {
    for (std::size_t i = 0; i < documents_.size(); ++i) {
        const auto& doc = documents_[i];
        if (doc.id.empty()) fail(ErrorKind::data, "document " + std::to_string(i + 1) + " has an empty id");
        if (doc.text.empty()) fail(ErrorKind::data, "document '" + doc.id + "' has empty text");
        if (!index_.emplace(doc.id, i).second) {
            fail(ErrorKind::data, "duplicate document id '" + doc.id + "'", {{"id", doc.id}});
        }
    }
}

std::size_t DocumentStore::index_of(const DocId& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) fail(ErrorKind::not_found, "unknown document id '" + id + "'", {{"id", id}});
    return it->second;
}

ReferenceGrouping::ReferenceGrouping(std::map<DocId, std::string> labels) : labels_(std::move(labels)) {}

std::optional<std::string> ReferenceGrouping::label_of(const DocId& id) const {
    const auto it = labels_.find(id);
    if (it == labels_.end()) return std::nullopt;
    return it->second;
}

std::map<std::string, std::vector<DocId>> ReferenceGrouping::groups(const DocumentStore& order) const {
    std::map<std::string, std::vector<DocId>> out;
    for (const auto& doc : order.documents()) {
        if (auto label = label_of(doc.id)) out[*label].push_back(doc.id);
    }
    return out;
}

CorpusFormat parse_corpus_format(std::string_view s) {
    if (s == "jsonl") return CorpusFormat::jsonl;
    if (s == "csv") return CorpusFormat::csv;
    fail(ErrorKind::usage, "unknown corpus format '" + std::string(s) + "' (expected jsonl|csv)");
}

Corpus make_corpus(std::string name, std::vector<Document> documents, std::map<DocId, std::string> labels) {
    Corpus corpus;
    corpus.store = DocumentStore(std::move(name), std::move(documents));
    for (const auto& [id, label] : labels) {
        if (!corpus.store.contains(id)) fail(ErrorKind::data, "reference label for unknown document '" + id + "'");
    }
    corpus.reference = ReferenceGrouping(std::move(labels));
    return corpus;
}

namespace {

struct Row {
    std::size_t line;
    std::string id;
    std::string text;
    std::optional<std::string> group;
};

Corpus assemble(std::vector<Row> rows, std::string name) {
    if (rows.empty()) fail(ErrorKind::data, "corpus is empty");
    std::vector<Document> docs;
    std::map<DocId, std::string> labels;
    std::unordered_map<DocId, std::size_t> first_line;
    docs.reserve(rows.size());
    for (auto& row : rows) {
        if (row.id.empty()) fail(ErrorKind::data, "line " + std::to_string(row.line) + ": empty id", {{"line", row.line}});
        if (row.text.empty()) {
            fail(ErrorKind::data, "line " + std::to_string(row.line) + ": empty text for '" + row.id + "'", {{"line", row.line}});
        }
        if (auto [it, inserted] = first_line.emplace(row.id, row.line); !inserted) {
            fail(ErrorKind::data,
                 "line " + std::to_string(row.line) + ": duplicate id '" + row.id + "' (first seen on line " +
                     std::to_string(it->second) + ")",
                 {{"line", row.line}, {"id", row.id}});
        }
        if (row.group && !row.group->empty()) labels.emplace(row.id, *row.group);
        docs.push_back({std::move(row.id), std::move(row.text)});
    }
    return make_corpus(std::move(name), std::move(docs), std::move(labels));
}

std::vector<Row> parse_jsonl(std::string_view contents) {
    std::vector<Row> rows;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= contents.size()) {
        const auto nl = contents.find('\n', pos);
        std::string_view line = contents.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        ++line_no;
        pos = (nl == std::string_view::npos) ? contents.size() + 1 : nl + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            fail(ErrorKind::data, "line " + std::to_string(line_no) + ": invalid JSON: " + e.what(), {{"line", line_no}});
        }
        if (!j.is_object() || !j.contains("id") || !j.contains("text") || !j["id"].is_string() || !j["text"].is_string()) {
            fail(ErrorKind::data, "line " + std::to_string(line_no) + ": expected object with string fields id and text",
                 {{"line", line_no}});
        }
        Row row{line_no, j["id"].get<std::string>(), j["text"].get<std::string>(), std::nullopt};
        if (j.contains("group") && !j["group"].is_null()) {
            if (!j["group"].is_string()) fail(ErrorKind::data, "line " + std::to_string(line_no) + ": group must be a string");
            row.group = j["group"].get<std::string>();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

// RFC 4180 records; returns (starting line, fields).
std::vector<std::pair<std::size_t, std::vector<std::string>>> parse_csv_records(std::string_view contents) {
    std::vector<std::pair<std::size_t, std::vector<std::string>>> records;
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;
    std::size_t record_line = 1;

    auto end_field = [&] {
        fields.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        const bool blank = fields.size() == 1 && fields[0].empty();
        if (!blank) records.emplace_back(record_line, std::move(fields));
        fields.clear();
    };

    for (std::size_t i = 0; i < contents.size(); ++i) {
        const char c = contents[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < contents.size() && contents[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
        case '"':
            if (field_started && !field.empty()) {
                fail(ErrorKind::data, "line " + std::to_string(line) + ": stray quote in unquoted field", {{"line", line}});
            }
            in_quotes = true;
            field_started = true;
            break;
        case ',':
            end_field();
            break;
        case '\r':
            break;
        case '\n':
            end_record();
            ++line;
            record_line = line;
            break;
        default:
            field.push_back(c);
            field_started = true;
        }
    }
    if (in_quotes) fail(ErrorKind::data, "line " + std::to_string(record_line) + ": unterminated quoted field", {{"line", record_line}});
    if (field_started || !fields.empty()) end_record();
    return records;
}

std::vector<Row> parse_csv(std::string_view contents) {
    auto records = parse_csv_records(contents);
    if (records.empty()) return {};
    const auto& header = records.front().second;
    int id_col = -1, text_col = -1, group_col = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == "id") id_col = static_cast<int>(c);
        else if (header[c] == "text") text_col = static_cast<int>(c);
        else if (header[c] == "group") group_col = static_cast<int>(c);
    }
    if (id_col < 0 || text_col < 0) fail(ErrorKind::data, "line 1: CSV header must contain id and text columns", {{"line", 1}});

    std::vector<Row> rows;
    for (std::size_t r = 1; r < records.size(); ++r) {
        auto& [line, fields] = records[r];
        if (fields.size() != header.size()) {
            fail(ErrorKind::data,
                 "line " + std::to_string(line) + ": expected " + std::to_string(header.size()) + " fields, got " +
                     std::to_string(fields.size()),
                 {{"line", line}});
        }
        Row row{line, fields[static_cast<std::size_t>(id_col)], fields[static_cast<std::size_t>(text_col)], std::nullopt};
        if (group_col >= 0) row.group = fields[static_cast<std::size_t>(group_col)];
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

Corpus parse_corpus(std::string_view contents, CorpusFormat format, std::string name) {
    auto rows = format == CorpusFormat::jsonl ? parse_jsonl(contents) : parse_csv(contents);
    return assemble(std::move(rows), std::move(name));
}

Corpus load_corpus(const std::string& path, CorpusFormat format) {
    const auto contents = read_file(path);
    return parse_corpus(contents, format, std::filesystem::path(path).stem().string());
}

std::string to_jsonl(const Corpus& corpus) {
    std::string out;
    for (const auto& doc : corpus.store.documents()) {
        nlohmann::json j{{"id", doc.id}, {"text", doc.text}};
        if (auto label = corpus.reference.label_of(doc.id)) j["group"] = *label;
        out += j.dump();
        out += '\n';
    }
    return out;
}

} // namespace semsteer
