#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

#include "semsteer/providers/embedder.hpp"
#include "semsteer/steering/prompts.hpp"

namespace testsupport {

using nlohmann::json;
using semsteer::Point2;

std::string data_path(const std::string& name) { return std::string(SEMSTEER_TEST_DATA_DIR) + "/" + name; }

semsteer::Corpus review_corpus() { return semsteer::load_corpus(data_path("reviews.csv"), semsteer::CorpusFormat::csv); }

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter.fetch_add(1)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

semsteer::providers::HttpResponse FakeOpenAiTransport::post(const std::string& url, const semsteer::providers::Headers& headers,
                                                           const std::string& body) {
    {
        std::lock_guard lk(mu_);
        calls_.push_back({url, headers, body});
        for (const auto& [needle, status] : failures_) {
            if (body.find(needle) != std::string::npos) return {status, R"({"error":"injected"})", {}};
        }
    }
    const auto req = json::parse(body);
    if (url.ends_with("/embeddings")) {
        semsteer::providers::MockEmbedder embedder(embed_dim_);
        json data = json::array();
        const auto inputs = req.at("input").get<std::vector<std::string>>();
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            data.push_back({{"index", i}, {"embedding", embedder.embed_one(inputs[i]).values}});
        }
        return {200, json{{"data", data}}.dump(), {}};
    }
    if (!url.ends_with("/chat/completions")) return {404, "{}", {}};

    const auto& fmt = req.at("response_format").at("json_schema");
    const auto name = fmt.at("name").get<std::string>();
    json content;
    if (name == semsteer::steering::kClusterCard) {
        content = {{"name", "Grouped documents"},
                   {"description", "Documents the analyst placed together."},
                   {"inclusion_criteria", {"Shares the theme of the examples"}},
                   {"exclusion_criteria", {"Unrelated themes"}}};
    } else if (name == semsteer::steering::kDocAugmentation || name == semsteer::steering::kExtensionAugmentation) {
        content = {{"intent_statement", "This document fits the analyst's grouping."},
                   {"justification", "It shares the theme of the examples."},
                   {"contrast", "It differs from the other groups."},
                   {"keywords", {"theme", "focus", "topic"}}};
    } else if (name == semsteer::steering::kExtensionMatch) {
        std::string outcome = "none";
        for (const auto& v : fmt.at("schema").at("properties").at("outcome").at("enum")) {
            if (v.is_string() && v != "none" && v != "ambiguous") {
                outcome = v.get<std::string>();
                break;
            }
        }
        content = {{"outcome", outcome}, {"confidence", "high"}, {"rationale", "Closest to the first group."}};
    } else {
        return {400, R"({"error":"unknown schema"})", {}};
    }
    json res = {{"choices", {{{"message", {{"role", "assistant"}, {"content", content.dump()}}}, {"finish_reason", "stop"}}}},
                {"usage", {{"prompt_tokens", 10}, {"completion_tokens", 10}}}};
    return {200, res.dump(), {}};
}

std::vector<FakeOpenAiTransport::Call> FakeOpenAiTransport::calls() const {
    std::lock_guard lk(mu_);
    return calls_;
}

std::size_t FakeOpenAiTransport::count(const std::string& url_suffix) const {
    std::lock_guard lk(mu_);
    return static_cast<std::size_t>(
        std::count_if(calls_.begin(), calls_.end(), [&](const Call& c) { return c.url.ends_with(url_suffix); }));
}

void FakeOpenAiTransport::fail_when(std::string needle, int status) {
    std::lock_guard lk(mu_);
    failures_.emplace_back(std::move(needle), status);
}

semsteer::providers::ProviderSettings remote_settings(const std::string& base_url) {
    semsteer::providers::ProviderSettings s;
    for (auto* c : {&s.embedding, &s.llm}) {
        c->kind = semsteer::providers::ProviderKind::remote;
        c->base_url = base_url;
        c->api_key_env.clear();
        c->retry.max_attempts = 1;
        c->retry.backoff_ms = 0;
        c->batch_size = 16;
    }
    return s;
}

namespace {

double dist(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

} // namespace

double oracle_silhouette(const std::vector<Point2>& points, const std::vector<std::string>& labels) {
    const std::size_t n = points.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::map<std::string, std::pair<double, int>> by_label;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            auto& [sum, cnt] = by_label[labels[j]];
            sum += dist(points[i], points[j]);
            ++cnt;
        }
        const auto own = by_label.find(labels[i]);
        if (own == by_label.end()) continue;  // singleton cluster: s_i = 0
        const double a = own->second.first / own->second.second;
        double b = std::numeric_limits<double>::infinity();
        for (const auto& [label, sc] : by_label) {
            if (label != labels[i]) b = std::min(b, sc.first / sc.second);
        }
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return 2.0 * total / static_cast<double>(n);
}

double oracle_nc(const std::vector<Point2>& points, const std::vector<std::string>& ids, const std::vector<std::string>& labels,
                 int k) {
    const std::size_t n = points.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::tuple<double, std::string, std::size_t>> others;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dx = points[i].x - points[j].x, dy = points[i].y - points[j].y;
            others.emplace_back(dx * dx + dy * dy, ids[j], j);
        }
        std::sort(others.begin(), others.end());
        int same = 0;
        for (int r = 0; r < k; ++r) same += labels[std::get<2>(others[static_cast<std::size_t>(r)])] == labels[i];
        total += static_cast<double>(same) / k;
    }
    return total / static_cast<double>(n);
}

std::shared_ptr<semsteer::providers::ScriptedLlm> scripted_llm(const std::set<std::string>& abstain,
                                                               const std::map<std::string, std::string>& assign_to) {
    using semsteer::providers::LlmRequest;
    auto llm = std::make_shared<semsteer::providers::ScriptedLlm>();
    llm->on([](const LlmRequest& r) { return r.schema_name == semsteer::steering::kClusterCard; },
            [](const LlmRequest& r) {
                const auto gid = r.context.at("group_id").get<std::string>();
                return json{{"name", "Group " + gid},
                            {"description", "Documents in " + gid + "."},
                            {"inclusion_criteria", {"Like the " + gid + " examples"}},
                            {"exclusion_criteria", {"Unlike them"}}}
                    .dump();
            });
    llm->on(
        [](const LlmRequest& r) {
            return r.schema_name == semsteer::steering::kDocAugmentation || r.schema_name == semsteer::steering::kExtensionAugmentation;
        },
        [](const LlmRequest& r) {
            const auto gid = r.context.at("group_id").get<std::string>();
            return json{{"intent_statement", "Belongs with " + gid + "."},
                        {"justification", "Shares the examples' theme."},
                        {"contrast", "Differs from the rest."},
                        {"keywords", {"marker" + gid, "steer" + gid, "theme" + gid}}}
                .dump();
        });
    llm->on([](const LlmRequest& r) { return r.schema_name == semsteer::steering::kExtensionMatch; },
            [abstain, assign_to](const LlmRequest& r) {
                const auto doc = r.context.at("doc_id").get<std::string>();
                if (abstain.contains(doc)) return json{{"outcome", "none"}, {"confidence", "low"}, {"rationale", "No fit."}}.dump();
                std::string gid;
                if (const auto it = assign_to.find(doc); it != assign_to.end()) {
                    gid = it->second;
                } else {
                    gid = r.context.at("cards").at(0).at("group_id").get<std::string>();
                }
                return json{{"outcome", gid}, {"confidence", "high"}, {"rationale", "Fits."}}.dump();
            });
    return llm;
}

semsteer::sim::SimConfig small_sim_config() {
    semsteer::sim::SimConfig c;
    c.seeds = {1, 2};
    c.m_values = {1, 3};
    c.alphas = {0.0, 0.5, 1.0};
    c.strategies = {c.strategies[0], c.strategies[4], c.strategies[5]};
    return c;
}

nlohmann::json first_members_groups(const semsteer::Corpus& corpus, int m) {
    json groups = json::array();
    int g = 0;
    for (const auto& [label, members] : corpus.reference_groups()) {
        std::vector<std::string> first(members.begin(), members.begin() + std::min<std::size_t>(m, members.size()));
        groups.push_back({{"group_id", "g" + std::to_string(++g)}, {"member_ids", first}});
    }
    return {{"groups", groups}};
}

} // namespace testsupport
