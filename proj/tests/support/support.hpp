#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "semsteer/corpus.hpp"
#include "semsteer/error.hpp"
#include "semsteer/providers/config.hpp"
#include "semsteer/providers/llm.hpp"
#include "semsteer/providers/transport.hpp"
#include "semsteer/session.hpp"
#include "semsteer/sim/sweep.hpp"
#include "semsteer/types.hpp"

namespace testsupport {

std::string data_path(const std::string& name);

/// The 112-document review fixture (reference groups of 17/34/30/31).
semsteer::Corpus review_corpus();

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "semsteer");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

/// Stands in for an OpenAI-compatible endpoint. Embeddings come from the
/// bag-of-tokens mock; chat completions return schema-valid canned payloads
/// (matches pick a group id from the offered enum). Every request is recorded.
class FakeOpenAiTransport final : public semsteer::providers::Transport {
public:
    struct Call {
        std::string url;
        semsteer::providers::Headers headers;
        std::string body;
    };

    explicit FakeOpenAiTransport(int embed_dim = 64) : embed_dim_(embed_dim) {}

    semsteer::providers::HttpResponse post(const std::string& url, const semsteer::providers::Headers& headers,
                                           const std::string& body) override;

    std::vector<Call> calls() const;
    std::size_t count(const std::string& url_suffix) const;

    /// Fail every request whose body contains `needle` with this HTTP status.
    void fail_when(std::string needle, int status);

private:
    int embed_dim_;
    mutable std::mutex mu_;
    std::vector<Call> calls_;
    std::vector<std::pair<std::string, int>> failures_;
};

semsteer::providers::ProviderSettings remote_settings(const std::string& base_url = "http://fake.invalid/v1");

/// Brute-force silhouette in 2D: s_i = (b - a) / max(a, b), singletons 0, Sil = 2 * mean.
double oracle_silhouette(const std::vector<semsteer::Point2>& points, const std::vector<std::string>& labels);

/// Exhaustive neighborhood consistency: for each point, sort all others by
/// (squared distance, id) and take the first k.
double oracle_nc(const std::vector<semsteer::Point2>& points, const std::vector<std::string>& ids,
                 const std::vector<std::string>& labels, int k);

/// Scripted LLM: one card per group, an augmentation for every doc, and a
/// match that abstains ("none") for docs in `abstain`, otherwise names
/// `assign_to[doc]` (or the first group) with high confidence.
std::shared_ptr<semsteer::providers::ScriptedLlm> scripted_llm(const std::set<std::string>& abstain,
                                                               const std::map<std::string, std::string>& assign_to = {});

/// Small synthetic sim config used by the sweep tests (fewer seeds/conditions).
semsteer::sim::SimConfig small_sim_config();

/// Groups file body with the first `m` documents of each reference group.
nlohmann::json first_members_groups(const semsteer::Corpus& corpus, int m);

} // namespace testsupport

#define CHECK_ERROR_KIND(expr, expected_kind)                                   \
    do {                                                                        \
        bool thrown_ = false;                                                   \
        try {                                                                   \
            (void)(expr);                                                       \
        } catch (const semsteer::Error& e_) {                                   \
            thrown_ = true;                                                     \
            CHECK_MESSAGE(e_.kind() == (expected_kind), e_.what());             \
        }                                                                       \
        CHECK_MESSAGE(thrown_, "expected semsteer::Error from " #expr);         \
    } while (0)
