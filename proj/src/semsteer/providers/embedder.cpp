#include "semsteer/providers/embedder.hpp"

#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <mutex>
#include <thread>

#include "semsteer/error.hpp"
#include "semsteer/util.hpp"

namespace semsteer::providers {

// ---------------------------------------------------------------- mock

MockEmbedder::MockEmbedder(int dim) : dim_(dim), name_("mock-bag-of-tokens-" + std::to_string(dim)) {
    if (dim < 1) fail(ErrorKind::usage, "mock embedder dimension must be >= 1");
}

std::size_t MockEmbedder::bucket_of(std::string_view token) const {
    return static_cast<std::size_t>(fnv1a64(token) % static_cast<std::uint64_t>(dim_));
}

EmbeddingVector MockEmbedder::embed_one(std::string_view text) const {
    EmbeddingVector v{std::vector<double>(static_cast<std::size_t>(dim_), 0.0)};
    const auto tokens = tokenize(text);
    if (tokens.empty()) {
        const double u = 1.0 / std::sqrt(static_cast<double>(dim_));
        std::fill(v.values.begin(), v.values.end(), u);
        return v;
    }
    for (const auto& t : tokens) v.values[bucket_of(t)] += 1.0;
    double norm2 = 0.0;
    for (double x : v.values) norm2 += x * x;
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v.values) x *= inv;
    return v;
}

std::vector<EmbeddingVector> MockEmbedder::embed(std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
}

// ---------------------------------------------------------------- remote

RemoteEmbedder::RemoteEmbedder(ProviderConfig config, std::shared_ptr<Transport> transport, Sleeper sleeper)
    : config_(std::move(config)), transport_(std::move(transport)), sleeper_(std::move(sleeper)), gate_(config_.max_parallel) {
    validate(config_);
    if (!transport_) transport_ = std::make_shared<HttplibTransport>(config_.timeout_s);
}

namespace {

Headers auth_headers(const ProviderConfig& config) {
    Headers headers{{"Content-Type", "application/json"}};
    if (!config.api_key_env.empty()) {
        const char* key = std::getenv(config.api_key_env.c_str());
        if (key == nullptr || *key == '\0') {
            fail(ErrorKind::provider, "environment variable " + config.api_key_env + " is not set", {{"stage", "auth"}});
        }
        headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }
    return headers;
}

} // namespace

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(std::span<const std::string> texts) {
    const nlohmann::json request{{"model", config_.model_name}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
    const auto headers = auth_headers(config_);
    const auto body = request.dump();
    const auto url = config_.base_url + "/embeddings";

    HttpResponse res;
    {
        ConcurrencyGate::Slot slot(gate_);
        res = post_with_retry(config_.retry, sleeper_, [&] { return transport_->post(url, headers, body); }, "embedding request");
    }

    std::vector<EmbeddingVector> out(texts.size());
    try {
        const auto j = nlohmann::json::parse(res.body);
        const auto& data = j.at("data");
        if (data.size() != texts.size()) fail(ErrorKind::provider, "embedding response has wrong item count");
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto idx = data[i].value("index", i);
            if (idx >= out.size()) fail(ErrorKind::provider, "embedding response index out of range");
            out[idx].values = data[i].at("embedding").get<std::vector<double>>();
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::provider, std::string("malformed embedding response: ") + e.what());
    }
    return out;
}

std::vector<EmbeddingVector> RemoteEmbedder::embed(std::span<const std::string> texts) {
    const auto batch = static_cast<std::size_t>(config_.batch_size);
    const std::size_t n_batches = (texts.size() + batch - 1) / batch;
    std::vector<std::vector<EmbeddingVector>> results(n_batches);
    std::vector<std::exception_ptr> errors(n_batches);
    {
        std::vector<std::jthread> workers;
        workers.reserve(n_batches);
        for (std::size_t b = 0; b < n_batches; ++b) {
            workers.emplace_back([&, b] {
                try {
                    const auto first = b * batch;
                    results[b] = embed_batch(texts.subspan(first, std::min(batch, texts.size() - first)));
                } catch (...) {
                    errors[b] = std::current_exception();
                }
            });
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (auto& r : results) {
        for (auto& v : r) out.push_back(std::move(v));
    }
    return out;
}

// ---------------------------------------------------------------- cache

namespace {

constexpr char kMagic[8] = {'S', 'S', 'E', 'M', 'B', 'C', 'C', 'H'};

static_assert(std::endian::native == std::endian::little, "cache file codec assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
bool get(std::string_view& in, T& v) {
    if (in.size() < sizeof(T)) return false;
    std::memcpy(&v, in.data(), sizeof(T));
    in.remove_prefix(sizeof(T));
    return true;
}

} // namespace

CachingEmbedder::CachingEmbedder(std::shared_ptr<Embedder> upstream, std::string cache_path)
    : upstream_(std::move(upstream)), cache_path_(std::move(cache_path)) {
    if (!upstream_) fail(ErrorKind::internal, "caching embedder needs an upstream embedder");
    if (!cache_path_.empty()) load_file();
}

std::uint64_t CachingEmbedder::key_hash(std::string_view model, std::string_view text) {
    std::uint64_t h = fnv1a64(model);
    h = fnv1a64(std::string_view("\0", 1), h);
    return fnv1a64(text, h);
}

std::size_t CachingEmbedder::size() const {
    std::shared_lock lock(mu_);
    return entries_.size();
}

void CachingEmbedder::load_file() {
    namespace fs = std::filesystem;
    if (!fs::exists(cache_path_)) return;
    const auto contents = read_file(cache_path_);
    std::string_view in(contents);
    if (in.size() < sizeof(kMagic) + 4 || std::memcmp(in.data(), kMagic, sizeof(kMagic)) != 0) {
        fail(ErrorKind::data, "'" + cache_path_ + "' is not an embedding cache file");
    }
    in.remove_prefix(sizeof(kMagic));
    std::uint32_t version = 0;
    get(in, version);
    if (version != kFileVersion) {
        fail(ErrorKind::data, "embedding cache version " + std::to_string(version) + " unsupported (expected " +
                                  std::to_string(kFileVersion) + ")");
    }
    std::size_t valid_bytes = contents.size() - in.size();
    while (!in.empty()) {
        std::uint32_t len = 0;
        std::string_view rec = in;
        if (!get(rec, len) || rec.size() < len) break;  // torn tail
        std::string_view payload = rec.substr(0, len);
        std::uint64_t key = 0;
        std::uint32_t model_len = 0, dim = 0;
        if (!get(payload, key) || !get(payload, model_len) || payload.size() < model_len) break;
        const std::string model(payload.substr(0, model_len));
        payload.remove_prefix(model_len);
        if (!get(payload, dim) || payload.size() != std::size_t{dim} * sizeof(double)) break;
        EmbeddingVector v{std::vector<double>(dim)};
        std::memcpy(v.values.data(), payload.data(), payload.size());
        if (model == upstream_->model_name()) {
            if (dim_ != 0 && dim != dim_) {
                fail(ErrorKind::data, "embedding cache holds mixed dimensions for model '" + model + "'");
            }
            dim_ = dim;
            entries_.insert_or_assign(key, std::move(v));
        }
        in.remove_prefix(sizeof(std::uint32_t) + len);
        valid_bytes += sizeof(std::uint32_t) + len;
    }
    if (valid_bytes != contents.size()) fs::resize_file(cache_path_, valid_bytes);
}

void CachingEmbedder::append_records(const std::vector<std::pair<std::uint64_t, const EmbeddingVector*>>& records) {
    if (cache_path_.empty() || records.empty()) return;
    namespace fs = std::filesystem;
    std::string out;
    if (!fs::exists(cache_path_) || fs::file_size(cache_path_) == 0) {
        if (fs::path(cache_path_).has_parent_path()) fs::create_directories(fs::path(cache_path_).parent_path());
        out.append(kMagic, sizeof(kMagic));
        put(out, kFileVersion);
    }
    const auto& model = upstream_->model_name();
    for (const auto& [key, vec] : records) {
        std::string payload;
        put(payload, key);
        put(payload, static_cast<std::uint32_t>(model.size()));
        payload += model;
        put(payload, static_cast<std::uint32_t>(vec->dim()));
        payload.append(reinterpret_cast<const char*>(vec->values.data()), vec->dim() * sizeof(double));
        put(out, static_cast<std::uint32_t>(payload.size()));
        out += payload;
    }
    std::ofstream f(cache_path_, std::ios::binary | std::ios::app);
    if (!f) fail(ErrorKind::io, "cannot append to embedding cache '" + cache_path_ + "'");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

std::vector<EmbeddingVector> CachingEmbedder::embed(std::span<const std::string> texts) {
    const auto& model = upstream_->model_name();
    std::vector<std::uint64_t> keys(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) keys[i] = key_hash(model, texts[i]);

    auto collect_misses = [&] {
        std::vector<std::size_t> misses;
        std::unordered_map<std::uint64_t, bool> queued;
        std::shared_lock lock(mu_);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (!entries_.contains(keys[i]) && queued.emplace(keys[i], true).second) misses.push_back(i);
        }
        return misses;
    };

    if (auto misses = collect_misses(); !misses.empty()) {
        std::lock_guard write_lock(write_mu_);
        misses = collect_misses();  // another writer may have filled them
        if (!misses.empty()) {
            std::vector<std::string> pending;
            pending.reserve(misses.size());
            for (auto i : misses) pending.push_back(texts[i]);
            ++upstream_calls_;
            upstream_texts_ += pending.size();
            auto fresh = upstream_->embed(pending);
            if (fresh.size() != pending.size()) fail(ErrorKind::provider, "embedder returned wrong number of vectors");
            std::vector<std::pair<std::uint64_t, const EmbeddingVector*>> written;
            {
                std::unique_lock lock(mu_);
                for (std::size_t m = 0; m < misses.size(); ++m) {
                    auto& v = fresh[m];
                    if (dim_ == 0) dim_ = v.dim();
                    if (v.dim() != dim_) {
                        fail(ErrorKind::provider,
                             "embedding dimension drift: got " + std::to_string(v.dim()) + ", expected " + std::to_string(dim_));
                    }
                    for (double x : v.values) {
                        if (!std::isfinite(x)) fail(ErrorKind::provider, "embedder returned a non-finite value");
                    }
                    auto [it, inserted] = entries_.insert_or_assign(keys[misses[m]], std::move(v));
                    written.emplace_back(it->first, &it->second);
                }
                append_records(written);
            }
        }
    }

    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    std::shared_lock lock(mu_);
    for (auto key : keys) out.push_back(entries_.at(key));
    return out;
}

// ---------------------------------------------------------------- helpers

std::vector<EmbeddingVector> embed_texts(Embedder& embedder, std::span<const std::string> texts, std::size_t expected_dim) {
    if (texts.empty()) fail(ErrorKind::usage, "embed_texts needs at least one text");
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (texts[i].empty()) fail(ErrorKind::usage, "text " + std::to_string(i) + " is empty");
    }
    auto out = embedder.embed(texts);
    if (out.size() != texts.size()) fail(ErrorKind::provider, "embedder returned wrong number of vectors");
    const std::size_t dim = expected_dim != 0 ? expected_dim : out.front().dim();
    for (const auto& v : out) {
        if (v.dim() != dim || dim == 0) {
            fail(ErrorKind::provider,
                 "embedding dimension drift: got " + std::to_string(v.dim()) + ", expected " + std::to_string(dim),
                 {{"got", v.dim()}, {"expected", dim}});
        }
    }
    return out;
}

std::shared_ptr<CachingEmbedder> make_embedder(const ProviderConfig& config, const std::string& cache_path,
                                               std::shared_ptr<Transport> transport) {
    validate(config);
    std::shared_ptr<Embedder> upstream;
    if (config.kind == ProviderKind::mock) {
        upstream = std::make_shared<MockEmbedder>(config.mock_dim);
    } else {
        upstream = std::make_shared<RemoteEmbedder>(config, std::move(transport));
    }
    return std::make_shared<CachingEmbedder>(std::move(upstream), cache_path);
}

} // namespace semsteer::providers
