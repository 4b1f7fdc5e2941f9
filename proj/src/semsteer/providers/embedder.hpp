#pragma once

#include <atomic>
#include <cstdint>
#include <fstream>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "semsteer/providers/config.hpp"
#include "semsteer/providers/transport.hpp"
#include "semsteer/types.hpp"

namespace semsteer::providers {

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual const std::string& model_name() const = 0;
    /// One vector per input, order-aligned.
    virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) = 0;
};

/// Bag-of-tokens hashing embedder. Lowercased alphanumeric tokens are hashed
/// into `dim` buckets, counted, and L2-normalized. A text without tokens maps
/// to the uniform vector 1/sqrt(dim).
class MockEmbedder final : public Embedder {
public:
    explicit MockEmbedder(int dim = 256);

    const std::string& model_name() const override { return name_; }
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;

    EmbeddingVector embed_one(std::string_view text) const;
    std::size_t bucket_of(std::string_view token) const;
    int dim() const noexcept { return dim_; }

private:
    int dim_;
    std::string name_;
};

/// OpenAI-compatible /embeddings client. Batches are issued concurrently up to
/// config.max_parallel.
class RemoteEmbedder final : public Embedder {
public:
    RemoteEmbedder(ProviderConfig config, std::shared_ptr<Transport> transport, Sleeper sleeper = real_sleeper());

    const std::string& model_name() const override { return config_.model_name; }
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;

    const ConcurrencyGate& gate() const noexcept { return gate_; }

private:
    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts);

    ProviderConfig config_;
    std::shared_ptr<Transport> transport_;
    Sleeper sleeper_;
    ConcurrencyGate gate_;
};

/// Embedding cache keyed by (model name, exact text bytes), optionally
/// persisted to an append-only file:
///
///   header : 8 bytes "SSEMBCCH", u32 version (=1)
///   record : u32 payload_len, then payload =
///            u64 key_hash, u32 model_len, model bytes, u32 dim, dim x f64
///
/// All integers and floats little-endian. key_hash = fnv1a64(model "\0" text).
/// A torn trailing record is discarded on open.
class CachingEmbedder final : public Embedder {
public:
    static constexpr std::uint32_t kFileVersion = 1;

    explicit CachingEmbedder(std::shared_ptr<Embedder> upstream, std::string cache_path = {});

    const std::string& model_name() const override { return upstream_->model_name(); }
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;

    std::size_t upstream_calls() const noexcept { return upstream_calls_.load(); }
    std::size_t upstream_texts() const noexcept { return upstream_texts_.load(); }
    std::size_t size() const;

    static std::uint64_t key_hash(std::string_view model, std::string_view text);

private:
    void load_file();
    void append_records(const std::vector<std::pair<std::uint64_t, const EmbeddingVector*>>& records);

    std::shared_ptr<Embedder> upstream_;
    std::string cache_path_;
    mutable std::shared_mutex mu_;
    std::mutex write_mu_;
    std::unordered_map<std::uint64_t, EmbeddingVector> entries_;
    std::size_t dim_ = 0;
    std::atomic<std::size_t> upstream_calls_{0};
    std::atomic<std::size_t> upstream_texts_{0};
};

/// Contract wrapper: rejects empty inputs and dimension drift across the batch
/// (or against `expected_dim` when nonzero).
std::vector<EmbeddingVector> embed_texts(Embedder& embedder, std::span<const std::string> texts, std::size_t expected_dim = 0);

/// Builds the configured embedder stack: mock or remote, always behind a cache.
std::shared_ptr<CachingEmbedder> make_embedder(const ProviderConfig& config, const std::string& cache_path,
                                               std::shared_ptr<Transport> transport = nullptr);

} // namespace semsteer::providers
