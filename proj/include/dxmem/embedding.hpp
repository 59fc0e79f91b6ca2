#pragma once

#include "dxmem/errors.hpp"
#include "dxmem/strings.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace dxmem {

// dot(u,v) / (|u||v|), clamped to [-1,1] against rounding.
inline double cosine_similarity(std::span<const float> u, std::span<const float> v) {
    if (u.size() != v.size()) throw DimensionMismatch(u.size(), v.size());
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += static_cast<double>(u[i]) * v[i];
        nu += static_cast<double>(u[i]) * u[i];
        nv += static_cast<double>(v[i]) * v[i];
    }
    if (nu == 0.0 || nv == 0.0) throw ZeroVector();
    return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

// Text -> unit vector. Implementations must be deterministic within one
// instance and safe for concurrent calls (or internally serialized).
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::size_t dimension() const = 0;
    virtual std::vector<float> embed(const std::string& text) = 0;

    virtual std::vector<std::vector<float>> embed_batch(
        const std::vector<std::string>& texts) {
        std::vector<std::vector<float>> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(embed(t));
        return out;
    }
};

// Deterministic test double: seeded hash of the normalized text expanded
// to pseudo-random components, then unit-normalized. Pure, so equivalent
// texts ("A vs. B" in any casing/spacing) always embed identically.
class MockEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit MockEmbeddingProvider(std::size_t dimension, std::uint64_t seed = 0)
        : dimension_(dimension), seed_(seed) {
        if (dimension < 2) throw ConfigError("mock embedder dimension must be >= 2");
    }

    std::size_t dimension() const override { return dimension_; }

    std::vector<float> embed(const std::string& text) override {
        const std::uint64_t base =
            splitmix64(fnv1a64(normalize_text(text)) ^ splitmix64(seed_));
        std::vector<float> v(dimension_);
        double norm_sq = 0.0;
        for (std::size_t i = 0; i < dimension_; ++i) {
            const double x = unit_uniform(splitmix64(base + i + 1)) * 2.0 - 1.0;
            v[i] = static_cast<float>(x);
            norm_sq += x * x;
        }
        if (norm_sq < 1e-12) {
            v.assign(dimension_, 0.0f);
            v[0] = 1.0f;
            return v;
        }
        const float inv = static_cast<float>(1.0 / std::sqrt(norm_sq));
        for (auto& x : v) x *= inv;
        return v;
    }

private:
    std::size_t dimension_;
    std::uint64_t seed_;
};

inline std::shared_ptr<EmbeddingProvider> mock_embedding_provider(std::size_t dimension,
                                                                  std::uint64_t seed) {
    return std::make_shared<MockEmbeddingProvider>(dimension, seed);
}

// In-memory memo for one run; nothing persists across runs.
class CachingEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit CachingEmbeddingProvider(std::shared_ptr<EmbeddingProvider> inner)
        : inner_(std::move(inner)) {}

    std::size_t dimension() const override { return inner_->dimension(); }

    std::vector<float> embed(const std::string& text) override {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = cache_.find(text);
            if (it != cache_.end()) return it->second;
        }
        auto v = inner_->embed(text);
        std::lock_guard<std::mutex> lock(mutex_);
        cache_.emplace(text, v);
        return v;
    }

private:
    std::shared_ptr<EmbeddingProvider> inner_;
    std::mutex mutex_;
    std::unordered_map<std::string, std::vector<float>> cache_;
};

}  // namespace dxmem
