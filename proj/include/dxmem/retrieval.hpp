#pragma once

#include "dxmem/embedding.hpp"
#include "dxmem/memory_store.hpp"

#include <algorithm>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace dxmem {

struct RetrievalConfig {
    double tau = 0.9;             // similarity threshold
    int top_k = 10;
    int max_paths = 2;            // anatomical scoping width, 1 or 2
    bool cross_department = true;

    void validate() const {
        if (tau < 0.0 || tau > 1.0) throw ConfigError("tau must be in [0,1]");
        if (top_k < 1) throw ConfigError("top_k must be positive");
        if (max_paths < 1 || max_paths > 2) throw ConfigError("max_paths must be 1 or 2");
    }
};

struct RetrievedNote {
    ExperienceNote note;
    double similarity = 0.0;
    PairKey matched_query_pair;
    bool retained_after_filter = true;
};

// All unordered pairs of distinct labels, deduplicated under normalization,
// sorted canonically. Fewer than two distinct labels yield no pairs.
inline std::vector<PairKey> candidate_pairs(const std::vector<DiagnosisLabel>& candidates) {
    std::vector<DiagnosisLabel> unique;
    for (const auto& c : candidates) {
        bool seen = false;
        for (const auto& u : unique)
            if (u == c) { seen = true; break; }
        if (!seen) unique.push_back(c);
    }
    std::vector<PairKey> pairs;
    for (std::size_t i = 0; i < unique.size(); ++i)
        for (std::size_t j = i + 1; j < unique.size(); ++j)
            pairs.push_back(canonical_pair_key(unique[i], unique[j]));
    std::sort(pairs.begin(), pairs.end());
    return pairs;
}

// Step 2 of memory-augmented diagnosis: score every note under the scoped
// paths against the candidate differential pairs, keep those at or above
// tau, rank by similarity, truncate to top_k. Similarity per note is the
// maximum over query pairs, so any strong pairwise match wins. Provider
// failures surface as RetrievalUnavailable; callers degrade to
// memory-free diagnosis.
inline std::vector<RetrievedNote> retrieve(
    const MemoryStore& store,
    const std::vector<std::pair<std::string, std::string>>& paths,
    const std::vector<DiagnosisLabel>& candidates, EmbeddingProvider& provider,
    const RetrievalConfig& config) {
    config.validate();
    if (paths.size() > static_cast<std::size_t>(config.max_paths))
        throw ConfigError("retrieve called with more paths than max_paths allows");
    if (!config.cross_department) {
        for (const auto& p : paths)
            if (p.first != paths.front().first)
                throw ConfigError("cross-department retrieval is disabled but paths span "
                                  "multiple departments");
    }

    const auto query_pairs = candidate_pairs(candidates);
    if (query_pairs.empty() || paths.empty()) return {};

    const auto notes = store.notes_under_paths(paths);
    if (notes.empty()) return {};

    std::vector<std::vector<float>> query_vecs;
    std::vector<RetrievedNote> scored;
    try {
        query_vecs.reserve(query_pairs.size());
        for (const auto& q : query_pairs) query_vecs.push_back(provider.embed(q.display()));

        for (const auto& note : notes) {
            const auto note_vec = provider.embed(note.differentials.display());
            RetrievedNote rn;
            rn.note = note;
            rn.similarity = -2.0;
            for (std::size_t qi = 0; qi < query_pairs.size(); ++qi) {
                const double sim = cosine_similarity(query_vecs[qi], note_vec);
                if (sim > rn.similarity ||
                    (sim == rn.similarity &&
                     query_pairs[qi].display() < rn.matched_query_pair.display())) {
                    rn.similarity = sim;
                    rn.matched_query_pair = query_pairs[qi];
                }
            }
            if (rn.similarity >= config.tau) scored.push_back(std::move(rn));
        }
    } catch (const UnknownPath&) {
        throw;
    } catch (const std::exception& e) {
        throw RetrievalUnavailable(e.what());
    }

    std::sort(scored.begin(), scored.end(), [](const RetrievedNote& a, const RetrievedNote& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        const auto ad = a.note.differentials.display();
        const auto bd = b.note.differentials.display();
        if (ad != bd) return ad < bd;
        if (a.note.department != b.note.department)
            return a.note.department < b.note.department;
        return a.note.organ_region < b.note.organ_region;
    });
    if (scored.size() > static_cast<std::size_t>(config.top_k))
        scored.resize(static_cast<std::size_t>(config.top_k));
    return scored;
}

}  // namespace dxmem
