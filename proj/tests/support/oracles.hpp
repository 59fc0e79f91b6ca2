// Test-only oracles and fixture generators. Everything here is kept
// independent of the implementation paths it checks: the metric oracle
// counts directly off raw log entries, and the retrieval oracle re-scores
// the store exhaustively.
#pragma once

#include "dxmem/dxmem.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace dxmem::testkit {

// ---- brute-force metric oracle ------------------------------------------

struct OracleMetrics {
    double accuracy_baseline = 0.0;
    double accuracy_exp = 0.0;
    double delta = 0.0;
    double recall = 0.0;
    std::optional<double> precision;
    double beneficial = 0.0;
    double harmful = 0.0;
    std::size_t baseline_correct_total = 0;
    std::size_t exp_correct_total = 0;
    std::size_t retrieved_cases = 0;
    std::size_t precision_correct = 0;
    std::size_t precision_total = 0;
    std::size_t beneficial_cases = 0;
    std::size_t harmful_cases = 0;
};

// Exhaustive per-case counting, written against the metric definitions
// rather than the engine's bookkeeping.
inline OracleMetrics brute_force_metrics(const std::vector<RunLog>& baseline,
                                         const std::vector<RunLog>& exp) {
    std::set<std::string> ids;
    for (const auto& e : baseline.front().entries) ids.insert(e.case_id);

    const std::size_t T = baseline.size();
    OracleMetrics m;

    auto correct_in = [](const RunLog& log, const std::string& id) {
        for (const auto& e : log.entries)
            if (e.case_id == id) return e.correct;
        return false;
    };
    auto retrieved_in = [](const RunLog& log, const std::string& id) {
        for (const auto& e : log.entries)
            if (e.case_id == id) return e.retrieved;
        return false;
    };

    std::size_t retrieved_count = 0;
    for (const auto& id : ids) {
        std::size_t bc = 0, ec = 0;
        bool any_retrieved = false;
        for (const auto& log : baseline)
            if (correct_in(log, id)) ++bc;
        for (const auto& log : exp) {
            if (correct_in(log, id)) ++ec;
            if (retrieved_in(log, id)) any_retrieved = true;
        }
        m.baseline_correct_total += bc;
        m.exp_correct_total += ec;
        if (any_retrieved) {
            ++retrieved_count;
            m.precision_correct += ec;
            m.precision_total += T;
        }
        if (bc == 0 && ec == T) ++m.beneficial_cases;
        if (bc == T && ec == 0) ++m.harmful_cases;
    }
    m.retrieved_cases = retrieved_count;

    const double n = static_cast<double>(ids.size());
    m.accuracy_baseline = static_cast<double>(m.baseline_correct_total) / (n * T);
    m.accuracy_exp = static_cast<double>(m.exp_correct_total) / (n * T);
    m.delta = m.accuracy_exp - m.accuracy_baseline;
    m.recall = static_cast<double>(retrieved_count) / n;
    if (m.precision_total > 0)
        m.precision =
            static_cast<double>(m.precision_correct) / static_cast<double>(m.precision_total);
    m.beneficial = static_cast<double>(m.beneficial_cases) / n;
    m.harmful = static_cast<double>(m.harmful_cases) / n;
    return m;
}

// ---- exhaustive retrieval oracle ----------------------------------------

// Scores every note under the paths against every query pair, applies the
// threshold, sorts, truncates. Mirrors the retrieval contract by direct
// enumeration.
inline std::vector<RetrievedNote> brute_force_retrieve(
    const MemoryStore& store, const std::vector<AnatomicalPath>& paths,
    const std::vector<DiagnosisLabel>& candidates, EmbeddingProvider& provider,
    const RetrievalConfig& config) {
    std::vector<PairKey> queries;
    {
        std::vector<DiagnosisLabel> unique;
        for (const auto& c : candidates) {
            bool seen = false;
            for (const auto& u : unique)
                if (u == c) seen = true;
            if (!seen) unique.push_back(c);
        }
        for (std::size_t i = 0; i < unique.size(); ++i)
            for (std::size_t j = i + 1; j < unique.size(); ++j)
                queries.push_back(canonical_pair_key(unique[i], unique[j]));
    }
    if (queries.empty() || paths.empty()) return {};

    std::vector<RetrievedNote> scored;
    for (const auto& note : store.notes_under_paths(paths)) {
        const auto nv = provider.embed(note.differentials.display());
        RetrievedNote best;
        best.note = note;
        best.similarity = -2.0;
        for (const auto& q : queries) {
            const double sim = cosine_similarity(provider.embed(q.display()), nv);
            if (sim > best.similarity ||
                (sim == best.similarity &&
                 q.display() < best.matched_query_pair.display())) {
                best.similarity = sim;
                best.matched_query_pair = q;
            }
        }
        if (best.similarity >= config.tau) scored.push_back(best);
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const RetrievedNote& a, const RetrievedNote& b) {
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

// ---- fixture generators ---------------------------------------------------

inline ExperienceNote make_note(const std::string& department, const std::string& organ,
                                const std::string& a, const std::string& b,
                                const std::string& case_id = "c0",
                                PhaseTag tag = PhaseTag::phase1) {
    ExperienceNote n;
    n.department = department;
    n.organ_region = organ;
    n.differentials = canonical_pair_key(a, b);
    n.confusions = {"Overlapping presentation reported between " + a + " and " + b + "."};
    n.discriminators[a] = "Findings favoring " + a + ".";
    n.discriminators[b] = "Findings favoring " + b + ".";
    n.decision_rule = {"If findings characteristic of " + a + " are present -> favor " + a,
                       "If findings characteristic of " + b + " are present -> favor " + b};
    n.error_analysis = {"Case " + case_id + ": confused " + a + " with " + b + "."};
    n.provenance = {Provenance{case_id, tag}};
    return n;
}

inline CaseRecord make_case(const std::string& id, const std::string& truth,
                            int year = 2024, const std::string& discussion =
                                                  "Expert discussion of the findings.") {
    CaseRecord c;
    c.id = id;
    c.clinical_history = "History for case " + id + ".";
    c.image_refs = {"img://" + id + "/1"};
    c.ground_truth = DiagnosisLabel(truth);
    c.discussion = discussion;
    c.published_year = year;
    return c;
}

// Random valid corpus for round-trip properties.
inline std::vector<CaseRecord> random_corpus(std::mt19937_64& rng, std::size_t n) {
    std::vector<CaseRecord> cases;
    std::uniform_int_distribution<int> year(2015, 2026);
    std::uniform_int_distribution<int> extras(0, 3);
    for (std::size_t i = 0; i < n; ++i) {
        CaseRecord c = make_case("case-" + std::to_string(rng() % 100000) + "-" +
                                     std::to_string(i),
                                 "Diagnosis " + std::to_string(rng() % 50), year(rng));
        const int k = extras(rng);
        for (int d = 0; d < k; ++d)
            c.curated_differentials.emplace_back("Differential " +
                                                 std::to_string(rng() % 30));
        if (rng() % 4 == 0) c.discussion.clear();
        if (rng() % 5 == 0) c.published_year.reset();
        if (rng() % 3 == 0) c.image_refs.push_back("img://x/" + std::to_string(rng() % 9));
        cases.push_back(std::move(c));
    }
    return cases;
}

// Random valid store over the default taxonomy.
inline MemoryStore random_store(std::mt19937_64& rng, std::size_t max_notes) {
    const auto& taxonomy = default_taxonomy();
    MemoryStore store(taxonomy);
    std::uniform_int_distribution<std::size_t> dep_pick(0, taxonomy.departments().size() - 1);
    const std::size_t n = rng() % (max_notes + 1);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& dep = taxonomy.departments()[dep_pick(rng)];
        const auto& organ = dep.organs[rng() % dep.organs.size()];
        const auto a = "Disease " + std::to_string(rng() % 40);
        auto b = "Disease " + std::to_string(rng() % 40);
        if (normalize_text(a) == normalize_text(b)) b += " variant";
        auto note = make_note(dep.name, organ, a, b, "c" + std::to_string(i));
        if (rng() % 3 == 0)
            note.error_analysis.push_back("Additional failure decomposition " +
                                          std::to_string(rng() % 7) + ".");
        store.insert_or_merge(note);
    }
    return store;
}

}  // namespace dxmem::testkit
