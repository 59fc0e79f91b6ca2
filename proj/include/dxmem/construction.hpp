#pragma once

#include "dxmem/gateway.hpp"
#include "dxmem/memory_store.hpp"
#include "dxmem/parallel.hpp"
#include "dxmem/retrieval.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace dxmem {

enum class ConstructionAction {
    none,
    note_extracted,
    note_supplemented,
    note_flagged_misleading,
    extraction_failed
};

inline std::string to_string(ConstructionAction a) {
    switch (a) {
        case ConstructionAction::none: return "none";
        case ConstructionAction::note_extracted: return "note-extracted";
        case ConstructionAction::note_supplemented: return "note-supplemented";
        case ConstructionAction::note_flagged_misleading: return "note-flagged-misleading";
        case ConstructionAction::extraction_failed: return "extraction-failed";
    }
    return "none";
}

struct ConstructionEntry {
    std::string case_id;
    int phase = 1;
    std::string diagnosis;  // empty when the agent failed outright
    bool correct = false;
    std::vector<std::string> retrieved_keys;  // phase 2 only
    ConstructionAction action = ConstructionAction::none;
    std::string detail;

    Json to_json() const {
        Json j{{"type", "entry"},        {"case_id", case_id}, {"phase", phase},
               {"diagnosis", diagnosis}, {"correct", correct}, {"action", to_string(action)}};
        if (!retrieved_keys.empty()) j["retrieved_keys"] = retrieved_keys;
        if (!detail.empty()) j["detail"] = detail;
        return j;
    }
};

// Per-case trace of one construction run: one phase-1 entry per case, and
// one phase-2 entry per case when the run is two-round.
struct ConstructionLog {
    std::vector<ConstructionEntry> entries;

    std::map<std::string, std::size_t> action_counts(int phase = 0) const {
        std::map<std::string, std::size_t> counts;
        for (const auto& e : entries)
            if (phase == 0 || e.phase == phase) ++counts[to_string(e.action)];
        return counts;
    }

    bool covers(const std::vector<CaseRecord>& corpus, int phase) const {
        std::set<std::string> logged;
        for (const auto& e : entries)
            if (e.phase == phase) logged.insert(e.case_id);
        for (const auto& c : corpus)
            if (!logged.count(c.id)) return false;
        return true;
    }

    const ConstructionEntry* find(const std::string& case_id, int phase) const {
        for (const auto& e : entries)
            if (e.case_id == case_id && e.phase == phase) return &e;
        return nullptr;
    }

    void save(const std::string& path, const Json& meta = Json::object()) const {
        std::ofstream out(path);
        if (!out) throw IoFailure("cannot write construction log: " + path);
        Json header{{"type", "meta"}, {"kind", "construction_log"}};
        for (const auto& [k, v] : meta.items()) header[k] = v;
        std::string body = header.dump() + "\n";
        for (const auto& e : entries) body += e.to_json().dump() + "\n";
        out << body;
        out << Json{{"type", "checksum"}, {"fnv64", to_hex(fnv1a64(body))}}.dump() << "\n";
    }
};

struct ConstructionOptions {
    int rounds = 2;                 // 1 = phase 1 only, 2 = phase 1 then phase 2
    RetrievalConfig retrieval;
    CandidatesMode candidates = CandidatesMode::agent;
    bool frozen_snapshot = false;   // phase 2 retrieval: live store vs pass-start copy
    int workers = 1;

    void validate() const {
        if (rounds != 1 && rounds != 2) throw ConfigError("rounds must be 1 or 2");
        retrieval.validate();
        if (workers < 1) throw ConfigError("workers must be >= 1");
    }
};

namespace detail {

struct Phase1Work {
    std::string diagnosis;
    bool diagnosed = false;
    bool correct = false;
    std::optional<ExperienceNote> note;
    std::string failure;
};

inline std::string addendum_for_misleading(const std::string& case_id,
                                           const std::string& wrong_label) {
    return "Case " + case_id +
           ": correct-to-incorrect transition while this note was retained; "
           "diagnosis given was " + wrong_label + ".";
}

}  // namespace detail

// Phase I: zero-shot error discovery. Diagnoses every case memory-free
// (structurally: the note list handed to the agent is always empty) and
// extracts a note for each error. Agent and extraction calls may run
// concurrently; store mutations are applied in corpus order so the result
// is independent of worker scheduling.
inline ConstructionLog run_phase1(const std::vector<CaseRecord>& corpus,
                                  AgentGateway& agent, MemoryStore& store,
                                  const ConstructionOptions& options = {}) {
    options.validate();

    auto work = parallel_index_map<detail::Phase1Work>(
        corpus.size(), options.workers, [&](std::size_t i) {
            const auto& c = corpus[i];
            detail::Phase1Work w;
            Diagnosis diag;
            try {
                diag = agent.diagnose(c, {});
            } catch (const Error& e) {
                w.failure = e.what();
                return w;
            }
            w.diagnosed = true;
            w.diagnosis = diag.label.text();
            w.correct = diag.label == c.ground_truth;
            if (w.correct) return w;
            try {
                auto paths = agent.select_paths(c, store.taxonomy(), options.retrieval);
                if (paths.empty()) {
                    w.failure = "no valid anatomical path for note placement";
                    return w;
                }
                auto note = agent.extract_note(c, diag.label, c.ground_truth, c.discussion);
                note.department = paths.front().first;
                note.organ_region = paths.front().second;
                note.provenance = {Provenance{c.id, PhaseTag::phase1}};
                w.note = std::move(note);
            } catch (const Error& e) {
                w.failure = e.what();
            }
            return w;
        });

    ConstructionLog log;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& c = corpus[i];
        auto& w = work[i];
        ConstructionEntry entry;
        entry.case_id = c.id;
        entry.phase = 1;
        entry.diagnosis = w.diagnosis;
        entry.correct = w.correct;
        if (w.correct) {
            entry.action = ConstructionAction::none;
        } else if (!w.note) {
            entry.action = ConstructionAction::extraction_failed;
            entry.detail = w.failure;
        } else {
            store.insert_or_merge(*w.note);
            entry.action = ConstructionAction::note_extracted;
        }
        log.entries.push_back(std::move(entry));
    }
    return log;
}

// Phase II: reflective refinement. Re-diagnoses every case with memory
// access and, per case: (a) extracts a new note when the realized pair was
// not among the retained notes, (b) supplements the retained note for the
// realized pair when the error persisted anyway, (c) flags retained notes
// on a correct-to-incorrect transition, (d) leaves correct cases alone.
// Streaming mode lets each case see mutations from earlier cases in the
// same pass; frozen mode retrieves against a snapshot taken at pass start.
inline ConstructionLog run_phase2(const std::vector<CaseRecord>& corpus,
                                  AgentGateway& agent, MemoryStore& store,
                                  const ConstructionLog& phase1_log,
                                  EmbeddingProvider& provider,
                                  const ConstructionOptions& options = {}) {
    options.validate();
    if (!phase1_log.covers(corpus, 1))
        throw ConfigError("phase 1 log does not cover the corpus");

    std::optional<MemoryStore> snapshot;
    if (options.frozen_snapshot) snapshot = store;

    ConstructionLog log;
    for (const auto& c : corpus) {
        const MemoryStore& view = options.frozen_snapshot ? *snapshot : store;
        ConstructionEntry entry;
        entry.case_id = c.id;
        entry.phase = 2;

        auto [paths, retained] =
            scoped_retrieval(agent, c, view, provider, options.retrieval, options.candidates);
        for (const auto& rn : retained) entry.retrieved_keys.push_back(note_key(rn.note));

        Diagnosis diag;
        try {
            diag = agent.diagnose(c, retained);
        } catch (const Error& e) {
            entry.action = ConstructionAction::extraction_failed;
            entry.detail = e.what();
            log.entries.push_back(std::move(entry));
            continue;
        }
        entry.diagnosis = diag.label.text();
        entry.correct = diag.label == c.ground_truth;

        const auto* p1 = phase1_log.find(c.id, 1);
        const bool phase1_correct = p1 && p1->correct;

        if (entry.correct) {
            entry.action = ConstructionAction::none;
        } else if (phase1_correct && !retained.empty()) {
            // (c) detecting misleading notes
            for (const auto& rn : retained) {
                ExperienceNote incoming = rn.note;
                incoming.error_analysis = {
                    detail::addendum_for_misleading(c.id, diag.label.text())};
                incoming.provenance = {Provenance{c.id, PhaseTag::phase2_misleading}};
                store.insert_or_merge(incoming);
            }
            entry.action = ConstructionAction::note_flagged_misleading;
        } else {
            const PairKey realized = canonical_pair_key(diag.label, c.ground_truth);
            const RetrievedNote* matching = nullptr;
            for (const auto& rn : retained)
                if (rn.note.differentials == realized) { matching = &rn; break; }
            try {
                if (!matching && paths.empty())
                    throw ExtractionFailed("no valid anatomical path for note placement");
                auto note = agent.extract_note(c, diag.label, c.ground_truth, c.discussion);
                if (matching) {
                    note.department = matching->note.department;
                    note.organ_region = matching->note.organ_region;
                } else {
                    note.department = paths.front().first;
                    note.organ_region = paths.front().second;
                }
                note.provenance = {Provenance{c.id, PhaseTag::phase2_supplement}};
                store.insert_or_merge(note);
                entry.action = matching ? ConstructionAction::note_supplemented
                                        : ConstructionAction::note_extracted;
            } catch (const Error& e) {
                entry.action = ConstructionAction::extraction_failed;
                entry.detail = e.what();
            }
        }
        log.entries.push_back(std::move(entry));
    }
    return log;
}

struct ConstructionResult {
    MemoryStore store;
    ConstructionLog log;
};

// Eq-style accumulate loop over a construction corpus: one round exposes
// blind spots, the optional second round refines them.
inline ConstructionResult build_memory(const std::vector<CaseRecord>& corpus,
                                       AgentGateway& agent, EmbeddingProvider& provider,
                                       const ConstructionOptions& options,
                                       const Taxonomy& taxonomy = default_taxonomy()) {
    options.validate();
    ConstructionResult result{MemoryStore(taxonomy), {}};
    result.log = run_phase1(corpus, agent, result.store, options);
    if (options.rounds == 2) {
        auto log2 = run_phase2(corpus, agent, result.store, result.log, provider, options);
        for (auto& e : log2.entries) result.log.entries.push_back(std::move(e));
    }
    return result;
}

}  // namespace dxmem
