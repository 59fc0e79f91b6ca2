#pragma once

#include "dxmem/case_record.hpp"
#include "dxmem/note.hpp"
#include "dxmem/retrieval.hpp"
#include "dxmem/taxonomy.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dxmem {

enum class Relevance { relevant, irrelevant, unknown };

struct Diagnosis {
    DiagnosisLabel label;
    std::string rationale;
    std::string raw_response;
};

using AnatomicalPath = std::pair<std::string, std::string>;

// Uniform contract for every agent interaction: diagnosis, candidate
// proposal, path selection, note extraction, relevance scoring. No
// operation mutates shared state; failures are typed (AgentUnavailable,
// MalformedResponse) so drivers can degrade per case instead of aborting.
class AgentGateway {
public:
    virtual ~AgentGateway() = default;

    virtual std::string identity() const = 0;

    // notes may be empty: memory-free mode, used as baseline and in Phase I.
    virtual Diagnosis diagnose(const CaseRecord& c,
                               const std::vector<RetrievedNote>& notes) = 0;

    virtual std::vector<DiagnosisLabel> propose_candidates(const CaseRecord& c) = 0;

    virtual std::vector<AnatomicalPath> select_paths(const CaseRecord& c,
                                                     const Taxonomy& taxonomy,
                                                     const RetrievalConfig& config) = 0;

    virtual ExperienceNote extract_note(const CaseRecord& c, const DiagnosisLabel& wrong,
                                        const DiagnosisLabel& truth,
                                        const std::string& discussion) = 0;

    virtual Relevance score_relevance(const CaseRecord& c, const ExperienceNote& note) = 0;

    // Optional agent-as-judge grading; the default is normalized exact match.
    virtual bool judge_equivalent(const DiagnosisLabel& predicted,
                                  const DiagnosisLabel& truth) {
        return predicted == truth;
    }
};

// Repairs agent-named paths against the taxonomy: unknown organ under a
// known department falls back to that department's "others"; unknown
// departments are dropped. Deduplicates, truncates to max_paths in
// response order, and when cross-department search is off keeps only the
// first path's department.
inline std::vector<AnatomicalPath> repair_paths(const std::vector<AnatomicalPath>& raw,
                                                const Taxonomy& taxonomy,
                                                const RetrievalConfig& config) {
    std::vector<AnatomicalPath> repaired;
    for (const auto& [dep_name, organ_name] : raw) {
        auto dep = taxonomy.resolve_department(dep_name);
        if (!dep) continue;
        auto organ = taxonomy.resolve_organ(*dep, organ_name);
        AnatomicalPath path{*dep, organ ? *organ : "others"};
        if (std::find(repaired.begin(), repaired.end(), path) == repaired.end())
            repaired.push_back(std::move(path));
    }
    if (!config.cross_department && !repaired.empty()) {
        const std::string dep = repaired.front().first;
        std::erase_if(repaired, [&](const AnatomicalPath& p) { return p.first != dep; });
    }
    if (repaired.size() > static_cast<std::size_t>(config.max_paths))
        repaired.resize(static_cast<std::size_t>(config.max_paths));
    return repaired;
}

enum class CandidatesMode { agent, dataset };

inline std::string to_string(CandidatesMode m) {
    return m == CandidatesMode::agent ? "agent" : "dataset";
}

inline CandidatesMode candidates_mode_from_string(const std::string& s) {
    if (s == "agent") return CandidatesMode::agent;
    if (s == "dataset") return CandidatesMode::dataset;
    throw ConfigError("candidates mode must be \"agent\" or \"dataset\": " + s);
}

namespace detail {

inline std::vector<DiagnosisLabel> dedupe_labels(const std::vector<DiagnosisLabel>& in,
                                                 std::size_t limit) {
    std::vector<DiagnosisLabel> out;
    for (const auto& label : in) {
        bool seen = false;
        for (const auto& u : out)
            if (u == label) { seen = true; break; }
        if (!seen) out.push_back(label);
        if (out.size() >= limit) break;
    }
    return out;
}

}  // namespace detail

// Candidate hypotheses for retrieval. In dataset mode the curated
// differential list is used together with the agent's own leading
// hypothesis (one memory-free diagnose call) instead of asking the agent
// to propose candidates. Agent outages fall back to the curated list.
inline std::vector<DiagnosisLabel> propose_candidates(AgentGateway& agent,
                                                      const CaseRecord& c,
                                                      CandidatesMode mode) {
    constexpr std::size_t kMaxCandidates = 6;
    if (mode == CandidatesMode::dataset) {
        std::vector<DiagnosisLabel> candidates;
        try {
            candidates.push_back(agent.diagnose(c, {}).label);
        } catch (const Error&) {
            // leading hypothesis unavailable; curated list stands alone
        }
        for (const auto& d : c.curated_differentials) candidates.push_back(d);
        return detail::dedupe_labels(candidates, kMaxCandidates);
    }
    try {
        return detail::dedupe_labels(agent.propose_candidates(c), kMaxCandidates);
    } catch (const Error&) {
        return detail::dedupe_labels(c.curated_differentials, kMaxCandidates);
    }
}

// Agent pass over retrieved notes, dropping the clearly irrelevant ones.
// Any failure or unparsable verdict keeps the note: retention is the
// conservative default.
inline std::vector<RetrievedNote> relevance_filter(AgentGateway& agent,
                                                   const CaseRecord& c,
                                                   const std::vector<RetrievedNote>& retrieved) {
    std::vector<RetrievedNote> retained;
    retained.reserve(retrieved.size());
    for (auto rn : retrieved) {
        Relevance verdict = Relevance::unknown;
        try {
            verdict = agent.score_relevance(c, rn.note);
        } catch (...) {
            verdict = Relevance::unknown;
        }
        if (verdict == Relevance::irrelevant) {
            rn.retained_after_filter = false;
            continue;
        }
        rn.retained_after_filter = true;
        retained.push_back(std::move(rn));
    }
    return retained;
}

// Stable identifier used in logs: department/organ/pair display.
inline std::string note_key(const ExperienceNote& note) {
    return note.department + "/" + note.organ_region + "/" +
           note.differentials.display();
}

struct ScopedRetrieval {
    std::vector<AnatomicalPath> paths;
    std::vector<RetrievedNote> retained;
};

// Anatomical scoping plus hybrid retrieval for one case: select paths,
// propose candidates, score against the store, run the relevance filter.
// Every failure mode degrades to an empty result, i.e. memory-free
// diagnosis, rather than failing the case.
inline ScopedRetrieval scoped_retrieval(AgentGateway& agent, const CaseRecord& c,
                                        const MemoryStore& store,
                                        EmbeddingProvider& provider,
                                        const RetrievalConfig& config,
                                        CandidatesMode mode) {
    ScopedRetrieval out;
    try {
        out.paths = agent.select_paths(c, store.taxonomy(), config);
        if (out.paths.empty()) return out;
        const auto candidates = propose_candidates(agent, c, mode);
        std::vector<RetrievedNote> retrieved;
        try {
            retrieved = retrieve(store, out.paths, candidates, provider, config);
        } catch (const RetrievalUnavailable&) {
            retrieved.clear();
        }
        out.retained = relevance_filter(agent, c, retrieved);
    } catch (const Error&) {
        out.paths.clear();
        out.retained.clear();
    }
    return out;
}

// --- agent response parsing -------------------------------------------

// Pulls the label out of the machine-readable final-answer segment
// ("FINAL DIAGNOSIS: <label>", last occurrence wins).
inline std::optional<std::string> extract_final_diagnosis(const std::string& text) {
    static const std::string marker = "final diagnosis:";
    std::string lowered = text;
    for (auto& ch : lowered) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    const auto pos = lowered.rfind(marker);
    if (pos == std::string::npos) return std::nullopt;
    auto rest = text.substr(pos + marker.size());
    const auto nl = rest.find('\n');
    if (nl != std::string::npos) rest = rest.substr(0, nl);
    const auto label = trim(rest);
    if (label.empty()) return std::nullopt;
    return label;
}

// Finds the last fenced ```...``` block and parses it as JSON; falls back
// to the outermost {...} or [...] span when the response is unfenced.
inline std::optional<Json> extract_fenced_json(const std::string& text) {
    auto try_parse = [](std::string_view sv) -> std::optional<Json> {
        try {
            return Json::parse(sv);
        } catch (const Json::exception&) {
            return std::nullopt;
        }
    };

    std::size_t fence_end = text.rfind("```");
    if (fence_end != std::string::npos) {
        std::size_t fence_start = text.rfind("```", fence_end - 1);
        if (fence_start != std::string::npos && fence_start + 3 < fence_end) {
            std::string body = text.substr(fence_start + 3, fence_end - fence_start - 3);
            // Drop a language tag like "json" on the first line.
            const auto nl = body.find('\n');
            if (nl != std::string::npos) {
                const auto tag = trim(body.substr(0, nl));
                if (!tag.empty() && tag.find('{') == std::string::npos &&
                    tag.find('[') == std::string::npos)
                    body = body.substr(nl + 1);
            }
            if (auto parsed = try_parse(trim(body))) return parsed;
        }
    }

    for (char open : {'{', '['}) {
        const char close = open == '{' ? '}' : ']';
        const auto b = text.find(open);
        const auto e = text.rfind(close);
        if (b != std::string::npos && e != std::string::npos && e > b)
            if (auto parsed = try_parse(std::string_view(text).substr(b, e - b + 1)))
                return parsed;
    }
    return std::nullopt;
}

}  // namespace dxmem
