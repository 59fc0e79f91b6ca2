#pragma once

#include "dxmem/gateway.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace dxmem {

// Scripted confusion behavior: for a ground truth in the table, the mock
// answers the distractor (always, or with probability p on a seeded,
// per-case draw). A retained note whose pair names both the truth and the
// scripted distractor corrects the answer — the mechanism that makes
// end-to-end memory gain assertable at desk scale.
struct MockAgentScript {
    enum class ErrorMode { always, probability };

    struct Confusion {
        DiagnosisLabel truth;
        DiagnosisLabel distractor;
        ErrorMode mode = ErrorMode::always;
        double p = 1.0;
    };

    std::uint64_t seed = 0;
    std::map<std::string, Confusion> confusions;  // keyed by normalized truth
    // Optional anatomical placement per truth label; defaults to the first
    // department's "others" bucket.
    std::map<std::string, AnatomicalPath> placements;

    void add_confusion(const std::string& truth, const std::string& distractor,
                       ErrorMode mode = ErrorMode::always, double p = 1.0) {
        Confusion c{DiagnosisLabel(truth), DiagnosisLabel(distractor), mode, p};
        if (c.truth == c.distractor) throw EqualLabels(c.truth.normalized());
        if (p < 0.0 || p > 1.0) throw ConfigError("confusion probability must be in [0,1]");
        confusions[c.truth.normalized()] = std::move(c);
    }

    void place(const std::string& truth, const std::string& department,
               const std::string& organ) {
        placements[DiagnosisLabel(truth).normalized()] = {department, organ};
    }

    Json to_json() const {
        Json confs = Json::array();
        for (const auto& [key, c] : confusions) {
            Json cj{{"truth", c.truth.text()},
                    {"distractor", c.distractor.text()},
                    {"mode", c.mode == ErrorMode::always ? "always" : "probability"}};
            if (c.mode == ErrorMode::probability) cj["p"] = c.p;
            confs.push_back(std::move(cj));
        }
        Json places = Json::object();
        for (const auto& [key, path] : placements)
            places[key] = Json{{"department", path.first}, {"organ", path.second}};
        return Json{{"seed", seed}, {"confusions", confs}, {"placements", places}};
    }

    static MockAgentScript from_json(const Json& j) {
        MockAgentScript s;
        s.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("confusions"))
            for (const auto& cj : j["confusions"]) {
                const auto mode_str = cj.value("mode", std::string("always"));
                ErrorMode mode = mode_str == "probability" ? ErrorMode::probability
                                                           : ErrorMode::always;
                if (mode_str != "always" && mode_str != "probability")
                    throw ConfigError("unknown confusion mode: " + mode_str);
                s.add_confusion(cj.at("truth").get<std::string>(),
                                cj.at("distractor").get<std::string>(), mode,
                                cj.value("p", 1.0));
            }
        if (j.contains("placements"))
            for (const auto& [truth, pj] : j["placements"].items())
                s.place(truth, pj.at("department").get<std::string>(),
                        pj.at("organ").get<std::string>());
        return s;
    }

    static MockAgentScript load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoFailure("cannot open mock agent script: " + path);
        Json j;
        try {
            in >> j;
        } catch (const Json::exception& e) {
            throw ConfigError("mock agent script is not valid JSON: " + std::string(e.what()));
        }
        return from_json(j);
    }
};

// Deterministic scripted gateway. Stochastic confusions draw from a
// generator keyed by (seed, case id, attempt index), where the attempt
// index counts diagnose calls for that case on this instance — so a full
// run is reproducible regardless of how cases are scheduled across
// workers, and repeated trials of one case see independent draws.
class MockAgent final : public AgentGateway {
public:
    explicit MockAgent(MockAgentScript script, Taxonomy taxonomy = default_taxonomy())
        : script_(std::move(script)), taxonomy_(std::move(taxonomy)) {}

    std::string identity() const override { return "mock-agent"; }

    Diagnosis diagnose(const CaseRecord& c,
                       const std::vector<RetrievedNote>& notes) override {
        ++diagnose_calls_;
        if (!notes.empty()) ++diagnose_calls_with_notes_;
        const std::uint64_t attempt = next_attempt(c.id);

        const auto& truth = c.ground_truth;
        const auto it = script_.confusions.find(truth.normalized());
        DiagnosisLabel answer = truth;
        std::string rationale = "No scripted confusion for this presentation.";
        if (it != script_.confusions.end()) {
            const auto& conf = it->second;
            const PairKey confusion_pair = canonical_pair_key(truth, conf.distractor);
            bool corrected = false;
            for (const auto& rn : notes) {
                if (rn.retained_after_filter &&
                    rn.note.differentials == confusion_pair) {
                    corrected = true;
                    break;
                }
            }
            if (corrected) {
                rationale = "Retained experience note " + confusion_pair.display() +
                            " resolves the scripted confusion.";
            } else if (conf.mode == MockAgentScript::ErrorMode::always ||
                       stochastic_error(c.id, attempt, conf.p)) {
                answer = conf.distractor;
                rationale = "Scripted confusion: mistook " + truth.text() + " for " +
                            conf.distractor.text() + ".";
            } else {
                rationale = "Scripted confusion present but this draw answered correctly.";
            }
        }
        Diagnosis d;
        d.label = answer;
        d.rationale = rationale;
        d.raw_response = rationale + "\nFINAL DIAGNOSIS: " + answer.text();
        return d;
    }

    std::vector<DiagnosisLabel> propose_candidates(const CaseRecord& c) override {
        const auto it = script_.confusions.find(c.ground_truth.normalized());
        if (it == script_.confusions.end()) return {c.ground_truth};
        return {c.ground_truth, it->second.distractor};
    }

    std::vector<AnatomicalPath> select_paths(const CaseRecord& c, const Taxonomy& taxonomy,
                                             const RetrievalConfig& config) override {
        return repair_paths({placement(c.ground_truth)}, taxonomy, config);
    }

    ExperienceNote extract_note(const CaseRecord& c, const DiagnosisLabel& wrong,
                                const DiagnosisLabel& truth,
                                const std::string& discussion) override {
        ExperienceNote n;
        const auto path = placement(truth);
        n.department = path.first;
        n.organ_region = path.second;
        n.differentials = canonical_pair_key(wrong, truth);
        n.confusions = {"Overlapping presentation reported between " + wrong.text() +
                        " and " + truth.text() + "."};
        n.discriminators[truth.text()] =
            "Findings favoring " + truth.text() + " per expert discussion" +
            (discussion.empty() ? "." : ": " + first_sentence(discussion));
        n.discriminators[wrong.text()] =
            "Typical features of " + wrong.text() + " that were absent in this case.";
        n.decision_rule = {
            "If findings characteristic of " + truth.text() + " are present -> favor " +
                truth.text(),
            "If findings characteristic of " + wrong.text() + " are present -> favor " +
                wrong.text()};
        n.error_analysis = {"Case " + c.id + ": anchored on features shared with " +
                            wrong.text() + " and overlooked discriminators favoring " +
                            truth.text() + "."};
        n.provenance = {Provenance{c.id, PhaseTag::phase1}};
        return n;
    }

    Relevance score_relevance(const CaseRecord& c, const ExperienceNote& note) override {
        const auto path = placement(c.ground_truth);
        return note.department == path.first ? Relevance::relevant : Relevance::irrelevant;
    }

    // Instrumentation for verifying memory inaccessibility in Phase I.
    std::uint64_t diagnose_calls() const { return diagnose_calls_.load(); }
    std::uint64_t diagnose_calls_with_notes() const {
        return diagnose_calls_with_notes_.load();
    }

    const MockAgentScript& script() const { return script_; }

private:
    std::uint64_t next_attempt(const std::string& case_id) {
        std::lock_guard<std::mutex> lock(mutex_);
        return attempts_[case_id]++;
    }

    bool stochastic_error(const std::string& case_id, std::uint64_t attempt, double p) const {
        const std::uint64_t state =
            splitmix64(splitmix64(script_.seed) ^ fnv1a64(case_id) ^
                       splitmix64(0x9e3779b97f4a7c15ULL * (attempt + 1)));
        return unit_uniform(state) < p;
    }

    AnatomicalPath placement(const DiagnosisLabel& truth) const {
        const auto it = script_.placements.find(truth.normalized());
        if (it != script_.placements.end()) {
            auto dep = taxonomy_.resolve_department(it->second.first);
            if (dep) {
                auto organ = taxonomy_.resolve_organ(*dep, it->second.second);
                return {*dep, organ ? *organ : "others"};
            }
        }
        return {taxonomy_.departments().front().name, "others"};
    }

    static std::string first_sentence(const std::string& text) {
        const auto pos = text.find('.');
        if (pos == std::string::npos) return trim(text) + ".";
        return trim(text.substr(0, pos + 1));
    }

    MockAgentScript script_;
    Taxonomy taxonomy_;
    std::mutex mutex_;
    std::map<std::string, std::uint64_t> attempts_;
    std::atomic<std::uint64_t> diagnose_calls_{0};
    std::atomic<std::uint64_t> diagnose_calls_with_notes_{0};
};

}  // namespace dxmem
