#pragma once

#include "dxmem/labels.hpp"
#include "dxmem/taxonomy.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <regex>
#include <string>
#include <vector>

namespace dxmem {

// Construction phase that contributed a provenance entry.
enum class PhaseTag { phase1, phase2_supplement, phase2_misleading };

inline std::string to_string(PhaseTag tag) {
    switch (tag) {
        case PhaseTag::phase1: return "phase1";
        case PhaseTag::phase2_supplement: return "phase2-supplement";
        case PhaseTag::phase2_misleading: return "phase2-misleading";
    }
    return "phase1";
}

inline PhaseTag phase_tag_from_string(const std::string& s) {
    if (s == "phase1") return PhaseTag::phase1;
    if (s == "phase2-supplement") return PhaseTag::phase2_supplement;
    if (s == "phase2-misleading") return PhaseTag::phase2_misleading;
    throw Error("unknown phase tag: " + s);
}

struct Provenance {
    std::string case_id;
    PhaseTag phase = PhaseTag::phase1;

    friend bool operator==(const Provenance& a, const Provenance& b) {
        return a.case_id == b.case_id && a.phase == b.phase;
    }
};

// One pairwise differential memory unit. Immutable by convention once
// stored; merging builds a new note rather than editing in place.
struct ExperienceNote {
    std::string department;
    std::string organ_region;
    PairKey differentials;
    std::vector<std::string> confusions;
    // Keyed by each label's surface text; distinguishing findings per side.
    std::map<std::string, std::string> discriminators;
    std::vector<std::string> decision_rule;
    std::vector<std::string> error_analysis;
    std::vector<Provenance> provenance;

    friend bool operator==(const ExperienceNote& a, const ExperienceNote& b) {
        return a.department == b.department && a.organ_region == b.organ_region &&
               a.differentials == b.differentials && a.confusions == b.confusions &&
               a.discriminators == b.discriminators &&
               a.decision_rule == b.decision_rule &&
               a.error_analysis == b.error_analysis && a.provenance == b.provenance;
    }
    friend bool operator!=(const ExperienceNote& a, const ExperienceNote& b) {
        return !(a == b);
    }

    Json to_json() const {
        Json discs = Json::object();
        for (const auto& [label, text] : discriminators) discs[label] = text;
        Json prov = Json::array();
        for (const auto& p : provenance)
            prov.push_back(Json{{"case_id", p.case_id}, {"phase", to_string(p.phase)}});
        return Json{{"department", department},
                    {"organ_region", organ_region},
                    {"differentials",
                     Json{{"first", differentials.first().text()},
                          {"second", differentials.second().text()},
                          {"display", differentials.display()}}},
                    {"confusions", confusions},
                    {"discriminators", discs},
                    {"decision_rule", decision_rule},
                    {"error_analysis", error_analysis},
                    {"provenance", prov}};
    }

    static ExperienceNote from_json(const Json& j) {
        ExperienceNote n;
        n.department = j.at("department").get<std::string>();
        n.organ_region = j.at("organ_region").get<std::string>();
        const auto& dj = j.at("differentials");
        n.differentials = canonical_pair_key(dj.at("first").get<std::string>(),
                                             dj.at("second").get<std::string>());
        n.confusions = j.at("confusions").get<std::vector<std::string>>();
        for (const auto& [label, text] : j.at("discriminators").items())
            n.discriminators[label] = text.get<std::string>();
        n.decision_rule = j.at("decision_rule").get<std::vector<std::string>>();
        if (j.contains("error_analysis"))
            n.error_analysis = j["error_analysis"].get<std::vector<std::string>>();
        if (j.contains("provenance"))
            for (const auto& pj : j["provenance"])
                n.provenance.push_back(
                    Provenance{pj.at("case_id").get<std::string>(),
                               phase_tag_from_string(pj.at("phase").get<std::string>())});
        return n;
    }
};

namespace detail {

// Decision rules carry a lightweight grammar and are validated by pattern
// only; they stay prose for the diagnostic prompt, never executable logic.
inline bool decision_rule_matches(const std::string& rule) {
    static const std::regex pattern(
        R"(^If .+?(?:→|->) *(favor|exclude|consider) .+$)");
    return std::regex_search(rule, pattern);
}

inline std::string decision_rule_target(const std::string& rule) {
    static const std::regex pattern(
        R"((?:→|->) *(?:favor|exclude|consider) (.+)$)");
    std::smatch m;
    if (std::regex_search(rule, m, pattern)) return trim(m[1].str());
    return "";
}

}  // namespace detail

// Returns the empty vector when the note is well-formed; otherwise one
// human-readable description per violated invariant. Never throws.
inline std::vector<std::string> validate_note(const ExperienceNote& note,
                                              const Taxonomy& taxonomy) {
    std::vector<std::string> violations;

    if (!taxonomy.has_department(note.department))
        violations.push_back("unknown department: \"" + note.department + "\"");
    else if (!taxonomy.has_path(note.department, note.organ_region))
        violations.push_back("unknown organ/region \"" + note.organ_region +
                             "\" under department \"" + note.department + "\"");

    const auto& first = note.differentials.first();
    const auto& second = note.differentials.second();
    if (first.normalized().empty() || second.normalized().empty() || first == second)
        violations.push_back("differentials must name two distinct diagnoses");

    if (note.confusions.empty()) violations.push_back("confusions must be non-empty");
    for (const auto& c : note.confusions)
        if (trim(c).empty()) violations.push_back("confusions entries must be non-empty");

    if (note.discriminators.size() != 2) {
        violations.push_back("discriminators must have exactly two entries");
    } else {
        bool covers_first = false, covers_second = false;
        for (const auto& [label, text] : note.discriminators) {
            DiagnosisLabel key;
            try {
                key = DiagnosisLabel(label);
            } catch (const Error&) {
                violations.push_back("discriminators key is empty");
                continue;
            }
            if (key == first) covers_first = true;
            else if (key == second) covers_second = true;
            else violations.push_back("discriminators key \"" + label +
                                      "\" is not one of the pair labels");
            if (trim(text).empty())
                violations.push_back("discriminator text for \"" + label + "\" is empty");
        }
        if (!covers_first || !covers_second)
            violations.push_back("discriminators must cover both labels");
    }

    if (note.decision_rule.empty()) {
        violations.push_back("decision_rule must be non-empty");
    } else {
        bool targets_first = false, targets_second = false;
        for (const auto& rule : note.decision_rule) {
            if (!detail::decision_rule_matches(rule)) {
                violations.push_back(
                    "decision rule does not match \"If <condition> -> "
                    "<favor|exclude|consider> <target>\": \"" + rule + "\"");
                continue;
            }
            const auto target = normalize_text(detail::decision_rule_target(rule));
            if (target == first.normalized()) targets_first = true;
            if (target == second.normalized()) targets_second = true;
        }
        if (!targets_first || !targets_second)
            violations.push_back("decision_rule must target both labels");
    }

    if (note.provenance.empty()) violations.push_back("provenance must be non-empty");
    for (const auto& p : note.provenance)
        if (trim(p.case_id).empty())
            violations.push_back("provenance case id must be non-empty");

    return violations;
}

}  // namespace dxmem
