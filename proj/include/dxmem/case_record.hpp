#pragma once

#include "dxmem/labels.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace dxmem {

using Json = nlohmann::json;

// One diagnostic case. Image references are opaque strings: the engine
// forwards them to agent endpoints and never inspects the content.
struct CaseRecord {
    std::string id;
    std::string clinical_history;
    std::vector<std::string> image_refs;
    DiagnosisLabel ground_truth;
    std::vector<DiagnosisLabel> curated_differentials;
    std::string discussion;                // may be empty for test cases
    std::optional<int> published_year;

    friend bool operator==(const CaseRecord& a, const CaseRecord& b) {
        return a.id == b.id && a.clinical_history == b.clinical_history &&
               a.image_refs == b.image_refs && a.ground_truth == b.ground_truth &&
               a.curated_differentials == b.curated_differentials &&
               a.discussion == b.discussion && a.published_year == b.published_year;
    }
    friend bool operator!=(const CaseRecord& a, const CaseRecord& b) {
        return !(a == b);
    }

    Json to_json() const {
        Json diffs = Json::array();
        for (const auto& d : curated_differentials) diffs.push_back(d.text());
        Json j{{"id", id},
               {"clinical_history", clinical_history},
               {"image_refs", image_refs},
               {"ground_truth", ground_truth.text()},
               {"curated_differentials", diffs},
               {"discussion", discussion}};
        if (published_year) j["published_year"] = *published_year;
        return j;
    }

    // Unknown extra fields are ignored so corpora may carry source-specific
    // metadata alongside the fields the engine reads.
    static CaseRecord from_json(const Json& j) {
        CaseRecord c;
        c.id = j.at("id").get<std::string>();
        if (trim(c.id).empty()) throw Error("case id is empty");
        c.clinical_history = j.value("clinical_history", std::string{});
        if (j.contains("image_refs"))
            c.image_refs = j["image_refs"].get<std::vector<std::string>>();
        c.ground_truth = DiagnosisLabel(j.at("ground_truth").get<std::string>());
        if (j.contains("curated_differentials"))
            for (const auto& dj : j["curated_differentials"])
                c.curated_differentials.emplace_back(dj.get<std::string>());
        c.discussion = j.value("discussion", std::string{});
        if (j.contains("published_year") && !j["published_year"].is_null())
            c.published_year = j["published_year"].get<int>();
        return c;
    }
};

// Reads a line-delimited corpus (one JSON object per line, blank lines
// skipped). Cases come back in stream order; a repeated id is an error.
inline std::vector<CaseRecord> parse_case_corpus(std::istream& in) {
    std::vector<CaseRecord> cases;
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::exception& e) {
            throw ParseError(line_no, std::string("not valid JSON: ") + e.what());
        }
        CaseRecord c;
        try {
            c = CaseRecord::from_json(j);
        } catch (const Json::exception& e) {
            throw ParseError(line_no, e.what());
        } catch (const Error& e) {
            throw ParseError(line_no, e.what());
        }
        if (!seen_ids.insert(c.id).second) throw DuplicateId(c.id);
        cases.push_back(std::move(c));
    }
    return cases;
}

inline std::vector<CaseRecord> parse_case_corpus(const std::string& text) {
    std::istringstream in(text);
    return parse_case_corpus(in);
}

inline std::vector<CaseRecord> load_case_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open corpus file: " + path);
    return parse_case_corpus(in);
}

inline void serialize_case_corpus(const std::vector<CaseRecord>& cases,
                                  std::ostream& out) {
    for (const auto& c : cases) out << c.to_json().dump() << "\n";
}

inline std::string serialize_case_corpus(const std::vector<CaseRecord>& cases) {
    std::ostringstream out;
    serialize_case_corpus(cases, out);
    return out.str();
}

inline void save_case_corpus(const std::vector<CaseRecord>& cases,
                             const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoFailure("cannot write corpus file: " + path);
    serialize_case_corpus(cases, out);
}

}  // namespace dxmem
