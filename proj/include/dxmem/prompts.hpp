#pragma once

#include "dxmem/note.hpp"
#include "dxmem/retrieval.hpp"
#include "dxmem/taxonomy.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace dxmem {

// Renders retained notes into the diagnostic prompt. Confusions,
// discriminators, decision rules, and error analysis are included
// verbatim; the agent decides how to use them.
inline std::string render_notes_block(const std::vector<RetrievedNote>& notes) {
    std::ostringstream out;
    for (std::size_t i = 0; i < notes.size(); ++i) {
        const auto& n = notes[i].note;
        out << "Experience note " << (i + 1) << ": " << n.differentials.display() << "\n";
        out << "Commonly confused because:\n";
        for (const auto& c : n.confusions) out << "- " << c << "\n";
        out << "Distinguishing findings:\n";
        for (const auto& [label, text] : n.discriminators)
            out << "- " << label << ": " << text << "\n";
        out << "Decision rules:\n";
        for (const auto& r : n.decision_rule) out << "- " << r << "\n";
        if (!n.error_analysis.empty()) {
            out << "Past reasoning errors:\n";
            for (const auto& e : n.error_analysis) out << "- " << e << "\n";
        }
        out << "\n";
    }
    return out.str();
}

inline std::string render_taxonomy_listing(const Taxonomy& taxonomy) {
    std::ostringstream out;
    for (const auto& d : taxonomy.departments()) {
        out << d.name << ":";
        for (std::size_t i = 0; i < d.organs.size(); ++i)
            out << (i == 0 ? " " : ", ") << d.organs[i];
        out << "\n";
    }
    return out.str();
}

// Prompt texts ship as editable template files; built-in defaults apply
// when no override directory is configured. Placeholders use {{name}}.
class PromptLibrary {
public:
    PromptLibrary() { install_defaults(); }

    explicit PromptLibrary(const std::string& directory) {
        install_defaults();
        namespace fs = std::filesystem;
        if (!fs::is_directory(directory))
            throw IoFailure("prompt template directory not found: " + directory);
        for (auto& [name, text] : templates_) {
            const auto path = fs::path(directory) / (name + ".txt");
            if (!fs::exists(path)) continue;
            std::ifstream in(path);
            std::ostringstream buf;
            buf << in.rdbuf();
            text = buf.str();
        }
    }

    const std::string& raw(const std::string& name) const {
        auto it = templates_.find(name);
        if (it == templates_.end()) throw ConfigError("unknown prompt template: " + name);
        return it->second;
    }

    std::string render(const std::string& name,
                       const std::map<std::string, std::string>& vars) const {
        std::string out = raw(name);
        for (const auto& [key, value] : vars) {
            const std::string needle = "{{" + key + "}}";
            std::size_t pos = 0;
            while ((pos = out.find(needle, pos)) != std::string::npos) {
                out.replace(pos, needle.size(), value);
                pos += value.size();
            }
        }
        return out;
    }

    static const std::vector<std::string>& template_names() {
        static const std::vector<std::string> names = {
            "diagnose", "propose_candidates", "select_paths",
            "extract_note", "score_relevance", "judge"};
        return names;
    }

private:
    void install_defaults();
    std::map<std::string, std::string> templates_;
};

inline void PromptLibrary::install_defaults() {
    templates_["diagnose"] = R"(You are an expert radiologist performing differential diagnosis.

Clinical history:
{{clinical_history}}

{{notes_block}}Review the imaging provided. Reason carefully about the differential diagnosis, weighing findings for and against each plausible condition. Then state your single best diagnosis on the last line, exactly in the form:

FINAL DIAGNOSIS: <diagnosis>
)";

    templates_["propose_candidates"] = R"(You are an expert radiologist. Based on the clinical history and imaging below, list the 2 to 6 most plausible candidate diagnoses, most likely first.

Clinical history:
{{clinical_history}}

Answer with a fenced JSON array of diagnosis names, e.g.
```json
["Diagnosis A", "Diagnosis B"]
```
)";

    templates_["select_paths"] = R"(You are indexing a radiology case into an anatomical hierarchy. Choose the 1 or 2 department/organ paths that best match the case presentation.

Available departments and organs:
{{taxonomy}}

Clinical history:
{{clinical_history}}

Answer with a fenced JSON array of objects, e.g.
```json
[{"department": "neuroradiology", "organ": "brain"}]
```
)";

    templates_["extract_note"] = R"(You misdiagnosed a case as "{{wrong}}" when the correct diagnosis was "{{truth}}". Using the expert discussion below, distill a reusable differential-diagnosis experience note for the pair.

Expert discussion:
{{discussion}}

Clinical history:
{{clinical_history}}

Work through these steps:
1. Identify generalizable confusion points between "{{wrong}}" and "{{truth}}".
2. Extract the imaging, clinical, and laboratory findings that distinguish each diagnosis.
3. Formulate bidirectional decision rules of the form "If <condition> -> <favor|exclude|consider> <target>", covering both diagnoses.
4. Analyze the reasoning failure that led to your misdiagnosis.

Also pick the best anatomical placement from this hierarchy:
{{taxonomy}}

Answer with one fenced JSON object:
```json
{
  "department": "...",
  "organ_region": "...",
  "confusions": ["..."],
  "discriminators": {"{{wrong}}": "...", "{{truth}}": "..."},
  "decision_rule": ["If ... -> favor {{truth}}", "If ... -> favor {{wrong}}"],
  "error_analysis": ["..."]
}
```
)";

    templates_["score_relevance"] = R"(A differential-diagnosis experience note was retrieved for the case below. Decide whether it is plausibly relevant. Exclude it only when it is clearly irrelevant (wrong organ system or unrelated disease category); keep potentially useful notes.

Clinical history:
{{clinical_history}}

Note pair: {{pair}}
Note department/organ: {{department}}/{{organ}}
Confusions:
{{confusions}}

Answer with exactly one word: RELEVANT or IRRELEVANT.
)";

    templates_["judge"] = R"(Do these two free-text diagnosis names denote the same disease entity?

A: {{a}}
B: {{b}}

Answer with exactly one word: YES or NO.
)";
}

}  // namespace dxmem
