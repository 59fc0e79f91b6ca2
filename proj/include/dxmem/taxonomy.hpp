#pragma once

#include "dxmem/errors.hpp"
#include "dxmem/strings.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dxmem {

using Json = nlohmann::json;

// Two-level anatomical index: department -> organ/region. Pure data, loaded
// from a JSON document; the engine never hardcodes department names.
// Every department ends with an "others" bucket for atypical cases.
class Taxonomy {
public:
    struct Department {
        std::string name;
        std::vector<std::string> organs;
    };

    Taxonomy() = default;

    static Taxonomy from_json(const Json& j) {
        Taxonomy t;
        if (!j.is_object() || !j.contains("departments") || !j["departments"].is_array())
            throw Error("taxonomy document must contain a departments array");
        for (const auto& dj : j["departments"]) {
            Department d;
            d.name = dj.at("name").get<std::string>();
            d.organs = dj.at("organs").get<std::vector<std::string>>();
            t.departments_.push_back(std::move(d));
        }
        t.validate();
        return t;
    }

    Json to_json() const {
        Json deps = Json::array();
        for (const auto& d : departments_)
            deps.push_back(Json{{"name", d.name}, {"organs", d.organs}});
        return Json{{"departments", deps}};
    }

    static Taxonomy load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoFailure("cannot open taxonomy file: " + path);
        Json j;
        try {
            in >> j;
        } catch (const Json::exception& e) {
            throw Error("taxonomy file is not valid JSON: " + std::string(e.what()));
        }
        return from_json(j);
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw IoFailure("cannot write taxonomy file: " + path);
        out << to_json().dump(2) << "\n";
    }

    const std::vector<Department>& departments() const { return departments_; }

    std::size_t department_count() const { return departments_.size(); }

    std::size_t organ_count() const {
        std::size_t n = 0;
        for (const auto& d : departments_) n += d.organs.size();
        return n;
    }

    bool has_department(const std::string& name) const {
        return department_index_.count(name) > 0;
    }

    bool has_path(const std::string& department, const std::string& organ) const {
        auto it = department_index_.find(department);
        if (it == department_index_.end()) return false;
        for (const auto& o : departments_[it->second].organs)
            if (o == organ) return true;
        return false;
    }

    const std::vector<std::string>& organs(const std::string& department) const {
        auto it = department_index_.find(department);
        if (it == department_index_.end())
            throw UnknownPath(department, "*");
        return departments_[it->second].organs;
    }

    // Case/whitespace-insensitive lookup returning the canonical spelling.
    // Gateways use this to repair agent-named paths before notes are built.
    std::optional<std::string> resolve_department(const std::string& name) const {
        auto it = normalized_departments_.find(normalize_text(name));
        if (it == normalized_departments_.end()) return std::nullopt;
        return departments_[it->second].name;
    }

    std::optional<std::string> resolve_organ(const std::string& department,
                                             const std::string& organ) const {
        auto dep = resolve_department(department);
        if (!dep) return std::nullopt;
        const auto norm = normalize_text(organ);
        for (const auto& o : organs(*dep))
            if (normalize_text(o) == norm) return o;
        return std::nullopt;
    }

    // Content fingerprint, stored inside persisted memory files so a store
    // is never loaded against a different taxonomy.
    std::string checksum() const { return to_hex(fnv1a64(to_json().dump())); }

    friend bool operator==(const Taxonomy& a, const Taxonomy& b) {
        if (a.departments_.size() != b.departments_.size()) return false;
        for (std::size_t i = 0; i < a.departments_.size(); ++i) {
            if (a.departments_[i].name != b.departments_[i].name) return false;
            if (a.departments_[i].organs != b.departments_[i].organs) return false;
        }
        return true;
    }
    friend bool operator!=(const Taxonomy& a, const Taxonomy& b) { return !(a == b); }

private:
    void validate() {
        if (departments_.empty()) throw Error("taxonomy has no departments");
        for (std::size_t i = 0; i < departments_.size(); ++i) {
            const auto& d = departments_[i];
            if (trim(d.name).empty()) throw Error("taxonomy department name is empty");
            if (!normalized_departments_.emplace(normalize_text(d.name), i).second)
                throw Error("duplicate department: " + d.name);
            department_index_.emplace(d.name, i);
            if (d.organs.empty())
                throw Error("department has no organs: " + d.name);
            std::map<std::string, bool> seen;
            bool has_others = false;
            for (const auto& o : d.organs) {
                if (trim(o).empty())
                    throw Error("empty organ name under department " + d.name);
                if (!seen.emplace(normalize_text(o), true).second)
                    throw Error("duplicate organ \"" + o + "\" under department " + d.name);
                if (normalize_text(o) == "others") has_others = true;
            }
            if (!has_others)
                throw Error("department lacks an \"others\" entry: " + d.name);
        }
    }

    std::vector<Department> departments_;
    std::map<std::string, std::size_t> department_index_;
    std::map<std::string, std::size_t> normalized_departments_;
};

namespace detail {

// Shipped default: radiology subspecialty divisions, 11 departments and
// 118 organ/region entries. data/taxonomy_default.json carries the same
// document for operators who want to edit it.
inline const char* default_taxonomy_json() {
    return R"TAX({"departments": [
{"name": "neuroradiology", "organs": ["brain", "cerebellum", "brainstem", "ventricles", "meninges", "sella and pituitary", "pineal region", "cerebral vessels", "cranial nerves", "spine", "spinal cord", "skull base", "others"]},
{"name": "head and neck", "organs": ["orbit", "paranasal sinuses", "nasal cavity", "oral cavity", "pharynx", "larynx", "salivary glands", "thyroid", "neck soft tissues", "temporal bone", "jaw", "others"]},
{"name": "thoracic", "organs": ["lung", "trachea and bronchi", "pleura", "mediastinum", "thymus", "diaphragm", "chest wall", "esophagus", "pulmonary vessels", "others"]},
{"name": "cardiovascular", "organs": ["heart", "pericardium", "cardiac valves", "coronary arteries", "aorta", "pulmonary arteries", "peripheral arteries", "veins", "lymphatics", "others"]},
{"name": "abdominal", "organs": ["liver", "gallbladder", "bile ducts", "pancreas", "spleen", "stomach", "duodenum", "small bowel", "appendix", "colon", "rectum", "peritoneum", "mesentery", "others"]},
{"name": "genitourinary", "organs": ["kidney", "ureter", "bladder", "urethra", "adrenal gland", "prostate", "testis and scrotum", "ovary", "uterus", "cervix", "vagina and vulva", "retroperitoneum", "others"]},
{"name": "musculoskeletal", "organs": ["shoulder", "elbow", "wrist and hand", "hip", "knee", "ankle and foot", "pelvis", "long bones", "sacrum and coccyx", "joints", "muscle", "soft tissue", "bone marrow", "others"]},
{"name": "breast", "organs": ["breast parenchyma", "nipple and areola", "axilla", "breast implants", "male breast", "others"]},
{"name": "pediatric", "organs": ["neonatal brain", "pediatric chest", "pediatric abdomen", "pediatric urogenital", "pediatric musculoskeletal", "fetal imaging", "congenital heart", "pediatric neck", "others"]},
{"name": "interventional", "organs": ["vascular access", "embolization target", "biopsy target", "drainage site", "dialysis access", "venous intervention", "biliary intervention", "others"]},
{"name": "nuclear medicine", "organs": ["skeletal scintigraphy", "thyroid scintigraphy", "cardiac perfusion", "ventilation perfusion", "renal scintigraphy", "oncologic pet", "neurologic pet", "lymphoscintigraphy", "others"]}
]})TAX";
}

}  // namespace detail

inline const Taxonomy& default_taxonomy() {
    static const Taxonomy t = Taxonomy::from_json(Json::parse(detail::default_taxonomy_json()));
    return t;
}

}  // namespace dxmem
