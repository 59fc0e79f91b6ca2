#pragma once

#include "dxmem/note.hpp"
#include "dxmem/strings.hpp"
#include "dxmem/taxonomy.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace dxmem {

enum class MutationOutcome { inserted, merged };

// Field-wise union of two notes at the same (department, organ, pair)
// triple. List fields keep existing entries first and append unseen
// incoming entries; discriminator prose gains a "Supplement:" section
// only when the incoming text is not already contained verbatim.
inline ExperienceNote merge_notes(const ExperienceNote& existing,
                                  const ExperienceNote& incoming) {
    if (existing.department != incoming.department ||
        existing.organ_region != incoming.organ_region ||
        existing.differentials != incoming.differentials) {
        throw TripleMismatch(existing.department + "/" + existing.organ_region + "/" +
                             existing.differentials.display() + " vs " +
                             incoming.department + "/" + incoming.organ_region + "/" +
                             incoming.differentials.display());
    }

    auto union_strings = [](const std::vector<std::string>& a,
                            const std::vector<std::string>& b) {
        std::vector<std::string> out;
        for (const auto* list : {&a, &b})
            for (const auto& item : *list)
                if (std::find(out.begin(), out.end(), item) == out.end())
                    out.push_back(item);
        return out;
    };

    ExperienceNote merged = existing;
    merged.confusions = union_strings(existing.confusions, incoming.confusions);
    merged.decision_rule = union_strings(existing.decision_rule, incoming.decision_rule);
    merged.error_analysis = union_strings(existing.error_analysis, incoming.error_analysis);

    for (const auto& [label, text] : incoming.discriminators) {
        auto it = merged.discriminators.find(label);
        if (it == merged.discriminators.end()) {
            // Same pair, so at worst the surface spelling differs; match by
            // normalized label before giving up.
            bool matched = false;
            for (auto& [elabel, etext] : merged.discriminators) {
                if (normalize_text(elabel) == normalize_text(label)) {
                    if (etext.find(text) == std::string::npos)
                        etext += "\nSupplement: " + text;
                    matched = true;
                    break;
                }
            }
            if (!matched) merged.discriminators[label] = text;
            continue;
        }
        if (it->second.find(text) == std::string::npos)
            it->second += "\nSupplement: " + text;
    }

    for (const auto& p : incoming.provenance)
        if (std::find(merged.provenance.begin(), merged.provenance.end(), p) ==
            merged.provenance.end())
            merged.provenance.push_back(p);

    return merged;
}

// Hierarchical store of experience notes indexed by
// (department, organ_region, pair key). At most one note per triple;
// every stored note validates against the store's taxonomy. Readers may
// share a store concurrently; mutations must go through one writer.
class MemoryStore {
public:
    MemoryStore() : taxonomy_(default_taxonomy()) {}
    explicit MemoryStore(Taxonomy taxonomy) : taxonomy_(std::move(taxonomy)) {}

    const Taxonomy& taxonomy() const { return taxonomy_; }
    std::uint64_t version() const { return version_; }

    std::size_t note_count() const {
        std::size_t n = 0;
        for (const auto& [dep, organs] : index_)
            for (const auto& [organ, pairs] : organs) n += pairs.size();
        return n;
    }

    bool empty() const { return note_count() == 0; }

    MutationOutcome insert_or_merge(const ExperienceNote& note) {
        auto violations = validate_note(note, taxonomy_);
        if (!violations.empty()) throw InvalidNote(std::move(violations));
        auto& slot = index_[note.department][note.organ_region];
        const auto key = note.differentials.canon();
        auto it = slot.find(key);
        ++version_;
        if (it == slot.end()) {
            slot.emplace(key, note);
            return MutationOutcome::inserted;
        }
        it->second = merge_notes(it->second, note);
        return MutationOutcome::merged;
    }

    const ExperienceNote* find(const std::string& department, const std::string& organ,
                               const PairKey& pair) const {
        auto dit = index_.find(department);
        if (dit == index_.end()) return nullptr;
        auto oit = dit->second.find(organ);
        if (oit == dit->second.end()) return nullptr;
        auto nit = oit->second.find(pair.canon());
        if (nit == oit->second.end()) return nullptr;
        return &nit->second;
    }

    // Union of notes under the given (department, organ) paths, in
    // (department, organ, pair display) order. Duplicate paths count once.
    std::vector<ExperienceNote> notes_under_paths(
        const std::vector<std::pair<std::string, std::string>>& paths) const {
        std::map<std::pair<std::string, std::string>, bool> unique_paths;
        for (const auto& p : paths) {
            if (!taxonomy_.has_path(p.first, p.second)) throw UnknownPath(p.first, p.second);
            unique_paths.emplace(p, true);
        }
        std::vector<ExperienceNote> out;
        for (const auto& [path, _] : unique_paths) {
            auto dit = index_.find(path.first);
            if (dit == index_.end()) continue;
            auto oit = dit->second.find(path.second);
            if (oit == dit->second.end()) continue;
            std::vector<const ExperienceNote*> bucket;
            bucket.reserve(oit->second.size());
            for (const auto& [key, note] : oit->second) bucket.push_back(&note);
            std::sort(bucket.begin(), bucket.end(),
                      [](const ExperienceNote* a, const ExperienceNote* b) {
                          return a->differentials.display() < b->differentials.display();
                      });
            for (const auto* n : bucket) out.push_back(*n);
        }
        return out;
    }

    std::vector<ExperienceNote> all_notes() const {
        std::vector<ExperienceNote> out;
        for (const auto& [dep, organs] : index_)
            for (const auto& [organ, pairs] : organs)
                for (const auto& [key, note] : pairs) out.push_back(note);
        return out;
    }

    Json to_json() const {
        Json notes = Json::array();
        for (const auto& n : all_notes()) notes.push_back(n.to_json());
        Json j{{"taxonomy_checksum", taxonomy_.checksum()},
               {"version", version_},
               {"notes", notes}};
        j["content_checksum"] = to_hex(fnv1a64(j.dump()));
        return j;
    }

    void save(std::ostream& out) const { out << to_json().dump(2) << "\n"; }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw IoFailure("cannot write store file: " + path);
        save(out);
    }

    static MemoryStore load(std::istream& in, const Taxonomy& taxonomy) {
        Json j;
        try {
            in >> j;
        } catch (const Json::exception& e) {
            throw CorruptStore(std::string("not a valid store document: ") + e.what());
        }
        return from_json(j, taxonomy);
    }

    static MemoryStore load(const std::string& path, const Taxonomy& taxonomy) {
        std::ifstream in(path);
        if (!in) throw IoFailure("cannot open store file: " + path);
        return load(in, taxonomy);
    }

    static MemoryStore from_json(const Json& j, const Taxonomy& taxonomy) {
        if (!j.is_object() || !j.contains("taxonomy_checksum") || !j.contains("version") ||
            !j.contains("notes") || !j["notes"].is_array())
            throw CorruptStore("missing taxonomy_checksum, version, or notes");
        if (j["taxonomy_checksum"].get<std::string>() != taxonomy.checksum())
            throw CorruptStore("taxonomy checksum mismatch");
        if (j.contains("content_checksum")) {
            Json core{{"taxonomy_checksum", j["taxonomy_checksum"]},
                      {"version", j["version"]},
                      {"notes", j["notes"]}};
            if (j["content_checksum"].get<std::string>() != to_hex(fnv1a64(core.dump())))
                throw CorruptStore("content checksum mismatch");
        }
        MemoryStore store(taxonomy);
        for (const auto& nj : j["notes"]) {
            ExperienceNote note;
            try {
                note = ExperienceNote::from_json(nj);
            } catch (const Json::exception& e) {
                throw CorruptStore(std::string("bad note record: ") + e.what());
            }
            auto violations = validate_note(note, taxonomy);
            if (!violations.empty()) throw InvalidNote(std::move(violations));
            auto& slot = store.index_[note.department][note.organ_region];
            if (!slot.emplace(note.differentials.canon(), note).second)
                throw CorruptStore("duplicate note for triple " + note.department + "/" +
                                   note.organ_region + "/" + note.differentials.display());
        }
        store.version_ = j["version"].get<std::uint64_t>();
        return store;
    }

    friend bool operator==(const MemoryStore& a, const MemoryStore& b) {
        return a.taxonomy_ == b.taxonomy_ && a.version_ == b.version_ &&
               a.index_ == b.index_;
    }
    friend bool operator!=(const MemoryStore& a, const MemoryStore& b) {
        return !(a == b);
    }

private:
    Taxonomy taxonomy_;
    // department -> organ_region -> pair canon -> note
    std::map<std::string, std::map<std::string, std::map<std::string, ExperienceNote>>>
        index_;
    std::uint64_t version_ = 0;
};

}  // namespace dxmem
