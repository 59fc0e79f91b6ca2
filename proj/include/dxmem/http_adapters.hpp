#pragma once

#include "dxmem/embedding.hpp"
#include "dxmem/gateway.hpp"
#include "dxmem/prompts.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace dxmem {

struct EndpointOptions {
    std::string url;              // e.g. http://host:port/v1/embed
    std::string auth_token;       // sent as "Authorization: Bearer <token>" when set
    int timeout_ms = 30000;
    int max_attempts = 3;         // exponential backoff between attempts
    int backoff_ms = 200;
};

namespace detail {

inline std::pair<std::string, std::string> split_endpoint(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos)
        throw ConfigError("endpoint URL must start with http:// or https://: " + url);
    const auto path_start = url.find('/', scheme + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

// POSTs a JSON body with retries; throws the given wrapper on exhaustion.
template <typename Unavailable>
Json post_json(const EndpointOptions& options, const Json& body) {
    const auto [base, path] = split_endpoint(options.url);
    std::string last_error = "no attempts made";
    for (int attempt = 0; attempt < std::max(1, options.max_attempts); ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(
                std::chrono::milliseconds(options.backoff_ms * (1 << (attempt - 1))));
        httplib::Client client(base);
        client.set_connection_timeout(options.timeout_ms / 1000,
                                      (options.timeout_ms % 1000) * 1000);
        client.set_read_timeout(options.timeout_ms / 1000, (options.timeout_ms % 1000) * 1000);
        httplib::Headers headers;
        if (!options.auth_token.empty())
            headers.emplace("Authorization", "Bearer " + options.auth_token);
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        try {
            return Json::parse(res->body);
        } catch (const Json::exception& e) {
            last_error = std::string("response is not valid JSON: ") + e.what();
            continue;
        }
    }
    throw Unavailable(options.url + " (" + last_error + ")");
}

}  // namespace detail

// Remote embedding endpoint: request {"texts": [...]}, response
// {"vectors": [[...], ...]}.
class HttpEmbeddingProvider final : public EmbeddingProvider {
public:
    HttpEmbeddingProvider(EndpointOptions options, std::size_t dimension)
        : options_(std::move(options)), dimension_(dimension) {
        if (dimension_ < 1) throw ConfigError("embedding dimension must be positive");
    }

    std::size_t dimension() const override { return dimension_; }

    std::vector<float> embed(const std::string& text) override {
        return embed_batch({text}).front();
    }

    std::vector<std::vector<float>> embed_batch(
        const std::vector<std::string>& texts) override {
        if (texts.empty()) return {};
        const Json response =
            detail::post_json<RetrievalUnavailable>(options_, Json{{"texts", texts}});
        if (!response.contains("vectors") || !response["vectors"].is_array() ||
            response["vectors"].size() != texts.size())
            throw RetrievalUnavailable(options_.url + " (malformed vectors payload)");
        std::vector<std::vector<float>> out;
        out.reserve(texts.size());
        for (const auto& vj : response["vectors"]) {
            auto v = vj.get<std::vector<float>>();
            if (v.size() != dimension_)
                throw RetrievalUnavailable(options_.url + " (vector dimension " +
                                           std::to_string(v.size()) + ", expected " +
                                           std::to_string(dimension_) + ")");
            out.push_back(std::move(v));
        }
        return out;
    }

private:
    EndpointOptions options_;
    std::size_t dimension_;
};

struct AgentEndpointOptions {
    EndpointOptions endpoint;
    std::string model_name = "remote-agent";
    int max_tokens = 1024;
    std::optional<double> temperature;  // absent = endpoint default
};

// Chat-style remote agent. Request:
//   {"messages": [{"role": ..., "content_parts": [{"type": "text"|"image_ref",
//    "value": ...}]}], "max_tokens": ..., "temperature"?: ...}
// Response: {"text": ...}.
class HttpAgentGateway final : public AgentGateway {
public:
    HttpAgentGateway(AgentEndpointOptions options, PromptLibrary prompts = PromptLibrary())
        : options_(std::move(options)), prompts_(std::move(prompts)) {}

    std::string identity() const override { return options_.model_name; }

    Diagnosis diagnose(const CaseRecord& c,
                       const std::vector<RetrievedNote>& notes) override {
        std::string notes_block;
        if (!notes.empty())
            notes_block = "Relevant experience from past differential errors:\n\n" +
                          render_notes_block(notes);
        const auto prompt = prompts_.render(
            "diagnose",
            {{"clinical_history", c.clinical_history}, {"notes_block", notes_block}});
        const auto text = chat(prompt, c.image_refs);
        const auto label = extract_final_diagnosis(text);
        if (!label) throw MalformedResponse("no FINAL DIAGNOSIS line in agent response");
        std::string lowered = text;
        for (auto& ch : lowered)
            ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        Diagnosis d;
        d.label = DiagnosisLabel(*label);
        d.rationale = trim(text.substr(0, lowered.rfind("final diagnosis:")));
        d.raw_response = text;
        return d;
    }

    std::vector<DiagnosisLabel> propose_candidates(const CaseRecord& c) override {
        const auto prompt = prompts_.render("propose_candidates",
                                            {{"clinical_history", c.clinical_history}});
        const auto text = chat(prompt, c.image_refs);
        std::vector<DiagnosisLabel> out;
        if (auto parsed = extract_fenced_json(text); parsed && parsed->is_array()) {
            for (const auto& item : *parsed)
                if (item.is_string() && !trim(item.get<std::string>()).empty())
                    out.emplace_back(item.get<std::string>());
        } else {
            for (const auto& line : split_lines(text)) {
                const auto t = trim(line);
                if (t.size() > 2 && (t[0] == '-' || t[0] == '*'))
                    out.emplace_back(t.substr(1));
            }
        }
        if (out.empty()) throw MalformedResponse("no candidate list in agent response");
        return out;
    }

    std::vector<AnatomicalPath> select_paths(const CaseRecord& c, const Taxonomy& taxonomy,
                                             const RetrievalConfig& config) override {
        const auto prompt =
            prompts_.render("select_paths", {{"clinical_history", c.clinical_history},
                                             {"taxonomy", render_taxonomy_listing(taxonomy)}});
        const auto text = chat(prompt, c.image_refs);
        std::vector<AnatomicalPath> raw;
        if (auto parsed = extract_fenced_json(text); parsed && parsed->is_array()) {
            for (const auto& item : *parsed) {
                if (!item.is_object()) continue;
                raw.emplace_back(item.value("department", std::string{}),
                                 item.value("organ", item.value("organ_region",
                                                                std::string("others"))));
            }
        }
        return repair_paths(raw, taxonomy, config);
    }

    ExperienceNote extract_note(const CaseRecord& c, const DiagnosisLabel& wrong,
                                const DiagnosisLabel& truth,
                                const std::string& discussion) override {
        const auto pair = canonical_pair_key(wrong, truth);  // throws EqualLabels
        std::string prompt = prompts_.render(
            "extract_note", {{"wrong", wrong.text()},
                             {"truth", truth.text()},
                             {"discussion", discussion},
                             {"clinical_history", c.clinical_history},
                             {"taxonomy", render_taxonomy_listing(taxonomy_for_notes_
                                                                      ? *taxonomy_for_notes_
                                                                      : default_taxonomy())}});
        const Taxonomy& taxonomy =
            taxonomy_for_notes_ ? *taxonomy_for_notes_ : default_taxonomy();
        std::string failure = "agent returned no parsable note";
        // Up to 2 re-prompts after the first attempt, echoing the violations.
        for (int attempt = 0; attempt < 3; ++attempt) {
            const auto text = chat(prompt, c.image_refs);
            auto parsed = extract_fenced_json(text);
            if (!parsed || !parsed->is_object()) {
                failure = "response carried no fenced JSON note";
                prompt += "\n\nYour previous answer was not a fenced JSON object. "
                          "Answer again with exactly one fenced JSON object.";
                continue;
            }
            ExperienceNote note;
            try {
                Json nj = *parsed;
                nj["differentials"] = Json{{"first", wrong.text()}, {"second", truth.text()}};
                nj["provenance"] =
                    Json::array({Json{{"case_id", c.id}, {"phase", "phase1"}}});
                note = ExperienceNote::from_json(nj);
            } catch (const std::exception& e) {
                failure = std::string("note JSON did not match the schema: ") + e.what();
                prompt += "\n\nYour previous answer did not match the requested JSON "
                          "schema. Answer again with exactly one fenced JSON object.";
                continue;
            }
            if (auto dep = taxonomy.resolve_department(note.department)) {
                auto organ = taxonomy.resolve_organ(*dep, note.organ_region);
                note.department = *dep;
                note.organ_region = organ ? *organ : "others";
            }
            auto violations = validate_note(note, taxonomy);
            if (violations.empty()) return note;
            failure = "note violated: ";
            for (const auto& v : violations) failure += v + "; ";
            prompt += "\n\nYour previous note was rejected:";
            for (const auto& v : violations) prompt += "\n- " + v;
            prompt += "\nAnswer again with exactly one corrected fenced JSON object.";
        }
        throw ExtractionFailed(failure);
    }

    Relevance score_relevance(const CaseRecord& c, const ExperienceNote& note) override {
        try {
            std::string confusions;
            for (const auto& conf : note.confusions) confusions += "- " + conf + "\n";
            const auto prompt = prompts_.render(
                "score_relevance", {{"clinical_history", c.clinical_history},
                                    {"pair", note.differentials.display()},
                                    {"department", note.department},
                                    {"organ", note.organ_region},
                                    {"confusions", confusions}});
            const auto lowered = normalize_text(chat(prompt, c.image_refs));
            if (lowered.find("irrelevant") != std::string::npos)
                return Relevance::irrelevant;
            if (lowered.find("relevant") != std::string::npos)
                return Relevance::relevant;
            return Relevance::unknown;
        } catch (...) {
            return Relevance::unknown;
        }
    }

    bool judge_equivalent(const DiagnosisLabel& predicted,
                          const DiagnosisLabel& truth) override {
        if (predicted == truth) return true;
        try {
            const auto prompt = prompts_.render(
                "judge", {{"a", predicted.text()}, {"b", truth.text()}});
            const auto text = chat(prompt, {});
            return normalize_text(text).find("yes") != std::string::npos;
        } catch (...) {
            return false;
        }
    }

    // Taxonomy used to repair extraction placements; defaults to the shipped one.
    void set_taxonomy(std::shared_ptr<const Taxonomy> taxonomy) {
        taxonomy_for_notes_ = std::move(taxonomy);
    }

private:
    std::string chat(const std::string& prompt, const std::vector<std::string>& image_refs) {
        Json parts = Json::array({Json{{"type", "text"}, {"value", prompt}}});
        for (const auto& ref : image_refs)
            parts.push_back(Json{{"type", "image_ref"}, {"value", ref}});
        Json body{{"messages", Json::array({Json{{"role", "user"},
                                                 {"content_parts", parts}}})},
                  {"max_tokens", options_.max_tokens}};
        if (options_.temperature) body["temperature"] = *options_.temperature;
        const Json response = detail::post_json<AgentUnavailable>(options_.endpoint, body);
        if (!response.contains("text") || !response["text"].is_string())
            throw MalformedResponse("agent response lacks a text field");
        return response["text"].get<std::string>();
    }

    AgentEndpointOptions options_;
    PromptLibrary prompts_;
    std::shared_ptr<const Taxonomy> taxonomy_for_notes_;
};

}  // namespace dxmem
