#pragma once

#include "dxmem/evaluation.hpp"
#include "dxmem/http_adapters.hpp"
#include "dxmem/mock_agent.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>

namespace dxmem {

// Effective settings for one run. Loaded from a JSON document; endpoint
// tokens are never stored in the file, only the names of the environment
// variables that hold them. Flag overrides are applied on top by the CLI.
struct RunConfig {
    // paths
    std::string corpus_path;
    std::string testset_path;
    std::string store_path = "memory_store.json";
    std::string taxonomy_path;  // empty = shipped default taxonomy
    std::string logs_dir = ".";
    std::string prompts_dir;    // empty = built-in templates

    // agent endpoint or mock
    std::string agent_kind = "mock";  // "mock" | "http"
    std::string agent_url;
    std::string agent_token_env = "DXMEM_AGENT_TOKEN";
    int agent_timeout_ms = 30000;
    int agent_max_attempts = 3;
    std::string agent_model = "remote-agent";
    int agent_max_tokens = 1024;
    std::optional<double> temperature;  // absent = endpoint default
    std::string mock_agent_script;      // path to a MockAgentScript JSON

    // embedding endpoint or mock
    std::string embedding_kind = "mock";  // "mock" | "http"
    std::string embedding_url;
    std::string embedding_token_env = "DXMEM_EMBED_TOKEN";
    int embedding_timeout_ms = 30000;
    int embedding_max_attempts = 3;
    std::size_t embedding_dimension = 64;
    std::uint64_t embedding_seed = 0;

    RetrievalConfig retrieval;
    int rounds = 2;
    int trials = 1;
    CandidatesMode candidates = CandidatesMode::agent;
    GradingMode grading = GradingMode::exact;
    int workers = 1;
    bool frozen_snapshot = false;

    static RunConfig from_json(const Json& j) {
        RunConfig c;
        if (j.contains("paths")) {
            const auto& p = j["paths"];
            c.corpus_path = p.value("corpus", c.corpus_path);
            c.testset_path = p.value("testset", c.testset_path);
            c.store_path = p.value("store", c.store_path);
            c.taxonomy_path = p.value("taxonomy", c.taxonomy_path);
            c.logs_dir = p.value("logs_dir", c.logs_dir);
            c.prompts_dir = p.value("prompts", c.prompts_dir);
        }
        if (j.contains("agent")) {
            const auto& a = j["agent"];
            c.agent_kind = a.value("kind", c.agent_kind);
            c.agent_url = a.value("endpoint", c.agent_url);
            c.agent_token_env = a.value("token_env", c.agent_token_env);
            c.agent_timeout_ms = a.value("timeout_ms", c.agent_timeout_ms);
            c.agent_max_attempts = a.value("max_attempts", c.agent_max_attempts);
            c.agent_model = a.value("model", c.agent_model);
            c.agent_max_tokens = a.value("max_tokens", c.agent_max_tokens);
            if (a.contains("temperature") && !a["temperature"].is_null())
                c.temperature = a["temperature"].get<double>();
            c.mock_agent_script = a.value("script", c.mock_agent_script);
        }
        if (j.contains("embedding")) {
            const auto& e = j["embedding"];
            c.embedding_kind = e.value("kind", c.embedding_kind);
            c.embedding_url = e.value("endpoint", c.embedding_url);
            c.embedding_token_env = e.value("token_env", c.embedding_token_env);
            c.embedding_timeout_ms = e.value("timeout_ms", c.embedding_timeout_ms);
            c.embedding_max_attempts = e.value("max_attempts", c.embedding_max_attempts);
            c.embedding_dimension = e.value("dimension", c.embedding_dimension);
            c.embedding_seed = e.value("seed", c.embedding_seed);
        }
        if (j.contains("retrieval")) {
            const auto& r = j["retrieval"];
            c.retrieval.tau = r.value("tau", c.retrieval.tau);
            c.retrieval.top_k = r.value("top_k", c.retrieval.top_k);
            c.retrieval.max_paths = r.value("max_paths", c.retrieval.max_paths);
            c.retrieval.cross_department =
                r.value("cross_department", c.retrieval.cross_department);
        }
        c.rounds = j.value("rounds", c.rounds);
        c.trials = j.value("trials", c.trials);
        if (j.contains("candidates"))
            c.candidates = candidates_mode_from_string(j["candidates"].get<std::string>());
        if (j.contains("grading")) {
            const auto g = j["grading"].get<std::string>();
            if (g == "exact") c.grading = GradingMode::exact;
            else if (g == "agent-judge") c.grading = GradingMode::agent_judge;
            else throw ConfigError("grading must be \"exact\" or \"agent-judge\": " + g);
        }
        c.workers = j.value("workers", c.workers);
        if (j.contains("snapshot")) {
            const auto s = j["snapshot"].get<std::string>();
            if (s == "streaming") c.frozen_snapshot = false;
            else if (s == "frozen") c.frozen_snapshot = true;
            else throw ConfigError("snapshot must be \"streaming\" or \"frozen\": " + s);
        }
        c.validate();
        return c;
    }

    static RunConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoFailure("cannot open config file: " + path);
        Json j;
        try {
            in >> j;
        } catch (const Json::exception& e) {
            throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
        }
        return from_json(j);
    }

    void validate() const {
        retrieval.validate();
        if (rounds != 1 && rounds != 2) throw ConfigError("rounds must be 1 or 2");
        if (trials < 1) throw ConfigError("trials must be >= 1");
        if (workers < 1) throw ConfigError("workers must be >= 1");
        if (agent_kind != "mock" && agent_kind != "http")
            throw ConfigError("agent.kind must be \"mock\" or \"http\"");
        if (embedding_kind != "mock" && embedding_kind != "http")
            throw ConfigError("embedding.kind must be \"mock\" or \"http\"");
        if (agent_kind == "http" && agent_url.empty())
            throw ConfigError("agent.endpoint is required for an http agent");
        if (embedding_kind == "http" && embedding_url.empty())
            throw ConfigError("embedding.endpoint is required for an http embedder");
        if (embedding_dimension < 2)
            throw ConfigError("embedding.dimension must be >= 2");
    }

    // Echoed into every produced artifact. Secrets stay out by design:
    // only the env var names appear.
    Json effective_json() const {
        Json j{{"paths",
                Json{{"corpus", corpus_path},
                     {"testset", testset_path},
                     {"store", store_path},
                     {"taxonomy", taxonomy_path},
                     {"logs_dir", logs_dir},
                     {"prompts", prompts_dir}}},
               {"agent",
                Json{{"kind", agent_kind},
                     {"endpoint", agent_url},
                     {"token_env", agent_token_env},
                     {"timeout_ms", agent_timeout_ms},
                     {"max_attempts", agent_max_attempts},
                     {"model", agent_model},
                     {"max_tokens", agent_max_tokens},
                     {"script", mock_agent_script}}},
               {"embedding",
                Json{{"kind", embedding_kind},
                     {"endpoint", embedding_url},
                     {"token_env", embedding_token_env},
                     {"timeout_ms", embedding_timeout_ms},
                     {"max_attempts", embedding_max_attempts},
                     {"dimension", embedding_dimension},
                     {"seed", embedding_seed}}},
               {"retrieval",
                Json{{"tau", retrieval.tau},
                     {"top_k", retrieval.top_k},
                     {"max_paths", retrieval.max_paths},
                     {"cross_department", retrieval.cross_department}}},
               {"rounds", rounds},
               {"trials", trials},
               {"candidates", to_string(candidates)},
               {"grading", to_string(grading)},
               {"workers", workers},
               {"snapshot", frozen_snapshot ? "frozen" : "streaming"}};
        if (temperature) j["agent"]["temperature"] = *temperature;
        return j;
    }

    Taxonomy load_taxonomy() const {
        if (taxonomy_path.empty()) return default_taxonomy();
        return Taxonomy::load(taxonomy_path);
    }

    ConstructionOptions construction_options() const {
        ConstructionOptions o;
        o.rounds = rounds;
        o.retrieval = retrieval;
        o.candidates = candidates;
        o.frozen_snapshot = frozen_snapshot;
        o.workers = workers;
        return o;
    }

    EvalOptions eval_options() const {
        EvalOptions o;
        o.retrieval = retrieval;
        o.candidates = candidates;
        o.grading = grading;
        o.trials = trials;
        o.workers = workers;
        return o;
    }

    // Fresh gateway per run so scripted mocks start from a clean attempt
    // sequence and paired runs stay aligned.
    AgentFactory agent_factory(const Taxonomy& taxonomy) const {
        if (agent_kind == "mock") {
            MockAgentScript script;
            if (!mock_agent_script.empty()) script = MockAgentScript::load(mock_agent_script);
            return [script, taxonomy]() -> std::shared_ptr<AgentGateway> {
                return std::make_shared<MockAgent>(script, taxonomy);
            };
        }
        AgentEndpointOptions options;
        options.endpoint.url = agent_url;
        options.endpoint.timeout_ms = agent_timeout_ms;
        options.endpoint.max_attempts = agent_max_attempts;
        if (const char* token = std::getenv(agent_token_env.c_str()))
            options.endpoint.auth_token = token;
        options.model_name = agent_model;
        options.max_tokens = agent_max_tokens;
        options.temperature = temperature;
        PromptLibrary prompts =
            prompts_dir.empty() ? PromptLibrary() : PromptLibrary(prompts_dir);
        auto shared_taxonomy = std::make_shared<const Taxonomy>(taxonomy);
        return [options, prompts, shared_taxonomy]() -> std::shared_ptr<AgentGateway> {
            auto gw = std::make_shared<HttpAgentGateway>(options, prompts);
            gw->set_taxonomy(shared_taxonomy);
            return gw;
        };
    }

    ProviderFactory provider_factory() const {
        if (embedding_kind == "mock") {
            const auto dim = embedding_dimension;
            const auto seed = embedding_seed;
            return [dim, seed]() -> std::shared_ptr<EmbeddingProvider> {
                return std::make_shared<CachingEmbeddingProvider>(
                    std::make_shared<MockEmbeddingProvider>(dim, seed));
            };
        }
        EndpointOptions options;
        options.url = embedding_url;
        options.timeout_ms = embedding_timeout_ms;
        options.max_attempts = embedding_max_attempts;
        if (const char* token = std::getenv(embedding_token_env.c_str()))
            options.auth_token = token;
        const auto dim = embedding_dimension;
        return [options, dim]() -> std::shared_ptr<EmbeddingProvider> {
            return std::make_shared<CachingEmbeddingProvider>(
                std::make_shared<HttpEmbeddingProvider>(options, dim));
        };
    }
};

}  // namespace dxmem
