// dxmem CLI: build experience memory from a case corpus, evaluate it
// against a test set, sweep ablation grids, inspect stored notes, and
// split corpora by publication year.

#include "dxmem/config.hpp"
#include "dxmem/dxmem.hpp"
#include "dxmem/version.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using dxmem::Json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitPartial = 2;  // run completed but some cases failed

struct CommonFlags {
    std::string config_path;
    std::optional<double> tau;
    std::optional<int> top_k;
    std::optional<int> rounds;
    std::optional<int> trials;
    std::optional<std::string> candidates;
    std::optional<std::string> mock_agent;
    bool mock_embedder = false;
    std::optional<int> workers;
    std::optional<std::string> corpus;
    std::optional<std::string> testset;
    std::optional<std::string> store;
    std::optional<std::string> taxonomy;
    std::optional<std::string> logs_dir;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "Run configuration JSON file");
    cmd->add_option("--tau", flags.tau, "Similarity threshold override");
    cmd->add_option("--top-k", flags.top_k, "Top-K truncation override");
    cmd->add_option("--rounds", flags.rounds, "Construction rounds override (1 or 2)");
    cmd->add_option("--trials", flags.trials, "Evaluation trials override");
    cmd->add_option("--candidates", flags.candidates,
                    "Candidate source override: agent or dataset");
    cmd->add_option("--mock-agent", flags.mock_agent,
                    "Path to a mock agent script (switches the agent to mock)");
    cmd->add_flag("--mock-embedder", flags.mock_embedder,
                  "Use the deterministic mock embedder");
    cmd->add_option("--workers", flags.workers, "Concurrent worker limit");
    cmd->add_option("--corpus", flags.corpus, "Construction corpus path override");
    cmd->add_option("--testset", flags.testset, "Test corpus path override");
    cmd->add_option("--store", flags.store, "Memory store path override");
    cmd->add_option("--taxonomy", flags.taxonomy, "Taxonomy file override");
    cmd->add_option("--logs-dir", flags.logs_dir, "Directory for logs and reports");
}

dxmem::RunConfig resolve_config(const CommonFlags& flags) {
    dxmem::RunConfig cfg;
    if (!flags.config_path.empty()) cfg = dxmem::RunConfig::load(flags.config_path);
    if (flags.tau) cfg.retrieval.tau = *flags.tau;
    if (flags.top_k) cfg.retrieval.top_k = *flags.top_k;
    if (flags.rounds) cfg.rounds = *flags.rounds;
    if (flags.trials) cfg.trials = *flags.trials;
    if (flags.candidates)
        cfg.candidates = dxmem::candidates_mode_from_string(*flags.candidates);
    if (flags.mock_agent) {
        cfg.agent_kind = "mock";
        cfg.mock_agent_script = *flags.mock_agent;
    }
    if (flags.mock_embedder) cfg.embedding_kind = "mock";
    if (flags.workers) cfg.workers = *flags.workers;
    if (flags.corpus) cfg.corpus_path = *flags.corpus;
    if (flags.testset) cfg.testset_path = *flags.testset;
    if (flags.store) cfg.store_path = *flags.store;
    if (flags.taxonomy) cfg.taxonomy_path = *flags.taxonomy;
    if (flags.logs_dir) cfg.logs_dir = *flags.logs_dir;
    cfg.validate();
    return cfg;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw dxmem::IoFailure("cannot write " + path);
    out << content;
}

void write_report_json(const std::string& path, Json body, const dxmem::RunConfig& cfg) {
    body["config"] = cfg.effective_json();
    body["checksum"] = dxmem::to_hex(dxmem::fnv1a64(body.dump()));
    write_text_file(path, body.dump(2) + "\n");
}

std::string logs_path(const dxmem::RunConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.logs_dir);
    return (fs::path(cfg.logs_dir) / name).string();
}

int cmd_build(const CommonFlags& flags) {
    const auto cfg = resolve_config(flags);
    if (cfg.corpus_path.empty() || !fs::exists(cfg.corpus_path)) {
        std::cerr << "error: corpus not found: " << cfg.corpus_path << "\n";
        return kExitFatal;
    }
    const auto taxonomy = cfg.load_taxonomy();
    const auto corpus = dxmem::load_case_corpus(cfg.corpus_path);
    auto agent = cfg.agent_factory(taxonomy)();
    auto provider = cfg.provider_factory()();

    auto result = dxmem::build_memory(corpus, *agent, *provider,
                                      cfg.construction_options(), taxonomy);

    Json store_doc = result.store.to_json();
    store_doc["config"] = cfg.effective_json();
    write_text_file(cfg.store_path, store_doc.dump(2) + "\n");
    result.log.save(logs_path(cfg, "construction_log.jsonl"),
                    Json{{"agent", agent->identity()}, {"config", cfg.effective_json()}});

    const auto counts = result.log.action_counts();
    std::cout << "built memory store: " << result.store.note_count() << " notes ("
              << corpus.size() << " cases, " << cfg.rounds << " round"
              << (cfg.rounds == 2 ? "s" : "") << ")\n";
    for (const auto& [action, count] : counts)
        std::cout << "  " << action << ": " << count << "\n";
    std::cout << "store written to " << cfg.store_path << "\n";

    const auto failed = counts.count("extraction-failed") ? counts.at("extraction-failed") : 0;
    return failed > 0 ? kExitPartial : kExitOk;
}

int cmd_eval(const CommonFlags& flags, bool baseline_only, bool resume) {
    const auto cfg = resolve_config(flags);
    if (cfg.testset_path.empty() || !fs::exists(cfg.testset_path)) {
        std::cerr << "error: testset not found: " << cfg.testset_path << "\n";
        return kExitFatal;
    }
    const auto taxonomy = cfg.load_taxonomy();
    const auto testset = dxmem::load_case_corpus(cfg.testset_path);
    const auto make_agent = cfg.agent_factory(taxonomy);
    const auto options = cfg.eval_options();

    auto run_one = [&](dxmem::RunMode mode, const dxmem::MemoryStore* store,
                       dxmem::EmbeddingProvider* provider, const std::string& log_name) {
        auto agent = make_agent();
        Json meta{{"mode", to_string(mode)},
                  {"trials", options.trials},
                  {"agent", agent->identity()},
                  {"grading", to_string(options.grading)},
                  {"config", cfg.effective_json()}};
        dxmem::RunLogWriter writer(logs_path(cfg, log_name), meta, resume);
        auto logs = dxmem::run_eval(testset, *agent, store, provider, options, mode, &writer);
        writer.finalize();
        return logs;
    };

    auto baseline = run_one(dxmem::RunMode::baseline, nullptr, nullptr,
                            "baseline_runlog.jsonl");
    bool any_failure = false;
    for (const auto& log : baseline)
        for (const auto& e : log.entries)
            if (!e.failure.empty()) any_failure = true;

    if (baseline_only) {
        std::cout << "baseline run complete over " << testset.size() << " cases, "
                  << options.trials << " trial(s)\n";
        return any_failure ? kExitPartial : kExitOk;
    }

    if (cfg.store_path.empty() || !fs::exists(cfg.store_path)) {
        std::cerr << "error: memory store not found: " << cfg.store_path << "\n";
        return kExitFatal;
    }
    const auto store = dxmem::MemoryStore::load(cfg.store_path, taxonomy);
    auto provider = cfg.provider_factory()();
    auto exp = run_one(dxmem::RunMode::with_memory, &store, provider.get(),
                       "with_memory_runlog.jsonl");
    for (const auto& log : exp)
        for (const auto& e : log.entries)
            if (!e.failure.empty()) any_failure = true;

    const auto report = dxmem::compute_metrics(baseline, exp);
    write_report_json(logs_path(cfg, "metrics.json"),
                      Json{{"kind", "metrics_report"}, {"metrics", report.to_json()}}, cfg);
    const auto table = dxmem::render_metrics_table(report, exp.front().agent_identity);
    write_text_file(logs_path(cfg, "metrics.txt"), table);
    std::cout << table;
    return any_failure ? kExitPartial : kExitOk;
}

int cmd_ablate(const CommonFlags& flags, const std::string& grid_path) {
    const auto cfg = resolve_config(flags);
    if (cfg.corpus_path.empty() || !fs::exists(cfg.corpus_path)) {
        std::cerr << "error: corpus not found: " << cfg.corpus_path << "\n";
        return kExitFatal;
    }
    if (cfg.testset_path.empty() || !fs::exists(cfg.testset_path)) {
        std::cerr << "error: testset not found: " << cfg.testset_path << "\n";
        return kExitFatal;
    }
    std::vector<dxmem::AblationConfig> grid;
    if (grid_path.empty()) {
        grid = dxmem::default_ablation_grid();
    } else {
        std::ifstream in(grid_path);
        if (!in) {
            std::cerr << "error: grid file not found: " << grid_path << "\n";
            return kExitFatal;
        }
        Json j;
        try {
            in >> j;
        } catch (const Json::exception& e) {
            std::cerr << "error: grid file is not valid JSON: " << e.what() << "\n";
            return kExitFatal;
        }
        const Json& entries = j.is_object() && j.contains("grid") ? j["grid"] : j;
        if (!entries.is_array()) {
            std::cerr << "error: grid must be a JSON array (or {\"grid\": [...]})\n";
            return kExitFatal;
        }
        for (const auto& ej : entries) grid.push_back(dxmem::AblationConfig::from_json(ej));
    }
    if (grid.empty()) {
        std::cerr << "error: ablation grid is empty\n";
        return kExitFatal;
    }

    const auto taxonomy = cfg.load_taxonomy();
    const auto corpus = dxmem::load_case_corpus(cfg.corpus_path);
    const auto testset = dxmem::load_case_corpus(cfg.testset_path);
    dxmem::AblationSettings base{cfg.construction_options(), cfg.eval_options()};

    const auto rows = dxmem::run_ablation(testset, corpus, cfg.agent_factory(taxonomy),
                                          cfg.provider_factory(), grid, base, taxonomy);

    write_report_json(logs_path(cfg, "ablation.json"),
                      Json{{"kind", "ablation_table"}, {"rows", dxmem::ablation_to_json(rows)}},
                      cfg);
    const auto table = dxmem::render_ablation_table(rows);
    write_text_file(logs_path(cfg, "ablation.txt"), table);
    std::cout << table;
    return kExitOk;
}

int cmd_inspect(const CommonFlags& flags, const std::string& department,
                const std::string& organ, const std::string& label) {
    const auto cfg = resolve_config(flags);
    if (cfg.store_path.empty() || !fs::exists(cfg.store_path)) {
        std::cerr << "error: memory store not found: " << cfg.store_path << "\n";
        return kExitFatal;
    }
    const auto taxonomy = cfg.load_taxonomy();
    const auto store = dxmem::MemoryStore::load(cfg.store_path, taxonomy);

    const auto label_norm = dxmem::normalize_text(label);
    std::size_t shown = 0;
    for (const auto& note : store.all_notes()) {
        if (!department.empty() &&
            dxmem::normalize_text(note.department) != dxmem::normalize_text(department))
            continue;
        if (!organ.empty() &&
            dxmem::normalize_text(note.organ_region) != dxmem::normalize_text(organ))
            continue;
        if (!label_norm.empty() &&
            dxmem::normalize_text(note.differentials.display()).find(label_norm) ==
                std::string::npos)
            continue;
        ++shown;
        std::cout << "[" << note.department << " / " << note.organ_region << "] "
                  << note.differentials.display() << "\n";
        std::cout << "  confused because:\n";
        for (const auto& c : note.confusions) std::cout << "    - " << c << "\n";
        std::cout << "  discriminators:\n";
        for (const auto& [l, text] : note.discriminators)
            std::cout << "    - " << l << ": " << text << "\n";
        std::cout << "  decision rules:\n";
        for (const auto& r : note.decision_rule) std::cout << "    - " << r << "\n";
        if (!note.error_analysis.empty()) {
            std::cout << "  error analysis:\n";
            for (const auto& e : note.error_analysis) std::cout << "    - " << e << "\n";
        }
        std::cout << "  provenance:";
        for (const auto& p : note.provenance)
            std::cout << " " << p.case_id << "(" << to_string(p.phase) << ")";
        std::cout << "\n\n";
    }
    std::cout << shown << " note" << (shown == 1 ? "" : "s") << "\n";
    return kExitOk;
}

int cmd_split(const CommonFlags& flags, int year, const std::string& out_construction,
              const std::string& out_test) {
    const auto cfg = resolve_config(flags);
    if (cfg.corpus_path.empty() || !fs::exists(cfg.corpus_path)) {
        std::cerr << "error: corpus not found: " << cfg.corpus_path << "\n";
        return kExitFatal;
    }
    const auto corpus = dxmem::load_case_corpus(cfg.corpus_path);
    for (const auto& c : corpus)
        if (!c.published_year) {
            std::cerr << "error: case \"" << c.id << "\" has no published_year\n";
            return kExitFatal;
        }

    std::vector<dxmem::CaseRecord> construction, test;
    for (const auto& c : corpus)
        (*c.published_year < year ? construction : test).push_back(c);

    const auto stem = fs::path(cfg.corpus_path).stem().string();
    const auto dir = fs::path(cfg.corpus_path).parent_path();
    const auto cons_path = out_construction.empty()
                               ? (dir / (stem + "_construction.jsonl")).string()
                               : out_construction;
    const auto test_path =
        out_test.empty() ? (dir / (stem + "_test.jsonl")).string() : out_test;
    dxmem::save_case_corpus(construction, cons_path);
    dxmem::save_case_corpus(test, test_path);

    if (construction.empty())
        std::cerr << "warning: no cases published before " << year << "\n";
    if (test.empty())
        std::cerr << "warning: no cases published in or after " << year << "\n";
    std::cout << "construction: " << construction.size() << " cases -> " << cons_path
              << "\n";
    std::cout << "test: " << test.size() << " cases -> " << test_path << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dxmem: pairwise differential-diagnosis experience memory engine"};
    app.set_version_flag("--version", dxmem::kVersion);
    app.require_subcommand(1);

    CommonFlags build_flags;
    auto* build = app.add_subcommand(
        "build", "Run two-phase memory construction over a corpus");
    add_common_flags(build, build_flags);

    CommonFlags eval_flags;
    bool baseline_only = false;
    bool resume = false;
    auto* eval = app.add_subcommand(
        "eval", "Paired baseline and with-memory evaluation plus metrics");
    add_common_flags(eval, eval_flags);
    eval->add_flag("--baseline-only", baseline_only, "Run only the memory-free baseline");
    eval->add_flag("--resume", resume, "Resume interrupted runs by case id");

    CommonFlags ablate_flags;
    std::string grid_path;
    auto* ablate = app.add_subcommand("ablate", "Run an ablation grid and tabulate metrics");
    add_common_flags(ablate, ablate_flags);
    ablate->add_option("--grid", grid_path, "Grid JSON file (defaults to the built-in grid)");

    CommonFlags inspect_flags;
    std::string f_department, f_organ, f_label;
    auto* inspect = app.add_subcommand("inspect", "Print stored notes in readable form");
    add_common_flags(inspect, inspect_flags);
    inspect->add_option("--department", f_department, "Filter by department");
    inspect->add_option("--organ", f_organ, "Filter by organ/region");
    inspect->add_option("--label", f_label, "Filter by diagnosis label substring");

    CommonFlags split_flags;
    int year = 0;
    std::string out_construction, out_test;
    auto* split = app.add_subcommand(
        "split", "Split a corpus by published year (construction < year <= test)");
    add_common_flags(split, split_flags);
    split->add_option("--year", year, "Boundary year")->required();
    split->add_option("--out-construction", out_construction, "Construction output path");
    split->add_option("--out-test", out_test, "Test output path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed()) return cmd_build(build_flags);
        if (eval->parsed()) return cmd_eval(eval_flags, baseline_only, resume);
        if (ablate->parsed()) return cmd_ablate(ablate_flags, grid_path);
        if (inspect->parsed())
            return cmd_inspect(inspect_flags, f_department, f_organ, f_label);
        if (split->parsed()) return cmd_split(split_flags, year, out_construction, out_test);
    } catch (const dxmem::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFatal;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFatal;
    }
    return kExitFatal;
}
