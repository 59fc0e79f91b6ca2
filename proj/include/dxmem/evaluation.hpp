#pragma once

#include "dxmem/construction.hpp"
#include "dxmem/gateway.hpp"
#include "dxmem/memory_store.hpp"
#include "dxmem/parallel.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace dxmem {

enum class RunMode { baseline, with_memory };

inline std::string to_string(RunMode m) {
    return m == RunMode::baseline ? "baseline" : "with-memory";
}

enum class GradingMode { exact, agent_judge };

inline std::string to_string(GradingMode g) {
    return g == GradingMode::exact ? "exact" : "agent-judge";
}

struct RunEntry {
    std::string case_id;
    bool retrieved = false;  // >= 1 note retained after the relevance filter
    std::vector<std::string> note_keys;
    std::string diagnosis;
    bool correct = false;
    std::string failure;  // non-empty when the agent failed on this case

    Json to_json(int trial) const {
        Json j{{"type", "entry"},   {"trial", trial},
               {"case_id", case_id}, {"retrieved", retrieved},
               {"note_keys", note_keys}, {"diagnosis", diagnosis},
               {"correct", correct}};
        if (!failure.empty()) j["failure"] = failure;
        return j;
    }

    static RunEntry from_json(const Json& j) {
        RunEntry e;
        e.case_id = j.at("case_id").get<std::string>();
        e.retrieved = j.value("retrieved", false);
        if (j.contains("note_keys"))
            e.note_keys = j["note_keys"].get<std::vector<std::string>>();
        e.diagnosis = j.value("diagnosis", std::string{});
        e.correct = j.value("correct", false);
        e.failure = j.value("failure", std::string{});
        return e;
    }
};

// One trial's trace over the test set.
struct RunLog {
    RunMode mode = RunMode::baseline;
    int trial = 0;
    std::string agent_identity;
    Json config_snapshot = Json::object();
    std::vector<RunEntry> entries;
};

struct EvalOptions {
    RetrievalConfig retrieval;
    CandidatesMode candidates = CandidatesMode::agent;
    GradingMode grading = GradingMode::exact;
    int trials = 1;
    int workers = 1;

    void validate() const {
        retrieval.validate();
        if (trials < 1) throw ConfigError("trials must be >= 1");
        if (workers < 1) throw ConfigError("workers must be >= 1");
    }
};

// Incremental, resume-aware JSONL sink for evaluation runs. Entries land
// on disk as soon as each scheduling chunk completes, so an interrupted
// run leaves a valid line-delimited log and a re-run skips finished
// (trial, case) pairs.
class RunLogWriter {
public:
    RunLogWriter(std::string path, const Json& meta, bool resume = false)
        : path_(std::move(path)) {
        bool have_meta = false;
        if (resume) {
            std::ifstream in(path_);
            if (in) {
                std::string line;
                while (std::getline(in, line)) {
                    if (trim(line).empty()) continue;
                    Json j;
                    try {
                        j = Json::parse(line);
                    } catch (const Json::exception&) {
                        throw CorruptStore("run log has a non-JSON line: " + path_);
                    }
                    const auto type = j.value("type", std::string{});
                    if (type == "meta") {
                        if (j.value("mode", std::string{}) !=
                            meta.value("mode", std::string{}))
                            throw ConfigError("existing run log at " + path_ +
                                              " was written in a different mode");
                        have_meta = true;
                    } else if (type == "entry") {
                        existing_[{j.value("trial", 0),
                                   j.at("case_id").get<std::string>()}] =
                            RunEntry::from_json(j);
                    }
                    // checksum lines are ignored on load
                }
            }
        }
        out_.open(path_, resume ? std::ios::app : std::ios::trunc);
        if (!out_) throw IoFailure("cannot open run log for writing: " + path_);
        if (!have_meta) {
            Json header{{"type", "meta"}, {"kind", "run_log"}};
            for (const auto& [k, v] : meta.items()) header[k] = v;
            write_line(header);
        }
    }

    const RunEntry* find(int trial, const std::string& case_id) const {
        auto it = existing_.find({trial, case_id});
        return it == existing_.end() ? nullptr : &it->second;
    }

    void append(int trial, const RunEntry& entry) {
        write_line(entry.to_json(trial));
        out_.flush();
    }

    void finalize() {
        write_line(Json{{"type", "checksum"}, {"fnv64", to_hex(fnv1a64(content_))}});
        out_.flush();
    }

private:
    void write_line(const Json& j) {
        const auto line = j.dump() + "\n";
        if (j.value("type", std::string{}) != "checksum") content_ += line;
        out_ << line;
    }

    std::string path_;
    std::ofstream out_;
    std::map<std::pair<int, std::string>, RunEntry> existing_;
    std::string content_;
};

namespace detail {

inline bool grade(AgentGateway& agent, GradingMode mode, const DiagnosisLabel& predicted,
                  const DiagnosisLabel& truth) {
    if (mode == GradingMode::agent_judge) return agent.judge_equivalent(predicted, truth);
    return predicted == truth;
}

}  // namespace detail

// One evaluation pass: baseline diagnoses memory-free; with-memory runs
// anatomical scoping, hybrid retrieval, the relevance filter, and
// note-augmented diagnosis. Per-case agent failures are recorded as
// incorrect with a failure marker and never abort the run.
inline std::vector<RunLog> run_eval(const std::vector<CaseRecord>& testset,
                                    AgentGateway& agent, const MemoryStore* store,
                                    EmbeddingProvider* provider, const EvalOptions& options,
                                    RunMode mode, RunLogWriter* writer = nullptr) {
    options.validate();
    if (mode == RunMode::with_memory && (store == nullptr || provider == nullptr))
        throw ConfigError("with-memory evaluation requires a store and a provider");

    auto evaluate_case = [&](const CaseRecord& c) {
        RunEntry entry;
        entry.case_id = c.id;
        std::vector<RetrievedNote> retained;
        if (mode == RunMode::with_memory) {
            retained = scoped_retrieval(agent, c, *store, *provider, options.retrieval,
                                        options.candidates)
                           .retained;
            entry.retrieved = !retained.empty();
            for (const auto& rn : retained) entry.note_keys.push_back(note_key(rn.note));
        }
        try {
            const auto diag = agent.diagnose(c, retained);
            entry.diagnosis = diag.label.text();
            entry.correct = detail::grade(agent, options.grading, diag.label, c.ground_truth);
        } catch (const Error& e) {
            entry.correct = false;
            entry.failure = e.what();
        }
        return entry;
    };

    std::vector<RunLog> logs;
    for (int trial = 0; trial < options.trials; ++trial) {
        RunLog log;
        log.mode = mode;
        log.trial = trial;
        log.agent_identity = agent.identity();
        log.entries.reserve(testset.size());

        const std::size_t chunk =
            std::max<std::size_t>(16, static_cast<std::size_t>(options.workers) * 4);
        for (std::size_t begin = 0; begin < testset.size(); begin += chunk) {
            const std::size_t end = std::min(testset.size(), begin + chunk);
            auto results = parallel_index_map<std::optional<RunEntry>>(
                end - begin, options.workers, [&](std::size_t offset) -> std::optional<RunEntry> {
                    const auto& c = testset[begin + offset];
                    if (writer && writer->find(trial, c.id)) return std::nullopt;
                    return evaluate_case(c);
                });
            for (std::size_t offset = 0; offset < results.size(); ++offset) {
                const auto& c = testset[begin + offset];
                if (const auto* prior = writer ? writer->find(trial, c.id) : nullptr) {
                    log.entries.push_back(*prior);
                    continue;
                }
                log.entries.push_back(std::move(*results[offset]));
                if (writer) writer->append(trial, log.entries.back());
            }
        }
        logs.push_back(std::move(log));
    }
    return logs;
}

// Aggregate outcome of a paired baseline / with-memory evaluation.
// recall here is retrieval coverage (cases with >= 1 retained note) and
// precision is diagnostic accuracy restricted to those cases; beneficial
// and harmful count cases consistently flipped across all trials.
struct MetricsReport {
    std::size_t n_cases = 0;
    std::size_t trials = 0;

    double accuracy_baseline = 0.0;
    double accuracy_exp = 0.0;
    double delta = 0.0;
    double recall = 0.0;
    std::optional<double> precision;  // null iff no case retrieved notes
    double beneficial = 0.0;
    double harmful = 0.0;

    // Counts backing each fraction.
    std::size_t baseline_correct_total = 0;
    std::size_t exp_correct_total = 0;
    std::size_t retrieved_cases = 0;
    std::size_t precision_correct = 0;   // correct exp trials on retrieved cases
    std::size_t precision_total = 0;     // exp trials on retrieved cases
    std::size_t exp_correct_on_nonretrieved = 0;
    std::size_t beneficial_cases = 0;
    std::size_t harmful_cases = 0;

    Json to_json() const {
        Json j{{"n_cases", n_cases},
               {"trials", trials},
               {"accuracy_baseline", accuracy_baseline},
               {"accuracy_exp", accuracy_exp},
               {"delta", delta},
               {"recall", recall},
               {"beneficial", beneficial},
               {"harmful", harmful},
               {"counts",
                Json{{"baseline_correct_total", baseline_correct_total},
                     {"exp_correct_total", exp_correct_total},
                     {"retrieved_cases", retrieved_cases},
                     {"precision_correct", precision_correct},
                     {"precision_total", precision_total},
                     {"exp_correct_on_nonretrieved", exp_correct_on_nonretrieved},
                     {"beneficial_cases", beneficial_cases},
                     {"harmful_cases", harmful_cases}}}};
        if (precision) j["precision"] = *precision;
        else j["precision"] = nullptr;
        return j;
    }
};

// Table-style metric suite over paired runs. Both sides must cover the
// same case ids with equal trial counts.
inline MetricsReport compute_metrics(const std::vector<RunLog>& baseline,
                                     const std::vector<RunLog>& exp) {
    if (baseline.empty() || exp.empty())
        throw TrialCountMismatch(baseline.size(), exp.size());
    if (baseline.size() != exp.size())
        throw TrialCountMismatch(baseline.size(), exp.size());

    auto ids_of = [](const RunLog& log) {
        std::set<std::string> ids;
        for (const auto& e : log.entries) {
            if (!ids.insert(e.case_id).second)
                throw CaseSetMismatch("duplicate case id in one trial: " + e.case_id);
        }
        return ids;
    };
    const auto ids = ids_of(baseline.front());
    for (const auto& log : baseline)
        if (ids_of(log) != ids) throw CaseSetMismatch("baseline trials disagree");
    for (const auto& log : exp)
        if (ids_of(log) != ids) throw CaseSetMismatch("baseline vs experience runs");

    const std::size_t T = baseline.size();
    MetricsReport r;
    r.n_cases = ids.size();
    r.trials = T;
    if (r.n_cases == 0) throw CaseSetMismatch("empty case set");

    struct PerCase {
        std::size_t baseline_correct = 0;
        std::size_t exp_correct = 0;
        bool retrieved_any = false;
    };
    std::map<std::string, PerCase> per_case;
    for (const auto& id : ids) per_case[id] = PerCase{};

    for (const auto& log : baseline)
        for (const auto& e : log.entries)
            if (e.correct) ++per_case[e.case_id].baseline_correct;
    for (const auto& log : exp)
        for (const auto& e : log.entries) {
            auto& pc = per_case[e.case_id];
            if (e.correct) ++pc.exp_correct;
            if (e.retrieved) pc.retrieved_any = true;
        }

    for (const auto& [id, pc] : per_case) {
        r.baseline_correct_total += pc.baseline_correct;
        r.exp_correct_total += pc.exp_correct;
        if (pc.retrieved_any) {
            ++r.retrieved_cases;
            r.precision_correct += pc.exp_correct;
            r.precision_total += T;
        } else {
            r.exp_correct_on_nonretrieved += pc.exp_correct;
        }
        if (pc.baseline_correct == 0 && pc.exp_correct == T) ++r.beneficial_cases;
        if (pc.baseline_correct == T && pc.exp_correct == 0) ++r.harmful_cases;
    }

    const double n = static_cast<double>(r.n_cases);
    const double nt = n * static_cast<double>(T);
    r.accuracy_baseline = static_cast<double>(r.baseline_correct_total) / nt;
    r.accuracy_exp = static_cast<double>(r.exp_correct_total) / nt;
    r.delta = r.accuracy_exp - r.accuracy_baseline;
    r.recall = static_cast<double>(r.retrieved_cases) / n;
    if (r.precision_total > 0)
        r.precision = static_cast<double>(r.precision_correct) /
                      static_cast<double>(r.precision_total);
    r.beneficial = static_cast<double>(r.beneficial_cases) / n;
    r.harmful = static_cast<double>(r.harmful_cases) / n;
    return r;
}

namespace detail {

inline std::string percent(double v) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(1) << (v * 100.0) << "%";
    return out.str();
}

inline std::string signed_percent(double v) {
    std::ostringstream out;
    out << (v >= 0 ? "+" : "") << std::fixed << std::setprecision(1) << (v * 100.0) << "%";
    return out.str();
}

inline std::string render_aligned(const std::vector<std::vector<std::string>>& rows) {
    if (rows.empty()) return "";
    std::vector<std::size_t> widths;
    for (const auto& row : rows) {
        if (widths.size() < row.size()) widths.resize(row.size(), 0);
        for (std::size_t i = 0; i < row.size(); ++i)
            widths[i] = std::max(widths[i], row[i].size());
    }
    std::ostringstream out;
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            out << row[i];
            if (i + 1 < row.size())
                out << std::string(widths[i] - row[i].size() + 2, ' ');
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace detail

inline std::string render_metrics_table(const MetricsReport& r, const std::string& label) {
    using detail::percent;
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"Run", "Baseline", "w/Exp", "Delta", "Recall", "Precision",
                    "Beneficial", "Harmful"});
    rows.push_back({label, percent(r.accuracy_baseline), percent(r.accuracy_exp),
                    detail::signed_percent(r.delta), percent(r.recall),
                    r.precision ? percent(*r.precision) : std::string("n/a"),
                    percent(r.beneficial), percent(r.harmful)});
    return detail::render_aligned(rows);
}

// ---- ablation harness --------------------------------------------------

struct AblationConfig {
    std::string name;
    Json overrides = Json::object();
    std::optional<double> reference_accuracy;  // citation metadata only

    static AblationConfig from_json(const Json& j) {
        AblationConfig c;
        c.name = j.at("name").get<std::string>();
        if (j.contains("overrides")) c.overrides = j["overrides"];
        if (j.contains("reference_accuracy") && !j["reference_accuracy"].is_null())
            c.reference_accuracy = j["reference_accuracy"].get<double>();
        return c;
    }
};

// The shipped grid: two-round default, one-round construction,
// single-department retrieval, and a threshold sweep.
inline std::vector<AblationConfig> default_ablation_grid() {
    std::vector<AblationConfig> grid;
    grid.push_back({"two-round-default", Json::object(), std::nullopt});
    grid.push_back({"one-round", Json{{"rounds", 1}}, std::nullopt});
    grid.push_back(
        {"single-department", Json{{"cross_department", false}, {"max_paths", 1}},
         std::nullopt});
    grid.push_back({"tau-0.80", Json{{"tau", 0.80}}, std::nullopt});
    grid.push_back({"tau-0.90", Json{{"tau", 0.90}}, std::nullopt});
    grid.push_back({"tau-0.95", Json{{"tau", 0.95}}, std::nullopt});
    return grid;
}

struct AblationSettings {
    ConstructionOptions construction;
    EvalOptions eval;
};

// Applies a grid entry's overrides; unknown keys are configuration errors
// so misspelled sweeps fail loudly before any work runs.
inline AblationSettings apply_overrides(const AblationSettings& base, const Json& overrides) {
    AblationSettings s = base;
    for (const auto& [key, value] : overrides.items()) {
        if (key == "rounds") s.construction.rounds = value.get<int>();
        else if (key == "tau") s.eval.retrieval.tau = value.get<double>();
        else if (key == "top_k") s.eval.retrieval.top_k = value.get<int>();
        else if (key == "max_paths") s.eval.retrieval.max_paths = value.get<int>();
        else if (key == "cross_department") s.eval.retrieval.cross_department = value.get<bool>();
        else if (key == "trials") s.eval.trials = value.get<int>();
        else if (key == "candidates")
            s.eval.candidates = candidates_mode_from_string(value.get<std::string>());
        else if (key == "snapshot")
            s.construction.frozen_snapshot = value.get<std::string>() == "frozen";
        else throw ConfigError("unknown ablation grid key: " + key);
    }
    s.construction.validate();
    s.eval.validate();
    return s;
}

struct AblationRow {
    std::string name;
    MetricsReport report;
    std::optional<double> reference_accuracy;
    Json overrides;
};

using AgentFactory = std::function<std::shared_ptr<AgentGateway>()>;
using ProviderFactory = std::function<std::shared_ptr<EmbeddingProvider>()>;

// One MetricsReport per grid entry. Construction is re-run only when a
// grid entry changes something construction-time (rounds, snapshot);
// inference-time sweeps reuse the default-built memory. Gateways are
// created fresh per run so scripted mocks stay aligned across rows.
inline std::vector<AblationRow> run_ablation(const std::vector<CaseRecord>& testset,
                                             const std::vector<CaseRecord>& corpus,
                                             const AgentFactory& make_agent,
                                             const ProviderFactory& make_provider,
                                             const std::vector<AblationConfig>& grid,
                                             const AblationSettings& base,
                                             const Taxonomy& taxonomy = default_taxonomy()) {
    if (grid.empty()) throw ConfigError("ablation grid is empty");

    std::map<std::string, MemoryStore> store_cache;
    auto built_store = [&](const ConstructionOptions& c) -> const MemoryStore& {
        const std::string key =
            std::to_string(c.rounds) + "/" + (c.frozen_snapshot ? "frozen" : "streaming");
        auto it = store_cache.find(key);
        if (it != store_cache.end()) return it->second;
        auto agent = make_agent();
        auto provider = make_provider();
        auto result = build_memory(corpus, *agent, *provider, c, taxonomy);
        return store_cache.emplace(key, std::move(result.store)).first->second;
    };

    std::map<int, std::vector<RunLog>> baseline_cache;
    auto baseline_logs = [&](const EvalOptions& e) -> const std::vector<RunLog>& {
        auto it = baseline_cache.find(e.trials);
        if (it != baseline_cache.end()) return it->second;
        auto agent = make_agent();
        auto logs = run_eval(testset, *agent, nullptr, nullptr, e, RunMode::baseline);
        return baseline_cache.emplace(e.trials, std::move(logs)).first->second;
    };

    std::vector<AblationRow> rows;
    for (const auto& cfg : grid) {
        const auto settings = apply_overrides(base, cfg.overrides);
        const auto& store = built_store(settings.construction);
        const auto& baseline = baseline_logs(settings.eval);
        auto agent = make_agent();
        auto provider = make_provider();
        auto exp = run_eval(testset, *agent, &store, provider.get(), settings.eval,
                            RunMode::with_memory);
        AblationRow row;
        row.name = cfg.name;
        row.report = compute_metrics(baseline, exp);
        row.reference_accuracy = cfg.reference_accuracy;
        row.overrides = cfg.overrides;
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Json ablation_to_json(const std::vector<AblationRow>& rows) {
    Json out = Json::array();
    for (const auto& row : rows) {
        Json j{{"name", row.name},
               {"overrides", row.overrides},
               {"metrics", row.report.to_json()}};
        if (row.reference_accuracy) j["reference_accuracy"] = *row.reference_accuracy;
        out.push_back(std::move(j));
    }
    return out;
}

inline std::string render_ablation_table(const std::vector<AblationRow>& rows) {
    using detail::percent;
    std::vector<std::vector<std::string>> table;
    table.push_back({"Configuration", "Baseline", "Accuracy", "Delta", "Recall",
                     "Precision", "Beneficial", "Harmful", "Reference"});
    for (const auto& row : rows) {
        const auto& r = row.report;
        table.push_back({row.name, percent(r.accuracy_baseline), percent(r.accuracy_exp),
                         detail::signed_percent(r.delta), percent(r.recall),
                         r.precision ? percent(*r.precision) : std::string("n/a"),
                         percent(r.beneficial), percent(r.harmful),
                         row.reference_accuracy ? percent(*row.reference_accuracy)
                                                : std::string("-")});
    }
    return detail::render_aligned(table);
}

// Reads a run-log JSONL file back into per-trial RunLogs (for resumed
// runs and standalone metric computation).
inline std::vector<RunLog> load_run_logs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open run log: " + path);
    std::map<int, RunLog> by_trial;
    RunMode mode = RunMode::baseline;
    std::string agent_identity;
    Json config_snapshot = Json::object();
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::exception& e) {
            throw CorruptStore(std::string("run log line is not JSON: ") + e.what());
        }
        const auto type = j.value("type", std::string{});
        if (type == "meta") {
            mode = j.value("mode", std::string{}) == "with-memory" ? RunMode::with_memory
                                                                   : RunMode::baseline;
            agent_identity = j.value("agent", std::string{});
            if (j.contains("config")) config_snapshot = j["config"];
        } else if (type == "entry") {
            const int trial = j.value("trial", 0);
            auto& log = by_trial[trial];
            log.trial = trial;
            log.entries.push_back(RunEntry::from_json(j));
        }
    }
    std::vector<RunLog> logs;
    for (auto& [trial, log] : by_trial) {
        log.mode = mode;
        log.agent_identity = agent_identity;
        log.config_snapshot = config_snapshot;
        logs.push_back(std::move(log));
    }
    return logs;
}

}  // namespace dxmem
