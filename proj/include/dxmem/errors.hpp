#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dxmem {

// Base class for every typed failure the engine raises. Catch this to
// handle anything dxmem-specific; catch the concrete type to branch.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Two labels collapse to the same normalized form; degenerate pair.
class EqualLabels : public Error {
public:
    explicit EqualLabels(const std::string& label)
        : Error("labels are equal under normalization: \"" + label + "\"") {}
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& reason)
        : Error("parse error at line " + std::to_string(line) + ": " + reason),
          line_(line), reason_(reason) {}
    std::size_t line() const { return line_; }
    const std::string& reason() const { return reason_; }

private:
    std::size_t line_;
    std::string reason_;
};

class DuplicateId : public Error {
public:
    explicit DuplicateId(const std::string& id)
        : Error("duplicate case id: \"" + id + "\""), id_(id) {}
    const std::string& id() const { return id_; }

private:
    std::string id_;
};

class InvalidNote : public Error {
public:
    explicit InvalidNote(std::vector<std::string> violations)
        : Error(join(violations)), violations_(std::move(violations)) {}
    const std::vector<std::string>& violations() const { return violations_; }

private:
    static std::string join(const std::vector<std::string>& vs) {
        std::string out = "invalid note:";
        for (const auto& v : vs) out += " [" + v + "]";
        return out;
    }
    std::vector<std::string> violations_;
};

class TripleMismatch : public Error {
public:
    explicit TripleMismatch(const std::string& detail)
        : Error("notes do not share a (department, organ, pair) triple: " + detail) {}
};

class UnknownPath : public Error {
public:
    UnknownPath(const std::string& department, const std::string& organ)
        : Error("unknown taxonomy path: " + department + "/" + organ),
          department_(department), organ_(organ) {}
    const std::string& department() const { return department_; }
    const std::string& organ() const { return organ_; }

private:
    std::string department_;
    std::string organ_;
};

class DimensionMismatch : public Error {
public:
    DimensionMismatch(std::size_t a, std::size_t b)
        : Error("vector dimension mismatch: " + std::to_string(a) + " vs " +
                std::to_string(b)) {}
};

class ZeroVector : public Error {
public:
    ZeroVector() : Error("cosine similarity undefined for a zero vector") {}
};

// Embedding provider failed; callers degrade to memory-free diagnosis.
class RetrievalUnavailable : public Error {
public:
    explicit RetrievalUnavailable(const std::string& detail)
        : Error("retrieval unavailable: " + detail) {}
};

class AgentUnavailable : public Error {
public:
    explicit AgentUnavailable(const std::string& detail)
        : Error("agent unavailable: " + detail) {}
};

// Agent answered but no machine-readable result could be extracted.
class MalformedResponse : public Error {
public:
    explicit MalformedResponse(const std::string& detail)
        : Error("malformed agent response: " + detail) {}
};

class ExtractionFailed : public Error {
public:
    explicit ExtractionFailed(const std::string& detail)
        : Error("note extraction failed: " + detail) {}
};

class IoFailure : public Error {
public:
    explicit IoFailure(const std::string& detail) : Error("I/O failure: " + detail) {}
};

class CorruptStore : public Error {
public:
    explicit CorruptStore(const std::string& reason)
        : Error("corrupt store: " + reason), reason_(reason) {}
    const std::string& reason() const { return reason_; }

private:
    std::string reason_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& detail)
        : Error("configuration error: " + detail) {}
};

class CaseSetMismatch : public Error {
public:
    explicit CaseSetMismatch(const std::string& detail)
        : Error("baseline and experience logs cover different cases: " + detail) {}
};

class TrialCountMismatch : public Error {
public:
    TrialCountMismatch(std::size_t baseline, std::size_t exp)
        : Error("trial count mismatch: baseline=" + std::to_string(baseline) +
                " exp=" + std::to_string(exp)) {}
};

}  // namespace dxmem
