#pragma once

#include "dxmem/errors.hpp"
#include "dxmem/strings.hpp"

#include <string>
#include <string_view>
#include <utility>

namespace dxmem {

// A free-text disease name. Keeps the surface form it was given (trimmed)
// and compares through the normalized form, so "Lymphoma" == " lymphoma ".
class DiagnosisLabel {
public:
    DiagnosisLabel() = default;

    explicit DiagnosisLabel(std::string_view text)
        : text_(trim(text)), normalized_(normalize_text(text)) {
        if (normalized_.empty()) throw Error("diagnosis label is empty");
    }

    const std::string& text() const { return text_; }
    const std::string& normalized() const { return normalized_; }

    friend bool operator==(const DiagnosisLabel& a, const DiagnosisLabel& b) {
        return a.normalized_ == b.normalized_;
    }
    friend bool operator!=(const DiagnosisLabel& a, const DiagnosisLabel& b) {
        return !(a == b);
    }
    friend bool operator<(const DiagnosisLabel& a, const DiagnosisLabel& b) {
        return a.normalized_ < b.normalized_;
    }

private:
    std::string text_;
    std::string normalized_;
};

// Order-insensitive identifier of two confusable diagnoses. The retrieval
// key of every experience note. first/second are sorted by normalized form,
// so (a,b) and (b,a) build the identical key.
class PairKey {
public:
    PairKey() = default;

    const DiagnosisLabel& first() const { return first_; }
    const DiagnosisLabel& second() const { return second_; }

    // "A vs. B" in the labels' surface forms; used as embedding text and
    // in rendered prompts.
    std::string display() const { return first_.text() + " vs. " + second_.text(); }

    // Normalized identity, safe as a map key. The separator is a control
    // character so labels containing punctuation cannot collide.
    std::string canon() const {
        return first_.normalized() + '\x1f' + second_.normalized();
    }

    bool contains(const DiagnosisLabel& label) const {
        return first_ == label || second_ == label;
    }

    friend bool operator==(const PairKey& a, const PairKey& b) {
        return a.first_ == b.first_ && a.second_ == b.second_;
    }
    friend bool operator!=(const PairKey& a, const PairKey& b) { return !(a == b); }
    friend bool operator<(const PairKey& a, const PairKey& b) {
        return a.canon() < b.canon();
    }

private:
    friend PairKey canonical_pair_key(const DiagnosisLabel&, const DiagnosisLabel&);
    PairKey(DiagnosisLabel first, DiagnosisLabel second)
        : first_(std::move(first)), second_(std::move(second)) {}

    DiagnosisLabel first_;
    DiagnosisLabel second_;
};

// Throws EqualLabels on a degenerate pair; callers skip such pairs.
inline PairKey canonical_pair_key(const DiagnosisLabel& a, const DiagnosisLabel& b) {
    if (a == b) throw EqualLabels(a.normalized());
    if (b < a) return PairKey(b, a);
    return PairKey(a, b);
}

inline PairKey canonical_pair_key(std::string_view a, std::string_view b) {
    return canonical_pair_key(DiagnosisLabel(a), DiagnosisLabel(b));
}

}  // namespace dxmem
