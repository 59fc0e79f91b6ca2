#include "dxmem/case_record.hpp"
#include "dxmem/labels.hpp"
#include "dxmem/note.hpp"
#include "dxmem/prompts.hpp"
#include "dxmem/taxonomy.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

using namespace dxmem;

TEST(NormalizeText, CollapsesCaseAndWhitespace) {
    EXPECT_EQ(normalize_text("  Lymphoma  "), "lymphoma");
    EXPECT_EQ(normalize_text("Meckel\tGruber   Syndrome"), "meckel gruber syndrome");
    EXPECT_EQ(normalize_text(""), "");
}

TEST(NormalizeText, Idempotent) {
    std::mt19937_64 rng(7);
    const std::string alphabet = "aAbB cC\tdD  eE-";
    for (int i = 0; i < 200; ++i) {
        std::string s;
        const auto len = rng() % 24;
        for (std::size_t k = 0; k < len; ++k) s += alphabet[rng() % alphabet.size()];
        const auto once = normalize_text(s);
        EXPECT_EQ(normalize_text(once), once) << "input: \"" << s << "\"";
    }
}

TEST(DiagnosisLabel, EqualityIsNormalized) {
    EXPECT_EQ(DiagnosisLabel("  lymphoma "), DiagnosisLabel("LYMPHOMA"));
    EXPECT_NE(DiagnosisLabel("Lymphoma"), DiagnosisLabel("Metastasis"));
    EXPECT_THROW(DiagnosisLabel("   "), Error);
}

TEST(PairKey, CanonicalDisplay) {
    const auto key = canonical_pair_key("Lymphoma", "Metastasis");
    EXPECT_EQ(key.display(), "Lymphoma vs. Metastasis");
}

TEST(PairKey, OrderInsensitive) {
    const auto a = canonical_pair_key("Metastasis", "Lymphoma");
    const auto b = canonical_pair_key("Lymphoma", "Metastasis");
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.display(), b.display());
    EXPECT_EQ(a.canon(), b.canon());
}

TEST(PairKey, EqualLabelsRejected) {
    EXPECT_THROW(canonical_pair_key("  lymphoma ", "LYMPHOMA"), EqualLabels);
}

TEST(PairKey, PunctuationInLabelsCannotCollide) {
    const auto a = canonical_pair_key("x||y", "z");
    const auto b = canonical_pair_key("x", "y||z");
    EXPECT_NE(a.canon(), b.canon());
    EXPECT_NE(a, b);
}

TEST(PairKey, SymmetryProperty) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 300; ++i) {
        const auto a = "Disease " + std::to_string(rng() % 60);
        const auto b = "Disease " + std::to_string(rng() % 60);
        if (normalize_text(a) == normalize_text(b)) {
            EXPECT_THROW(canonical_pair_key(a, b), EqualLabels);
            continue;
        }
        EXPECT_EQ(canonical_pair_key(a, b), canonical_pair_key(b, a));
    }
}

TEST(Taxonomy, ShippedDefaultShape) {
    const auto& t = default_taxonomy();
    EXPECT_EQ(t.department_count(), 11u);
    EXPECT_EQ(t.organ_count(), 118u);
    for (const auto& d : t.departments()) {
        EXPECT_TRUE(t.has_path(d.name, "others")) << d.name;
        EXPECT_GE(d.organs.size(), 1u);
    }
}

TEST(Taxonomy, ShippedFileMatchesBuiltin) {
    const auto path = std::string(DXMEM_SOURCE_DIR) + "/data/taxonomy_default.json";
    const auto loaded = Taxonomy::load(path);
    EXPECT_EQ(loaded, default_taxonomy());
    EXPECT_EQ(loaded.checksum(), default_taxonomy().checksum());
}

TEST(PromptFiles, ShippedTemplatesMatchBuiltins) {
    const PromptLibrary built_in;
    const PromptLibrary shipped(std::string(DXMEM_SOURCE_DIR) + "/data/prompts");
    for (const auto& name : PromptLibrary::template_names())
        EXPECT_EQ(shipped.raw(name), built_in.raw(name)) << name;
    EXPECT_THROW(PromptLibrary("/nonexistent/prompt/dir"), IoFailure);
}

TEST(Taxonomy, RejectsMalformedDocuments) {
    EXPECT_THROW(Taxonomy::from_json(Json{{"departments", Json::array()}}), Error);
    // duplicate department
    Json dup{{"departments",
              Json::array({Json{{"name", "a"}, {"organs", Json::array({"others"})}},
                           Json{{"name", "A"}, {"organs", Json::array({"others"})}}})}};
    EXPECT_THROW(Taxonomy::from_json(dup), Error);
    // missing others
    Json no_others{{"departments",
                    Json::array({Json{{"name", "a"}, {"organs", Json::array({"brain"})}}})}};
    EXPECT_THROW(Taxonomy::from_json(no_others), Error);
    // duplicate organ within department
    Json dup_organ{
        {"departments",
         Json::array({Json{{"name", "a"},
                           {"organs", Json::array({"brain", "Brain", "others"})}}})}};
    EXPECT_THROW(Taxonomy::from_json(dup_organ), Error);
}

TEST(Taxonomy, ResolvesNamesInsensitively) {
    const auto& t = default_taxonomy();
    EXPECT_EQ(t.resolve_department("  NeuroRadiology "), "neuroradiology");
    EXPECT_EQ(t.resolve_organ("neuroradiology", "BRAIN"), "brain");
    EXPECT_FALSE(t.resolve_department("cardiology"));
    EXPECT_FALSE(t.resolve_organ("neuroradiology", "liver"));
}

TEST(ValidateNote, WellFormedIsOk) {
    const auto note = testkit::make_note("neuroradiology", "brain", "Lymphoma", "Metastasis");
    EXPECT_TRUE(validate_note(note, default_taxonomy()).empty());
}

TEST(ValidateNote, UnknownDepartment) {
    auto note = testkit::make_note("neuroradiology", "brain", "A", "B");
    note.department = "Cardiology";
    const auto violations = validate_note(note, default_taxonomy());
    ASSERT_FALSE(violations.empty());
    EXPECT_NE(violations.front().find("unknown department"), std::string::npos);
}

TEST(ValidateNote, DiscriminatorsMustCoverBothLabels) {
    auto note = testkit::make_note("neuroradiology", "brain", "A", "B");
    note.discriminators.erase("B");
    note.discriminators["C"] = "unrelated";
    const auto violations = validate_note(note, default_taxonomy());
    bool found = false;
    for (const auto& v : violations)
        if (v.find("discriminators must cover both labels") != std::string::npos) found = true;
    EXPECT_TRUE(found);
}

TEST(ValidateNote, DecisionRuleGrammarAndCoverage) {
    auto note = testkit::make_note("neuroradiology", "brain", "A", "B");
    note.decision_rule = {"always prefer A"};
    auto violations = validate_note(note, default_taxonomy());
    EXPECT_FALSE(violations.empty());

    note.decision_rule = {"If calcification present -> favor A"};
    violations = validate_note(note, default_taxonomy());
    bool coverage = false;
    for (const auto& v : violations)
        if (v.find("must target both labels") != std::string::npos) coverage = true;
    EXPECT_TRUE(coverage);

    // Unicode arrow and an extra "consider others" rule are both fine.
    note.decision_rule = {"If calcification present → favor A",
                          "If rapid growth → exclude A", "If ring enhancement → favor B",
                          "If neither pattern fits → consider others"};
    EXPECT_TRUE(validate_note(note, default_taxonomy()).empty());
}

TEST(ValidateNote, EmptyCollections) {
    auto note = testkit::make_note("neuroradiology", "brain", "A", "B");
    note.confusions.clear();
    note.provenance.clear();
    const auto violations = validate_note(note, default_taxonomy());
    EXPECT_GE(violations.size(), 2u);
}

TEST(ParseCorpus, WellFormedLinesInOrder) {
    std::string text;
    for (int i = 1; i <= 3; ++i)
        text += Json{{"id", "c" + std::to_string(i)},
                     {"clinical_history", "h"},
                     {"ground_truth", "Dx " + std::to_string(i)}}
                    .dump() +
                "\n";
    const auto cases = parse_case_corpus(text);
    ASSERT_EQ(cases.size(), 3u);
    EXPECT_EQ(cases[0].id, "c1");
    EXPECT_EQ(cases[2].ground_truth.text(), "Dx 3");
}

TEST(ParseCorpus, MissingGroundTruthIsParseError) {
    const std::string text = Json{{"id", "c1"}, {"ground_truth", "Dx"}}.dump() + "\n" +
                             Json{{"id", "c2"}, {"clinical_history", "h"}}.dump() + "\n";
    try {
        parse_case_corpus(text);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(ParseCorpus, DuplicateIdRejected) {
    const std::string text = Json{{"id", "c1"}, {"ground_truth", "A"}}.dump() + "\n" +
                             Json{{"id", "c1"}, {"ground_truth", "B"}}.dump() + "\n";
    try {
        parse_case_corpus(text);
        FAIL() << "expected DuplicateId";
    } catch (const DuplicateId& e) {
        EXPECT_EQ(e.id(), "c1");
    }
}

TEST(ParseCorpus, UnknownFieldsIgnored) {
    const std::string text =
        Json{{"id", "c1"}, {"ground_truth", "A"}, {"source_url", "https://x"}}.dump() + "\n";
    const auto cases = parse_case_corpus(text);
    ASSERT_EQ(cases.size(), 1u);
}

TEST(ParseCorpus, RoundTripIdentityProperty) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        const auto corpus = dxmem::testkit::random_corpus(rng, 1 + rng() % 20);
        const auto back = parse_case_corpus(serialize_case_corpus(corpus));
        EXPECT_EQ(back, corpus);
    }
}
