#include "dxmem/memory_store.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace dxmem;
using dxmem::testkit::make_note;

TEST(MergeNotes, IdempotentOnIdenticalNotes) {
    const auto n = make_note("neuroradiology", "brain", "Lymphoma", "Metastasis");
    EXPECT_EQ(merge_notes(n, n), n);
}

TEST(MergeNotes, DisjointConfusionsUnionInOrder) {
    auto a = make_note("neuroradiology", "brain", "A", "B");
    a.confusions = {"overlap one", "overlap two"};
    auto b = a;
    b.confusions = {"overlap three"};
    // Oracle: ordered set union of sizes 2 and 1, existing entries first.
    const auto merged = merge_notes(a, b);
    ASSERT_EQ(merged.confusions.size(), 3u);
    EXPECT_EQ(merged.confusions[0], "overlap one");
    EXPECT_EQ(merged.confusions[1], "overlap two");
    EXPECT_EQ(merged.confusions[2], "overlap three");
}

TEST(MergeNotes, DiscriminatorSupplementOnlyWhenNew) {
    auto a = make_note("neuroradiology", "brain", "A", "B");
    auto b = a;
    b.discriminators["A"] = "A calcifies peripherally.";
    const auto merged = merge_notes(a, b);
    EXPECT_NE(merged.discriminators.at("A").find("Supplement: A calcifies peripherally."),
              std::string::npos);
    // Re-merging the same supplement must not duplicate it.
    const auto merged_again = merge_notes(merged, b);
    EXPECT_EQ(merged_again.discriminators.at("A"), merged.discriminators.at("A"));
}

TEST(MergeNotes, TripleMismatchRejected) {
    const auto a = make_note("neuroradiology", "brain", "A", "B");
    const auto b = make_note("neuroradiology", "brain", "A", "C");
    EXPECT_THROW(merge_notes(a, b), TripleMismatch);
    const auto c = make_note("neuroradiology", "meninges", "A", "B");
    EXPECT_THROW(merge_notes(a, c), TripleMismatch);
}

TEST(MemoryStore, InsertIntoEmpty) {
    MemoryStore store;
    EXPECT_EQ(store.insert_or_merge(make_note("neuroradiology", "brain", "A", "B")),
              MutationOutcome::inserted);
    EXPECT_EQ(store.note_count(), 1u);
    EXPECT_EQ(store.version(), 1u);
}

TEST(MemoryStore, InsertTwiceMergesIdempotently) {
    MemoryStore store;
    const auto n = make_note("neuroradiology", "brain", "A", "B");
    store.insert_or_merge(n);
    EXPECT_EQ(store.insert_or_merge(n), MutationOutcome::merged);
    EXPECT_EQ(store.note_count(), 1u);
    EXPECT_EQ(*store.find("neuroradiology", "brain", n.differentials), n);
    EXPECT_EQ(store.version(), 2u);
}

TEST(MemoryStore, MergeAddsNewErrorAnalysis) {
    MemoryStore store;
    auto n1 = make_note("neuroradiology", "brain", "A", "B", "c1");
    store.insert_or_merge(n1);
    auto n2 = make_note("neuroradiology", "brain", "A", "B", "c2");
    store.insert_or_merge(n2);
    const auto* merged = store.find("neuroradiology", "brain", n1.differentials);
    ASSERT_NE(merged, nullptr);
    // Oracle: set union of the two single-entry lists.
    ASSERT_EQ(merged->error_analysis.size(), 2u);
    EXPECT_EQ(merged->error_analysis[0], n1.error_analysis[0]);
    EXPECT_EQ(merged->error_analysis[1], n2.error_analysis[0]);
    ASSERT_EQ(merged->provenance.size(), 2u);
}

TEST(MemoryStore, RejectsInvalidNotes) {
    MemoryStore store;
    auto bad = make_note("neuroradiology", "brain", "A", "B");
    bad.confusions.clear();
    EXPECT_THROW(store.insert_or_merge(bad), InvalidNote);
    EXPECT_EQ(store.note_count(), 0u);
    EXPECT_EQ(store.version(), 0u);
}

TEST(MemoryStore, SamePairUnderDifferentPathsStaysSeparate) {
    MemoryStore store;
    store.insert_or_merge(make_note("neuroradiology", "brain", "Lymphoma", "Metastasis"));
    store.insert_or_merge(make_note("abdominal", "liver", "Lymphoma", "Metastasis"));
    EXPECT_EQ(store.note_count(), 2u);
}

TEST(NotesUnderPaths, CanonicalOrderAndDeduplication) {
    MemoryStore store;
    store.insert_or_merge(make_note("neuroradiology", "brain", "C", "D"));
    store.insert_or_merge(make_note("neuroradiology", "brain", "A", "B"));
    store.insert_or_merge(make_note("neuroradiology", "brain", "B", "E"));
    const auto notes = store.notes_under_paths(
        {{"neuroradiology", "brain"}, {"neuroradiology", "brain"}});
    ASSERT_EQ(notes.size(), 3u);
    EXPECT_EQ(notes[0].differentials.display(), "A vs. B");
    EXPECT_EQ(notes[1].differentials.display(), "B vs. E");
    EXPECT_EQ(notes[2].differentials.display(), "C vs. D");
}

TEST(NotesUnderPaths, UnionAcrossDisjointPaths) {
    MemoryStore store;
    store.insert_or_merge(make_note("neuroradiology", "brain", "A", "B"));
    store.insert_or_merge(make_note("neuroradiology", "brain", "C", "D"));
    store.insert_or_merge(make_note("abdominal", "liver", "E", "F"));
    const auto notes =
        store.notes_under_paths({{"neuroradiology", "brain"}, {"abdominal", "liver"}});
    EXPECT_EQ(notes.size(), 3u);
}

TEST(NotesUnderPaths, UnknownPathRejected) {
    MemoryStore store;
    EXPECT_THROW(store.notes_under_paths({{"cardiology", "heart"}}), UnknownPath);
    EXPECT_THROW(store.notes_under_paths({{"neuroradiology", "liver"}}), UnknownPath);
}

TEST(NotesUnderPaths, DeterministicAcrossCalls) {
    std::mt19937_64 rng(5);
    const auto store = dxmem::testkit::random_store(rng, 40);
    std::vector<AnatomicalPath> paths{{"neuroradiology", "brain"}, {"abdominal", "liver"}};
    const auto a = store.notes_under_paths(paths);
    const auto b = store.notes_under_paths(paths);
    EXPECT_EQ(a, b);
}

TEST(StorePersistence, RoundTripFiveNotes) {
    MemoryStore store;
    store.insert_or_merge(make_note("neuroradiology", "brain", "A", "B"));
    store.insert_or_merge(make_note("neuroradiology", "meninges", "C", "D"));
    store.insert_or_merge(make_note("abdominal", "liver", "E", "F"));
    store.insert_or_merge(make_note("thoracic", "lung", "G", "H"));
    store.insert_or_merge(make_note("breast", "axilla", "I", "J"));

    std::stringstream buf;
    store.save(buf);
    const auto loaded = MemoryStore::load(buf, store.taxonomy());
    EXPECT_EQ(loaded, store);
    EXPECT_EQ(loaded.version(), store.version());
}

TEST(StorePersistence, RoundTripRandomStores) {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 30; ++i) {
        const auto store = dxmem::testkit::random_store(rng, 30);
        std::stringstream buf;
        store.save(buf);
        EXPECT_EQ(MemoryStore::load(buf, store.taxonomy()), store);
    }
}

TEST(StorePersistence, UnknownOrganFailsValidation) {
    MemoryStore store;
    store.insert_or_merge(make_note("neuroradiology", "brain", "A", "B"));
    auto j = store.to_json();
    j["notes"][0]["organ_region"] = "liver";
    // checksum covers the note payload, so recompute it the way save does
    Json core{{"taxonomy_checksum", j["taxonomy_checksum"]},
              {"version", j["version"]},
              {"notes", j["notes"]}};
    j["content_checksum"] = to_hex(fnv1a64(core.dump()));
    std::stringstream buf;
    buf << j.dump();
    EXPECT_THROW(MemoryStore::load(buf, store.taxonomy()), InvalidNote);
}

TEST(StorePersistence, TruncatedFileIsCorrupt) {
    MemoryStore store;
    store.insert_or_merge(make_note("neuroradiology", "brain", "A", "B"));
    std::stringstream full;
    store.save(full);
    const auto text = full.str();
    std::stringstream truncated(text.substr(0, text.size() / 2));
    EXPECT_THROW(MemoryStore::load(truncated, store.taxonomy()), CorruptStore);
}

TEST(StorePersistence, TamperedContentIsCorrupt) {
    MemoryStore store;
    store.insert_or_merge(make_note("neuroradiology", "brain", "A", "B"));
    auto j = store.to_json();
    j["version"] = 42;  // checksum no longer matches
    std::stringstream buf;
    buf << j.dump();
    EXPECT_THROW(MemoryStore::load(buf, store.taxonomy()), CorruptStore);
}

TEST(StorePersistence, TaxonomyChecksumMismatch) {
    MemoryStore store;  // default taxonomy
    std::stringstream buf;
    store.save(buf);
    const auto other = Taxonomy::from_json(Json{
        {"departments",
         Json::array({Json{{"name", "solo"}, {"organs", Json::array({"others"})}}})}});
    EXPECT_THROW(MemoryStore::load(buf, other), CorruptStore);
}

TEST(MemoryStore, MergeOrderInsensitiveAtSetLevel) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 40; ++trial) {
        auto n1 = make_note("neuroradiology", "brain", "A", "B", "c1");
        auto n2 = make_note("neuroradiology", "brain", "A", "B", "c2");
        for (int k = 0; k < static_cast<int>(rng() % 3); ++k)
            n1.confusions.push_back("shared confusion " + std::to_string(rng() % 4));
        for (int k = 0; k < static_cast<int>(rng() % 3); ++k)
            n2.confusions.push_back("shared confusion " + std::to_string(rng() % 4));

        MemoryStore s12, s21;
        s12.insert_or_merge(n1);
        s12.insert_or_merge(n2);
        s21.insert_or_merge(n2);
        s21.insert_or_merge(n1);

        auto sorted_lists = [](const MemoryStore& s, const PairKey& key) {
            const auto* n = s.find("neuroradiology", "brain", key);
            EXPECT_NE(n, nullptr);
            auto conf = n->confusions;
            auto err = n->error_analysis;
            std::sort(conf.begin(), conf.end());
            std::sort(err.begin(), err.end());
            return std::make_pair(conf, err);
        };
        EXPECT_EQ(sorted_lists(s12, n1.differentials), sorted_lists(s21, n1.differentials));
    }
}

TEST(MemoryStore, VersionStrictlyIncreases) {
    MemoryStore store;
    const auto n = make_note("neuroradiology", "brain", "A", "B");
    std::uint64_t last = store.version();
    for (int i = 0; i < 5; ++i) {
        store.insert_or_merge(n);
        EXPECT_GT(store.version(), last);
        last = store.version();
    }
}
