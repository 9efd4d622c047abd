#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "malsig/corpus.hpp"
#include "malsig/error.hpp"
#include "malsig/hashing.hpp"

using namespace malsig;
namespace fs = std::filesystem;

namespace {

// root/<family>/<n>.bin, 3 families x 2 files of distinct random content.
void make_family_corpus(const fs::path& root) {
  int seed = 0;
  for (const char* fam : {"Allaple.A", "Yuner.A", "VB.AT"})
    for (int i = 0; i < 2; ++i) testkit::write_bytes(root / fam / (std::to_string(i) + ".bin"), testkit::random_bytes(3000 + 500 * seed, seed++));
}

}  // namespace

TEST(Ingest, FamilyDirs) {
  testkit::TempDir dir("ingest");
  make_family_corpus(dir.path());
  const auto m = ingest(dir.path(), CorpusLayout::FamilyDirs);
  ASSERT_EQ(m.entries.size(), 6u);
  EXPECT_TRUE(m.warnings.empty());
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const auto& e = m.entries[i];
    EXPECT_EQ(e.label, e.path.begin()->string());
    const auto bytes = read_file(dir.path() / e.path);
    EXPECT_EQ(e.sha256, to_hex(sha256(bytes)));
    EXPECT_EQ(e.byte_length, bytes.size());
    if (i) EXPECT_LT(m.entries[i - 1].path, e.path);
  }
  EXPECT_EQ(m.to_json()["entries"].size(), 6u);
}

TEST(Ingest, FlatWithLabelsAndUnknownHash) {
  testkit::TempDir dir("flat");
  const auto a = testkit::random_bytes(100, 1), b = testkit::random_bytes(100, 2);
  testkit::write_bytes(dir.path() / "a.exe", a);
  testkit::write_bytes(dir.path() / "b.exe", b);
  const auto cache = LabelCache::parse_tsv(to_hex(sha256(a)) + "\tTrojan.Foo\n", "test", 1);
  const OfflineLabelSource labels(cache);
  const auto m = ingest(dir.path(), CorpusLayout::Flat, &labels);
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.entries[0].label, "Trojan.Foo");
  EXPECT_EQ(m.entries[1].label, "");
  EXPECT_EQ(m.warnings.size(), 1u);
}

TEST(Ingest, EmptyRootAndEmptyFiles) {
  testkit::TempDir dir("empty");
  auto m = ingest(dir.path(), CorpusLayout::FamilyDirs);
  EXPECT_TRUE(m.entries.empty());
  EXPECT_FALSE(m.warnings.empty());
  testkit::write_bytes(dir.path() / "fam" / "zero.bin", {});
  testkit::write_bytes(dir.path() / "fam" / "one.bin", {1});
  m = ingest(dir.path(), CorpusLayout::FamilyDirs);
  EXPECT_EQ(m.entries.size(), 1u);
  EXPECT_FALSE(m.warnings.empty());
  EXPECT_THROW(ingest(dir.path() / "nope", CorpusLayout::Flat), Error);
}

TEST(LabelCache, ParseErrorsAndLookup) {
  const std::string h(64, 'A');
  const auto c = LabelCache::parse_tsv(h + "\tW32.Virut\n\n", "t", 5);
  ASSERT_NE(c.find(std::string(64, 'a')), nullptr);
  EXPECT_EQ(c.find(std::string(64, 'a'))->label, "W32.Virut");
  EXPECT_EQ(c.find(std::string(64, 'b')), nullptr);
  for (const std::string& bad : std::vector<std::string>{"nolabel\n", "abc\tlabel\n", h + "label\n"}) {
    try {
      LabelCache::parse_tsv(bad, "t", 0);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::MalformedLabelsFile);
    }
  }
}

TEST(Fingerprint, StoreFromCorpusIsDeterministic) {
  testkit::TempDir dir("fp");
  make_family_corpus(dir.path() / "corpus");
  const auto m = ingest(dir.path() / "corpus", CorpusLayout::FamilyDirs);
  const FeatureExtractor fx(FeatureConfig{});
  const auto s1 = fingerprint_corpus(m, fx, dir.path() / "a.store");
  EXPECT_EQ(s1.records, 6u);
  EXPECT_TRUE(s1.errors.empty());
  const auto store = store_load(dir.path() / "a.store");
  EXPECT_EQ(store.records.size(), 6u);
  EXPECT_EQ(store.metadata.dimension, 320u);
  for (const auto& r : store.records) EXPECT_EQ(r.descriptor.size(), 320u);

  const auto m2 = ingest(dir.path() / "corpus", CorpusLayout::FamilyDirs);
  fingerprint_corpus(m2, fx, dir.path() / "b.store");
  EXPECT_EQ(read_file(dir.path() / "a.store"), read_file(dir.path() / "b.store"));
}

TEST(Fingerprint, UnreadableFileReported) {
  testkit::TempDir dir("fp-err");
  make_family_corpus(dir.path() / "corpus");
  const auto m = ingest(dir.path() / "corpus", CorpusLayout::FamilyDirs);
  fs::remove(dir.path() / "corpus" / m.entries[2].path);
  std::size_t calls = 0;
  FingerprintOptions o;
  o.export_png_dir = dir.path() / "png";
  o.progress = [&](std::size_t, std::size_t total) {
    ++calls;
    EXPECT_EQ(total, 6u);
  };
  const auto s = fingerprint_corpus(m, FeatureExtractor(FeatureConfig{}), dir.path() / "x.store", o);
  EXPECT_EQ(s.records, 5u);
  EXPECT_EQ(s.errors.size(), 1u);
  EXPECT_GT(calls, 0u);
  EXPECT_EQ(store_load(dir.path() / "x.store").records.size(), 5u);
  std::size_t pngs = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path() / "png")) ++pngs;
  EXPECT_EQ(pngs, 5u);
}

TEST(Utf8, TruncationKeepsSequencesWhole) {
  EXPECT_EQ(truncate_utf8("abc", 10), "abc");
  EXPECT_EQ(truncate_utf8("ab\xC3\xA9", 3), "ab");
  EXPECT_EQ(truncate_utf8("ab\xE2\x82\xAC", 4), "ab");
  EXPECT_EQ(truncate_utf8("ab\xE2\x82\xAC", 5), "ab\xE2\x82\xAC");
}
