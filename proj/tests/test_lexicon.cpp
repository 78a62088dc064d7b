#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "chattymaps/ingest.hpp"
#include "chattymaps/lexicon.hpp"

using namespace chattymaps;

TEST_CASE("normalize examples") {
  CHECK(lexicon::normalize("Car") == "car");
  CHECK(lexicon::normalize("  street-noise  ") == "street noise");
  CHECK(lexicon::normalize("bird--song") == "bird song");
  CHECK(lexicon::normalize("\"hello!\"") == "hello");
  CHECK(lexicon::normalize("don't") == "don't");  // interior punctuation stays
  CHECK(lexicon::normalize("caf\xc3\xa9") == "caf\xc3\xa9");
  CHECK(lexicon::normalize("...") == std::nullopt);
  CHECK(lexicon::normalize("   ") == std::nullopt);
  CHECK(lexicon::normalize("") == std::nullopt);
  CHECK(lexicon::normalize("A \xe2\x80\x93 B") == "a b");  // en dash
}

TEST_CASE("normalize is idempotent") {
  std::mt19937_64 rng(23);
  const std::string pool = "aB -_.!caf\xc3\xa9 XY\"z";
  for (int i = 0; i < 300; ++i) {
    std::string s;
    std::size_t len = rng() % 12;
    for (std::size_t k = 0; k < len; ++k) s += pool[rng() % pool.size()];
    auto once = lexicon::normalize(s);
    if (!once) continue;
    auto twice = lexicon::normalize(*once);
    REQUIRE(twice.has_value());
    CHECK(*twice == *once);
  }
}

TEST_CASE("lexicon lookup and duplicate rejection") {
  std::vector<LexiconEntry> entries = {{"car", {"transport"}}, {"alarm", {"fear", "surprise"}}};
  lexicon::LexiconFile lex("test", entries);
  REQUIRE(lex.labels_of("alarm") != nullptr);
  CHECK(lex.labels_of("alarm")->size() == 2);
  CHECK(lex.labels_of("missing") == nullptr);
  CHECK(lex.contains("car"));

  entries.push_back({"car", {"transport"}});
  CHECK_THROWS_AS(lexicon::LexiconFile("dup", entries), InternalError);
}

TEST_CASE("taxonomy category lookup") {
  std::vector<TaxonomyEntry> entries = {{"car", {"transport", "road"}},
                                        {"birds", {"nature"}},
                                        {"drill", {"mechanical", "construction", "tools"}}};
  lexicon::Taxonomy tax(entries);
  CHECK(tax.canonical());
  CHECK(tax.category_of("car") == SoundCategory::transport);
  CHECK(tax.category_of("drill") == SoundCategory::mechanical);
  CHECK(tax.category_of("nothere") == std::nullopt);
  REQUIRE(tax.path_of("car") != nullptr);
  CHECK(*tax.path_of("car") == std::vector<std::string>{"transport", "road"});

  lexicon::Taxonomy generated({{"car", {"c0"}}}, {"c0"});
  CHECK_FALSE(generated.canonical());
  CHECK(generated.category_of("car") == std::nullopt);
}

TEST_CASE("taxonomy rejects unknown heads and deep paths") {
  using Entries = std::vector<TaxonomyEntry>;
  CHECK_THROWS_AS(lexicon::Taxonomy(Entries{{"car", {"vehicles"}}}), InternalError);
  CHECK_THROWS_AS(lexicon::Taxonomy(Entries{{"car", {"transport", "a", "b", "c", "d"}}}),
                  InternalError);
  CHECK_THROWS_AS(lexicon::Taxonomy(Entries{{"car", {"transport"}}, {"car", {"nature"}}}),
                  InternalError);
}

TEST_CASE("frequency filter keeps strictly-above terms") {
  std::map<std::string, std::uint64_t> counts = {{"a", 5}, {"b", 3}, {"c", 3}, {"d", 1}};
  auto f = lexicon::filter_by_frequency(counts, 3);
  CHECK(f.kept == std::vector<std::string>{"a"});
  CHECK(f.total_volume == 12);
  CHECK(f.kept_volume == 5);
  CHECK(f.volume_fraction() == Catch::Approx(5.0 / 12.0));

  auto all = lexicon::filter_by_frequency(counts, 0);
  CHECK(all.kept.size() == 4);
  CHECK(all.volume_fraction() == 1.0);
}

TEST_CASE("label matching multiplies through multi-label terms") {
  lexicon::LexiconFile lex("emo", {{"alarm", {"fear", "surprise"}}, {"sun", {"joy"}}});
  auto m = lexicon::match({{"alarm", 3}, {"sun", 2}, {"noise", 9}}, lex);
  CHECK(m["fear"] == 3);
  CHECK(m["surprise"] == 3);
  CHECK(m["joy"] == 2);
  CHECK(m.count("noise") == 0);
}

TEST_CASE("coverage report counts instances, photos and segments") {
  std::vector<PhotoRecord> photos = {
      {"p1", 0, 0, {"Car", "sunny"}, {}},
      {"p2", 0, 0, {"nothing", "here"}, {}},
      {"p3", 0, 0, {"car", "car"}, {}},
  };
  SegmentTagTable table;
  table.counts.resize(2);
  table.photos = {2, 1};
  auto car = table.tags.intern("car");
  auto sunny = table.tags.intern("sunny");
  table.counts[0][car] = 3;  // p1 + p3 landed here
  table.counts[0][sunny] = 1;
  table.counts[1][sunny] = 1;

  lexicon::LexiconFile lex("sound", {{"car", {"transport"}}});
  auto stats = lexicon::coverage_report(photos, table, {&lex});
  REQUIRE(stats.size() == 1);
  CHECK(stats[0].lexicon == "sound");
  CHECK(stats[0].photos_with_match == 2);   // p1 and p3
  CHECK(stats[0].segments_with_match == 1);
  CHECK(stats[0].tag_instances == 3);       // car appears thrice among photo tags
  CHECK(stats[0].per_segment_matches.at(3) == 1);
  CHECK(stats[0].per_segment_matches.at(0) == 1);
}
