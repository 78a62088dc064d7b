#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "chattymaps/pipeline.hpp"
#include "support/synthcity.hpp"

using namespace chattymaps;
namespace fs = std::filesystem;

namespace {

const std::map<std::string, std::vector<std::string>>& stage_artifacts() {
  static const std::map<std::string, std::vector<std::string>> t{
      {"ingest-check", {"ingest_report.csv", "ingest_rejections.csv"}},
      {"assign", {"segments_meta.csv", "segment_tags.csv", "assign_summary.csv"}},
      {"taxonomy", {"taxonomy.csv", "partition.csv", "cooccurrence_edges.csv", "taxonomy_summary.csv"}},
      {"sound-map",
       {"sound_profiles.csv", "zscores.csv", "type_averages.csv", "sound_summary.csv",
        "sound_map.geojson"}},
      {"emotion-map", {"emotion_profiles.csv", "emotion_zscores.csv", "emotion_summary.csv"}},
      {"perception-map",
       {"perception_table.csv", "perception_pca.csv", "perception_map.geojson",
        "perception_summary.csv"}},
      {"diversity-map",
       {"diversity.csv", "diversity_hist.csv", "diversity_by_tags.csv", "diversity_summary.csv"}},
      {"validate-noise",
       {"ewl.csv", "noise_correlation.csv", "noise_correlation_periods.csv", "noise_summary.csv"}},
      {"report", {"coverage.csv", "coverage_hist.csv", "tags_per_segment_hist.csv", "report_summary.csv"}},
  };
  return t;
}

const std::vector<std::string>& stage_order() {
  static const std::vector<std::string> order{
      "ingest-check", "assign",        "taxonomy",       "sound-map", "emotion-map",
      "perception-map", "diversity-map", "validate-noise", "report"};
  return order;
}

fs::path fresh_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

pipeline::RunManifest city_manifest(const fs::path& input_dir, const fs::path& out_dir) {
  pipeline::RunManifest m;
  m.photos = (input_dir / "photos.jsonl").string();
  m.segments = (input_dir / "segments.geojson").string();
  m.noise = (input_dir / "noise.csv").string();
  m.soundwalk = (input_dir / "soundwalk.csv").string();
  m.sound_lexicon = (input_dir / "sound_lexicon.csv").string();
  m.emotion_lexicon = (input_dir / "emotion_lexicon.csv").string();
  m.taxonomy_file = (input_dir / "taxonomy.csv").string();
  m.out = out_dir.string();
  return m;
}

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t at = hay.find(needle); at != std::string::npos; at = hay.find(needle, at + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("manifest parsing tolerates comments and spacing") {
  std::istringstream in(
      "# a run configuration\n"
      "version=0.0.9\n"
      "photos = data/photos.jsonl\r\n"
      "\n"
      "  segments=data/segments.geojson\n"
      "buffer_m = 30.5\n"
      "ref_lon=-0.1\n"
      "ref_lat=51.5\n"
      "seed=9\n"
      "threads=4\n"
      "dedup_photos=true\n");
  auto m = pipeline::parse_manifest(in);
  REQUIRE(m.photos == "data/photos.jsonl");
  REQUIRE(m.segments == "data/segments.geojson");
  REQUIRE(m.buffer_m == 30.5);
  REQUIRE(m.ref_lon.has_value());
  REQUIRE(*m.ref_lon == -0.1);
  REQUIRE(m.seed == 9);
  REQUIRE(m.threads == 4);
  REQUIRE(m.dedup_photos);
  REQUIRE(m.out == "out");  // untouched default
}

TEST_CASE("manifest rejections") {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return pipeline::parse_manifest(in);
  };
  REQUIRE_THROWS_AS(parse("colour=blue\n"), InputError);          // unknown key
  REQUIRE_THROWS_AS(parse("photos data/x\n"), InputError);        // no equals sign
  REQUIRE_THROWS_AS(parse("buffer_m=wide\n"), InputError);        // not a number
  REQUIRE_THROWS_AS(parse("buffer_m=0\n"), InputError);           // capsule needs width
  REQUIRE_THROWS_AS(parse("buffer_m=-3\n"), InputError);
  REQUIRE_THROWS_AS(parse("seed=-1\n"), InputError);
  REQUIRE_THROWS_AS(parse("threads=0\n"), InputError);
  REQUIRE_THROWS_AS(parse("dedup_photos=maybe\n"), InputError);
  REQUIRE_THROWS_AS(parse("ref_lon=1.0\n"), InputError);          // ref_lat missing
  REQUIRE_THROWS_AS(parse("ref_lat=1.0\n"), InputError);
  REQUIRE_THROWS_AS(pipeline::parse_manifest_file("/nonexistent/run.manifest"), InputError);
}

TEST_CASE("manifest serialization round-trips") {
  pipeline::RunManifest m;
  m.photos = "p.jsonl";
  m.segments = "s.geojson";
  m.noise = "n.csv";
  m.soundwalk = "w.csv";
  m.sound_lexicon = "sl.csv";
  m.emotion_lexicon = "el.csv";
  m.taxonomy_file = "t.csv";
  m.category_map = "cm.csv";
  m.merge_map = "mm.csv";
  m.out = "results";
  m.buffer_m = 17.25;
  m.ref_lon = -0.123456789012345;
  m.ref_lat = 51.987654321098765;
  m.seed = 77;
  m.size_threshold = 64;
  m.min_tags = 3;
  m.min_count = 2;
  m.threads = 8;
  m.dedup_photos = true;

  std::ostringstream os;
  pipeline::serialize_manifest(os, m);
  std::istringstream in(os.str());
  auto back = pipeline::parse_manifest(in);

  REQUIRE(back.photos == m.photos);
  REQUIRE(back.segments == m.segments);
  REQUIRE(back.noise == m.noise);
  REQUIRE(back.soundwalk == m.soundwalk);
  REQUIRE(back.sound_lexicon == m.sound_lexicon);
  REQUIRE(back.emotion_lexicon == m.emotion_lexicon);
  REQUIRE(back.taxonomy_file == m.taxonomy_file);
  REQUIRE(back.category_map == m.category_map);
  REQUIRE(back.merge_map == m.merge_map);
  REQUIRE(back.out == m.out);
  REQUIRE(back.buffer_m == m.buffer_m);
  REQUIRE(back.ref_lon == m.ref_lon);  // exact through fmt_exact
  REQUIRE(back.ref_lat == m.ref_lat);
  REQUIRE(back.seed == m.seed);
  REQUIRE(back.size_threshold == m.size_threshold);
  REQUIRE(back.min_tags == m.min_tags);
  REQUIRE(back.min_count == m.min_count);
  REQUIRE(back.threads == m.threads);
  REQUIRE(back.dedup_photos == m.dedup_photos);

  // no reference set: the keys are simply absent
  pipeline::RunManifest plain;
  std::ostringstream os2;
  pipeline::serialize_manifest(os2, plain);
  REQUIRE(os2.str().find("ref_lon") == std::string::npos);
  std::istringstream in2(os2.str());
  auto back2 = pipeline::parse_manifest(in2);
  REQUIRE_FALSE(back2.ref_lon.has_value());
}

TEST_CASE("seed environment override") {
  pipeline::RunManifest m;
  m.seed = 9;
  setenv("CHATTYMAPS_SEED", "42", 1);
  pipeline::apply_env(m);
  REQUIRE(m.seed == 42);

  setenv("CHATTYMAPS_SEED", "nine", 1);
  REQUIRE_THROWS_AS(pipeline::apply_env(m), InputError);
  setenv("CHATTYMAPS_SEED", "-3", 1);
  REQUIRE_THROWS_AS(pipeline::apply_env(m), InputError);

  unsetenv("CHATTYMAPS_SEED");
  m.seed = 9;
  pipeline::apply_env(m);
  REQUIRE(m.seed == 9);
}

TEST_CASE("missing artifacts point at the deepest gap") {
  auto out = fresh_dir("chattymaps_chain_test");
  pipeline::RunManifest m;
  m.photos = "unused";
  m.segments = "unused";
  m.sound_lexicon = "unused";
  m.out = out.string();

  try {
    pipeline::run("diversity-map", m);
    FAIL("expected a missing artifact error");
  } catch (const MissingArtifactError& e) {
    REQUIRE(e.stage == "taxonomy");
    REQUIRE(std::string(e.what()).find("taxonomy") != std::string::npos);
  }

  // a curated taxonomy file removes that stage from the chain
  m.taxonomy_file = "curated.csv";
  try {
    pipeline::run("diversity-map", m);
    FAIL("expected a missing artifact error");
  } catch (const MissingArtifactError& e) {
    REQUIRE(e.stage == "assign");
  }

  try {
    pipeline::run("report", m);
    FAIL("expected a missing artifact error");
  } catch (const MissingArtifactError& e) {
    REQUIRE(e.stage == "assign");
  }

  REQUIRE_THROWS_AS(pipeline::run("fly-to-the-moon", m), InputError);
  fs::remove_all(out);
}

TEST_CASE("unconfigured inputs are reported before any work") {
  auto out = fresh_dir("chattymaps_noinput_test");
  pipeline::RunManifest m;
  m.out = out.string();
  REQUIRE_THROWS_AS(pipeline::run("assign", m), InputError);  // no photos, no segments
  fs::remove_all(out);
}

TEST_CASE("full pipeline over a small synthetic city") {
  auto input = fresh_dir("chattymaps_city_input");
  testsupport::CityConfig cfg;
  cfg.cols = 6;
  cfg.rows = 6;
  cfg.photos_per_segment = 12;
  auto city = testsupport::write_city(input, cfg);
  REQUIRE(city.seg_ids.size() == 36);

  auto out1 = fresh_dir("chattymaps_city_run1");
  auto m = city_manifest(input, out1);
  for (const auto& stage : stage_order()) pipeline::run(stage, m);

  for (const auto& [stage, artifacts] : stage_artifacts())
    for (const auto& a : artifacts) {
      INFO(stage << " should have written " << a);
      REQUIRE(fs::exists(out1 / a));
    }
  REQUIRE(fs::exists(out1 / "manifest.txt"));
  // a configured soundwalk adds the survey correlation artifacts
  REQUIRE(fs::exists(out1 / "soundwalk_sound_corr.csv"));
  REQUIRE(fs::exists(out1 / "soundwalk_perception_corr.csv"));
  REQUIRE(fs::exists(out1 / "sound_emotion_corr.csv"));

  // every profiled segment's fractions sum to 1 at the printed precision
  {
    std::ifstream in(out1 / "sound_profiles.csv");
    std::string line;
    REQUIRE(std::getline(in, line));
    auto head = csv::split(line);
    csv::Header h{head};
    std::size_t first = h.require("transport");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
      auto fields = csv::split(line);
      double sum = 0;
      for (std::size_t c = 0; c < kSoundCategoryCount; ++c)
        sum += *csv::to_double(fields[first + c]);
      REQUIRE(sum == Catch::Approx(1.0).margin(1e-4));
      ++rows;
    }
    REQUIRE(rows > 30);  // nearly every segment collects matched tags
  }

  // both map artifacts carry one feature per input segment
  auto sound_geo = slurp(out1 / "sound_map.geojson");
  REQUIRE(count_occurrences(sound_geo, "\"type\":\"Feature\"") == 36);
  auto perception_geo = slurp(out1 / "perception_map.geojson");
  REQUIRE(count_occurrences(perception_geo, "\"type\":\"Feature\"") == 36);

  // a second run with the same manifest reproduces every artifact exactly
  auto out2 = fresh_dir("chattymaps_city_run2");
  auto m2 = city_manifest(input, out2);
  for (const auto& stage : stage_order()) pipeline::run(stage, m2);
  for (const auto& [stage, artifacts] : stage_artifacts())
    for (const auto& a : artifacts) {
      INFO("artifact " << a << " should be byte-identical across reruns");
      REQUIRE(slurp(out1 / a) == slurp(out2 / a));
    }
  REQUIRE(slurp(out1 / "soundwalk_sound_corr.csv") == slurp(out2 / "soundwalk_sound_corr.csv"));

  // downstream layers see every taxonomy term the photos used
  {
    std::ifstream in(out1 / "ingest_report.csv");
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    REQUIRE(all.find("photos") != std::string::npos);
    REQUIRE(all.find("segments") != std::string::npos);
  }

  fs::remove_all(input);
  fs::remove_all(out1);
  fs::remove_all(out2);
}

TEST_CASE("generated taxonomy labels refuse to feed the sound map directly") {
  auto input = fresh_dir("chattymaps_rawtax_input");
  testsupport::CityConfig cfg;
  cfg.cols = 4;
  cfg.rows = 4;
  cfg.photos_per_segment = 10;
  cfg.write_soundwalk = false;
  testsupport::write_city(input, cfg);

  auto out = fresh_dir("chattymaps_rawtax_out");
  auto m = city_manifest(input, out);
  m.taxonomy_file.clear();  // force the clustering artifact into the chain
  m.soundwalk.clear();
  pipeline::run("assign", m);
  pipeline::run("taxonomy", m);
  // cluster keys like c0 are not category names until a merge file labels them
  REQUIRE_THROWS_AS(pipeline::run("sound-map", m), InputError);

  fs::remove_all(input);
  fs::remove_all(out);
}
