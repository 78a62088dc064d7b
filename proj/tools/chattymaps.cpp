// Command line front end. Configuration precedence, lowest to highest:
// manifest file, CHATTYMAPS_SEED, explicit flags.

#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "chattymaps/pipeline.hpp"

namespace {

using chattymaps::pipeline::RunManifest;

struct Overrides {
  std::optional<std::string> photos, segments, noise, soundwalk;
  std::optional<std::string> sound_lexicon, emotion_lexicon, taxonomy_file;
  std::optional<std::string> category_map, merge_map, out;
  std::optional<double> buffer_m;
  std::vector<double> ref;  // lon lat
  std::optional<std::uint64_t> seed, min_tags, min_count;
  std::optional<std::size_t> size_threshold;
  std::optional<unsigned> threads;
  std::optional<bool> dedup_photos;
};

void apply(const Overrides& o, RunManifest& m) {
  if (o.photos) m.photos = *o.photos;
  if (o.segments) m.segments = *o.segments;
  if (o.noise) m.noise = *o.noise;
  if (o.soundwalk) m.soundwalk = *o.soundwalk;
  if (o.sound_lexicon) m.sound_lexicon = *o.sound_lexicon;
  if (o.emotion_lexicon) m.emotion_lexicon = *o.emotion_lexicon;
  if (o.taxonomy_file) m.taxonomy_file = *o.taxonomy_file;
  if (o.category_map) m.category_map = *o.category_map;
  if (o.merge_map) m.merge_map = *o.merge_map;
  if (o.out) m.out = *o.out;
  if (o.buffer_m) m.buffer_m = *o.buffer_m;
  if (!o.ref.empty()) {
    m.ref_lon = o.ref[0];
    m.ref_lat = o.ref[1];
  }
  if (o.seed) m.seed = *o.seed;
  if (o.size_threshold) m.size_threshold = *o.size_threshold;
  if (o.min_tags) m.min_tags = *o.min_tags;
  if (o.min_count) m.min_count = *o.min_count;
  if (o.threads) m.threads = *o.threads;
  if (o.dedup_photos) m.dedup_photos = *o.dedup_photos;
  if (!(m.buffer_m > 0)) throw chattymaps::InputError("buffer_m must be positive");
  if (m.threads == 0) throw chattymaps::InputError("threads must be at least 1");
}

void add_common_flags(CLI::App* cmd, std::optional<std::string>& manifest, Overrides& o) {
  cmd->add_option("--manifest", manifest, "manifest file with key=value settings");
  cmd->add_option("--photos", o.photos, "photo CSV: id,lon,lat,tags[,timestamp]");
  cmd->add_option("--segments", o.segments, "street segments, GeoJSON or CSV");
  cmd->add_option("--noise", o.noise, "noise levels CSV per segment");
  cmd->add_option("--soundwalk", o.soundwalk, "soundwalk survey CSV");
  cmd->add_option("--sound-lexicon", o.sound_lexicon, "sound word list or labeled lexicon");
  cmd->add_option("--emotion-lexicon", o.emotion_lexicon, "word,emotion association lexicon");
  cmd->add_option("--taxonomy", o.taxonomy_file, "term,path taxonomy replacing the taxonomy stage");
  cmd->add_option("--category-map", o.category_map, "photo category to survey category weights");
  cmd->add_option("--merge-map", o.merge_map, "community merge and label rules");
  cmd->add_option("--out", o.out, "output directory (default: out)");
  cmd->add_option("--buffer-m", o.buffer_m, "segment buffer half width in meters");
  cmd->add_option("--ref", o.ref, "projection reference: lon lat")->expected(2);
  cmd->add_option("--seed", o.seed, "random seed for community detection");
  cmd->add_option("--size-threshold", o.size_threshold, "refine communities larger than this");
  cmd->add_option("--min-tags", o.min_tags, "matched tags needed for a dominant call");
  cmd->add_option("--min-count", o.min_count, "drop graph terms with photo count not above this");
  cmd->add_option("--threads", o.threads, "worker threads for photo assignment");
  cmd->add_flag("--dedup-photos,!--no-dedup-photos", o.dedup_photos,
                "collapse identical position and tag uploads");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"street-level sound, emotion and perception maps from photo tags"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(chattymaps::kVersion));

  const std::vector<std::pair<const char*, const char*>> subcommands = {
      {"ingest-check", "parse every configured input and report totals"},
      {"assign", "buffer segments and assign photos to them"},
      {"taxonomy", "build the sound taxonomy from tag co-occurrence"},
      {"sound-map", "sound category profiles, z-scores and the sound map"},
      {"emotion-map", "emotion fractions and z-scores"},
      {"perception-map", "soundwalk probabilities, PCA and the perception map"},
      {"diversity-map", "sound diversity per segment and its distribution"},
      {"validate-noise", "noise level correlations against category fractions"},
      {"report", "coverage statistics and cross-layer correlations"},
  };

  std::optional<std::string> manifest_path;
  Overrides overrides;
  for (const auto& [name, desc] : subcommands)
    add_common_flags(app.add_subcommand(name, desc), manifest_path, overrides);

  CLI11_PARSE(app, argc, argv);

  try {
    RunManifest m;
    if (manifest_path) m = chattymaps::pipeline::parse_manifest_file(*manifest_path);
    chattymaps::pipeline::apply_env(m);
    apply(overrides, m);
    chattymaps::pipeline::run(app.get_subcommands().front()->get_name(), m);
    return 0;
  } catch (const chattymaps::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const chattymaps::MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
