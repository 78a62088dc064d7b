#ifndef CHATTYMAPS_CORE_HPP
#define CHATTYMAPS_CORE_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

// Shared vocabulary: the fixed category sets, their canonical orders (which
// double as tie-break and output-column orders everywhere), and the error
// taxonomy the command-line tool maps to exit codes.

namespace chattymaps {

inline constexpr std::string_view kVersion = "0.1.0";

enum class SoundCategory : std::uint8_t { transport, mechanical, human, music, nature, indoor };

inline constexpr std::size_t kSoundCategoryCount = 6;

inline constexpr std::array<std::string_view, kSoundCategoryCount> kSoundCategoryNames = {
    "transport", "mechanical", "human", "music", "nature", "indoor"};

enum class Emotion : std::uint8_t { anger, fear, anticipation, trust, surprise, sadness, joy, disgust };

inline constexpr std::size_t kEmotionCount = 8;

inline constexpr std::array<std::string_view, kEmotionCount> kEmotionNames = {
    "anger", "fear", "anticipation", "trust", "surprise", "sadness", "joy", "disgust"};

enum class StreetType : std::uint8_t {
  footway, residential, pedestrian, track, primary, secondary, tertiary, construction, other
};

inline constexpr std::size_t kStreetTypeCount = 9;

inline constexpr std::array<std::string_view, kStreetTypeCount> kStreetTypeNames = {
    "footway", "residential", "pedestrian", "track",
    "primary", "secondary", "tertiary", "construction", "other"};

// Sound categories of the walk questionnaire; distinct from SoundCategory.
enum class WalkCategory : std::uint8_t { traffic, individuals, crowds, nature, other };

inline constexpr std::size_t kWalkCategoryCount = 5;

inline constexpr std::array<std::string_view, kWalkCategoryCount> kWalkCategoryNames = {
    "traffic", "individuals", "crowds", "nature", "other"};

enum class Perception : std::uint8_t {
  pleasant, chaotic, vibrant, uneventful, calm, annoying, eventful, monotonous
};

inline constexpr std::size_t kPerceptionCount = 8;

inline constexpr std::array<std::string_view, kPerceptionCount> kPerceptionNames = {
    "pleasant", "chaotic", "vibrant", "uneventful", "calm", "annoying", "eventful", "monotonous"};

namespace detail {

template <class Enum, std::size_t N>
std::optional<Enum> enum_from_name(const std::array<std::string_view, N>& names, std::string_view s) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == s) return static_cast<Enum>(i);
  return std::nullopt;
}

}  // namespace detail

inline std::optional<SoundCategory> sound_category_from(std::string_view s) {
  return detail::enum_from_name<SoundCategory>(kSoundCategoryNames, s);
}

inline std::optional<Emotion> emotion_from(std::string_view s) {
  return detail::enum_from_name<Emotion>(kEmotionNames, s);
}

inline std::optional<WalkCategory> walk_category_from(std::string_view s) {
  return detail::enum_from_name<WalkCategory>(kWalkCategoryNames, s);
}

inline std::optional<Perception> perception_from(std::string_view s) {
  return detail::enum_from_name<Perception>(kPerceptionNames, s);
}

// Unknown street kinds deliberately collapse to `other` instead of failing.
inline StreetType street_type_from(std::string_view s) {
  auto t = detail::enum_from_name<StreetType>(kStreetTypeNames, s);
  return t ? *t : StreetType::other;
}

inline std::string_view name_of(SoundCategory c) { return kSoundCategoryNames[static_cast<std::size_t>(c)]; }
inline std::string_view name_of(Emotion e) { return kEmotionNames[static_cast<std::size_t>(e)]; }
inline std::string_view name_of(StreetType t) { return kStreetTypeNames[static_cast<std::size_t>(t)]; }
inline std::string_view name_of(WalkCategory c) { return kWalkCategoryNames[static_cast<std::size_t>(c)]; }
inline std::string_view name_of(Perception p) { return kPerceptionNames[static_cast<std::size_t>(p)]; }

// Bad or missing input data; the tool exits 1.
struct InputError : std::runtime_error {
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// A pipeline stage was invoked before the stage that produces its input;
// `stage` names the subcommand to run first. The tool exits 2.
struct MissingArtifactError : std::runtime_error {
  MissingArtifactError(std::string stage_name, const std::string& what)
      : std::runtime_error(what), stage(std::move(stage_name)) {}
  std::string stage;
};

// A violated internal invariant; the tool exits 3.
struct InternalError : std::runtime_error {
  explicit InternalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace chattymaps

#endif
