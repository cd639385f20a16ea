#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fusevid/media.hpp"

namespace fusevid {

// Procedural text+video pairs: solid squares on a black background,
// translating one pixel per frame, with a canonical prompt string.  Small
// enough to overfit in minutes yet structured enough that counting,
// color, and motion direction are each machine-checkable.

inline constexpr std::size_t kSceneFrames = 9;
inline constexpr std::size_t kSceneEdge = 64;
inline constexpr std::size_t kSceneMaxObjects = 3;

enum class SceneColor { red, green, blue };
enum class SceneDirection { left, right, up, down };

const char* color_name(SceneColor c);
const char* direction_name(SceneDirection d);
SceneColor color_from_name(std::string_view name);
SceneDirection direction_from_name(std::string_view name);

struct SceneSpec {
    std::size_t count = 1;  // 1..3 objects
    SceneColor color = SceneColor::red;
    SceneDirection direction = SceneDirection::left;
    std::size_t size = 15;  // square edge length in pixels
};

// "«count» «color» squares moving «direction»".
std::string scene_prompt(const SceneSpec& spec);

// Accepts the canonical prompt or the short form "«count» «color»
// «direction»"; anything else is a parameter error.
SceneSpec parse_scene_spec(std::string_view text);

// Renders the spec on the fixed slot grid; the seed picks which slots the
// squares occupy, independent of color, so two renders with the same seed
// and different colors share geometry exactly.
VideoClip render_scene(const SceneSpec& spec, std::uint64_t seed);

struct DatasetItem {
    VideoClip clip;
    std::string prompt;
    SceneSpec spec;
};

// `count` seeded items; bit-reproducible from spec_seed.
std::vector<DatasetItem> synth_dataset(std::uint64_t spec_seed,
                                       std::size_t count);

struct SemanticScores {
    bool count_ok = false;
    bool color_ok = false;
    bool direction_ok = false;
    bool all() const { return count_ok && color_ok && direction_ok; }
};

// Pixel-space checks: object count via connected components of the
// bright-pixel mask (median over frames), color via nearest pure color of
// the mask mean, direction via the dominant axis of centroid motion.
// An empty detection scores all zeros.
SemanticScores semantic_eval(const VideoClip& video, const SceneSpec& spec);

}  // namespace fusevid
