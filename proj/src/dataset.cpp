#include "fusevid/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "fusevid/errors.hpp"
#include "fusevid/rng.hpp"
#include "fusevid/textcond.hpp"

namespace fusevid {
namespace {

// Slot origins leave a 12-pixel gap between neighbors (36 - 8 - 16), so
// squares stay disconnected even after 8x8 pooling smears their edges.
constexpr std::size_t kSlotOrigins[2] = {8, 36};
constexpr std::size_t kMinSquare = 14;
constexpr std::size_t kMaxSquare = 16;

struct Offset {
    int dx;
    int dy;
};

Offset direction_step(SceneDirection d) {
    switch (d) {
        case SceneDirection::left: return {-1, 0};
        case SceneDirection::right: return {1, 0};
        case SceneDirection::up: return {0, -1};
        case SceneDirection::down: return {0, 1};
    }
    throw ParamError("scene: bad direction");
}

std::array<double, 3> color_rgb(SceneColor c) {
    switch (c) {
        case SceneColor::red: return {1.0, 0.0, 0.0};
        case SceneColor::green: return {0.0, 1.0, 0.0};
        case SceneColor::blue: return {0.0, 0.0, 1.0};
    }
    throw ParamError("scene: bad color");
}

// Brightness cut separating object pixels from the black background;
// pooled edge cells of a moving square keep at least ~0.4 intensity.
constexpr double kMaskThreshold = 0.35;

struct FrameView {
    const VideoClip& v;
    std::size_t f;
    double channel(std::size_t y, std::size_t x, std::size_t c) const {
        const std::size_t w = v.width();
        return v.frames.value_at(((f * v.height() + y) * w + x) * 3 + c);
    }
    bool masked(std::size_t y, std::size_t x) const {
        return std::max({channel(y, x, 0), channel(y, x, 1),
                         channel(y, x, 2)}) > kMaskThreshold;
    }
};

// 4-connected component count via iterative flood fill.
std::size_t component_count(const FrameView& fv) {
    const std::size_t h = fv.v.height();
    const std::size_t w = fv.v.width();
    std::vector<char> seen(h * w, 0);
    std::vector<std::size_t> stack;
    std::size_t components = 0;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            if (seen[y * w + x] || !fv.masked(y, x)) continue;
            ++components;
            stack.push_back(y * w + x);
            seen[y * w + x] = 1;
            while (!stack.empty()) {
                const std::size_t at = stack.back();
                stack.pop_back();
                const std::size_t cy = at / w, cx = at % w;
                const std::size_t ny[4] = {cy - 1, cy + 1, cy, cy};
                const std::size_t nx[4] = {cx, cx, cx - 1, cx + 1};
                for (int k = 0; k < 4; ++k) {
                    if (ny[k] >= h || nx[k] >= w) continue;
                    const std::size_t ni = ny[k] * w + nx[k];
                    if (!seen[ni] && fv.masked(ny[k], nx[k])) {
                        seen[ni] = 1;
                        stack.push_back(ni);
                    }
                }
            }
        }
    return components;
}

bool centroid(const FrameView& fv, double& cx, double& cy) {
    double sx = 0.0, sy = 0.0;
    std::size_t n = 0;
    for (std::size_t y = 0; y < fv.v.height(); ++y)
        for (std::size_t x = 0; x < fv.v.width(); ++x)
            if (fv.masked(y, x)) {
                sx += static_cast<double>(x);
                sy += static_cast<double>(y);
                ++n;
            }
    if (n == 0) return false;
    cx = sx / static_cast<double>(n);
    cy = sy / static_cast<double>(n);
    return true;
}

void check_bounds(long v, long limit) {
    if (v < 0 || v > limit)
        throw ParamError("scene: object leaves the frame bounds");
}

}  // namespace

const char* color_name(SceneColor c) {
    switch (c) {
        case SceneColor::red: return "red";
        case SceneColor::green: return "green";
        case SceneColor::blue: return "blue";
    }
    throw ParamError("scene: bad color");
}

const char* direction_name(SceneDirection d) {
    switch (d) {
        case SceneDirection::left: return "left";
        case SceneDirection::right: return "right";
        case SceneDirection::up: return "up";
        case SceneDirection::down: return "down";
    }
    throw ParamError("scene: bad direction");
}

SceneColor color_from_name(std::string_view name) {
    if (name == "red") return SceneColor::red;
    if (name == "green") return SceneColor::green;
    if (name == "blue") return SceneColor::blue;
    throw ParamError("scene: unknown color '" + std::string(name) + "'");
}

SceneDirection direction_from_name(std::string_view name) {
    if (name == "left") return SceneDirection::left;
    if (name == "right") return SceneDirection::right;
    if (name == "up") return SceneDirection::up;
    if (name == "down") return SceneDirection::down;
    throw ParamError("scene: unknown direction '" + std::string(name) + "'");
}

std::string scene_prompt(const SceneSpec& spec) {
    return std::to_string(spec.count) + " " + color_name(spec.color) +
           " squares moving " + direction_name(spec.direction);
}

SceneSpec parse_scene_spec(std::string_view text) {
    const auto words = tokenize_words(text);
    if (words.size() < 3)
        throw ParamError("scene: cannot parse '" + std::string(text) + "'");
    SceneSpec spec;
    try {
        spec.count = std::stoul(words[0]);
    } catch (const std::exception&) {
        throw ParamError("scene: bad object count '" + words[0] + "'");
    }
    if (spec.count < 1 || spec.count > kSceneMaxObjects)
        throw ParamError("scene: object count must be 1.." +
                         std::to_string(kSceneMaxObjects));
    spec.color = color_from_name(words[1]);
    spec.direction = direction_from_name(words.back());
    return spec;
}

VideoClip render_scene(const SceneSpec& spec, std::uint64_t seed) {
    if (spec.count < 1 || spec.count > kSceneMaxObjects)
        throw ParamError("scene: object count must be 1.." +
                         std::to_string(kSceneMaxObjects));
    if (spec.size < 1) throw ParamError("scene: size must be positive");

    // Seeded distinct slot assignment on the 2x2 grid.
    Rng rng = Rng(seed).split("slots");
    std::array<std::size_t, 4> slots = {0, 1, 2, 3};
    for (std::size_t i = 3; i > 0; --i)
        std::swap(slots[i], slots[rng.uniform_int(0, i)]);

    const Offset step = direction_step(spec.direction);
    const auto rgb = color_rgb(spec.color);
    const long edge = static_cast<long>(kSceneEdge);
    const long size = static_cast<long>(spec.size);
    const long last = static_cast<long>(kSceneFrames) - 1;

    Tensor frames = Tensor::zeros(
        {kSceneFrames, kSceneEdge, kSceneEdge, 3}, DType::f32);
    for (std::size_t obj = 0; obj < spec.count; ++obj) {
        const std::size_t slot = slots[obj];
        const long ox = static_cast<long>(kSlotOrigins[slot % 2]);
        const long oy = static_cast<long>(kSlotOrigins[slot / 2]);
        // The whole trajectory must stay inside the frame.
        check_bounds(ox + step.dx * last, edge - size);
        check_bounds(ox, edge - size);
        check_bounds(oy + step.dy * last, edge - size);
        check_bounds(oy, edge - size);
        for (std::size_t f = 0; f < kSceneFrames; ++f) {
            const long x0 = ox + step.dx * static_cast<long>(f);
            const long y0 = oy + step.dy * static_cast<long>(f);
            for (long y = y0; y < y0 + size; ++y)
                for (long x = x0; x < x0 + size; ++x) {
                    const std::size_t base =
                        ((f * kSceneEdge + static_cast<std::size_t>(y)) *
                             kSceneEdge +
                         static_cast<std::size_t>(x)) *
                        3;
                    for (std::size_t c = 0; c < 3; ++c)
                        frames.set_value_at(base + c, rgb[c]);
                }
        }
    }
    return make_video_clip(std::move(frames));
}

std::vector<DatasetItem> synth_dataset(std::uint64_t spec_seed,
                                       std::size_t count) {
    if (count < 1) throw ParamError("dataset: count must be >= 1");
    std::vector<DatasetItem> items;
    items.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng = Rng(spec_seed).split(static_cast<std::uint64_t>(i));
        SceneSpec spec;
        spec.count = 1 + rng.uniform_int(0, kSceneMaxObjects - 1);
        spec.color = static_cast<SceneColor>(rng.uniform_int(0, 2));
        spec.direction = static_cast<SceneDirection>(rng.uniform_int(0, 3));
        spec.size = kMinSquare + rng.uniform_int(0, kMaxSquare - kMinSquare);
        const std::uint64_t render_seed = rng.split("render").uniform_int(
            0, std::numeric_limits<std::uint64_t>::max() - 1);
        DatasetItem item{render_scene(spec, render_seed),
                         scene_prompt(spec), spec};
        items.push_back(std::move(item));
    }
    return items;
}

SemanticScores semantic_eval(const VideoClip& video, const SceneSpec& spec) {
    SemanticScores scores;
    const std::size_t nf = video.frame_count();

    // Count: median per-frame component count.
    std::vector<std::size_t> counts;
    counts.reserve(nf);
    for (std::size_t f = 0; f < nf; ++f)
        counts.push_back(component_count(FrameView{video, f}));
    std::sort(counts.begin(), counts.end());
    const std::size_t median = counts[counts.size() / 2];
    if (median == 0) return scores;  // nothing detected anywhere
    scores.count_ok = median == spec.count;

    // Color: mean over mask pixels of all frames, nearest pure color.
    double sum[3] = {0.0, 0.0, 0.0};
    std::size_t n = 0;
    for (std::size_t f = 0; f < nf; ++f) {
        FrameView fv{video, f};
        for (std::size_t y = 0; y < video.height(); ++y)
            for (std::size_t x = 0; x < video.width(); ++x)
                if (fv.masked(y, x)) {
                    for (std::size_t c = 0; c < 3; ++c)
                        sum[c] += fv.channel(y, x, c);
                    ++n;
                }
    }
    if (n > 0) {
        const SceneColor palette[3] = {SceneColor::red, SceneColor::green,
                                       SceneColor::blue};
        double dist[3];
        for (int i = 0; i < 3; ++i) {
            const auto rgb = color_rgb(palette[i]);
            dist[i] = 0.0;
            for (std::size_t c = 0; c < 3; ++c) {
                const double d = sum[c] / static_cast<double>(n) - rgb[c];
                dist[i] += d * d;
            }
        }
        const int best_i = static_cast<int>(
            std::min_element(dist, dist + 3) - dist);
        int at_min = 0;
        for (int i = 0; i < 3; ++i)
            if (std::abs(dist[i] - dist[best_i]) <= 1e-12) ++at_min;
        scores.color_ok = at_min == 1 && palette[best_i] == spec.color;
    }

    // Direction: dominant axis of first-to-last centroid displacement.
    double cx0, cy0, cx1, cy1;
    if (centroid(FrameView{video, 0}, cx0, cy0) &&
        centroid(FrameView{video, nf - 1}, cx1, cy1)) {
        const double dx = cx1 - cx0;
        const double dy = cy1 - cy0;
        constexpr double kMinTravel = 1.0;  // pixels
        SceneDirection detected;
        bool moving = true;
        if (std::abs(dx) > std::abs(dy)) {
            detected = dx < 0 ? SceneDirection::left : SceneDirection::right;
            moving = std::abs(dx) > kMinTravel;
        } else if (std::abs(dy) > std::abs(dx)) {
            detected = dy < 0 ? SceneDirection::up : SceneDirection::down;
            moving = std::abs(dy) > kMinTravel;
        } else {
            moving = false;
            detected = SceneDirection::left;
        }
        scores.direction_ok = moving && detected == spec.direction;
    }
    return scores;
}

}  // namespace fusevid
