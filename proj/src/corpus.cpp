#include "fusevid/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "fusevid/errors.hpp"
#include "json.hpp"

namespace fusevid {
namespace {

constexpr std::uint64_t kMinFrames = 65;
constexpr double kMinDurationS = 1.0;
constexpr double kAspectLo = 1.0;
constexpr double kAspectHi = 2.0;
constexpr double kMaxBlackArea = 0.8;
constexpr double kMinBrightness = 0.2;
constexpr double kMaxBlackFrameRate = 0.4;
constexpr double kMinAesthetic = 4.0;
constexpr double kMaxOcrCoverage = 0.1;
constexpr double kMaxRep2 = 0.056;
constexpr double kMaxRep5 = 0.047;
constexpr double kMaxRep10 = 0.045;
constexpr double kMinClipScore = 0.25;

[[noreturn]] void record_error(std::size_t line_no, const std::string& what) {
    std::ostringstream os;
    os << "record";
    if (line_no > 0) os << " at line " << line_no;
    os << ": " << what;
    throw FormatError(os.str());
}

double number_field(const nlohmann::json& v, const char* name,
                    std::size_t line_no) {
    if (!v.is_number()) record_error(line_no, std::string("field '") + name + "' must be a number");
    return v.get<double>();
}

double fraction_field(const nlohmann::json& v, const char* name,
                      std::size_t line_no) {
    const double x = number_field(v, name, line_no);
    if (!(x >= 0.0 && x <= 1.0)) {
        record_error(line_no, std::string("field '") + name + "' must lie in [0,1]");
    }
    return x;
}

std::vector<std::string> whitespace_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) out.emplace_back(text.substr(start, i - start));
    }
    return out;
}

FilterOutcome drop(std::string stage, std::string reason) {
    return FilterOutcome{false, std::move(stage), std::move(reason)};
}

FilterOutcome pass(std::string stage) {
    return FilterOutcome{true, std::move(stage), "pass"};
}

}  // namespace

ClipRecord parse_clip_record(const std::string& json_line,
                             std::size_t line_no) {
    const nlohmann::json j =
        nlohmann::json::parse(json_line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) {
        record_error(line_no, "not a JSON object");
    }
    ClipRecord r;
    for (const auto& [key, value] : j.items()) {
        if (key == "path") {
            if (!value.is_string()) record_error(line_no, "field 'path' must be a string");
            r.path = value.get<std::string>();
        } else if (key == "frames") {
            if (!value.is_number_integer() || value.get<std::int64_t>() < 0) {
                record_error(line_no, "field 'frames' must be a non-negative integer");
            }
            r.frames = value.get<std::uint64_t>();
        } else if (key == "width") {
            r.width = number_field(value, "width", line_no);
        } else if (key == "height") {
            r.height = number_field(value, "height", line_no);
        } else if (key == "fps") {
            r.fps = number_field(value, "fps", line_no);
        } else if (key == "duration_s") {
            r.duration_s = number_field(value, "duration_s", line_no);
        } else if (key == "motion_score") {
            r.motion_score = number_field(value, "motion_score", line_no);
        } else if (key == "black_area") {
            r.black_area = fraction_field(value, "black_area", line_no);
        } else if (key == "brightness") {
            r.brightness = fraction_field(value, "brightness", line_no);
        } else if (key == "black_frame_rate") {
            r.black_frame_rate = fraction_field(value, "black_frame_rate", line_no);
        } else if (key == "aesthetic") {
            r.aesthetic = number_field(value, "aesthetic", line_no);
        } else if (key == "ocr_coverage") {
            r.ocr_coverage = fraction_field(value, "ocr_coverage", line_no);
        } else if (key == "watermark") {
            if (!value.is_boolean()) record_error(line_no, "field 'watermark' must be a boolean");
            r.watermark = value.get<bool>();
        } else if (key == "caption") {
            if (!value.is_string()) record_error(line_no, "field 'caption' must be a string");
            r.caption = value.get<std::string>();
        } else if (key == "clip_score") {
            r.clip_score = number_field(value, "clip_score", line_no);
        } else {
            record_error(line_no, "unknown field '" + key + "'");
        }
    }
    return r;
}

std::string clip_record_to_json(const ClipRecord& r) {
    nlohmann::json j = nlohmann::json::object();
    if (r.path) j["path"] = *r.path;
    if (r.frames) j["frames"] = *r.frames;
    if (r.width) j["width"] = *r.width;
    if (r.height) j["height"] = *r.height;
    if (r.fps) j["fps"] = *r.fps;
    if (r.duration_s) j["duration_s"] = *r.duration_s;
    if (r.motion_score) j["motion_score"] = *r.motion_score;
    if (r.black_area) j["black_area"] = *r.black_area;
    if (r.brightness) j["brightness"] = *r.brightness;
    if (r.black_frame_rate) j["black_frame_rate"] = *r.black_frame_rate;
    if (r.aesthetic) j["aesthetic"] = *r.aesthetic;
    if (r.ocr_coverage) j["ocr_coverage"] = *r.ocr_coverage;
    if (r.watermark) j["watermark"] = *r.watermark;
    if (r.caption) j["caption"] = *r.caption;
    if (r.clip_score) j["clip_score"] = *r.clip_score;
    return j.dump();
}

FilterOutcome metadata_rules_eval(const ClipRecord& r) {
    // basic
    if (!r.frames) return drop("basic", "missing_field");
    if (*r.frames < kMinFrames) return drop("basic", "min_frames");
    if (!r.duration_s) return drop("basic", "missing_field");
    if (*r.duration_s < kMinDurationS) return drop("basic", "min_duration");
    if (!r.width || !r.height) return drop("basic", "missing_field");
    const double aspect = *r.width / *r.height;
    if (!(aspect >= kAspectLo && aspect <= kAspectHi)) {
        return drop("basic", "aspect_ratio");
    }
    // quality
    if (!r.motion_score) return drop("quality", "missing_field");
    if (*r.motion_score == 0.0) return drop("quality", "motion_score");
    if (!r.black_area) return drop("quality", "missing_field");
    if (*r.black_area > kMaxBlackArea) return drop("quality", "black_area");
    if (!r.brightness) return drop("quality", "missing_field");
    if (*r.brightness < kMinBrightness) return drop("quality", "brightness");
    if (!r.black_frame_rate) return drop("quality", "missing_field");
    if (*r.black_frame_rate > kMaxBlackFrameRate) {
        return drop("quality", "black_frame_rate");
    }
    // aesthetic
    if (!r.aesthetic) return drop("aesthetic", "missing_field");
    if (*r.aesthetic < kMinAesthetic) return drop("aesthetic", "aesthetic");
    // watermark
    if (!r.ocr_coverage) return drop("watermark", "missing_field");
    if (*r.ocr_coverage > kMaxOcrCoverage) return drop("watermark", "ocr_coverage");
    if (!r.watermark) return drop("watermark", "missing_field");
    if (*r.watermark) return drop("watermark", "watermark");
    return pass("watermark");
}

double ngram_repetition(std::string_view caption, std::size_t n) {
    if (n == 0) throw ParamError("ngram_repetition: n must be at least 1");
    const std::vector<std::string> tokens = whitespace_tokens(caption);
    if (tokens.size() < n) return 0.0;
    const std::size_t total = tokens.size() - n + 1;
    std::set<std::string> distinct;
    for (std::size_t i = 0; i < total; ++i) {
        std::string gram;
        for (std::size_t k = 0; k < n; ++k) {
            gram += tokens[i + k];
            gram += '\x1f';
        }
        distinct.insert(std::move(gram));
    }
    return 1.0 - static_cast<double>(distinct.size()) / static_cast<double>(total);
}

FilterOutcome caption_rules_eval(const ClipRecord& r) {
    if (!r.caption) return drop("caption", "missing_caption");
    if (ngram_repetition(*r.caption, 2) > kMaxRep2) return drop("caption", "rep_2gram");
    if (ngram_repetition(*r.caption, 5) > kMaxRep5) return drop("caption", "rep_5gram");
    if (ngram_repetition(*r.caption, 10) > kMaxRep10) return drop("caption", "rep_10gram");
    if (!r.clip_score) return drop("caption", "missing_field");
    if (*r.clip_score < kMinClipScore) return drop("caption", "clip_score");
    return pass("caption");
}

PipelineReport run_pipeline(const std::string& records_path,
                            const std::string& out_path) {
    std::ifstream in(records_path);
    if (!in) throw IngestError("cannot open records file: " + records_path);
    std::ofstream out(out_path);
    if (!out) throw IngestError("cannot open output file: " + out_path);

    PipelineReport report;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ++report.input_count;
        ClipRecord rec;
        try {
            rec = parse_clip_record(line, line_no);
        } catch (const FormatError&) {
            ++report.drops_by_reason["parse_error"];
            continue;
        }
        FilterOutcome outcome = metadata_rules_eval(rec);
        if (outcome.kept) outcome = caption_rules_eval(rec);
        if (!outcome.kept) {
            ++report.drops_by_reason[outcome.reason];
            continue;
        }
        ++report.kept_count;
        out << clip_record_to_json(rec) << '\n';
    }
    return report;
}

void write_pipeline_report(const std::string& path,
                           const PipelineReport& report) {
    std::ofstream out(path);
    if (!out) throw IngestError("cannot open report file: " + path);
    nlohmann::json j;
    j["input_count"] = report.input_count;
    j["kept_count"] = report.kept_count;
    j["drops_by_reason"] = nlohmann::json::object();
    for (const auto& [reason, count] : report.drops_by_reason) {
        j["drops_by_reason"][reason] = count;
    }
    out << j.dump(2) << '\n';
}

}  // namespace fusevid
