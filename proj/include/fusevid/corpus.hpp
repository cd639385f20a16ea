#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace fusevid {

// Deterministic curation rule engine over clip metadata records. Quality
// scores (motion, aesthetic, OCR, watermark, caption similarity) are
// upstream-computed inputs carried by the record; this module never touches
// media bytes. Records travel as JSON-lines with exactly these field names.

struct ClipRecord {
    std::optional<std::string> path;
    std::optional<std::uint64_t> frames;
    std::optional<double> width;
    std::optional<double> height;
    std::optional<double> fps;
    std::optional<double> duration_s;
    std::optional<double> motion_score;
    std::optional<double> black_area;        // fraction in [0,1]
    std::optional<double> brightness;        // fraction in [0,1]
    std::optional<double> black_frame_rate;  // fraction in [0,1]
    std::optional<double> aesthetic;
    std::optional<double> ocr_coverage;      // fraction in [0,1]
    std::optional<bool> watermark;
    std::optional<std::string> caption;
    std::optional<double> clip_score;
};

struct FilterOutcome {
    bool kept = false;
    std::string stage;   // basic | quality | aesthetic | watermark | caption
    std::string reason;  // rule identifier, "missing_field", or "pass"
};

// Parses one JSON-lines record. Unknown fields, wrong types, negative
// counts, and fractions outside [0,1] are format errors naming the line.
ClipRecord parse_clip_record(const std::string& json_line,
                             std::size_t line_no = 0);
std::string clip_record_to_json(const ClipRecord& r);

// Stage order: basic (frames >= 65, duration >= 1s, aspect within [1,2]),
// quality (motion > 0, black area <= 0.8, brightness >= 0.2, black frame
// rate <= 0.4), aesthetic (score >= 4.0), watermark (OCR coverage <= 0.1,
// no watermark). First failing rule wins; a rule whose input is absent
// fails its stage with reason "missing_field". Boundary values pass: every
// comparison is strict in the documented direction.
FilterOutcome metadata_rules_eval(const ClipRecord& r);

// 1 - (distinct n-grams / total n-grams) over whitespace tokens; 0 when the
// caption has fewer than n tokens.
double ngram_repetition(std::string_view caption, std::size_t n);

// Caption stage: drop when 2-gram repetition > 0.056, 5-gram > 0.047,
// 10-gram > 0.045, or semantic consistency score < 0.25, in that order.
// A missing caption drops with reason "missing_caption".
FilterOutcome caption_rules_eval(const ClipRecord& r);

struct PipelineReport {
    std::size_t input_count = 0;
    std::size_t kept_count = 0;
    std::map<std::string, std::size_t> drops_by_reason;
};

// Streams a JSON-lines file through both stages, writing kept records (in
// input order, canonical serialization) to out_path. Malformed lines count
// under drops_by_reason["parse_error"] and processing continues.
PipelineReport run_pipeline(const std::string& records_path,
                            const std::string& out_path);

void write_pipeline_report(const std::string& path,
                           const PipelineReport& report);

}  // namespace fusevid
