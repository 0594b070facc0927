#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vqg/errors.hpp"
#include "vqg/text.hpp"

namespace vqg {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

// Actionability class of a chapter title.
enum class ChapterClass { UL, SCQ, NSCQ, NSCP };

inline constexpr int kNumChapterClasses = 4;

inline const char* to_string(ChapterClass c) {
    switch (c) {
        case ChapterClass::UL: return "UL";
        case ChapterClass::SCQ: return "SCQ";
        case ChapterClass::NSCQ: return "NSCQ";
        case ChapterClass::NSCP: return "NSCP";
    }
    throw DomainError("invalid ChapterClass");
}

inline ChapterClass chapter_class_from_string(std::string_view s) {
    if (s == "UL") return ChapterClass::UL;
    if (s == "SCQ") return ChapterClass::SCQ;
    if (s == "NSCQ") return ChapterClass::NSCQ;
    if (s == "NSCP") return ChapterClass::NSCP;
    throw ParseError("unknown chapter class '" + std::string(s) + "'");
}

inline const std::array<std::string, 7>& video_categories() {
    static const std::array<std::string, 7> cats = {
        "Education",          "Entertainment", "Howto & Style", "News & Politics",
        "People & Blogs",     "Science & Technology", "Travel & Events"};
    return cats;
}

inline bool is_valid_category(std::string_view c) {
    for (const auto& k : video_categories())
        if (k == c) return true;
    return false;
}

struct ChapterRecord {
    std::string chapter_title;
    int64_t start_s = 0;
    int64_t end_s = 0; // exclusive; end_s > start_s
    std::string transcript;
    std::vector<std::string> frame_captions;
    std::optional<ChapterClass> label;
    std::optional<std::string> gold_question;

    bool operator==(const ChapterRecord&) const = default;
};

struct VideoRecord {
    std::string video_id;
    std::string title;
    std::string category;
    int64_t duration_s = 0;
    std::vector<ChapterRecord> chapters;

    bool operator==(const VideoRecord&) const = default;
};

// Deterministic train/validation/test partition of sample ids.
struct CorpusSplit {
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;
    uint64_t seed = 0;
};

// Identifies one chapter sample inside a corpus.
inline std::string sample_id(const std::string& video_id, size_t chapter_index) {
    return video_id + "#" + std::to_string(chapter_index);
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

inline void validate_chapter(const ChapterRecord& ch, const std::string& context) {
    if (ch.end_s <= ch.start_s) {
        throw ValidationError(context + ": chapter '" + ch.chapter_title + "' has end_s " +
                              std::to_string(ch.end_s) + " <= start_s " +
                              std::to_string(ch.start_s));
    }
    if (ch.start_s < 0) {
        throw ValidationError(context + ": chapter '" + ch.chapter_title +
                              "' has negative start_s");
    }
    if (ch.gold_question && !(ch.label && *ch.label != ChapterClass::UL)) {
        throw ValidationError(context + ": chapter '" + ch.chapter_title +
                              "' carries gold_question without an SCQ/NSCQ/NSCP label");
    }
}

inline void validate_video(const VideoRecord& v) {
    const std::string ctx = "video '" + v.video_id + "'";
    if (v.video_id.empty()) throw ValidationError("video with empty video_id");
    if (v.duration_s < 0) throw ValidationError(ctx + ": negative duration");
    if (!v.category.empty() && !is_valid_category(v.category)) {
        throw ValidationError(ctx + ": unknown category '" + v.category + "'");
    }
    for (size_t i = 0; i < v.chapters.size(); ++i) {
        const auto& ch = v.chapters[i];
        validate_chapter(ch, ctx);
        if (ch.end_s > v.duration_s) {
            throw ValidationError(ctx + ": chapter '" + ch.chapter_title +
                                  "' ends at " + std::to_string(ch.end_s) +
                                  " past duration " + std::to_string(v.duration_s));
        }
        if (i > 0 && ch.start_s < v.chapters[i - 1].end_s) {
            throw ValidationError(ctx + ": chapters '" + v.chapters[i - 1].chapter_title +
                                  "' [" + std::to_string(v.chapters[i - 1].start_s) + "," +
                                  std::to_string(v.chapters[i - 1].end_s) + ") and '" +
                                  ch.chapter_title + "' [" + std::to_string(ch.start_s) + "," +
                                  std::to_string(ch.end_s) + ") overlap or are out of order");
        }
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// One timestamp per whole second in [start_s, end_s).
inline std::vector<int64_t> frame_schedule(int64_t start_s, int64_t end_s) {
    if (end_s < start_s) throw DomainError("frame_schedule: end before start");
    std::vector<int64_t> ts;
    ts.reserve(static_cast<size_t>(end_s - start_s));
    for (int64_t t = start_s; t < end_s; ++t) ts.push_back(t);
    return ts;
}

// Newline-joined concatenation preserving frame order.
inline std::string aggregate_captions(const std::vector<std::string>& captions) {
    return text::join(captions, "\n");
}

struct TranscriptSegment {
    int64_t start_s = 0;
    int64_t end_s = 0;
    std::string text;
};

// Single-space join of all segments overlapping the half-open span, in time
// order. A segment straddling the boundary belongs to every span it overlaps.
inline std::string slice_transcript(const std::vector<TranscriptSegment>& segments,
                                    int64_t span_start, int64_t span_end) {
    std::vector<std::string> parts;
    for (const auto& seg : segments) {
        if (seg.start_s < span_end && seg.end_s > span_start) parts.push_back(seg.text);
    }
    return text::join(parts, " ");
}

namespace detail {

// Accepts integer/float seconds or "HH:MM:SS"/"MM:SS" strings; truncates to
// whole seconds.
inline int64_t parse_timestamp(const json& j, const std::string& context) {
    if (j.is_number_integer()) return j.get<int64_t>();
    if (j.is_number_float()) return static_cast<int64_t>(std::floor(j.get<double>()));
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        std::vector<int64_t> parts;
        std::stringstream ss(s);
        std::string field;
        while (std::getline(ss, field, ':')) {
            if (field.empty() || field.find_first_not_of("0123456789") != std::string::npos) {
                throw ParseError(context + ": malformed timestamp '" + s + "'");
            }
            parts.push_back(std::stoll(field));
        }
        if (parts.empty() || parts.size() > 3) {
            throw ParseError(context + ": malformed timestamp '" + s + "'");
        }
        int64_t total = 0;
        for (int64_t p : parts) total = total * 60 + p;
        return total;
    }
    throw ParseError(context + ": malformed timestamp of type " + std::string(j.type_name()));
}

inline std::string pick_string(const json& j, std::initializer_list<const char*> keys,
                               const std::string& context, bool required) {
    for (const char* k : keys) {
        if (j.contains(k) && j[k].is_string()) return j[k].get<std::string>();
    }
    if (required) {
        throw ParseError(context + ": missing required field '" + std::string(*keys.begin()) +
                         "'");
    }
    return {};
}

} // namespace detail

// Parses a raw video metadata document into a validated VideoRecord.
//
// Expected document shape (extra fields ignored):
//   { "video_id"|"id": str, "title": str, "category": str,
//     "duration_s"|"duration": seconds,
//     "chapters": [ { "chapter_title"|"title": str,
//                     "start_s"|"start_time": ts, ["end_s"|"end_time": ts] } ],
//     ["transcript_segments": [ {"start_s": ts, "end_s": ts, "text": str} ]] }
//
// Chapters lacking an explicit end inherit the next chapter's start; the last
// chapter inherits duration_s. Timestamps are truncated to whole seconds.
inline VideoRecord parse_metadata(const json& raw) {
    VideoRecord v;
    v.video_id = detail::pick_string(raw, {"video_id", "id"}, "metadata", true);
    const std::string ctx = "video '" + v.video_id + "'";
    v.title = detail::pick_string(raw, {"title"}, ctx, true);
    v.category = detail::pick_string(raw, {"category"}, ctx, false);
    if (!raw.contains("duration_s") && !raw.contains("duration")) {
        throw ParseError(ctx + ": missing required field 'duration_s'");
    }
    v.duration_s = detail::parse_timestamp(raw.contains("duration_s") ? raw["duration_s"]
                                                                      : raw["duration"],
                                           ctx + " duration");

    std::vector<TranscriptSegment> segments;
    if (raw.contains("transcript_segments")) {
        for (const auto& s : raw["transcript_segments"]) {
            TranscriptSegment seg;
            seg.start_s = detail::parse_timestamp(s.at("start_s"), ctx + " transcript segment");
            seg.end_s = s.contains("end_s")
                            ? detail::parse_timestamp(s["end_s"], ctx + " transcript segment")
                            : seg.start_s;
            seg.text = s.at("text").get<std::string>();
            segments.push_back(std::move(seg));
        }
    }

    const json chapters = raw.contains("chapters") ? raw["chapters"] : json::array();
    for (size_t i = 0; i < chapters.size(); ++i) {
        const auto& c = chapters[i];
        ChapterRecord ch;
        ch.chapter_title =
            detail::pick_string(c, {"chapter_title", "title"}, ctx + " chapter", true);
        const std::string cctx = ctx + " chapter '" + ch.chapter_title + "'";
        if (!c.contains("start_s") && !c.contains("start_time")) {
            throw ParseError(cctx + ": missing start timestamp");
        }
        ch.start_s = detail::parse_timestamp(c.contains("start_s") ? c["start_s"]
                                                                   : c["start_time"],
                                             cctx);
        if (c.contains("end_s") || c.contains("end_time")) {
            ch.end_s = detail::parse_timestamp(c.contains("end_s") ? c["end_s"] : c["end_time"],
                                               cctx);
        } else if (i + 1 < chapters.size()) {
            const auto& next = chapters[i + 1];
            if (!next.contains("start_s") && !next.contains("start_time")) {
                throw ParseError(ctx + ": chapter after '" + ch.chapter_title +
                                 "' has no start timestamp");
            }
            ch.end_s = detail::parse_timestamp(
                next.contains("start_s") ? next["start_s"] : next["start_time"], cctx);
        } else {
            ch.end_s = v.duration_s;
        }
        if (c.contains("label") && !c["label"].is_null()) {
            ch.label = chapter_class_from_string(c["label"].get<std::string>());
        }
        if (c.contains("gold_question") && !c["gold_question"].is_null()) {
            ch.gold_question = c["gold_question"].get<std::string>();
        }
        ch.transcript = slice_transcript(segments, ch.start_s, ch.end_s);
        v.chapters.push_back(std::move(ch));
    }

    validate_video(v);
    return v;
}

// ---------------------------------------------------------------------------
// Deterministic splitting
// ---------------------------------------------------------------------------

namespace detail {

// Explicit Fisher-Yates over mt19937_64; std::shuffle is not pinned by the
// standard so it cannot guarantee cross-platform seed determinism.
inline void deterministic_shuffle(std::vector<std::string>& ids, uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (size_t i = ids.size(); i > 1; --i) {
        uint64_t j = rng() % i;
        std::swap(ids[i - 1], ids[j]);
    }
}

} // namespace detail

// floor(0.8n) / floor(0.1n) / remainder, deterministic per seed.
inline CorpusSplit make_split(std::vector<std::string> sample_ids, uint64_t seed) {
    if (sample_ids.empty()) throw ValidationError("make_split: empty sample id list");
    {
        std::set<std::string> uniq(sample_ids.begin(), sample_ids.end());
        if (uniq.size() != sample_ids.size()) {
            throw ValidationError("make_split: duplicate sample ids");
        }
    }
    detail::deterministic_shuffle(sample_ids, seed);
    const size_t n = sample_ids.size();
    const size_t n_train = static_cast<size_t>(0.8 * static_cast<double>(n));
    const size_t n_val = static_cast<size_t>(0.1 * static_cast<double>(n));
    CorpusSplit split;
    split.seed = seed;
    split.train.assign(sample_ids.begin(), sample_ids.begin() + n_train);
    split.validation.assign(sample_ids.begin() + n_train, sample_ids.begin() + n_train + n_val);
    split.test.assign(sample_ids.begin() + n_train + n_val, sample_ids.end());
    return split;
}

// ---------------------------------------------------------------------------
// Corpus file format: UTF-8 JSON-lines, one VideoRecord per line.
// ---------------------------------------------------------------------------

inline json chapter_to_json(const ChapterRecord& ch) {
    json j{{"chapter_title", ch.chapter_title},
           {"start_s", ch.start_s},
           {"end_s", ch.end_s},
           {"transcript", ch.transcript},
           {"frame_captions", ch.frame_captions}};
    j["label"] = ch.label ? json(to_string(*ch.label)) : json(nullptr);
    j["gold_question"] = ch.gold_question ? json(*ch.gold_question) : json(nullptr);
    return j;
}

inline json video_to_json(const VideoRecord& v) {
    json chapters = json::array();
    for (const auto& ch : v.chapters) chapters.push_back(chapter_to_json(ch));
    return json{{"video_id", v.video_id},
                {"title", v.title},
                {"category", v.category},
                {"duration_s", v.duration_s},
                {"chapters", chapters}};
}

inline VideoRecord video_from_json(const json& j, const std::string& context) {
    VideoRecord v;
    auto need = [&](const char* field) -> const json& {
        if (!j.contains(field)) {
            throw ParseError(context + ": missing field " + field);
        }
        return j[field];
    };
    try {
        v.video_id = need("video_id").get<std::string>();
        v.title = need("title").get<std::string>();
        v.category = need("category").get<std::string>();
        v.duration_s = need("duration_s").get<int64_t>();
        for (size_t ci = 0; ci < need("chapters").size(); ++ci) {
            const auto& c = j["chapters"][ci];
            const std::string cctx = context + ", chapters[" + std::to_string(ci) + "]";
            ChapterRecord ch;
            auto cneed = [&](const char* field) -> const json& {
                if (!c.contains(field)) {
                    throw ParseError(cctx + ": missing field " + field);
                }
                return c[field];
            };
            ch.chapter_title = cneed("chapter_title").get<std::string>();
            ch.start_s = cneed("start_s").get<int64_t>();
            ch.end_s = cneed("end_s").get<int64_t>();
            ch.transcript = cneed("transcript").get<std::string>();
            ch.frame_captions = cneed("frame_captions").get<std::vector<std::string>>();
            if (c.contains("label") && !c["label"].is_null()) {
                ch.label = chapter_class_from_string(c["label"].get<std::string>());
            }
            if (c.contains("gold_question") && !c["gold_question"].is_null()) {
                ch.gold_question = c["gold_question"].get<std::string>();
            }
            v.chapters.push_back(std::move(ch));
        }
    } catch (const json::exception& e) {
        throw ParseError(context + ": " + e.what());
    }
    return v;
}

inline void save_corpus(const std::vector<VideoRecord>& records, const std::string& path) {
    std::set<std::string> seen;
    for (const auto& v : records) {
        validate_video(v);
        if (!seen.insert(v.video_id).second) {
            throw ValidationError("save_corpus: duplicate video_id '" + v.video_id + "'");
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("save_corpus: cannot open " + path);
    for (const auto& v : records) {
        out << video_to_json(v).dump() << "\n";
    }
    if (!out) throw Error("save_corpus: write failed for " + path);
}

inline std::vector<VideoRecord> load_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("load_corpus: cannot open " + path);
    std::vector<VideoRecord> records;
    std::set<std::string> seen;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string ctx = "line " + std::to_string(lineno);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(ctx + ": invalid JSON: " + e.what());
        }
        VideoRecord v = video_from_json(j, ctx);
        validate_video(v);
        if (!seen.insert(v.video_id).second) {
            throw ValidationError(ctx + ": duplicate video_id '" + v.video_id + "'");
        }
        records.push_back(std::move(v));
    }
    return records;
}

// ---------------------------------------------------------------------------
// Frame-caption sidecar: JSON-lines {video_id, timestamp, caption}, one row
// per sampled frame, produced offline by any captioner.
// ---------------------------------------------------------------------------

struct CaptionSidecar {
    // (video_id, timestamp) -> caption
    std::map<std::pair<std::string, int64_t>, std::string> captions;

    static CaptionSidecar load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("caption sidecar: cannot open " + path);
        CaptionSidecar sc;
        std::string line;
        size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            try {
                json j = json::parse(line);
                sc.captions[{j.at("video_id").get<std::string>(),
                             j.at("timestamp").get<int64_t>()}] =
                    j.at("caption").get<std::string>();
            } catch (const json::exception& e) {
                throw ParseError("caption sidecar line " + std::to_string(lineno) + ": " +
                                 e.what());
            }
        }
        return sc;
    }
};

// Fills each chapter's frame_captions from the sidecar, one entry per frame
// schedule timestamp (missing frames get empty strings so caption count
// always equals the schedule length).
inline void apply_captions(VideoRecord& video, const CaptionSidecar& sidecar) {
    for (auto& ch : video.chapters) {
        std::vector<std::string> caps;
        bool any = false;
        for (int64_t t : frame_schedule(ch.start_s, ch.end_s)) {
            auto it = sidecar.captions.find({video.video_id, t});
            if (it != sidecar.captions.end()) {
                caps.push_back(it->second);
                any = true;
            } else {
                caps.emplace_back();
            }
        }
        if (any) ch.frame_captions = std::move(caps);
    }
}

// All (sample id, video index, chapter index) triples with the given labels.
struct SampleRef {
    std::string id;
    size_t video_index;
    size_t chapter_index;
};

inline std::vector<SampleRef> eligible_samples(const std::vector<VideoRecord>& corpus,
                                               bool require_gold) {
    std::vector<SampleRef> out;
    for (size_t vi = 0; vi < corpus.size(); ++vi) {
        const auto& v = corpus[vi];
        for (size_t ci = 0; ci < v.chapters.size(); ++ci) {
            const auto& ch = v.chapters[ci];
            if (!ch.label) continue;
            if (*ch.label == ChapterClass::NSCQ || *ch.label == ChapterClass::NSCP) {
                if (require_gold && !ch.gold_question) continue;
                out.push_back({sample_id(v.video_id, ci), vi, ci});
            }
        }
    }
    return out;
}

} // namespace vqg
