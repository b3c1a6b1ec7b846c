#include "vpt/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "jsonl.hpp"
#include "vpt/errors.hpp"

namespace vpt {

namespace {

bool
has_whitespace(const std::string& s)
{
  return s.find_first_of(" \t\r\n\v\f") != std::string::npos;
}

std::string
join_words(const std::vector<TimedWord>& words, WordSpan span)
{
  std::string out;
  for (std::size_t i = span.begin; i < span.end; ++i) {
    if (i != span.begin) {
      out += ' ';
    }
    out += words[i].text;
  }
  return out;
}

} // namespace

void
validate_transcript(const TimedTranscript& transcript)
{
  if (transcript.video_id.empty()) {
    throw ValidationError("transcript has empty video_id");
  }
  const auto& words = transcript.words;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto& w = words[i];
    if (w.text.empty() || has_whitespace(w.text)) {
      throw ValidationError(transcript.video_id + ": word " + std::to_string(i)
                            + " is empty or contains whitespace");
    }
    if (!(w.start_s >= 0.0) || !(w.end_s >= w.start_s)) {
      throw ValidationError(transcript.video_id + ": word " + std::to_string(i)
                            + " has invalid timing");
    }
    if (i > 0 && w.start_s < words[i - 1].start_s) {
      throw ValidationError(transcript.video_id + ": words not sorted by start time at index "
                            + std::to_string(i));
    }
  }
}

std::vector<Segment>
segment_transcript(const TimedTranscript& transcript,
                   std::size_t window,
                   std::size_t stride,
                   std::size_t frames_per_segment)
{
  if (window == 0 || stride == 0) {
    throw ArgumentError("segment_transcript: window and stride must be >= 1");
  }
  if (frames_per_segment == 0) {
    throw ArgumentError("segment_transcript: frames_per_segment must be >= 1");
  }
  validate_transcript(transcript);

  std::vector<Segment> out;
  const auto& words = transcript.words;
  for (std::size_t offset = 0; offset + window <= words.size(); offset += stride) {
    Segment seg;
    seg.video_id = transcript.video_id;
    seg.segment_index = out.size();
    seg.word_span = {offset, offset + window};
    seg.caption = join_words(words, seg.word_span);
    seg.t_start = words[offset].start_s;
    seg.t_end = words[offset + window - 1].end_s;
    seg.wpm = word_density(seg);
    seg.frame_times = sample_frame_times(seg, frames_per_segment);
    out.push_back(std::move(seg));
  }
  return out;
}

double
word_density(const Segment& segment)
{
  if (segment.word_count() == 0) {
    throw ArgumentError("word_density: segment has no words");
  }
  const double minutes = (segment.t_end - segment.t_start) / 60.0;
  if (!(minutes > 0.0)) {
    return std::numeric_limits<double>::infinity();
  }
  return static_cast<double>(segment.word_count()) / minutes;
}

bool
is_infinite_density(double wpm) noexcept
{
  return std::isinf(wpm) && wpm > 0.0;
}

std::vector<Segment>
filter_segments(const std::vector<Segment>& segments, double min_wpm)
{
  std::vector<Segment> kept;
  for (const auto& s : segments) {
    if (word_density(s) >= min_wpm) {
      kept.push_back(s);
    }
  }
  return kept;
}

std::vector<double>
sample_frame_times(const Segment& segment, std::size_t k)
{
  if (k == 0) {
    throw ArgumentError("sample_frame_times: k must be >= 1");
  }
  if (!(segment.t_end >= segment.t_start)) {
    throw ArgumentError("sample_frame_times: t_end < t_start");
  }
  const double span = segment.t_end - segment.t_start;
  std::vector<double> times(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double t = segment.t_start
                     + (static_cast<double>(i) + 0.5) * span / static_cast<double>(k);
    // Rounding can push the last sample a ulp past t_end.
    times[i] = std::clamp(t, segment.t_start, segment.t_end);
  }
  return times;
}

double
video_word_density(const TimedTranscript& transcript)
{
  if (transcript.words.empty()) {
    return 0.0;
  }
  Segment whole;
  whole.word_span = {0, transcript.words.size()};
  whole.t_start = transcript.words.front().start_s;
  whole.t_end = transcript.words.back().end_s;
  return word_density(whole);
}

bool
matches_language(const TimedTranscript& transcript, const std::string& language)
{
  return transcript.language == language;
}

std::vector<TimedTranscript>
read_transcripts(std::istream& in)
{
  using detail::Json;
  std::vector<TimedTranscript> out;
  detail::for_each_jsonl(in, [&](std::size_t line, const Json& rec) {
    if (!rec.is_object()) {
      throw ParseError(line, "expected a JSON object");
    }
    if (rec.contains("video_id")) {
      TimedTranscript t;
      t.video_id = detail::require_string(rec, "video_id", line);
      t.language = rec.contains("lang") ? detail::require_string(rec, "lang", line) : "";
      if (t.video_id.empty()) {
        throw ParseError(line, "empty video_id");
      }
      out.push_back(std::move(t));
      return;
    }
    if (out.empty()) {
      throw ParseError(line, "word record before any {\"video_id\", \"lang\"} header");
    }
    TimedWord w;
    w.text = detail::require_string(rec, "w", line);
    w.start_s = detail::require_number(rec, "s", line);
    w.end_s = detail::require_number(rec, "e", line);
    if (w.text.empty() || has_whitespace(w.text)) {
      throw ParseError(line, "word text is empty or contains whitespace");
    }
    if (!(w.start_s >= 0.0) || !(w.end_s >= w.start_s)) {
      throw ParseError(line, "word timing must satisfy 0 <= s <= e");
    }
    out.back().words.push_back(std::move(w));
  });
  return out;
}

void
write_transcripts(std::ostream& out, const std::vector<TimedTranscript>& transcripts)
{
  using detail::Json;
  for (const auto& t : transcripts) {
    detail::write_jsonl(out, Json{{"video_id", t.video_id}, {"lang", t.language}});
    for (const auto& w : t.words) {
      detail::write_jsonl(out, Json{{"w", w.text}, {"s", w.start_s}, {"e", w.end_s}});
    }
  }
}

std::string
segment_key(const Segment& segment)
{
  return segment.video_id + "/" + std::to_string(segment.segment_index);
}

std::vector<Segment>
read_segments(std::istream& in)
{
  using detail::Json;
  std::vector<Segment> out;
  detail::for_each_jsonl(in, [&](std::size_t line, const Json& rec) {
    Segment s;
    s.video_id = detail::require_string(rec, "video_id", line);
    s.segment_index = rec.at("segment_index").get<std::size_t>();
    s.word_span.begin = rec.at("word_begin").get<std::size_t>();
    s.word_span.end = rec.at("word_end").get<std::size_t>();
    s.caption = detail::require_string(rec, "caption", line);
    s.t_start = detail::require_number(rec, "t_start", line);
    s.t_end = detail::require_number(rec, "t_end", line);
    s.frame_times = rec.at("frame_times").get<std::vector<double>>();
    if (s.word_span.end < s.word_span.begin) {
      throw ParseError(line, "word_end < word_begin");
    }
    // wpm is serialized as null when infinite; recompute for exactness.
    s.wpm = s.word_count() > 0 ? word_density(s) : 0.0;
    out.push_back(std::move(s));
  });
  return out;
}

void
write_segments(std::ostream& out, const std::vector<Segment>& segments)
{
  using detail::Json;
  for (const auto& s : segments) {
    Json rec{{"video_id", s.video_id},
             {"segment_index", s.segment_index},
             {"word_begin", s.word_span.begin},
             {"word_end", s.word_span.end},
             {"caption", s.caption},
             {"t_start", s.t_start},
             {"t_end", s.t_end},
             {"frame_times", s.frame_times}};
    rec["wpm"] = std::isfinite(s.wpm) ? Json(s.wpm) : Json(nullptr);
    detail::write_jsonl(out, rec);
  }
}

} // namespace vpt
