#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace vpt {

inline constexpr std::size_t kDefaultWindowWords = 15;
inline constexpr double kDefaultMinWordsPerMinute = 30.0;

struct TimedWord
{
  std::string text;
  double start_s = 0.0;
  double end_s = 0.0;
};

struct TimedTranscript
{
  std::string video_id;
  std::string language;
  std::vector<TimedWord> words;
};

// Half-open index range [begin, end) into a transcript's word list.
struct WordSpan
{
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool operator==(const WordSpan&) const = default;
};

struct Segment
{
  std::string video_id;
  // Ordinal within segment_transcript()'s output for this video, before
  // any filtering.
  std::size_t segment_index = 0;
  WordSpan word_span;
  std::string caption;
  double t_start = 0.0;
  double t_end = 0.0;
  std::vector<double> frame_times;
  // Infinite when t_end == t_start (see word_density).
  double wpm = 0.0;

  std::size_t word_count() const noexcept { return word_span.size(); }
  bool operator==(const Segment&) const = default;
};

// Throws ValidationError when a word is empty, has whitespace, has a
// negative start, ends before it starts, or the words are not sorted by
// start time; also when video_id is empty.
void validate_transcript(const TimedTranscript& transcript);

// Windows of exactly `window` words at offsets 0, stride, 2*stride, ...
// A trailing remainder shorter than `window` is dropped. Each segment gets
// `frames_per_segment` midpoint-rule frame times.
std::vector<Segment> segment_transcript(const TimedTranscript& transcript,
                                        std::size_t window = kDefaultWindowWords,
                                        std::size_t stride = kDefaultWindowWords,
                                        std::size_t frames_per_segment = 1);

// Words per minute over first-word-start .. last-word-end. A zero-length
// span yields +infinity, which passes every threshold.
double word_density(const Segment& segment);

bool is_infinite_density(double wpm) noexcept;

// Keeps segments whose word_density() >= min_wpm, preserving order.
std::vector<Segment> filter_segments(const std::vector<Segment>& segments,
                                     double min_wpm = kDefaultMinWordsPerMinute);

// Midpoints of k equal sub-spans of [t_start, t_end].
std::vector<double> sample_frame_times(const Segment& segment, std::size_t k);

// Whole-video density: word count over first-start .. last-end.
double video_word_density(const TimedTranscript& transcript);

bool matches_language(const TimedTranscript& transcript, const std::string& language);

// Transcript file: JSONL where {"video_id", "lang"} header records start a
// transcript and {"w", "s", "e"} records append words to the current one.
std::vector<TimedTranscript> read_transcripts(std::istream& in);
void write_transcripts(std::ostream& out, const std::vector<TimedTranscript>& transcripts);

// "<video_id>/<segment_index>", the key used for per-segment sidecars.
std::string segment_key(const Segment& segment);

std::vector<Segment> read_segments(std::istream& in);
void write_segments(std::ostream& out, const std::vector<Segment>& segments);

} // namespace vpt
