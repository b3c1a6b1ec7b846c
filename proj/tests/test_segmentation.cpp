#include <doctest.h>

#include <cmath>
#include <sstream>

#include "vpt/errors.hpp"
#include "vpt/hashing.hpp"
#include "vpt/segmentation.hpp"

using namespace vpt;

namespace {

// n words, one per `spacing` seconds, each lasting `dur` seconds.
TimedTranscript
evenly_spaced(std::size_t n, double spacing = 1.0, double dur = 0.5, double t0 = 0.0)
{
  TimedTranscript t{"vid", "en", {}};
  for (std::size_t i = 0; i < n; ++i) {
    const double s = t0 + static_cast<double>(i) * spacing;
    t.words.push_back({"w" + std::to_string(i), s, s + dur});
  }
  return t;
}

Segment
span_segment(std::size_t words, double t_start, double t_end)
{
  Segment s;
  s.video_id = "v";
  s.word_span = {0, words};
  s.t_start = t_start;
  s.t_end = t_end;
  s.wpm = word_density(s);
  return s;
}

} // namespace

TEST_CASE("segment_transcript windows")
{
  SUBCASE("30 words into two windows")
  {
    const auto segs = segment_transcript(evenly_spaced(30));
    REQUIRE(segs.size() == 2);
    CHECK(segs[0].word_span == WordSpan{0, 15});
    CHECK(segs[1].word_span == WordSpan{15, 30});
    CHECK(segs[0].segment_index == 0);
    CHECK(segs[1].segment_index == 1);
    CHECK(segment_key(segs[1]) == "vid/1");
  }
  SUBCASE("empty transcript")
  {
    CHECK(segment_transcript(evenly_spaced(0)).empty());
  }
  SUBCASE("trailing words are dropped")
  {
    const auto segs = segment_transcript(evenly_spaced(20));
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].word_span == WordSpan{0, 15});
  }
  SUBCASE("overlapping stride")
  {
    const auto segs = segment_transcript(evenly_spaced(20), 15, 5);
    REQUIRE(segs.size() == 2);
    CHECK(segs[1].word_span == WordSpan{5, 20});
  }
  SUBCASE("caption and times")
  {
    const auto t = evenly_spaced(15, 2.0, 0.5, 3.0);
    const auto s = segment_transcript(t).at(0);
    CHECK(s.caption.rfind("w0 w1 w2", 0) == 0);
    CHECK(s.caption.substr(s.caption.size() - 3) == "w14");
    CHECK(s.t_start == 3.0);
    CHECK(s.t_end == 3.0 + 28.0 + 0.5);
  }
  SUBCASE("bad arguments")
  {
    CHECK_THROWS_AS(segment_transcript(evenly_spaced(30), 0, 15), ArgumentError);
    CHECK_THROWS_AS(segment_transcript(evenly_spaced(30), 15, 0), ArgumentError);
    CHECK_THROWS_AS(segment_transcript(evenly_spaced(30), 15, 15, 0), ArgumentError);
  }
  SUBCASE("unsorted transcript")
  {
    auto t = evenly_spaced(20);
    std::swap(t.words[3], t.words[4]);
    CHECK_THROWS_AS(segment_transcript(t), ValidationError);
  }
  SUBCASE("invalid words")
  {
    auto t = evenly_spaced(20);
    t.words[2].text = "two words";
    CHECK_THROWS_AS(segment_transcript(t), ValidationError);
    t = evenly_spaced(20);
    t.words[2].end_s = t.words[2].start_s - 0.1;
    CHECK_THROWS_AS(segment_transcript(t), ValidationError);
    t = evenly_spaced(20);
    t.video_id.clear();
    CHECK_THROWS_AS(segment_transcript(t), ValidationError);
  }
}

TEST_CASE("word_density")
{
  CHECK(word_density(span_segment(15, 0.0, 30.0)) == doctest::Approx(15.0 / 0.5));
  CHECK(word_density(span_segment(15, 10.0, 70.0)) == doctest::Approx(15.0));
  CHECK(word_density(span_segment(15, 5.0, 20.0)) == doctest::Approx(60.0));

  const auto degenerate = span_segment(15, 4.0, 4.0);
  CHECK(is_infinite_density(word_density(degenerate)));
  CHECK(filter_segments({degenerate}, 1e9).size() == 1);
}

TEST_CASE("filter_segments")
{
  const auto s15 = span_segment(15, 0.0, 60.0);
  const auto s30 = span_segment(15, 0.0, 30.0);
  const auto s60 = span_segment(15, 0.0, 15.0);
  const auto kept = filter_segments({s15, s30, s60}, 30.0);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0] == s30);
  CHECK(kept[1] == s60);
  CHECK(filter_segments({}, 30.0).empty());
  CHECK(filter_segments({s15, s30, s60}, 0.0001).size() == 3);
}

TEST_CASE("sample_frame_times")
{
  auto s = span_segment(15, 10.0, 20.0);
  CHECK(sample_frame_times(s, 1) == std::vector<double>{15.0});
  CHECK(sample_frame_times(s, 2) == std::vector<double>{12.5, 17.5});
  s = span_segment(15, 5.0, 5.0);
  CHECK(sample_frame_times(s, 3) == std::vector<double>{5.0, 5.0, 5.0});
  CHECK_THROWS_AS(sample_frame_times(s, 0), ArgumentError);
}

TEST_CASE("segmentation properties over random transcripts")
{
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    TimedTranscript t{"v" + std::to_string(trial), "en", {}};
    const std::size_t n = rng.uniform_index(70);
    double clock = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = rng.uniform();
      t.words.push_back({"x", clock, clock + d});
      clock += d + rng.uniform() * 3.0;
    }
    const std::size_t window = 1 + rng.uniform_index(16);
    const auto segs = segment_transcript(t, window, window, 1 + rng.uniform_index(3));

    // Non-overlapping windows tile a prefix of length floor(n/w)*w.
    std::size_t covered = 0;
    for (const auto& s : segs) {
      CHECK(s.word_span.begin == covered);
      CHECK(s.word_count() == window);
      covered = s.word_span.end;
      for (double ft : s.frame_times) {
        CHECK(ft >= s.t_start);
        CHECK(ft <= s.t_end);
      }
    }
    CHECK(covered == (n / window) * window);

    const double thr = rng.uniform() * 120.0;
    const auto once = filter_segments(segs, thr);
    CHECK(filter_segments(once, thr) == once);
    CHECK(segment_transcript(t, window, window) == segment_transcript(t, window, window));
  }
}

TEST_CASE("video level helpers")
{
  const auto t = evenly_spaced(31, 2.0, 0.0); // 31 words over 60 s
  CHECK(video_word_density(t) == doctest::Approx(31.0));
  CHECK(video_word_density(evenly_spaced(0)) == 0.0);
  CHECK(matches_language(t, "en"));
  CHECK_FALSE(matches_language(t, "de"));
}

TEST_CASE("transcript and segment files")
{
  const std::string text = "{\"video_id\": \"a\", \"lang\": \"en\"}\n"
                           "{\"w\": \"hello\", \"s\": 0.0, \"e\": 0.4}\n"
                           "\n"
                           "{\"w\": \"world\", \"s\": 0.5, \"e\": 0.9}\n"
                           "{\"video_id\": \"b\", \"lang\": \"fr\"}\n";
  std::istringstream in(text);
  const auto ts = read_transcripts(in);
  REQUIRE(ts.size() == 2);
  CHECK(ts[0].words.size() == 2);
  CHECK(ts[0].words[1].text == "world");
  CHECK(ts[1].language == "fr");
  CHECK(ts[1].words.empty());

  std::ostringstream out;
  write_transcripts(out, ts);
  std::istringstream back(out.str());
  const auto again = read_transcripts(back);
  CHECK(again.size() == 2);
  CHECK(again[0].words[0].end_s == 0.4);

  SUBCASE("errors carry the line number")
  {
    std::string bad;
    for (int i = 0; i < 6; ++i) {
      bad += i == 0 ? "{\"video_id\": \"a\", \"lang\": \"en\"}\n"
                    : "{\"w\": \"x\", \"s\": 0, \"e\": 1}\n";
    }
    bad += "{\"w\": \"x\", \"s\": oops}\n";
    std::istringstream b(bad);
    try {
      read_transcripts(b);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 7);
      CHECK(std::string(e.what()).find("line 7") != std::string::npos);
    }
  }

  SUBCASE("segments roundtrip, infinite wpm as null")
  {
    auto t = evenly_spaced(30);
    for (std::size_t i = 15; i < 30; ++i) {
      t.words[i].start_s = t.words[i].end_s = 100.0;
    }
    const auto segs = segment_transcript(t);
    std::ostringstream so;
    write_segments(so, segs);
    CHECK(so.str().find("\"wpm\":null") != std::string::npos);
    std::istringstream si(so.str());
    CHECK(read_segments(si) == segs);
  }
}
