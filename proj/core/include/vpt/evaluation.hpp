#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vpt/backbone.hpp"
#include "vpt/objectives.hpp"

namespace vpt {

// Lowercase (ASCII), drop ASCII punctuation, collapse and trim whitespace,
// then drop leading articles (a, an, the) while another word follows.
std::string normalize_answer(std::string_view text);

// min(#matching human answers / 3, 1), compared after normalization.
// Throws ArgumentError unless exactly 10 answers are given.
double vqa_accuracy(std::string_view prediction, std::span<const std::string> human_answers);

// True iff every normalized human answer is "yes" or "no".
bool is_yes_no(std::span<const std::string> human_answers);
bool is_yes_no(const VqaExample& example);
bool is_yes_no(const VqaRecord& record);

struct CollapseReport
{
  std::map<std::string, std::size_t> histogram; // normalized answer -> count
  double entropy_nats = 0.0;
  double top_share = 0.0;
  std::string top_answer;
  bool collapsed = false; // top_share > 0.5
};

inline constexpr double kCollapseShare = 0.5;

// Throws ArgumentError on an empty list.
CollapseReport collapse_report(std::span<const std::string> predictions);

struct EvalOptions
{
  ModalityAblation ablation;
  std::size_t max_answer_tokens = 16;
};

struct EvalResult
{
  std::vector<double> scores;           // per scored example
  std::vector<std::string> predictions; // raw decoded text, "" for failures
  double mean = 0.0;
  std::size_t failed = 0;
  CollapseReport collapse;
};

// Greedy-decodes each example, scores it with vqa_accuracy and
// aggregates. Examples that fail to decode are counted in `failed` and
// left out of the mean.
EvalResult evaluate(const Backbone& model, const std::vector<VqaExample>& dataset,
                    const EvalOptions& options = {});

} // namespace vpt
