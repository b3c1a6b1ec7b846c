#include "vpt/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "vpt/errors.hpp"

namespace vpt {

namespace {

bool
is_ascii_punct(unsigned char c)
{
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96)
         || (c >= 123 && c <= 126);
}

bool
is_space(unsigned char c)
{
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

bool
is_article(std::string_view w)
{
  return w == "a" || w == "an" || w == "the";
}

} // namespace

std::string
normalize_answer(std::string_view text)
{
  std::vector<std::string> words;
  std::string cur;
  for (unsigned char c : text) {
    if (is_space(c)) {
      if (!cur.empty()) {
        words.push_back(std::move(cur));
        cur.clear();
      }
      continue;
    }
    if (is_ascii_punct(c)) {
      continue;
    }
    if (c >= 'A' && c <= 'Z') {
      c = static_cast<unsigned char>(c - 'A' + 'a');
    }
    cur.push_back(static_cast<char>(c));
  }
  if (!cur.empty()) {
    words.push_back(std::move(cur));
  }

  std::size_t first = 0;
  while (words.size() - first > 1 && is_article(words[first])) {
    ++first;
  }
  std::string out;
  for (std::size_t i = first; i < words.size(); ++i) {
    if (i != first) {
      out += ' ';
    }
    out += words[i];
  }
  return out;
}

double
vqa_accuracy(std::string_view prediction, std::span<const std::string> human_answers)
{
  if (human_answers.size() != kVqaHumanAnswers) {
    throw ArgumentError("vqa_accuracy needs exactly 10 human answers, got "
                        + std::to_string(human_answers.size()));
  }
  const auto pred = normalize_answer(prediction);
  std::size_t matches = 0;
  for (const auto& a : human_answers) {
    if (normalize_answer(a) == pred) {
      ++matches;
    }
  }
  return std::min(static_cast<double>(matches) / 3.0, 1.0);
}

bool
is_yes_no(std::span<const std::string> human_answers)
{
  if (human_answers.empty()) {
    return false;
  }
  return std::all_of(human_answers.begin(), human_answers.end(), [](const std::string& a) {
    const auto n = normalize_answer(a);
    return n == "yes" || n == "no";
  });
}

bool
is_yes_no(const VqaExample& example)
{
  return is_yes_no(example.human_answers);
}

bool
is_yes_no(const VqaRecord& record)
{
  return is_yes_no(record.answers);
}

CollapseReport
collapse_report(std::span<const std::string> predictions)
{
  if (predictions.empty()) {
    throw ArgumentError("collapse_report needs at least one prediction");
  }
  CollapseReport r;
  for (const auto& p : predictions) {
    ++r.histogram[normalize_answer(p)];
  }
  const double total = static_cast<double>(predictions.size());
  std::size_t top = 0;
  for (const auto& [answer, count] : r.histogram) {
    const double p = static_cast<double>(count) / total;
    r.entropy_nats -= p * std::log(p);
    // Map order makes the tie-break (smallest answer) order independent.
    if (count > top) {
      top = count;
      r.top_answer = answer;
    }
  }
  r.entropy_nats = std::max(r.entropy_nats, 0.0);
  r.top_share = static_cast<double>(top) / total;
  r.collapsed = r.top_share > kCollapseShare;
  return r;
}

EvalResult
evaluate(const Backbone& model, const std::vector<VqaExample>& dataset, const EvalOptions& options)
{
  EvalResult result;
  result.predictions.reserve(dataset.size());
  std::vector<std::string> decoded_ok;
  for (const auto& ex : dataset) {
    try {
      const auto enc = encoder_forward(vqa_fused_input(ex, options.ablation), model);
      const auto tokens = greedy_decode(enc.hidden, model, options.max_answer_tokens);
      auto text = detokenize(tokens);
      result.scores.push_back(vqa_accuracy(text, ex.human_answers));
      decoded_ok.push_back(text);
      result.predictions.push_back(std::move(text));
    } catch (const Error&) {
      ++result.failed;
      result.predictions.emplace_back();
    }
  }
  double sum = 0.0;
  for (double s : result.scores) {
    sum += s;
  }
  result.mean = result.scores.empty() ? 0.0 : sum / static_cast<double>(result.scores.size());
  if (!decoded_ok.empty()) {
    result.collapse = collapse_report(decoded_ok);
  }
  return result;
}

} // namespace vpt
