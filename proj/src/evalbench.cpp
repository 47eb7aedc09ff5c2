#include "lcsynth/evalbench.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <unordered_map>

#include "lcsynth/parallel.hpp"
#include "lcsynth/random.hpp"
#include "lcsynth/text.hpp"

namespace lcsynth {

namespace {

bool ends_sentence(char c) { return c == '.' || c == '?' || c == '!'; }

std::size_t first_non_space(std::string_view text, std::size_t from) {
  while (from < text.size() && is_space(text[from])) ++from;
  return from;
}

}  // namespace

HaystackSource::HaystackSource(const Corpus& essays, std::size_t min_tokens, std::uint64_t seed)
    : tok_(essays.tokenizer_ptr()) {
  if (essays.empty()) throw EvalError("haystack: essay corpus is empty");
  std::vector<std::size_t> order(essays.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<std::size_t> essay_starts;  // char offsets
  std::size_t next = 0;
  std::size_t counted = 0;
  for (;;) {
    while (next < order.size() && (counted < min_tokens || next == 0)) {
      const auto& doc = essays[order[next++]];
      if (!text_.empty()) text_ += "\n\n";
      essay_starts.push_back(text_.size());
      text_ += doc.text;
      counted += doc.token_count;
    }
    spans_ = tok_->spans(text_);
    if (spans_.size() >= min_tokens) break;
    if (next == order.size()) {
      throw EvalError("haystack: essays provide " + std::to_string(spans_.size()) +
                      " tokens, need " + std::to_string(min_tokens));
    }
    counted = spans_.size();
  }

  std::size_t essay = 0;
  for (std::size_t i = 0; i < spans_.size(); ++i) {
    const auto start = first_non_space(text_, spans_[i].begin);
    if (start >= spans_[i].end) continue;
    while (essay < essay_starts.size() && essay_starts[essay] < start) ++essay;
    bool boundary = i == 0 || (essay < essay_starts.size() && essay_starts[essay] == start);
    if (!boundary && start > 0 && is_space(text_[start - 1])) {
      std::size_t p = start;
      while (p > 0 && is_space(text_[p - 1])) --p;
      boundary = p > 0 && ends_sentence(text_[p - 1]);
    }
    if (boundary) sentence_starts_.push_back(i);
  }
}

NeedleCase build_needle_case(const HaystackSource& source, std::size_t context_len,
                             double depth_fraction, std::string_view needle,
                             std::string_view question) {
  if (!(depth_fraction >= 0.0 && depth_fraction <= 1.0)) {
    throw EvalError("needle depth must be in [0, 1]");
  }
  if (trim(needle).empty()) throw EvalError("needle is empty");
  const auto& tok = source.tokenizer();
  const std::size_t needle_tokens = tok.count(needle);
  if (context_len <= needle_tokens) {
    throw EvalError("context length " + std::to_string(context_len) +
                    " leaves no room for the needle");
  }
  const std::size_t hay_tokens = context_len - needle_tokens;
  if (hay_tokens > source.token_count()) {
    throw EvalError("haystack has " + std::to_string(source.token_count()) + " tokens, need " +
                    std::to_string(hay_tokens));
  }
  const std::string_view text = source.text();
  const auto spans = source.spans();
  const std::size_t hay_end = spans[hay_tokens - 1].end;

  // Candidate insertion points: sentence starts inside the haystack, plus its end.
  const auto starts = source.sentence_starts();
  const auto limit = std::lower_bound(starts.begin(), starts.end(), hay_tokens);
  const double target = depth_fraction * static_cast<double>(hay_tokens);
  std::size_t chosen = hay_tokens;
  double best = std::abs(static_cast<double>(hay_tokens) - target);
  auto it = std::lower_bound(starts.begin(), limit, static_cast<std::size_t>(std::floor(target)));
  for (auto cand : {it == starts.begin() ? it : it - 1, it}) {
    if (cand == limit) continue;
    const double d = std::abs(static_cast<double>(*cand) - target);
    if (d < best || (d == best && *cand < chosen)) {
      best = d;
      chosen = *cand;
    }
  }

  NeedleCase c;
  c.needle = std::string(needle);
  c.question = std::string(question);
  c.context_len = context_len;
  c.depth_fraction = depth_fraction;
  c.needle_token_offset = chosen;
  c.context.reserve(hay_end + needle.size() + 2);
  if (chosen == hay_tokens) {
    c.context.append(text.substr(0, hay_end));
    c.context.push_back(' ');
    c.needle_char_offset = c.context.size();
    c.context.append(needle);
  } else {
    const auto at = first_non_space(text, spans[chosen].begin);
    c.context.append(text.substr(0, at));
    c.needle_char_offset = c.context.size();
    c.context.append(needle);
    c.context.push_back(' ');
    c.context.append(text.substr(at, hay_end - at));
  }
  const auto first = c.context.find(needle);
  if (first == std::string::npos || c.context.find(needle, first + 1) != std::string::npos) {
    throw EvalError("needle is not unique in the assembled context");
  }
  c.context_tokens = tok.whitespace_additive() ? hay_tokens + needle_tokens : tok.count(c.context);
  return c;
}

NeedleCase build_needle_case(const Corpus& essays, std::size_t context_len, double depth_fraction,
                             std::string_view needle, std::uint64_t seed) {
  const HaystackSource source(essays, context_len, seed);
  return build_needle_case(source, context_len, depth_fraction, needle);
}

std::string needle_prompt(const NeedleCase& c) {
  std::string p;
  p.reserve(c.context.size() + c.question.size() + 32);
  p += c.context;
  p += "\n\nQuestion: ";
  p += c.question;
  p += "\nAnswer:";
  return p;
}

namespace {

// Lowercases and strips non-alphanumeric characters from both ends.
void normalize_into(std::string_view word, std::string& out) {
  std::size_t b = 0;
  std::size_t e = word.size();
  while (b < e && !std::isalnum(static_cast<unsigned char>(word[b]))) ++b;
  while (e > b && !std::isalnum(static_cast<unsigned char>(word[e - 1]))) --e;
  out.clear();
  for (std::size_t i = b; i < e; ++i) {
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(word[i]))));
  }
}

template <typename Fn>
void for_each_word(std::string_view text, Fn&& fn) {
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const auto start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start && !fn(text.substr(start, i - start))) return;
  }
}

}  // namespace

double needle_recall(std::string_view needle, std::string_view output) {
  std::unordered_map<std::string, std::size_t> wanted;
  std::size_t total = 0;
  std::string buf;
  for_each_word(needle, [&](std::string_view w) {
    normalize_into(w, buf);
    if (!buf.empty()) {
      ++wanted[buf];
      ++total;
    }
    return true;
  });
  if (total == 0) throw EvalError("needle has no words");
  std::size_t found = 0;
  for_each_word(output, [&](std::string_view w) {
    normalize_into(w, buf);
    if (buf.empty()) return true;
    const auto it = wanted.find(buf);
    if (it != wanted.end() && it->second > 0) {
      --it->second;
      ++found;
    }
    return found < total;
  });
  return static_cast<double>(found) / static_cast<double>(total);
}

std::vector<std::size_t> default_needle_lengths(std::size_t max_len, std::size_t step) {
  if (step < 1) throw EvalError("needle length step must be >= 1");
  std::vector<std::size_t> out;
  for (std::size_t len = step; len <= max_len; len += step) out.push_back(len);
  return out;
}

std::vector<double> default_needle_depths(std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {0.0};
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

void NeedleGridResult::write_csv(std::ostream& out) const {
  out << "length,depth,recall\n";
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    for (std::size_t j = 0; j < depths.size(); ++j) {
      out << lengths[i] << ',' << format_decimal(depths[j]) << ',' << scores[i][j] << '\n';
    }
  }
}

std::size_t NeedleGridResult::failed_cells() const {
  std::size_t n = 0;
  for (const auto& row : scores) n += static_cast<std::size_t>(std::count(row.begin(), row.end(), -1.0));
  return n;
}

NeedleGridResult run_needle_grid(const HaystackSource& source, LlmGateway& gateway,
                                 CallLedger& ledger, std::span<const std::size_t> lengths,
                                 std::span<const double> depths,
                                 const NeedleGridOptions& options) {
  if (lengths.empty() || depths.empty()) throw EvalError("needle grid is empty");
  NeedleGridResult r;
  r.lengths.assign(lengths.begin(), lengths.end());
  r.depths.assign(depths.begin(), depths.end());
  r.scores.assign(lengths.size(), std::vector<double>(depths.size(), -1.0));
  if (options.keep_cases) r.cases.assign(lengths.size(), std::vector<NeedleCase>(depths.size()));
  // Case construction errors are configuration errors, so check them up front.
  build_needle_case(source, *std::max_element(lengths.begin(), lengths.end()), 0.0,
                    options.needle, options.question);

  const std::size_t cells = lengths.size() * depths.size();
  parallel_for(cells, gateway.max_in_flight(), [&](std::size_t k) {
    const auto i = k / depths.size();
    const auto j = k % depths.size();
    auto c = build_needle_case(source, lengths[i], depths[j], options.needle, options.question);
    try {
      const auto reply =
          gateway.complete(make_request(StepKind::needle, needle_prompt(c)), ledger).response;
      r.scores[i][j] = needle_recall(c.needle, reply);
    } catch (const std::exception&) {
      r.scores[i][j] = -1.0;
    }
    if (options.keep_cases) {
      c.context.clear();
      c.context.shrink_to_fit();
      r.cases[i][j] = std::move(c);
    }
  });
  return r;
}

double LengthCurveFit::predict(double x) const { return std::exp(a * std::log(x + b) + c); }

double log_mse(const LengthCurveFit& fit, std::span<const LengthPoint> points) {
  if (points.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& p : points) {
    if (!(p.x + fit.b > 0.0)) return std::numeric_limits<double>::infinity();
    const double r = std::log(p.y) - (fit.a * std::log(p.x + fit.b) + fit.c);
    sum += r * r;
  }
  return sum / static_cast<double>(points.size());
}

namespace {

// Least-squares (a, c) for a fixed b.
LengthCurveFit solve_linear(std::span<const LengthPoint> points, double b) {
  const auto n = static_cast<double>(points.size());
  double mz = 0.0;
  double mw = 0.0;
  for (const auto& p : points) {
    mz += std::log(p.x + b);
    mw += std::log(p.y);
  }
  mz /= n;
  mw /= n;
  double szz = 0.0;
  double szw = 0.0;
  for (const auto& p : points) {
    const double dz = std::log(p.x + b) - mz;
    szz += dz * dz;
    szw += dz * (std::log(p.y) - mw);
  }
  LengthCurveFit f;
  f.b = b;
  f.a = szz > 1e-300 ? szw / szz : 0.0;
  f.c = mw - f.a * mz;
  f.residual = log_mse(f, points);
  return f;
}

}  // namespace

LengthCurveFit fit_length_curve(std::span<const LengthPoint> points) {
  if (points.size() < 3) {
    throw EvalError("curve fit needs at least 3 points, got " + std::to_string(points.size()));
  }
  double min_x = std::numeric_limits<double>::infinity();
  double max_x = 0.0;
  for (const auto& p : points) {
    if (!(p.x > 0.0) || !(p.y > 0.0) || !std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw EvalError("curve fit needs positive finite x and y");
    }
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
  }
  // Search over t = b + min_x, which must stay positive.
  const double t_lo = min_x * 1e-6;
  const double t_hi = 10.0 * max_x + min_x;
  const auto at = [&](double log_t) { return solve_linear(points, std::exp(log_t) - min_x); };

  constexpr int kGrid = 2000;
  const double l_lo = std::log(t_lo);
  const double l_hi = std::log(t_hi);
  const double step = (l_hi - l_lo) / kGrid;
  int best_i = 0;
  LengthCurveFit best = at(l_lo);
  for (int i = 1; i <= kGrid; ++i) {
    auto f = at(l_lo + step * i);
    if (f.residual < best.residual) {
      best = f;
      best_i = i;
    }
  }
  // Golden-section refinement around the best grid cell.
  double lo = l_lo + step * std::max(best_i - 1, 0);
  double hi = l_lo + step * std::min(best_i + 1, kGrid);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - g * (hi - lo);
  double x2 = lo + g * (hi - lo);
  auto f1 = at(x1);
  auto f2 = at(x2);
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    if (f1.residual <= f2.residual) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = at(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = at(x2);
    }
  }
  for (const auto& f : {f1, f2}) {
    if (f.residual < best.residual) best = f;
  }
  return best;
}

void LengthReport::write_csv(std::ostream& out, std::span<const LengthPoint> points) const {
  out << "x,y\n";
  for (const auto& p : points) out << p.x << ',' << p.y << '\n';
}

LengthReport length_report(std::span<const LengthPoint> points) {
  if (points.empty()) throw EvalError("length report needs at least one sample");
  LengthReport r;
  r.n = points.size();
  for (const auto& p : points) {
    r.mean_required += p.x;
    r.mean_output += p.y;
  }
  r.mean_required /= static_cast<double>(r.n);
  r.mean_output /= static_cast<double>(r.n);
  try {
    r.fit = fit_length_curve(points);
  } catch (const EvalError& e) {
    r.fit_error = e.what();
  }
  return r;
}

std::vector<LengthPoint> read_length_csv(std::istream& in) {
  std::vector<LengthPoint> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument("no comma");
      std::size_t used = 0;
      const auto x_text = std::string(trim(std::string_view(line).substr(0, comma)));
      const auto y_text = std::string(trim(std::string_view(line).substr(comma + 1)));
      const double x = std::stod(x_text, &used);
      if (used != x_text.size()) throw std::invalid_argument("x");
      const double y = std::stod(y_text, &used);
      if (used != y_text.size()) throw std::invalid_argument("y");
      out.push_back({x, y});
    } catch (const std::exception&) {
      if (out.empty() && line_no == 1) continue;  // header
      throw EvalError("length CSV line " + std::to_string(line_no) + ": expected x,y");
    }
  }
  return out;
}

}  // namespace lcsynth
