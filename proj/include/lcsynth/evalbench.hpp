#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lcsynth/corpus.hpp"
#include "lcsynth/llm.hpp"
#include "lcsynth/tokenizer.hpp"

namespace lcsynth {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kDefaultNeedle =
    "The best thing to do in San Francisco is eat a sandwich and sit in Dolores Park on a sunny "
    "day.";
inline constexpr std::string_view kDefaultNeedleQuestion =
    "What is the best thing to do in San Francisco?";

/// Essay text concatenated once, with token spans and sentence starts, so
/// every grid cell can cut its haystack without re-tokenizing.
class HaystackSource {
 public:
  /// Essays are shuffled by `seed` and concatenated until at least
  /// `min_tokens` tokens are available. Throws EvalError otherwise.
  HaystackSource(const Corpus& essays, std::size_t min_tokens, std::uint64_t seed);

  const std::string& text() const { return text_; }
  const Tokenizer& tokenizer() const { return *tok_; }
  std::size_t token_count() const { return spans_.size(); }
  std::span<const TokenSpan> spans() const { return spans_; }
  /// Token indices at which a sentence starts, ascending, starting with 0.
  std::span<const std::size_t> sentence_starts() const { return sentence_starts_; }

 private:
  std::shared_ptr<const Tokenizer> tok_;
  std::string text_;
  std::vector<TokenSpan> spans_;
  std::vector<std::size_t> sentence_starts_;
};

struct NeedleCase {
  std::string context;
  std::string needle;
  std::string question;
  std::size_t context_len = 0;       // requested tokens
  std::size_t context_tokens = 0;    // actual tokens
  double depth_fraction = 0.0;
  std::size_t needle_token_offset = 0;
  std::size_t needle_char_offset = 0;
};

/// Cuts a haystack of context_len minus the needle's tokens and inserts the
/// needle at the sentence start nearest the requested depth.
NeedleCase build_needle_case(const HaystackSource& source, std::size_t context_len,
                             double depth_fraction, std::string_view needle = kDefaultNeedle,
                             std::string_view question = kDefaultNeedleQuestion);

NeedleCase build_needle_case(const Corpus& essays, std::size_t context_len, double depth_fraction,
                             std::string_view needle, std::uint64_t seed);

std::string needle_prompt(const NeedleCase& c);

/// Share of the needle's words (case-folded, punctuation stripped) found in
/// the output, each word counted at most as often as it occurs in the needle.
double needle_recall(std::string_view needle, std::string_view output);

/// 16k steps up to `max_len`.
std::vector<std::size_t> default_needle_lengths(std::size_t max_len = 1048576,
                                                std::size_t step = 16384);
/// Evenly spaced in [0, 1], both ends included.
std::vector<double> default_needle_depths(std::size_t n = 10);

struct NeedleGridResult {
  std::vector<std::size_t> lengths;
  std::vector<double> depths;
  // scores[i][j] for lengths[i], depths[j]; -1 marks a failed cell.
  std::vector<std::vector<double>> scores;
  std::vector<std::vector<NeedleCase>> cases;  // kept only on request

  void write_csv(std::ostream& out) const;
  std::size_t failed_cells() const;
};

struct NeedleGridOptions {
  std::string needle = std::string(kDefaultNeedle);
  std::string question = std::string(kDefaultNeedleQuestion);
  bool keep_cases = false;
};

/// One case per (length, depth); each cell asks the model once. Model errors
/// score -1 and the grid continues.
NeedleGridResult run_needle_grid(const HaystackSource& source, LlmGateway& gateway,
                                 CallLedger& ledger, std::span<const std::size_t> lengths,
                                 std::span<const double> depths,
                                 const NeedleGridOptions& options = {});

struct LengthPoint {
  double x = 0.0;  // required (groundtruth) length
  double y = 0.0;  // produced length
};

/// log(y) = a * log(x + b) + c; residual is the mean squared log error.
struct LengthCurveFit {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double residual = 0.0;

  double predict(double x) const;
};

/// Mean squared log error of the curve on `points`; infinite when some
/// x + b is not positive.
double log_mse(const LengthCurveFit& fit, std::span<const LengthPoint> points);

/// Scans b over (-min(x), 10 * max(x)] and solves (a, c) by least squares at
/// each b. Throws EvalError with fewer than three points or a nonpositive
/// value.
LengthCurveFit fit_length_curve(std::span<const LengthPoint> points);

struct LengthReport {
  std::size_t n = 0;
  double mean_required = 0.0;
  double mean_output = 0.0;
  std::optional<LengthCurveFit> fit;
  std::string fit_error;

  void write_csv(std::ostream& out, std::span<const LengthPoint> points) const;
};

LengthReport length_report(std::span<const LengthPoint> points);

/// Reads "x,y" rows; a non-numeric first row is treated as a header.
std::vector<LengthPoint> read_length_csv(std::istream& in);

}  // namespace lcsynth
