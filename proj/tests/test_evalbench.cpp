#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lcsynth/evalbench.hpp"
#include "lcsynth/mock_backends.hpp"
#include "lcsynth/random.hpp"
#include "oracles.hpp"

using namespace lcsynth;

namespace {

Corpus essays(std::size_t n, std::size_t sentences) {
  const char* words[] = {"river", "market", "theory", "garden", "engine", "letter", "winter", "signal"};
  Rng r(n);
  std::vector<Document> docs;
  for (std::size_t i = 0; i < n; ++i) {
    std::string text;
    for (std::size_t s = 0; s < sentences; ++s) {
      if (!text.empty()) text += ' ';
      text += "Essay";
      for (int w = 0; w < 9; ++w) text += std::string(" ") + words[r.below(8)];
      text += '.';
    }
    docs.push_back({"e" + std::to_string(i), text, "", 0});
  }
  return Corpus(std::move(docs), std::make_shared<WhitespaceTokenizer>());
}

RetryPolicy no_sleep() {
  RetryPolicy p;
  p.max_attempts = 1;
  p.sleep = [](std::chrono::milliseconds) {};
  return p;
}

}  // namespace

TEST_SUITE("evalbench") {

TEST_CASE("haystack concatenates enough essays and marks sentence starts") {
  const auto corpus = essays(20, 10);
  const HaystackSource src(corpus, 500, 1);
  CHECK(src.token_count() >= 500);
  CHECK(src.token_count() == oracle::word_count(src.text()));
  const auto starts = src.sentence_starts();
  REQUIRE_FALSE(starts.empty());
  CHECK(starts[0] == 0);
  for (std::size_t i = 1; i < starts.size(); ++i) CHECK(starts[i] - starts[i - 1] == 10);
  CHECK_THROWS_AS(HaystackSource(corpus, 100000, 1), EvalError);
}

TEST_CASE("needle case is unique, sized and placed at the requested depth") {
  const auto corpus = essays(40, 20);
  const HaystackSource src(corpus, 6000, 2);
  const std::string needle(kDefaultNeedle);
  for (std::size_t len : {500u, 2000u, 6000u}) {
    for (double depth : {0.0, 0.1, 0.37, 0.5, 0.9, 1.0}) {
      const auto c = build_needle_case(src, len, depth);
      CHECK(c.context_tokens == len);
      CHECK(oracle::word_count(c.context) == len);
      const auto at = c.context.find(needle);
      REQUIRE(at != std::string::npos);
      CHECK(c.context.find(needle, at + 1) == std::string::npos);
      CHECK(at == c.needle_char_offset);
      const double hay = static_cast<double>(len - oracle::word_count(needle));
      const double placed = static_cast<double>(oracle::word_count(c.context.substr(0, at))) / hay;
      CHECK(std::abs(placed - depth) <= 0.05);
    }
  }
  CHECK_THROWS_AS(build_needle_case(src, 10, 0.5), EvalError);
  CHECK_THROWS_AS(build_needle_case(src, 100000, 0.5), EvalError);
  CHECK_THROWS_AS(build_needle_case(src, 500, 1.5), EvalError);
}

TEST_CASE("needle prompt ends with the question") {
  const auto corpus = essays(5, 20);
  const auto c = build_needle_case(corpus, 300, 0.5, kDefaultNeedle, 4);
  const auto p = needle_prompt(c);
  CHECK(p.starts_with(c.context));
  CHECK(p.find(std::string(kDefaultNeedleQuestion)) != std::string::npos);
}

TEST_CASE("recall counts needle words in the output") {
  const std::string needle(kDefaultNeedle);
  CHECK(needle_recall(needle, needle) == 1.0);
  CHECK(needle_recall(needle, "Sorry, I cannot help.") == 0.0);
  CHECK(needle_recall("a b c d", "B, d! nothing") == 0.5);
  CHECK(needle_recall("the cat the dog", "the cat") == 0.5);
  CHECK(needle_recall(needle, "THE BEST thing to do in san francisco is EAT a sandwich and sit in dolores park on a sunny day") == 1.0);
  CHECK_THROWS_AS(needle_recall("...", "x"), EvalError);
}

TEST_CASE("default grid sizes") {
  const auto lengths = default_needle_lengths();
  CHECK(lengths.size() == 64);
  CHECK(lengths.front() == 16384);
  CHECK(lengths.back() == 1048576);
  const auto depths = default_needle_depths();
  CHECK(depths.size() == 10);
  CHECK(depths.front() == 0.0);
  CHECK(depths.back() == 1.0);
  CHECK(depths[1] == doctest::Approx(1.0 / 9));
}

TEST_CASE("small grid with echo, refusal and failing models") {
  const auto corpus = essays(30, 20);
  const HaystackSource src(corpus, 4000, 3);
  const std::vector<std::size_t> lengths{1000, 2000, 4000};
  const auto depths = default_needle_depths(5);
  CallLedger ledger;

  EchoBackend echo;
  LlmGateway echo_gw(echo, no_sleep());
  const auto good = run_needle_grid(src, echo_gw, ledger, lengths, depths);
  for (const auto& row : good.scores) {
    for (double s : row) CHECK(s == 1.0);
  }
  CHECK(ledger.count(StepKind::needle) == 15);

  FixedReplyBackend refusal("Sorry, I cannot help.");
  LlmGateway refusal_gw(refusal, no_sleep());
  const auto bad = run_needle_grid(src, refusal_gw, ledger, lengths, depths);
  for (const auto& row : bad.scores) {
    for (double s : row) CHECK(s == 0.0);
  }

  FunctionBackend down([](const ChatRequest&) -> std::string { throw LlmError("down", false); });
  LlmGateway down_gw(down, no_sleep());
  const auto failed = run_needle_grid(src, down_gw, ledger, lengths, depths);
  CHECK(failed.failed_cells() == 15);

  std::ostringstream csv;
  good.write_csv(csv);
  const auto text = csv.str();
  CHECK(text.starts_with("length,depth,recall\n"));
  CHECK(std::count(text.begin(), text.end(), '\n') == 16);

  const std::vector<std::size_t> too_long{1000000};
  CHECK_THROWS_AS(run_needle_grid(src, echo_gw, ledger, too_long, depths), EvalError);
}

TEST_CASE("curve fit recovers exact parameters") {
  std::vector<LengthPoint> pts;
  for (double x = 100; x <= 20000; x *= 1.3) pts.push_back({x, std::exp(0.5) * std::pow(x + 1000, 0.8)});
  const auto fit = fit_length_curve(pts);
  CHECK(fit.a == doctest::Approx(0.8).epsilon(1e-4));
  CHECK(fit.b == doctest::Approx(1000).epsilon(1e-3));
  CHECK(fit.c == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(fit.residual < 1e-12);
  CHECK(log_mse(fit, pts) == doctest::Approx(fit.residual));
  CHECK(fit.predict(5000) == doctest::Approx(std::exp(0.5) * std::pow(6000.0, 0.8)).epsilon(1e-4));
}

TEST_CASE("degenerate fits") {
  std::vector<LengthPoint> identity;
  std::vector<LengthPoint> constant;
  for (double x = 50; x <= 5000; x *= 1.5) {
    identity.push_back({x, x});
    constant.push_back({x, 300});
  }
  const auto id = fit_length_curve(identity);
  CHECK(id.a == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(std::abs(id.c) < 1e-2);
  for (const auto& p : identity) CHECK(std::abs(std::log(id.predict(p.x)) - std::log(p.x)) < 1e-3);
  const auto flat = fit_length_curve(constant);
  CHECK(std::abs(flat.a) < 1e-3);
  for (const auto& p : constant) CHECK(std::abs(std::log(flat.predict(p.x)) - std::log(300.0)) < 1e-3);
}

TEST_CASE("fit input validation and the length report") {
  const std::vector<LengthPoint> two{{1, 1}, {2, 2}};
  CHECK_THROWS_AS(fit_length_curve(two), EvalError);
  const std::vector<LengthPoint> bad{{1, 1}, {2, 0}, {3, 3}};
  CHECK_THROWS_AS(fit_length_curve(bad), EvalError);
  const auto report = length_report(two);
  CHECK(report.n == 2);
  CHECK(report.mean_required == 1.5);
  CHECK_FALSE(report.fit.has_value());
  CHECK_FALSE(report.fit_error.empty());
  CHECK_THROWS_AS(length_report({}), EvalError);
}

TEST_CASE("length csv parsing") {
  std::istringstream with_header("x,y\n100,90\n200,180\n");
  const auto pts = read_length_csv(with_header);
  REQUIRE(pts.size() == 2);
  CHECK(pts[1].y == 180);
  std::istringstream bare("1,2\n3,4\n");
  CHECK(read_length_csv(bare).size() == 2);
}

}  // TEST_SUITE
