#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "lcsynth/mixpack.hpp"
#include "lcsynth/random.hpp"
#include "oracles.hpp"

using namespace lcsynth;
using nlohmann::json;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("lcsynth_mix_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_lines(const std::filesystem::path& path, const std::vector<json>& records) {
  std::ofstream out(path);
  for (const auto& r : records) out << r.dump() << '\n';
}

MixedSample sample(const std::string& id, std::vector<std::pair<std::size_t, bool>> segs) {
  MixedSample s{id, {}};
  for (auto [n, loss] : segs) s.segments.push_back({oracle::words(n, "x"), loss});
  return s;
}

// Plain first-fit: scan sequences left to right for the first with room.
std::vector<std::vector<std::string>> naive_first_fit(const std::vector<MixedSample>& stream,
                                                      std::size_t max_len) {
  std::vector<std::size_t> used;
  std::vector<std::vector<std::string>> ids;
  for (const auto& s : stream) {
    std::size_t total = 0;
    for (const auto& seg : s.segments) total += oracle::word_count(seg.text);
    const std::size_t need = std::min(total, max_len);
    const bool whole = total > max_len;
    std::size_t slot = 0;
    while (slot < used.size() && (whole ? used[slot] != 0 : max_len - used[slot] < need)) {
      ++slot;
    }
    if (slot == used.size()) {
      used.push_back(0);
      ids.emplace_back();
    }
    used[slot] = whole ? max_len : used[slot] + need;
    ids[slot].push_back(s.id);
  }
  return ids;
}

}  // namespace

TEST_SUITE("mixpack") {

TEST_CASE("default mixture weights") {
  const auto spec = default_mixture_spec();
  REQUIRE(spec.sources.size() == 5);
  std::map<std::string, std::pair<double, SampleCategory>> by_name;
  for (const auto& s : spec.sources) by_name[s.name] = {s.weight, s.category};
  CHECK(by_name["synthetic-long-input"].first == 0.3);
  CHECK(by_name["synthetic-long-output"].first == 1.0);
  CHECK(by_name["infinity-instruct"].first == 0.3);
  CHECK(by_name["tulu-v2"].first == 1.0);
  CHECK(by_name["prolong"].first == 0.1);
  CHECK(by_name["tulu-v2"].second == SampleCategory::short_context);
  CHECK(by_name["prolong"].second == SampleCategory::long_context);
}

TEST_CASE("mixture spec json round trip and validation") {
  const auto spec = default_mixture_spec();
  const auto back = MixtureSpec::from_json(spec.to_json());
  CHECK(back.to_json() == spec.to_json());
  const auto rel = MixtureSpec::from_json(json::parse(R"({"sources":[{"name":"a","path":"a.jsonl"}]})"), "/base");
  CHECK(rel.sources[0].path == std::filesystem::path("/base/a.jsonl"));
  CHECK(rel.sources[0].weight == 1.0);
  CHECK_THROWS_AS(MixtureSpec::from_json(json::parse(R"({"sources":[{"name":"a","path":"p","weight":1.5}]})")), MixtureError);
  CHECK_THROWS_AS(MixtureSpec::from_json(json::parse(R"({"sources":[{"name":"a","path":"p"},{"name":"a","path":"q"}]})")), MixtureError);
  CHECK_THROWS_AS(MixtureSpec::from_json(json::parse(R"({"sources":[{"name":"a","path":"p","category":"medium"}]})")), MixtureError);
}

TEST_CASE("sample shapes are parsed and roles normalized") {
  const auto chat = parse_training_sample(
      json::parse(R"({"messages":[{"role":"system","content":"s"},{"role":"human","content":"u"},{"role":"gpt","content":"a"}]})"),
      "c", "src", SampleCategory::short_context);
  REQUIRE(chat.segments.size() == 3);
  CHECK(chat.segments[1].role == "user");
  CHECK(chat.segments[2].role == "assistant");

  const auto synth = parse_training_sample(
      json::parse(R"({"instruction":"I","context_docs":["D1","D2"],"response":"R"})"), "s", "src",
      SampleCategory::long_context);
  REQUIRE(synth.segments.size() == 2);
  CHECK(synth.segments[0].text == "D1\n\nD2\n\nI");
  CHECK(synth.segments[1].role == "assistant");

  const auto raw = parse_training_sample(json::parse(R"({"text":"T"})"), "r", "src", SampleCategory::long_context);
  CHECK(raw.segments[0].role == "text");
  CHECK_THROWS_AS(parse_training_sample(json::parse(R"({"foo":1})"), "x", "src", SampleCategory::long_context),
                  MixtureError);
}

TEST_CASE("loss masks: long samples train on everything, short ones on responses") {
  const TrainingSample chat{"c", "src", SampleCategory::short_context,
                            {{"system", "sys"}, {"user", "question"}, {"assistant", "answer"}, {"user", ""}}};
  const auto short_segs = make_loss_segments(chat, SampleCategory::short_context);
  REQUIRE(short_segs.size() == 3);
  CHECK_FALSE(short_segs[0].loss);
  CHECK_FALSE(short_segs[1].loss);
  CHECK(short_segs[2].loss);
  const auto long_segs = make_loss_segments(chat, SampleCategory::long_context);
  for (const auto& s : long_segs) CHECK(s.loss);

  const TrainingSample raw{"r", "src", SampleCategory::long_context, {{"text", "document"}}};
  CHECK(make_loss_segments(raw, SampleCategory::long_context).size() == 1);
  CHECK_THROWS_AS(make_loss_segments(raw, SampleCategory::short_context), MixtureError);
  const TrainingSample no_answer{"n", "src", SampleCategory::short_context, {{"user", "q"}, {"assistant", ""}}};
  CHECK_THROWS_AS(make_loss_segments(no_answer, SampleCategory::short_context), MixtureError);
}

TEST_CASE("mixing keeps records at the source weight, reproducibly") {
  std::vector<json> records(2000, json{{"text", "doc body"}});
  const std::vector<LoadedSource> sources{
      {{"all", "", 1.0, SampleCategory::long_context}, records},
      {{"some", "", 0.3, SampleCategory::long_context}, records},
      {{"none", "", 0.0, SampleCategory::long_context}, records}};
  const auto mixed = mix_sources(sources, 5);
  std::map<std::string, int> per_source;
  for (const auto& s : mixed) ++per_source[s.id.substr(0, s.id.find(':'))];
  CHECK(per_source["all"] == 2000);
  CHECK(per_source["none"] == 0);
  const auto [lo, hi] = oracle::binomial_interval(2000, 0.3, 0.999);
  CHECK(per_source["some"] >= static_cast<int>(lo));
  CHECK(per_source["some"] <= static_cast<int>(hi));
  const auto again = mix_sources(sources, 5);
  REQUIRE(again.size() == mixed.size());
  for (std::size_t i = 0; i < mixed.size(); ++i) CHECK(again[i].id == mixed[i].id);
  CHECK(mixed.front().id != "all:0");
}

TEST_CASE("build_mixture reads files and names bad sources") {
  const auto dir = temp_dir("build");
  write_lines(dir / "long.jsonl", {json{{"text", "a b c"}}, json{{"text", "d e"}}});
  write_lines(dir / "chat.jsonl",
              {json{{"messages", {{{"role", "user"}, {"content", "q"}}, {{"role", "assistant"}, {"content", "a"}}}}}});
  {
    std::ofstream spec(dir / "mix.json");
    spec << R"({"sources":[{"name":"long","path":"long.jsonl","weight":1,"category":"long"},)"
         << R"({"name":"chat","path":"chat.jsonl","weight":1,"category":"short"}]})";
  }
  const auto spec = read_mixture_spec(dir / "mix.json");
  const auto mixed = build_mixture(spec, 1);
  CHECK(mixed.size() == 3);
  std::stringstream buf;
  write_mixture_jsonl(buf, mixed);
  const auto back = read_mixture_jsonl(buf);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].id == mixed[i].id);
    CHECK(back[i].segments.size() == mixed[i].segments.size());
  }

  MixtureSpec missing{{{"ghost", dir / "ghost.jsonl", 1.0, SampleCategory::long_context}}};
  try {
    build_mixture(missing, 1);
    FAIL("expected MixtureError");
  } catch (const MixtureError& e) {
    CHECK(std::string(e.what()).find("ghost") != std::string::npos);
  }
  {
    std::ofstream bad(dir / "bad.jsonl");
    bad << "{not json\n";
  }
  MixtureSpec malformed{{{"bad", dir / "bad.jsonl", 1.0, SampleCategory::long_context}}};
  CHECK_THROWS_AS(build_mixture(malformed, 1), MixtureError);
}

TEST_CASE("packing worked example") {
  WhitespaceTokenizer tok;
  const std::vector<MixedSample> stream{sample("a", {{6, true}}), sample("b", {{5, true}}),
                                        sample("c", {{4, true}}), sample("d", {{3, false}, {1, true}})};
  const auto seqs = pack_sequences(stream, tok, 10);
  REQUIRE(seqs.size() == 2);
  CHECK(seqs[0].total_tokens == 10);  // a + c
  CHECK(seqs[1].total_tokens == 9);   // b + d
  CHECK(seqs[0].segments[1].sample_id == "c");
  CHECK(seqs[1].segments.size() == 3);
}

TEST_CASE("oversized samples keep their head in a sequence of their own") {
  WhitespaceTokenizer tok;
  const std::vector<MixedSample> stream{sample("small", {{3, true}}),
                                        sample("big", {{4, false}, {10, true}, {2, true}}),
                                        sample("tiny", {{2, true}})};
  const auto seqs = pack_sequences(stream, tok, 10);
  REQUIRE(seqs.size() == 2);
  CHECK(seqs[0].total_tokens == 5);
  CHECK(seqs[1].total_tokens == 10);
  REQUIRE(seqs[1].truncations.size() == 1);
  const auto& t = seqs[1].truncations[0];
  CHECK(t.sample_id == "big");
  CHECK(t.original_tokens == 16);
  CHECK(t.kept_tokens == 10);
  CHECK(t.dropped_loss_tokens == 6);
  const auto j = seqs[1].to_json();
  CHECK(j["meta"]["truncations"].size() == 1);
  CHECK_FALSE(seqs[0].to_json().contains("meta"));
}

TEST_CASE("packing invariants against a naive first-fit") {
  WhitespaceTokenizer tok;
  Rng r(31);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t max_len = static_cast<std::size_t>(r.between(5, 60));
    std::vector<MixedSample> stream;
    const auto n = r.between(0, 40);
    for (int i = 0; i < n; ++i) {
      std::vector<std::pair<std::size_t, bool>> segs;
      const bool is_long = r.bernoulli(0.5);
      const auto k = r.between(1, 4);
      for (int s = 0; s < k; ++s) {
        segs.push_back({static_cast<std::size_t>(r.between(0, static_cast<std::int64_t>(max_len * 2 / 3))),
                        is_long || r.bernoulli(0.5)});
      }
      stream.push_back(sample("s" + std::to_string(i), segs));
    }
    const auto seqs = pack_sequences(stream, tok, max_len);
    const auto oracle_ids = naive_first_fit(stream, max_len);
    REQUIRE(seqs.size() == oracle_ids.size());
    std::map<std::string, std::size_t> loss_tokens;
    std::map<std::string, std::size_t> dropped;
    for (std::size_t q = 0; q < seqs.size(); ++q) {
      CHECK(seqs[q].total_tokens <= max_len);
      std::size_t sum = 0;
      std::vector<std::string> ids;
      for (const auto& seg : seqs[q].segments) {
        const auto c = oracle::word_count(seg.text);
        sum += c;
        if (seg.loss) loss_tokens[seg.sample_id] += c;
        if (ids.empty() || ids.back() != seg.sample_id) ids.push_back(seg.sample_id);
      }
      CHECK(sum == seqs[q].total_tokens);
      CHECK(ids == oracle_ids[q]);
      for (const auto& t : seqs[q].truncations) dropped[t.sample_id] += t.dropped_loss_tokens;
    }
    for (const auto& s : stream) {
      std::size_t want = 0;
      for (const auto& seg : s.segments) {
        if (seg.loss) want += oracle::word_count(seg.text);
      }
      CHECK(loss_tokens[s.id] + dropped[s.id] == want);
    }
  }
}

TEST_CASE("pack rejects a zero length") {
  WhitespaceTokenizer tok;
  CHECK_THROWS_AS(pack_sequences({}, tok, 0), MixtureError);
  CHECK(pack_sequences({}, tok, 10).empty());
}

}  // TEST_SUITE
