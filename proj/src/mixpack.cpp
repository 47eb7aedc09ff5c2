#include "lcsynth/mixpack.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <set>

#include "lcsynth/random.hpp"
#include "lcsynth/text.hpp"

namespace lcsynth {

using nlohmann::json;

std::string_view to_string(SampleCategory category) {
  return category == SampleCategory::long_context ? "long" : "short";
}

SampleCategory sample_category_from_string(std::string_view s) {
  if (s == "long") return SampleCategory::long_context;
  if (s == "short") return SampleCategory::short_context;
  throw MixtureError("unknown sample category '" + std::string(s) + "' (expected long or short)");
}

void MixtureSpec::validate() const {
  std::set<std::string> names;
  for (const auto& s : sources) {
    if (s.name.empty()) throw MixtureError("mixture source with empty name");
    if (!names.insert(s.name).second) throw MixtureError("duplicate mixture source '" + s.name + "'");
    if (!(s.weight >= 0.0 && s.weight <= 1.0)) {
      throw MixtureError("mixture source '" + s.name + "': weight must be in [0, 1]");
    }
  }
}

json MixtureSpec::to_json() const {
  json arr = json::array();
  for (const auto& s : sources) {
    arr.push_back({{"name", s.name},
                   {"path", s.path.generic_string()},
                   {"weight", s.weight},
                   {"category", to_string(s.category)}});
  }
  return json{{"sources", arr}};
}

MixtureSpec MixtureSpec::from_json(const json& j, const std::filesystem::path& base_dir) {
  MixtureSpec spec;
  try {
    for (const auto& s : j.at("sources")) {
      MixtureSource src;
      src.name = s.at("name").get<std::string>();
      src.path = s.at("path").get<std::string>();
      if (src.path.is_relative() && !base_dir.empty()) src.path = base_dir / src.path;
      src.weight = s.value("weight", 1.0);
      src.category = sample_category_from_string(s.value("category", std::string("long")));
      spec.sources.push_back(std::move(src));
    }
  } catch (const json::exception& e) {
    throw MixtureError(std::string("invalid mixture spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

MixtureSpec read_mixture_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MixtureError("cannot read mixture spec " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw MixtureError("mixture spec " + path.string() + ": " + e.what());
  }
  return MixtureSpec::from_json(j, path.parent_path());
}

MixtureSpec default_mixture_spec() {
  using C = SampleCategory;
  return MixtureSpec{{
      {"synthetic-long-input", "synthetic_long_input.jsonl", 0.3, C::long_context},
      {"synthetic-long-output", "synthetic_long_output.jsonl", 1.0, C::long_context},
      {"infinity-instruct", "infinity_instruct.jsonl", 0.3, C::short_context},
      {"tulu-v2", "tulu_v2.jsonl", 1.0, C::short_context},
      {"prolong", "prolong.jsonl", 0.1, C::long_context},
  }};
}

namespace {

std::string normalize_role(std::string role) {
  for (auto& c : role) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (role == "gpt" || role == "model" || role == "bot") return "assistant";
  if (role == "human") return "user";
  return role;
}

}  // namespace

TrainingSample parse_training_sample(const json& record, std::string id, std::string source,
                                     SampleCategory category) {
  TrainingSample sample{std::move(id), std::move(source), category, {}};
  if (!record.is_object()) throw MixtureError("sample " + sample.id + ": not a JSON object");
  if (record.contains("messages")) {
    for (const auto& m : record.at("messages")) {
      sample.segments.push_back({normalize_role(m.at("role").get<std::string>()),
                                 m.at("content").get<std::string>()});
    }
  } else if (record.contains("instruction") && record.contains("response")) {
    std::string prompt;
    for (const auto& doc : record.value("context_docs", json::array())) {
      prompt += doc.get<std::string>();
      prompt += "\n\n";
    }
    prompt += record.at("instruction").get<std::string>();
    sample.segments.push_back({"user", std::move(prompt)});
    sample.segments.push_back({"assistant", record.at("response").get<std::string>()});
  } else if (record.contains("text")) {
    sample.segments.push_back({"text", record.at("text").get<std::string>()});
  } else {
    throw MixtureError("sample " + sample.id + ": expected messages, instruction/response or text");
  }
  return sample;
}

std::vector<TrainingSegment> make_loss_segments(const TrainingSample& sample,
                                                SampleCategory category) {
  const bool is_long = category == SampleCategory::long_context;
  bool has_response = false;
  for (const auto& s : sample.segments) {
    if (s.text.empty()) continue;
    if (s.role == "assistant" || (is_long && s.role == "text")) has_response = true;
  }
  if (!has_response) throw MixtureError("sample " + sample.id + ": missing a response");
  std::vector<TrainingSegment> out;
  for (const auto& s : sample.segments) {
    if (s.text.empty()) continue;
    out.push_back({s.text, is_long || s.role == "assistant"});
  }
  return out;
}

std::vector<MixedSample> mix_sources(std::span<const LoadedSource> sources, std::uint64_t seed) {
  std::vector<MixedSample> out;
  for (std::size_t si = 0; si < sources.size(); ++si) {
    const auto& src = sources[si];
    Rng rng(derive_seed(seed, si));
    for (std::size_t ri = 0; ri < src.records.size(); ++ri) {
      if (!rng.bernoulli(src.source.weight)) continue;
      auto id = src.source.name + ":" + std::to_string(ri);
      try {
        const auto sample =
            parse_training_sample(src.records[ri], id, src.source.name, src.source.category);
        out.push_back({std::move(id), make_loss_segments(sample, src.source.category)});
      } catch (const json::exception& e) {
        throw MixtureError("source '" + src.source.name + "' record " + std::to_string(ri) + ": " +
                           e.what());
      }
    }
  }
  Rng order(derive_seed(seed, sources.size()));
  order.shuffle(out);
  return out;
}

std::vector<MixedSample> build_mixture(const MixtureSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<LoadedSource> loaded;
  for (const auto& src : spec.sources) {
    std::ifstream in(src.path);
    if (!in) {
      throw MixtureError("mixture source '" + src.name + "' is unreadable: " + src.path.string());
    }
    LoadedSource ls{src, {}};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      try {
        ls.records.push_back(json::parse(line));
      } catch (const json::exception&) {
        throw MixtureError("mixture source '" + src.name + "' line " + std::to_string(line_no) +
                           ": malformed JSON");
      }
    }
    loaded.push_back(std::move(ls));
  }
  return mix_sources(loaded, seed);
}

void write_mixture_jsonl(std::ostream& out, std::span<const MixedSample> samples) {
  for (const auto& s : samples) {
    json segs = json::array();
    for (const auto& seg : s.segments) segs.push_back({{"text", seg.text}, {"loss", seg.loss}});
    out << json{{"id", s.id}, {"segments", segs}}.dump() << '\n';
  }
}

std::vector<MixedSample> read_mixture_jsonl(std::istream& in) {
  std::vector<MixedSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      MixedSample s{j.at("id").get<std::string>(), {}};
      for (const auto& seg : j.at("segments")) {
        s.segments.push_back({seg.at("text").get<std::string>(), seg.at("loss").get<bool>()});
      }
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw MixtureError("mixture line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

json PackedSequence::to_json() const {
  json segs = json::array();
  for (const auto& s : segments) {
    segs.push_back({{"text", s.text}, {"loss", s.loss}, {"sample_id", s.sample_id}});
  }
  json j{{"segments", segs}, {"total_tokens", total_tokens}};
  if (!truncations.empty()) {
    json t = json::array();
    for (const auto& r : truncations) {
      t.push_back({{"sample_id", r.sample_id},
                   {"original_tokens", r.original_tokens},
                   {"kept_tokens", r.kept_tokens},
                   {"dropped_loss_tokens", r.dropped_loss_tokens}});
    }
    j["meta"] = {{"truncations", t}};
  }
  return j;
}

namespace {

/// Leftmost slot whose remaining capacity fits a request, over a fixed
/// number of slots that all start empty.
class FirstFitTree {
 public:
  FirstFitTree(std::size_t slots, std::size_t capacity) {
    while (leaves_ < std::max<std::size_t>(slots, 1)) leaves_ *= 2;
    tree_.assign(2 * leaves_, capacity);
  }

  std::size_t find(std::size_t need) const {
    std::size_t node = 1;
    while (node < leaves_) node = tree_[2 * node] >= need ? 2 * node : 2 * node + 1;
    return node - leaves_;
  }

  void set(std::size_t slot, std::size_t remaining) {
    std::size_t node = slot + leaves_;
    tree_[node] = remaining;
    for (node /= 2; node >= 1; node /= 2) tree_[node] = std::max(tree_[2 * node], tree_[2 * node + 1]);
  }

  std::size_t remaining(std::size_t slot) const { return tree_[slot + leaves_]; }

 private:
  std::size_t leaves_ = 1;
  std::vector<std::size_t> tree_;
};

}  // namespace

std::vector<PackedSequence> pack_sequences(std::span<const MixedSample> stream,
                                           const Tokenizer& tok, std::size_t max_len) {
  if (max_len < 1) throw MixtureError("pack_sequences: max_len must be >= 1");
  std::vector<PackedSequence> seqs;
  // Every sample opens at most one sequence, so stream.size() slots suffice.
  FirstFitTree tree(stream.size(), max_len);
  for (const auto& sample : stream) {
    std::vector<std::size_t> counts;
    std::size_t total = 0;
    for (const auto& seg : sample.segments) {
      counts.push_back(tok.count(seg.text));
      total += counts.back();
    }
    std::vector<PackedSegment> segs;
    std::size_t used = 0;
    if (total <= max_len) {
      for (const auto& seg : sample.segments) segs.push_back({seg.text, seg.loss, sample.id});
      used = total;
      const auto slot = tree.find(used);
      if (slot >= seqs.size()) seqs.resize(slot + 1);
      auto& seq = seqs[slot];
      std::move(segs.begin(), segs.end(), std::back_inserter(seq.segments));
      seq.total_tokens += used;
      tree.set(slot, tree.remaining(slot) - used);
      continue;
    }
    TruncationRecord rec{sample.id, total, 0, 0};
    for (std::size_t i = 0; i < sample.segments.size(); ++i) {
      const auto& seg = sample.segments[i];
      const std::size_t room = max_len - used;
      if (counts[i] <= room) {
        segs.push_back({seg.text, seg.loss, sample.id});
        used += counts[i];
        continue;
      }
      const auto prefix = first_tokens(seg.text, room, tok);
      const auto kept = prefix.empty() ? 0 : tok.count(prefix);
      if (kept > 0) {
        segs.push_back({std::string(prefix), seg.loss, sample.id});
        used += kept;
      }
      if (seg.loss) rec.dropped_loss_tokens += counts[i] - kept;
      for (std::size_t r = i + 1; r < sample.segments.size(); ++r) {
        if (sample.segments[r].loss) rec.dropped_loss_tokens += counts[r];
      }
      break;
    }
    rec.kept_tokens = used;
    const auto slot = tree.find(max_len);
    if (slot >= seqs.size()) seqs.resize(slot + 1);
    auto& seq = seqs[slot];
    std::move(segs.begin(), segs.end(), std::back_inserter(seq.segments));
    seq.total_tokens += used;
    seq.truncations.push_back(std::move(rec));
    tree.set(slot, 0);
  }
  return seqs;
}

}  // namespace lcsynth
