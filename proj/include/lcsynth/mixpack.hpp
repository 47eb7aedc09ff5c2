#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcsynth/tokenizer.hpp"

namespace lcsynth {

class MixtureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Long sources train on every token; short sources only on assistant turns.
enum class SampleCategory { long_context, short_context };

std::string_view to_string(SampleCategory category);
SampleCategory sample_category_from_string(std::string_view s);

struct MixtureSource {
  std::string name;
  std::filesystem::path path;
  double weight = 1.0;  // independent inclusion probability
  SampleCategory category = SampleCategory::long_context;
};

struct MixtureSpec {
  std::vector<MixtureSource> sources;

  /// Throws MixtureError on weights outside [0, 1], empty or duplicate names.
  void validate() const;
  nlohmann::json to_json() const;
  /// Relative source paths are resolved against `base_dir`.
  static MixtureSpec from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
};

MixtureSpec read_mixture_spec(const std::filesystem::path& path);

/// The five-source mixture with its published weights; paths are placeholders
/// relative to the config file.
MixtureSpec default_mixture_spec();

/// One turn or block of a training sample.
struct SampleSegment {
  std::string role;  // "system", "user", "assistant" or "text"
  std::string text;
};

struct TrainingSample {
  std::string id;
  std::string source;
  SampleCategory category = SampleCategory::long_context;
  std::vector<SampleSegment> segments;
};

/// Accepts synthesized samples ({"instruction","context_docs","response"}),
/// chat samples ({"messages":[{"role","content"}]}) and raw documents
/// ({"text"}).
TrainingSample parse_training_sample(const nlohmann::json& record, std::string id,
                                     std::string source, SampleCategory category);

struct TrainingSegment {
  std::string text;
  bool loss = false;
};

/// Throws MixtureError when the sample has no response. Raw documents count as
/// responses only in the long category. Empty segments are dropped.
std::vector<TrainingSegment> make_loss_segments(const TrainingSample& sample,
                                                SampleCategory category);

struct MixedSample {
  std::string id;
  std::vector<TrainingSegment> segments;
};

/// Records already loaded for one source.
struct LoadedSource {
  MixtureSource source;
  std::vector<nlohmann::json> records;
};

/// Each record is kept with probability equal to its source weight, using a
/// per-source random stream, and the kept samples are shuffled.
std::vector<MixedSample> mix_sources(std::span<const LoadedSource> sources, std::uint64_t seed);

/// Reads every source file (JSONL) and mixes it. An unreadable or malformed
/// source throws MixtureError naming it.
std::vector<MixedSample> build_mixture(const MixtureSpec& spec, std::uint64_t seed);

void write_mixture_jsonl(std::ostream& out, std::span<const MixedSample> samples);
std::vector<MixedSample> read_mixture_jsonl(std::istream& in);

inline constexpr std::size_t kDefaultPackedLength = 262144;

struct PackedSegment {
  std::string text;
  bool loss = false;
  std::string sample_id;
};

struct TruncationRecord {
  std::string sample_id;
  std::size_t original_tokens = 0;
  std::size_t kept_tokens = 0;
  std::size_t dropped_loss_tokens = 0;
};

struct PackedSequence {
  std::vector<PackedSegment> segments;
  std::size_t total_tokens = 0;
  std::vector<TruncationRecord> truncations;

  nlohmann::json to_json() const;
};

/// Greedy first-fit in stream order. Token counts are per segment. A sample
/// longer than `max_len` keeps its first `max_len` tokens, is recorded in the
/// sequence's truncations, and occupies a sequence of its own.
std::vector<PackedSequence> pack_sequences(std::span<const MixedSample> stream,
                                           const Tokenizer& tok,
                                           std::size_t max_len = kDefaultPackedLength);

}  // namespace lcsynth
