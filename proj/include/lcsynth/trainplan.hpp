#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

namespace lcsynth {

class TrainPlanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StageConfig {
  std::size_t stage_index = 0;
  std::uint64_t max_position = 0;
  std::uint64_t train_seq_len = 0;
  double rope_theta = 0.0;
  double learning_rate = 1e-5;
  std::size_t max_steps = 50;
  std::size_t warmup_steps = 10;

  /// Training sequences are shorter than the position range.
  bool uses_pose() const { return train_seq_len < max_position; }
  nlohmann::json to_json() const;
  static StageConfig from_json(const nlohmann::json& j);
};

struct ScheduleOptions {
  std::uint64_t start_max_position = 131072;
  double start_theta = 500000.0;
  std::size_t n_stages = 3;
  std::uint64_t hardware_cap = 524288;
  double learning_rate = 1e-5;
  std::size_t max_steps = 50;
  std::size_t warmup_steps = 10;
};

/// Stage k doubles the position range k+1 times and quadruples the RoPE base
/// k+1 times relative to the starting model.
std::vector<StageConfig> progressive_schedule(const ScheduleOptions& options);
std::vector<StageConfig> progressive_schedule(std::uint64_t start_max_position, double start_theta,
                                              std::size_t n_stages, std::uint64_t hardware_cap);

void write_schedule_jsonl(std::ostream& out, std::span<const StageConfig> stages);

/// Human-readable table with one column per stage.
void print_schedule_table(std::ostream& out, std::span<const StageConfig> stages);

struct PositionPlan {
  std::vector<std::uint64_t> positions;
  std::uint64_t train_len = 0;
  std::uint64_t target_len = 0;
  std::uint64_t cut = 0;   // first index of the shifted segment
  std::uint64_t skip = 0;  // offset added to the shifted segment
};

/// Two-segment skip-wise position ids: [0, cut) keeps its positions and
/// [cut, train_len) is shifted by a skip drawn uniformly from
/// [0, target_len - train_len].
PositionPlan pose_position_ids(std::uint64_t train_len, std::uint64_t target_len,
                               std::uint64_t seed);

}  // namespace lcsynth
