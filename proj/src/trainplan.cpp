#include "lcsynth/trainplan.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include "lcsynth/random.hpp"
#include "lcsynth/text.hpp"

namespace lcsynth {

using nlohmann::json;

json StageConfig::to_json() const {
  return json{{"stage_index", stage_index},     {"max_position", max_position},
              {"train_seq_len", train_seq_len}, {"rope_theta", rope_theta},
              {"learning_rate", learning_rate}, {"max_steps", max_steps},
              {"warmup_steps", warmup_steps},   {"pose", uses_pose()}};
}

StageConfig StageConfig::from_json(const json& j) {
  StageConfig s;
  s.stage_index = j.at("stage_index").get<std::size_t>();
  s.max_position = j.at("max_position").get<std::uint64_t>();
  s.train_seq_len = j.at("train_seq_len").get<std::uint64_t>();
  s.rope_theta = j.at("rope_theta").get<double>();
  s.learning_rate = j.at("learning_rate").get<double>();
  s.max_steps = j.at("max_steps").get<std::size_t>();
  s.warmup_steps = j.at("warmup_steps").get<std::size_t>();
  return s;
}

std::vector<StageConfig> progressive_schedule(const ScheduleOptions& o) {
  if (o.n_stages < 1) throw TrainPlanError("progressive_schedule: n_stages must be >= 1");
  if (o.start_max_position < 1 || o.hardware_cap < 1 || !(o.start_theta > 0.0)) {
    throw TrainPlanError("progressive_schedule: start position, theta and hardware cap must be positive");
  }
  if (o.n_stages > 40) throw TrainPlanError("progressive_schedule: too many stages");
  std::vector<StageConfig> out;
  std::uint64_t max_position = o.start_max_position;
  double theta = o.start_theta;
  for (std::size_t k = 0; k < o.n_stages; ++k) {
    max_position *= 2;
    theta *= 4.0;
    StageConfig s;
    s.stage_index = k;
    s.max_position = max_position;
    s.train_seq_len = std::min(max_position, o.hardware_cap);
    s.rope_theta = theta;
    s.learning_rate = o.learning_rate;
    s.max_steps = o.max_steps;
    s.warmup_steps = o.warmup_steps;
    out.push_back(s);
  }
  return out;
}

std::vector<StageConfig> progressive_schedule(std::uint64_t start_max_position, double start_theta,
                                              std::size_t n_stages, std::uint64_t hardware_cap) {
  ScheduleOptions o;
  o.start_max_position = start_max_position;
  o.start_theta = start_theta;
  o.n_stages = n_stages;
  o.hardware_cap = hardware_cap;
  return progressive_schedule(o);
}

void write_schedule_jsonl(std::ostream& out, std::span<const StageConfig> stages) {
  for (const auto& s : stages) out << s.to_json().dump() << '\n';
}

void print_schedule_table(std::ostream& out, std::span<const StageConfig> stages) {
  auto row = [&](const std::string& label, auto&& cell) {
    out << std::left << std::setw(18) << label;
    for (std::size_t i = 0; i < stages.size(); ++i) {
      out << (i == 0 ? "" : " -> ") << cell(stages[i]);
    }
    out << '\n';
  };
  row("Stage", [](const StageConfig& s) { return std::to_string(s.stage_index + 1); });
  row("RoPE theta", [](const StageConfig& s) { return format_decimal(s.rope_theta); });
  row("Sequence length", [](const StageConfig& s) { return format_tokens(s.train_seq_len); });
  row("Max position id", [](const StageConfig& s) { return format_tokens(s.max_position); });
  row("PoSE", [](const StageConfig& s) { return std::string(s.uses_pose() ? "yes" : "no"); });
  row("Learning rate", [](const StageConfig& s) {
    std::ostringstream os;
    os << s.learning_rate;
    return os.str();
  });
  row("Warmup steps", [](const StageConfig& s) { return std::to_string(s.warmup_steps); });
  row("Max steps", [](const StageConfig& s) { return std::to_string(s.max_steps); });
}

PositionPlan pose_position_ids(std::uint64_t train_len, std::uint64_t target_len,
                               std::uint64_t seed) {
  if (train_len < 1) throw TrainPlanError("pose_position_ids: train_len must be >= 1");
  if (train_len > target_len) {
    throw TrainPlanError("pose_position_ids: train_len " + std::to_string(train_len) +
                         " exceeds target_len " + std::to_string(target_len));
  }
  Rng rng(seed);
  PositionPlan plan;
  plan.train_len = train_len;
  plan.target_len = target_len;
  plan.cut = train_len >= 2 ? static_cast<std::uint64_t>(rng.between(1, static_cast<std::int64_t>(train_len - 1)))
                            : train_len;
  plan.skip = static_cast<std::uint64_t>(rng.between(0, static_cast<std::int64_t>(target_len - train_len)));
  plan.positions.resize(train_len);
  for (std::uint64_t i = 0; i < train_len; ++i) {
    plan.positions[i] = i < plan.cut ? i : i + plan.skip;
  }
  return plan;
}

}  // namespace lcsynth
