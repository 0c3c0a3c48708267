#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "nudge/rng.hpp"

namespace nudge {

enum class TaskCategory { SelfMonitoring, ParticipatorySensing, Crowdsourcing };

enum class TaskType {
  Availability,
  Emotion,
  HydroDiary,
  DietTracker,
  Planning,
  NoiseLevel,
  Crowdedness,
  ImageLabeling,
  Arithmetic,
};

inline constexpr int kTaskTypeCount = 9;

TaskCategory category_of(TaskType type);
std::string_view to_string(TaskType type);
std::string_view to_string(TaskCategory category);
TaskType parse_task_type(std::string_view s);

struct Microtask {
  std::uint32_t id = 0;
  TaskCategory category = TaskCategory::SelfMonitoring;
  TaskType type = TaskType::Availability;
  std::string statement;
  std::vector<std::string> options;
  std::optional<int> gold_answer;

  // Gold-standard tasks that count toward response accuracy. Planning
  // answers come from sensors and are excluded.
  bool factual() const { return gold_answer.has_value() && type != TaskType::Planning; }
};

enum class Verdict { Correct, Incorrect, NotFactual };

std::string_view to_string(Verdict v);

// Throws std::out_of_range when answer does not index task.options.
Verdict verify(const Microtask& task, int answer);

// Two-digit by two-digit products; options are {p-500, p, p+500} (or
// {p, p+500, p+1000} when p <= 500) in ascending order.
Microtask make_arithmetic(int lhs, int rhs);
std::vector<Microtask> generate_arithmetic(Rng& rng, int count);

class MicrotaskPool {
 public:
  MicrotaskPool() = default;
  // Ids are reassigned to the position in the pool.
  explicit MicrotaskPool(std::vector<Microtask> tasks);

  // All nine task types with the per-type question counts of the deployed
  // app; image-labeling entries are label-only stand-ins.
  static MicrotaskPool default_pool(std::uint64_t seed = 2020);

  // JSON: [{"type": ..., "statement": ..., "options": [...], "gold_index": n?}, ...]
  static MicrotaskPool from_json(const nlohmann::json& j);
  static MicrotaskPool load(const std::filesystem::path& path);

  const Microtask& sample(Rng& rng) const;
  const Microtask& at(std::uint32_t id) const { return tasks_.at(id); }
  std::size_t size() const { return tasks_.size(); }
  bool empty() const { return tasks_.empty(); }
  const std::vector<Microtask>& tasks() const { return tasks_; }

 private:
  std::vector<Microtask> tasks_;
};

void to_json(nlohmann::json& j, const Microtask& task);

}  // namespace nudge
