#include "nudge/microtask.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace nudge {
namespace {

constexpr std::array<std::string_view, kTaskTypeCount> kTypeNames{
    "Availability", "Emotion",     "HydroDiary",    "DietTracker", "Planning",
    "NoiseLevel",   "Crowdedness", "ImageLabeling", "Arithmetic"};

const std::vector<std::string>& diet_questions() {
  static const std::vector<std::string> q{
      "Do you regularly eat wholegrain cereals, with no added sugar?",
      "Do you eat at least five portions of fruit and vegetables a day?",
      "Do you usually choose wholemeal bread over white bread?",
      "Do you eat oily fish at least once a week?",
      "Do you snack on sweets or chocolate most days?",
      "Do you drink sugary soft drinks most days?",
      "Do you usually add salt to food at the table?",
      "Do you eat breakfast every day?",
      "Do you eat fried food more than twice a week?",
      "Do you choose low-fat dairy products?",
      "Do you eat red meat more than three times a week?",
      "Do you eat processed meat such as ham or sausages most weeks?",
      "Do you eat beans or lentils at least once a week?",
      "Do you eat a handful of nuts most days?",
      "Do you drink fruit juice every day?",
      "Do you eat takeaway meals more than once a week?",
      "Do you trim visible fat from meat?",
      "Do you eat cakes or biscuits most days?",
      "Do you cook meals from fresh ingredients most days?",
      "Do you drink more than two cups of coffee a day?",
      "Do you eat crisps or salty snacks most days?",
      "Do you eat vegetables with your main meal?",
      "Do you usually skip lunch?",
      "Do you eat late at night most days?",
      "Do you drink alcohol more than three days a week?",
      "Do you choose brown rice or pasta over white?",
      "Do you read nutrition labels when shopping?",
      "Do you eat dessert after most meals?",
      "Do you use butter rather than a vegetable spread?",
      "Do you eat fruit as a snack most days?",
  };
  return q;
}

const std::vector<std::string>& image_labels() {
  static const std::vector<std::string> labels{
      "Bear",   "Bird",    "Butterfly", "Cat",      "Dog",   "Fish",  "Horse",
      "Car",    "Bicycle", "Airplane",  "Boat",     "Chair", "Table", "Guitar",
      "Banana", "Apple",   "Tree",      "Mushroom", "Clock", "Lamp"};
  return labels;
}

Microtask basic(TaskType type, std::string statement, std::vector<std::string> options,
                std::optional<int> gold = std::nullopt) {
  Microtask t;
  t.type = type;
  t.category = category_of(type);
  t.statement = std::move(statement);
  t.options = std::move(options);
  t.gold_answer = gold;
  return t;
}

void check_task(const Microtask& t) {
  if (t.options.empty()) throw std::invalid_argument("microtask needs at least one option");
  if (t.gold_answer && (*t.gold_answer < 0 || *t.gold_answer >= static_cast<int>(t.options.size())))
    throw std::invalid_argument("gold_answer does not index options");
}

}  // namespace

TaskCategory category_of(TaskType type) {
  switch (type) {
    case TaskType::Availability:
    case TaskType::Emotion:
    case TaskType::HydroDiary:
    case TaskType::DietTracker:
    case TaskType::Planning: return TaskCategory::SelfMonitoring;
    case TaskType::NoiseLevel:
    case TaskType::Crowdedness: return TaskCategory::ParticipatorySensing;
    case TaskType::ImageLabeling:
    case TaskType::Arithmetic: return TaskCategory::Crowdsourcing;
  }
  return TaskCategory::SelfMonitoring;
}

std::string_view to_string(TaskType type) { return kTypeNames.at(static_cast<std::size_t>(type)); }

std::string_view to_string(TaskCategory c) {
  switch (c) {
    case TaskCategory::SelfMonitoring: return "SelfMonitoring";
    case TaskCategory::ParticipatorySensing: return "ParticipatorySensing";
    case TaskCategory::Crowdsourcing: return "Crowdsourcing";
  }
  return "?";
}

TaskType parse_task_type(std::string_view s) {
  for (std::size_t i = 0; i < kTypeNames.size(); ++i) {
    if (kTypeNames[i] == s) return static_cast<TaskType>(i);
  }
  throw std::invalid_argument("unknown microtask type '" + std::string(s) + "'");
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Correct: return "correct";
    case Verdict::Incorrect: return "incorrect";
    case Verdict::NotFactual: return "not_factual";
  }
  return "?";
}

Verdict verify(const Microtask& task, int answer) {
  if (answer < 0 || answer >= static_cast<int>(task.options.size()))
    throw std::out_of_range("answer index out of range");
  if (!task.factual()) return Verdict::NotFactual;
  return answer == *task.gold_answer ? Verdict::Correct : Verdict::Incorrect;
}

Microtask make_arithmetic(int lhs, int rhs) {
  const int product = lhs * rhs;
  std::array<int, 3> values = product > 500 ? std::array<int, 3>{product - 500, product, product + 500}
                                            : std::array<int, 3>{product, product + 500, product + 1000};
  std::vector<std::string> options;
  int gold = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] == product) gold = static_cast<int>(i);
    options.push_back(std::to_string(values[i]));
  }
  return basic(TaskType::Arithmetic,
               "What is answer of " + std::to_string(lhs) + " × " + std::to_string(rhs) + "?",
               std::move(options), gold);
}

std::vector<Microtask> generate_arithmetic(Rng& rng, int count) {
  if (count < 1) throw std::invalid_argument("generate_arithmetic: count must be >= 1");
  std::vector<Microtask> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int a = 10 + static_cast<int>(rng.below(90));
    const int b = 10 + static_cast<int>(rng.below(90));
    out.push_back(make_arithmetic(a, b));
  }
  return out;
}

MicrotaskPool::MicrotaskPool(std::vector<Microtask> tasks) : tasks_(std::move(tasks)) {
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    check_task(tasks_[i]);
    tasks_[i].id = static_cast<std::uint32_t>(i);
    tasks_[i].category = category_of(tasks_[i].type);
  }
}

MicrotaskPool MicrotaskPool::default_pool(std::uint64_t seed) {
  std::vector<Microtask> tasks;
  tasks.push_back(basic(TaskType::Availability, "Are you available at the moment?", {"Yes", "No"}));
  tasks.push_back(basic(TaskType::Emotion, "Which describe your current emotion?",
                        {"Stressed", "Neutral", "Relaxed"}));
  tasks.push_back(basic(TaskType::Emotion, "How energetic do you feel right now?", {"Tired", "Neutral", "Energetic"}));
  tasks.push_back(basic(TaskType::Emotion, "How is your mood right now?", {"Sad", "Neutral", "Happy"}));
  tasks.push_back(basic(TaskType::Emotion, "How focused do you feel right now?", {"Distracted", "Neutral", "Focused"}));
  tasks.push_back(basic(TaskType::HydroDiary, "How long ago did you drink water?",
                        {"Within 1 hour", "Within 2 hours", "longer"}));
  for (const auto& q : diet_questions()) tasks.push_back(basic(TaskType::DietTracker, q, {"Yes", "No"}));
  tasks.push_back(basic(TaskType::Planning, "Where are you going after you leave here?", {"Home", "Work", "Others"}));
  tasks.push_back(basic(TaskType::Planning, "Where will you be in one hour?", {"Home", "Work", "Others"}));
  tasks.push_back(basic(TaskType::Planning, "Where will you have your next meal?", {"Home", "Work", "Others"}));
  tasks.push_back(basic(TaskType::NoiseLevel, "How loud is it at your location?", {"Loud", "Moderate", "Quiet"}));
  tasks.push_back(basic(TaskType::Crowdedness, "How many people are there around you?", {"0-5", "6-20", ">20"}));

  Rng rng(seed);
  const auto& labels = image_labels();
  for (int i = 0; i < 1100; ++i) {
    std::vector<std::size_t> picks;
    while (picks.size() < 3) {
      const auto k = static_cast<std::size_t>(rng.below(labels.size()));
      if (std::find(picks.begin(), picks.end(), k) == picks.end()) picks.push_back(k);
    }
    std::vector<std::string> options;
    for (auto k : picks) options.push_back(labels[k]);
    const int gold = static_cast<int>(rng.below(3));
    tasks.push_back(basic(TaskType::ImageLabeling,
                          "What is the object in the image? (image #" + std::to_string(i + 1) + ")",
                          std::move(options), gold));
  }
  auto arithmetic = generate_arithmetic(rng, 1000);
  std::move(arithmetic.begin(), arithmetic.end(), std::back_inserter(tasks));
  return MicrotaskPool(std::move(tasks));
}

MicrotaskPool MicrotaskPool::from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("microtask pool must be a JSON array");
  std::vector<Microtask> tasks;
  try {
    for (const auto& item : j) {
      std::optional<int> gold;
      if (item.contains("gold_index") && !item.at("gold_index").is_null())
        gold = item.at("gold_index").get<int>();
      tasks.push_back(basic(parse_task_type(item.at("type").get<std::string>()),
                            item.at("statement").get<std::string>(),
                            item.at("options").get<std::vector<std::string>>(), gold));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed microtask pool: ") + e.what());
  }
  return MicrotaskPool(std::move(tasks));
}

MicrotaskPool MicrotaskPool::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open microtask pool " + path.string());
  return from_json(nlohmann::json::parse(in));
}

const Microtask& MicrotaskPool::sample(Rng& rng) const {
  if (tasks_.empty()) throw std::logic_error("cannot sample from an empty microtask pool");
  return tasks_[rng.below(tasks_.size())];
}

void to_json(nlohmann::json& j, const Microtask& t) {
  j = nlohmann::json{{"id", t.id},
                     {"category", to_string(t.category)},
                     {"type", to_string(t.type)},
                     {"statement", t.statement},
                     {"options", t.options}};
  if (t.gold_answer) j["gold_index"] = *t.gold_answer;
}

}  // namespace nudge
