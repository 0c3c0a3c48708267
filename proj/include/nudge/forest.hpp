#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "nudge/a2c.hpp"
#include "nudge/binary_io.hpp"
#include "nudge/context.hpp"
#include "nudge/rng.hpp"

namespace nudge {

enum class Label { Negative, Positive };

// One logged Send: context features, whether it was answered, and the
// reward it realized (used for off-policy scoring).
struct LabeledExample {
  Observation features;
  Label label = Label::Negative;
  double reward = 0.0;
};

enum class MaxFeatures { Auto, Sqrt, Log2 };

std::string_view to_string(MaxFeatures m);
MaxFeatures parse_max_features(std::string_view s);

// Features examined per split; Auto is treated as Sqrt.
std::size_t features_per_split(MaxFeatures mode, std::size_t dims = kObservationDim);

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // go left when x[feature] <= threshold
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  std::uint32_t negatives = 0;
  std::uint32_t positives = 0;

  bool leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const TreeNode& leaf_for(const Observation& obs) const;
  // Majority class of the reached leaf; ties vote Negative.
  Label vote(const Observation& obs) const;
  // Training-set confidence of the reached leaf, positives / total.
  double leaf_confidence(const Observation& obs) const;

  bool operator==(const DecisionTree&) const = default;
};

// CART on a bootstrap resample with Gini impurity and a random feature
// subset per node; grows until pure or fewer than two samples.
DecisionTree train_tree(std::span<const LabeledExample> data, MaxFeatures mode, Rng& rng);

// Single-leaf tree predicting the given class.
DecisionTree constant_tree(Label label, std::uint32_t count = 1);

struct ForestPrediction {
  Action action;
  double confidence;  // fraction of trees voting Positive
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  int n_estimators = 0;
  MaxFeatures max_features = MaxFeatures::Auto;
  std::uint64_t seed = 0;

  bool trained() const { return !trees.empty(); }
  // Send iff confidence > 0.5; ties stay Silent.
  ForestPrediction predict(const Observation& obs) const;

  bool operator==(const ForestModel&) const = default;
};

ForestModel train_forest(std::span<const LabeledExample> data, int n_estimators, MaxFeatures mode,
                         std::uint64_t seed);

struct ForestGrid {
  std::vector<int> n_estimators{1, 2, 4, 8, 16, 32};
  std::vector<MaxFeatures> max_features{MaxFeatures::Auto, MaxFeatures::Sqrt, MaxFeatures::Log2};
};

struct GridCell {
  int n_estimators;
  MaxFeatures max_features;
  double score;  // direct-method reward estimate on the held-out split
};

struct GridSearchResult {
  ForestModel model;
  std::vector<GridCell> cells;  // grid order, empty for the fallback model
  std::size_t best = 0;
  bool fallback = false;  // single-class data produced a constant model
};

// Held-out score: sum of realized rewards of examples the model would send.
double off_policy_score(const ForestModel& model, std::span<const LabeledExample> held_out);

struct DataSplit {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> test;
};

// Seeded 80/20 split; both sides nonempty when data has >= 2 examples.
DataSplit split_80_20(std::span<const LabeledExample> data, std::uint64_t seed);

// Seeds used for a given grid cell and for the final refit.
std::uint64_t cell_seed(std::uint64_t seed);

GridSearchResult grid_search(std::span<const LabeledExample> data, const ForestGrid& grid,
                             std::uint64_t seed);

// Random data-collection schedule: at minutes that are multiples of tau,
// Send with probability send_probability; Silent elsewhere.
Action random_training_policy(std::int64_t minute, int tau, Rng& rng, double send_probability = 0.5);

Bytes save(const ForestModel& model);
ForestModel load_forest(std::span<const std::uint8_t> bytes);

}  // namespace nudge
