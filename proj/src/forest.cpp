#include "nudge/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace nudge {
namespace {

constexpr std::string_view kForestMagic = "NDGF";
constexpr std::uint32_t kForestVersion = 1;

struct Split {
  std::int32_t feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;  // weighted child Gini, unnormalized
};

double gini_mass(double pos, double total) {
  if (total <= 0.0) return 0.0;
  const double p = pos / total;
  return total * (1.0 - p * p - (1.0 - p) * (1.0 - p));
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

std::string_view to_string(MaxFeatures m) {
  switch (m) {
    case MaxFeatures::Auto: return "auto";
    case MaxFeatures::Sqrt: return "sqrt";
    case MaxFeatures::Log2: return "log2";
  }
  return "?";
}

MaxFeatures parse_max_features(std::string_view s) {
  if (s == "auto") return MaxFeatures::Auto;
  if (s == "sqrt") return MaxFeatures::Sqrt;
  if (s == "log2") return MaxFeatures::Log2;
  throw std::invalid_argument("unknown max_features '" + std::string(s) + "'");
}

std::size_t features_per_split(MaxFeatures mode, std::size_t dims) {
  const double d = static_cast<double>(dims);
  const double k = mode == MaxFeatures::Log2 ? std::ceil(std::log2(d)) : std::ceil(std::sqrt(d));
  return std::clamp<std::size_t>(static_cast<std::size_t>(k), 1, dims);
}

const TreeNode& DecisionTree::leaf_for(const Observation& obs) const {
  if (nodes.empty()) throw std::logic_error("empty decision tree");
  std::size_t i = 0;
  while (!nodes[i].leaf()) {
    const auto& n = nodes[i];
    i = obs.values[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes[i];
}

Label DecisionTree::vote(const Observation& obs) const {
  const auto& leaf = leaf_for(obs);
  return leaf.positives > leaf.negatives ? Label::Positive : Label::Negative;
}

double DecisionTree::leaf_confidence(const Observation& obs) const {
  const auto& leaf = leaf_for(obs);
  return static_cast<double>(leaf.positives) / static_cast<double>(leaf.positives + leaf.negatives);
}

DecisionTree constant_tree(Label label, std::uint32_t count) {
  DecisionTree t;
  TreeNode leaf;
  (label == Label::Positive ? leaf.positives : leaf.negatives) = std::max<std::uint32_t>(count, 1);
  t.nodes.push_back(leaf);
  return t;
}

DecisionTree train_tree(std::span<const LabeledExample> data, MaxFeatures mode, Rng& rng) {
  if (data.empty()) throw std::invalid_argument("train_tree: empty data");
  const auto n = data.size();
  std::vector<std::size_t> sample(n);
  for (auto& s : sample) s = rng.below(n);

  const std::size_t mtry = features_per_split(mode);
  DecisionTree tree;
  tree.nodes.emplace_back();
  struct Work {
    std::size_t node;
    std::vector<std::size_t> rows;
  };
  std::vector<Work> stack;
  stack.push_back({0, std::move(sample)});

  std::vector<std::size_t> features(kObservationDim);
  std::vector<std::pair<double, bool>> column;
  while (!stack.empty()) {
    Work work = std::move(stack.back());
    stack.pop_back();
    const auto& rows = work.rows;
    std::uint32_t pos = 0;
    for (auto r : rows) pos += data[r].label == Label::Positive ? 1u : 0u;
    const auto total = static_cast<std::uint32_t>(rows.size());
    tree.nodes[work.node].positives = pos;
    tree.nodes[work.node].negatives = total - pos;
    if (pos == 0 || pos == total || total < 2) continue;

    std::iota(features.begin(), features.end(), std::size_t{0});
    shuffle(features, rng);
    Split best;
    std::size_t visited = 0;
    for (auto f : features) {
      if (visited >= mtry && best.feature >= 0) break;
      column.clear();
      for (auto r : rows) column.emplace_back(data[r].features.values[f], data[r].label == Label::Positive);
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;  // constant in this node
      ++visited;
      double left_pos = 0.0;
      const double all = static_cast<double>(total);
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        left_pos += column[i].second ? 1.0 : 0.0;
        if (column[i].first == column[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1);
        const double impurity = gini_mass(left_pos, nl) + gini_mass(pos - left_pos, all - nl);
        if (best.feature < 0 || impurity < best.impurity) {
          best.feature = static_cast<std::int32_t>(f);
          best.threshold = 0.5 * (column[i].first + column[i + 1].first);
          best.impurity = impurity;
        }
      }
    }
    if (best.feature < 0) continue;  // every feature constant: leaf

    std::vector<std::size_t> left_rows, right_rows;
    for (auto r : rows) {
      (data[r].features.values[static_cast<std::size_t>(best.feature)] <= best.threshold ? left_rows : right_rows)
          .push_back(r);
    }
    const auto left = tree.nodes.size();
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& node = tree.nodes[work.node];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = static_cast<std::uint32_t>(left);
    node.right = static_cast<std::uint32_t>(left + 1);
    stack.push_back({left + 1, std::move(right_rows)});
    stack.push_back({left, std::move(left_rows)});
  }
  return tree;
}

ForestPrediction ForestModel::predict(const Observation& obs) const {
  if (!trained()) throw std::logic_error("forest model is not trained");
  std::size_t votes = 0;
  for (const auto& t : trees) votes += t.vote(obs) == Label::Positive ? 1 : 0;
  const double confidence = static_cast<double>(votes) / static_cast<double>(trees.size());
  return {confidence > 0.5 ? Action::Send : Action::Silent, confidence};
}

ForestModel train_forest(std::span<const LabeledExample> data, int n_estimators, MaxFeatures mode,
                         std::uint64_t seed) {
  if (n_estimators < 1) throw std::invalid_argument("n_estimators must be >= 1");
  ForestModel model;
  model.n_estimators = n_estimators;
  model.max_features = mode;
  model.seed = seed;
  for (int k = 0; k < n_estimators; ++k) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    model.trees.push_back(train_tree(data, mode, rng));
  }
  return model;
}

double off_policy_score(const ForestModel& model, std::span<const LabeledExample> held_out) {
  double score = 0.0;
  for (const auto& e : held_out) {
    if (model.predict(e.features).action == Action::Send) score += e.reward;
  }
  return score;
}

DataSplit split_80_20(std::span<const LabeledExample> data, std::uint64_t seed) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x5b1));
  shuffle(idx, rng);
  std::size_t n_train = data.size() * 4 / 5;
  if (data.size() >= 2) n_train = std::clamp<std::size_t>(n_train, 1, data.size() - 1);
  DataSplit split;
  for (std::size_t i = 0; i < idx.size(); ++i) (i < n_train ? split.train : split.test).push_back(data[idx[i]]);
  return split;
}

std::uint64_t cell_seed(std::uint64_t seed) { return derive_seed(seed, 0xce11); }

GridSearchResult grid_search(std::span<const LabeledExample> data, const ForestGrid& grid,
                             std::uint64_t seed) {
  if (data.empty()) throw std::invalid_argument("grid_search: empty data");
  if (grid.n_estimators.empty() || grid.max_features.empty())
    throw std::invalid_argument("grid_search: empty grid");
  const auto positives = std::count_if(data.begin(), data.end(),
                                       [](const auto& e) { return e.label == Label::Positive; });
  GridSearchResult result;
  if (positives == 0 || static_cast<std::size_t>(positives) == data.size()) {
    const Label majority = positives == 0 ? Label::Negative : Label::Positive;
    result.model.trees.push_back(constant_tree(majority, static_cast<std::uint32_t>(data.size())));
    result.model.n_estimators = 1;
    result.model.max_features = grid.max_features.front();
    result.model.seed = seed;
    result.fallback = true;
    return result;
  }

  const auto split = split_80_20(data, seed);
  const auto train_seed = cell_seed(seed);
  for (int n : grid.n_estimators) {
    for (auto mode : grid.max_features) {
      const auto model = train_forest(split.train, n, mode, train_seed);
      result.cells.push_back({n, mode, off_policy_score(model, split.test)});
    }
  }
  // Strict comparison keeps the earliest cell on ties; cells are visited in
  // ascending n_estimators order.
  for (std::size_t i = 1; i < result.cells.size(); ++i) {
    const auto& c = result.cells[i];
    const auto& b = result.cells[result.best];
    if (c.score > b.score || (c.score == b.score && c.n_estimators < b.n_estimators)) result.best = i;
  }
  const auto& best = result.cells[result.best];
  result.model = train_forest(data, best.n_estimators, best.max_features, train_seed);
  return result;
}

Action random_training_policy(std::int64_t minute, int tau, Rng& rng, double send_probability) {
  if (tau <= 0) throw std::invalid_argument("tau must be positive");
  if (minute % tau != 0) return Action::Silent;
  return rng.bernoulli(send_probability) ? Action::Send : Action::Silent;
}

Bytes save(const ForestModel& m) {
  ByteWriter w;
  w.magic(kForestMagic);
  w.u32(kForestVersion);
  w.u32(static_cast<std::uint32_t>(m.n_estimators));
  w.u8(static_cast<std::uint8_t>(m.max_features));
  w.u64(m.seed);
  w.u64(m.trees.size());
  for (const auto& t : m.trees) {
    w.u64(t.nodes.size());
    for (const auto& n : t.nodes) {
      w.u32(static_cast<std::uint32_t>(n.feature));
      w.f64(n.threshold);
      w.u32(n.left);
      w.u32(n.right);
      w.u32(n.negatives);
      w.u32(n.positives);
    }
  }
  return std::move(w).bytes();
}

ForestModel load_forest(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic(kForestMagic);
  if (const auto version = r.u32(); version != kForestVersion)
    throw FormatError("unsupported forest format version " + std::to_string(version));
  ForestModel m;
  m.n_estimators = static_cast<int>(r.u32());
  const auto mode = r.u8();
  if (mode > 2) throw FormatError("bad max_features tag");
  m.max_features = static_cast<MaxFeatures>(mode);
  m.seed = r.u64();
  const auto tree_count = r.u64();
  if (tree_count > r.remaining()) throw FormatError("truncated payload");
  for (std::uint64_t k = 0; k < tree_count; ++k) {
    DecisionTree t;
    const auto count = r.u64();
    if (count == 0 || count > r.remaining() / 28) throw FormatError("bad node count");
    t.nodes.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      auto& n = t.nodes[i];
      n.feature = static_cast<std::int32_t>(r.u32());
      n.threshold = r.f64();
      n.left = r.u32();
      n.right = r.u32();
      n.negatives = r.u32();
      n.positives = r.u32();
      if (!n.leaf() && (n.feature >= static_cast<std::int32_t>(kObservationDim) || n.left >= count ||
                        n.right >= count))
        throw FormatError("corrupt tree node");
      // children always follow their parent, which also rules out cycles
      if (!n.leaf() && (n.left <= i || n.right <= i)) throw FormatError("corrupt tree node order");
      if (n.leaf() && n.negatives + n.positives == 0) throw FormatError("empty leaf");
    }
    m.trees.push_back(std::move(t));
  }
  r.expect_end();
  if (m.n_estimators < 1 || static_cast<std::size_t>(m.n_estimators) != m.trees.size())
    throw FormatError("tree count does not match n_estimators");
  return m;
}

}  // namespace nudge
