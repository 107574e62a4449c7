#pragma once

// Classification random forest: bootstrap samples, floor(sqrt(p)) candidate
// features per split, Gini impurity, grown until leaves are pure or hold
// min_leaf rows. Each leaf casts a 0/1 vote; the forest returns the vote
// fraction for class 1.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "mhc/error.hpp"
#include "mhc/rand.hpp"
#include "mhc/types.hpp"

namespace mhc {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double vote = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;

  template <class Row>
  double predict(const Row& x) const {
    int k = 0;
    while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
      const TreeNode& n = nodes[static_cast<std::size_t>(k)];
      k = x(n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(k)].vote;
  }
};

struct ForestModel {
  std::vector<Tree> trees;

  template <class Row>
  double predict(const Row& x) const {
    double s = 0.0;
    for (const Tree& t : trees) s += t.predict(x);
    return s / static_cast<double>(trees.size());
  }
};

struct ForestOptions {
  std::size_t n_trees = 500;
  std::size_t mtry = 0;  // 0 means floor(sqrt(p))
  std::size_t min_leaf = 1;
};

namespace detail {

inline std::size_t uniform_index(RngStream& s, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(s.uniform01() * static_cast<double>(n)));
}

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;
};

inline Tree grow_tree(const Matrix& X, const Vector& y, std::vector<Eigen::Index> rows, std::size_t mtry,
                      std::size_t min_leaf, RngStream& s) {
  const std::size_t p = static_cast<std::size_t>(X.cols());
  Tree tree;
  struct Pending {
    int node;
    std::vector<Eigen::Index> rows;
  };
  std::vector<Pending> stack;
  tree.nodes.emplace_back();
  stack.push_back({0, std::move(rows)});
  std::vector<std::size_t> feats(p);
  std::vector<std::pair<double, double>> vals;

  while (!stack.empty()) {
    Pending cur = std::move(stack.back());
    stack.pop_back();
    const std::vector<Eigen::Index>& idx = cur.rows;
    const double n = static_cast<double>(idx.size());
    double ones = 0.0;
    for (Eigen::Index i : idx) ones += y(i);

    auto make_leaf = [&] {
      TreeNode& leaf = tree.nodes[static_cast<std::size_t>(cur.node)];
      leaf.feature = -1;
      if (2.0 * ones > n) leaf.vote = 1.0;
      else if (2.0 * ones < n) leaf.vote = 0.0;
      else leaf.vote = s.uniform01() < 0.5 ? 0.0 : 1.0;
    };

    if (ones == 0.0 || ones == n || idx.size() < 2 * min_leaf) {
      make_leaf();
      continue;
    }

    std::iota(feats.begin(), feats.end(), std::size_t{0});
    SplitCandidate best;
    best.impurity = std::numeric_limits<double>::infinity();
    const double parent = n * (1.0 - (ones / n) * (ones / n) - (1.0 - ones / n) * (1.0 - ones / n));
    for (std::size_t k = 0; k < mtry && k < p; ++k) {
      const std::size_t pick = k + uniform_index(s, p - k);
      std::swap(feats[k], feats[pick]);
      const int f = static_cast<int>(feats[k]);
      vals.clear();
      for (Eigen::Index i : idx) vals.emplace_back(X(i, f), y(i));
      std::sort(vals.begin(), vals.end());
      double left_n = 0.0, left_ones = 0.0;
      for (std::size_t t = 0; t + 1 < vals.size(); ++t) {
        left_n += 1.0;
        left_ones += vals[t].second;
        if (vals[t].first == vals[t + 1].first) continue;
        if (left_n < static_cast<double>(min_leaf) || n - left_n < static_cast<double>(min_leaf)) continue;
        const double rn = n - left_n, ro = ones - left_ones;
        const double pl = left_ones / left_n, pr = ro / rn;
        const double g = left_n * 2.0 * pl * (1.0 - pl) + rn * 2.0 * pr * (1.0 - pr);
        if (g < best.impurity) {
          best.impurity = g;
          best.feature = f;
          best.threshold = 0.5 * (vals[t].first + vals[t + 1].first);
        }
      }
    }
    if (best.feature < 0 || !(best.impurity < parent)) {
      make_leaf();
      continue;
    }
    std::vector<Eigen::Index> L, R;
    for (Eigen::Index i : idx) (X(i, best.feature) <= best.threshold ? L : R).push_back(i);
    const int li = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    TreeNode& node = tree.nodes[static_cast<std::size_t>(cur.node)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = li;
    node.right = li + 1;
    stack.push_back({li + 1, std::move(R)});
    stack.push_back({li, std::move(L)});
  }
  return tree;
}

}  // namespace detail

inline ForestModel fit_forest(const Matrix& X, const Vector& y, const ForestOptions& opt, RngStream& stream) {
  const std::size_t N = static_cast<std::size_t>(X.rows());
  const std::size_t p = static_cast<std::size_t>(X.cols());
  std::size_t mtry = opt.mtry;
  if (mtry == 0) mtry = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(p)))));
  mtry = std::min(mtry, p);
  ForestModel f;
  f.trees.reserve(opt.n_trees);
  for (std::size_t t = 0; t < opt.n_trees; ++t) {
    std::vector<Eigen::Index> rows(N);
    for (auto& r : rows) r = static_cast<Eigen::Index>(detail::uniform_index(stream, N));
    f.trees.push_back(detail::grow_tree(X, y, std::move(rows), mtry, opt.min_leaf, stream));
  }
  return f;
}

}  // namespace mhc
