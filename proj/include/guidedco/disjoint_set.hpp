#pragma once

#include <numeric>
#include <utility>
#include <vector>

namespace guidedco {

/// Union-find with path halving and union by size.
class DisjointSet {
 public:
  DisjointSet() = default;
  explicit DisjointSet(int n) : parent_(n), size_(n, 1), sets_(n) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }

  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  /// Merges the sets of a and b; returns the surviving root.
  int unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return a;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    --sets_;
    return a;
  }

  int set_count() const { return sets_; }
  int element_count() const { return static_cast<int>(parent_.size()); }

 private:
  std::vector<int> parent_;
  std::vector<int> size_;
  int sets_ = 0;
};

}  // namespace guidedco
