#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bmapq::markov {

// Row-major dense square matrix used by the state-elimination solver.
struct DenseSquare {
  std::size_t n = 0;
  std::vector<double> data;

  explicit DenseSquare(std::size_t size) : n(size), data(size * size, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return data[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data[i * n + j];
  }
};

// Directed graph over states; an edge i -> j means a positive transition
// probability (or rate) from i to j with i != j.
using Adjacency = std::vector<std::vector<int>>;

// Strongly connected components that no edge leaves. A finite chain has a
// unique stationary distribution iff exactly one such class exists.
std::vector<std::vector<int>> closed_classes(const Adjacency& graph);

// Strongly connected components in reverse topological order (Tarjan).
std::vector<std::vector<int>> strongly_connected_components(
    const Adjacency& graph);

// Grassmann-Taksar-Heyman elimination. Works on a stochastic matrix or on a
// generator: only off-diagonal entries are read. The input must be
// irreducible; a zero pivot throws IrreducibilityError naming the state.
std::vector<double> gth_stationary(DenseSquare matrix);

}  // namespace bmapq::markov
