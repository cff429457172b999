#include <bmapq/errors.hpp>
#include <bmapq/markov.hpp>

#include <algorithm>
#include <string>

namespace bmapq::markov {

std::vector<std::vector<int>> strongly_connected_components(
    const Adjacency& graph) {
  const int n = static_cast<int>(graph.size());
  std::vector<int> index(n, -1), low(n, 0);
  std::vector<char> on_stack(n, 0);
  std::vector<int> stack;
  std::vector<std::vector<int>> components;
  int counter = 0;

  // Iterative Tarjan: frames of (vertex, next edge position).
  std::vector<std::pair<int, std::size_t>> frames;
  for (int root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    frames.emplace_back(root, 0);
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!frames.empty()) {
      auto& [v, pos] = frames.back();
      if (pos < graph[v].size()) {
        const int w = graph[v][pos++];
        if (index[w] == -1) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = 1;
          frames.emplace_back(w, 0);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      const int done = v;
      frames.pop_back();
      if (!frames.empty()) {
        const int parent = frames.back().first;
        low[parent] = std::min(low[parent], low[done]);
      }
      if (low[done] == index[done]) {
        std::vector<int> component;
        int w = -1;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          component.push_back(w);
        } while (w != done);
        std::sort(component.begin(), component.end());
        components.push_back(std::move(component));
      }
    }
  }
  return components;
}

std::vector<std::vector<int>> closed_classes(const Adjacency& graph) {
  const auto components = strongly_connected_components(graph);
  std::vector<int> owner(graph.size(), -1);
  for (std::size_t c = 0; c < components.size(); ++c)
    for (int v : components[c]) owner[v] = static_cast<int>(c);

  std::vector<std::vector<int>> closed;
  for (std::size_t c = 0; c < components.size(); ++c) {
    bool leaves = false;
    for (int v : components[c]) {
      for (int w : graph[v]) {
        if (owner[w] != static_cast<int>(c)) {
          leaves = true;
          break;
        }
      }
      if (leaves) break;
    }
    if (!leaves) closed.push_back(components[c]);
  }
  std::sort(closed.begin(), closed.end());
  return closed;
}

std::vector<double> gth_stationary(DenseSquare p) {
  const std::size_t n = p.n;
  if (n == 0) return {};
  for (std::size_t k = n - 1; k >= 1; --k) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += p(k, j);
    if (!(s > 0.0)) {
      throw IrreducibilityError("state " + std::to_string(k) +
                                " has no transition into states 0.." +
                                std::to_string(k - 1) +
                                " after elimination; chain is reducible");
    }
    for (std::size_t i = 0; i < k; ++i) p(i, k) /= s;
    for (std::size_t i = 0; i < k; ++i) {
      const double pik = p(i, k);
      if (pik == 0.0) continue;
      double* row_i = &p.data[i * n];
      const double* row_k = &p.data[k * n];
      for (std::size_t j = 0; j < k; ++j) row_i[j] += pik * row_k[j];
    }
  }
  std::vector<double> pi(n, 0.0);
  pi[0] = 1.0;
  double total = 1.0;
  for (std::size_t j = 1; j < n; ++j) {
    double v = 0.0;
    for (std::size_t i = 0; i < j; ++i) v += pi[i] * p(i, j);
    pi[j] = v;
    total += v;
  }
  for (double& v : pi) v /= total;
  return pi;
}

}  // namespace bmapq::markov
