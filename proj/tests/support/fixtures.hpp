#pragma once

#include <bmapq/bmap.hpp>
#include <bmapq/experiment.hpp>

#include <random>

namespace fixtures {

// Two phases, K = 2; the default matrices of the toolkit.
inline bmapq::BmapSpec two_phase() { return bmapq::default_bmap(); }

// One phase with batches of one or two packets.
inline bmapq::BmapSpec single_phase(double rate = 1.5) {
  bmapq::BmapSpec spec;
  spec.d = {bmapq::Matrix::Constant(1, 1, -rate), bmapq::Matrix::Constant(1, 1, rate * 2 / 3),
            bmapq::Matrix::Constant(1, 1, rate / 3)};
  return spec;
}

inline bmapq::BmapSpec poisson(double rate) {
  bmapq::BmapSpec spec;
  spec.d = {bmapq::Matrix::Constant(1, 1, -rate), bmapq::Matrix::Constant(1, 1, rate)};
  return spec;
}

// Random valid BMAP: positive off-diagonal D_0 (so D is irreducible),
// sparse nonnegative batch matrices, diagonal closing the row sums.
inline bmapq::BmapSpec random_bmap(std::mt19937_64& rng, int phases, int max_batch) {
  std::uniform_real_distribution<double> u(0.05, 2.0);
  std::bernoulli_distribution keep(0.6);
  bmapq::BmapSpec spec;
  spec.d.assign(max_batch + 1, bmapq::Matrix::Zero(phases, phases));
  for (int i = 0; i < phases; ++i)
    for (int j = 0; j < phases; ++j)
      if (i != j) spec.d[0](i, j) = u(rng);
  for (int k = 1; k <= max_batch; ++k)
    for (int i = 0; i < phases; ++i)
      for (int j = 0; j < phases; ++j)
        if (keep(rng)) spec.d[k](i, j) = u(rng);
  spec.d[1](0, 0) += u(rng);  // at least one arrival rate
  for (int i = 0; i < phases; ++i) {
    double row = 0.0;
    for (const auto& m : spec.d) row += m.row(i).sum();
    spec.d[0](i, i) = -row;
  }
  return spec;
}

}  // namespace fixtures
