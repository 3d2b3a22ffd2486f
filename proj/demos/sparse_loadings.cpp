// Simulates one panel with block-sparse loadings and compares the eigen,
// varimax and sparse estimates of the loading space.
#include <cstdio>

#include "sparsefactor/sparsefactor.hpp"

int main() {
  sfm::SimDesign design;
  design.p = 50;
  design.n = 300;
  design.r = 3;
  sfm::Rng rng = sfm::replicate_rng(7, 0);
  const sfm::SimulatedData data = sfm::simulate_dataset(design, rng);

  const sfm::Basis s_hat = sfm::estimate_loading_space(data.series, sfm::PooledCovConfig{}, design.r);
  const sfm::Matrix rotated = sfm::varimax_rotate(s_hat).basis.columns;
  const sfm::Matrix thresholded = sfm::threshold_loadings(rotated, 0.05);

  const auto grid = sfm::lambda_grid(s_hat);
  const sfm::FactorModelFit fit = sfm::select_lambda(sfm::demean(data.series), s_hat, grid);

  std::printf("true nonzeros       %lld\n", static_cast<long long>(design.m()));
  std::printf("eigen    distance %.4f\n", sfm::subspace_distance(s_hat.columns, data.loading));
  std::printf("varimax  distance %.4f  nonzeros %lld\n", sfm::subspace_distance(thresholded, data.loading),
              static_cast<long long>((thresholded.array() != 0.0).count()));
  std::printf("sparse   distance %.4f  nonzeros %lld  lambda %.4g\n", sfm::subspace_distance(fit.loading.q, data.loading),
              static_cast<long long>(fit.loading.nonzero_count()), fit.lambda);
  return 0;
}
