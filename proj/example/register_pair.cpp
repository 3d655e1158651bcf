// Registers a synthetic pair with 90% outliers, with and without splitting.

#include <iostream>

#include "sandro/sandro.hpp"

int main() {
  using namespace sandro;
  const PointCloud source = voxel_downsample(make_standin_cloud(), 0.02);

  ScenarioConfig scenario;
  scenario.outlier_rate = 0.9;
  const GeneratedPair gen = generate_pair(source, scenario, 7);
  const PointPairs pairs = make_pairs(gen.source, gen.target, gen.correspondences);

  for (int s : {1, 4}) {
    SplitConfig split;
    split.num_splits = s;
    split.scheme = PartitionScheme::kShuffled;
    const SplitReport rep = solve_with_splits(pairs, GncConfig{}, split);
    std::cout << "splits=" << s << "  winner=" << rep.winner
              << "  rot_err_deg=" << rotation_error(rep.transform, gen.ground_truth)
              << "  trans_err_m=" << translation_error(rep.transform, gen.ground_truth) << '\n';
  }
  return 0;
}
