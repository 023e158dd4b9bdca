#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "aerograph/dataio/dataset.hpp"
#include "aerograph/numerics/tensor.hpp"

namespace aerograph {

/// One input window: per-day node features and (transformed) adjacency.
struct GraphSequence {
  std::vector<std::vector<double>> features;  // [day][node]
  std::vector<Tensor> adjacency;              // [day], nodes x nodes

  std::size_t days() const noexcept { return features.size(); }
  std::size_t nodes() const noexcept { return features.empty() ? 0 : features.front().size(); }
};

/// B windows stacked along the row axis, ready for a batched forward pass.
/// Row g * nodes + v belongs to node v of window g.
struct SequenceBatch {
  std::size_t graphs = 0;
  std::size_t nodes = 0;
  std::vector<Tensor> features;   // [day], (B * nodes) x 1
  std::vector<Tensor> adjacency;  // [day], (B * nodes) x nodes

  std::size_t days() const noexcept { return features.size(); }
  std::size_t rows() const noexcept { return graphs * nodes; }
};

GraphSequence sequence_from(std::span<const DailyGraph> graphs, std::size_t first, std::size_t days);
SequenceBatch stack_sequences(std::span<const GraphSequence> sequences);

/// Batch of input windows and the matching (B * nodes) x 1 targets.
SequenceBatch make_batch(std::span<const DailyGraph> graphs, std::span<const WindowSample> windows,
                         std::size_t window_days = kWindowDays);
Tensor make_targets(std::span<const DailyGraph> graphs, std::span<const WindowSample> windows,
                    std::size_t window_days = kWindowDays);

}  // namespace aerograph
