#include "aerograph/model/sequence.hpp"

#include <string>

#include "aerograph/errors.hpp"

namespace aerograph {

GraphSequence sequence_from(std::span<const DailyGraph> graphs, std::size_t first, std::size_t days) {
  if (first + days > graphs.size()) throw ContractError("sequence_from: window runs past the end of the data");
  GraphSequence seq;
  for (std::size_t d = 0; d < days; ++d) {
    seq.features.push_back(graphs[first + d].cases);
    seq.adjacency.push_back(graphs[first + d].flights);
  }
  return seq;
}

SequenceBatch stack_sequences(std::span<const GraphSequence> sequences) {
  if (sequences.empty()) throw ContractError("stack_sequences: empty batch");
  const std::size_t days = sequences.front().days();
  const std::size_t nodes = sequences.front().nodes();
  SequenceBatch batch;
  batch.graphs = sequences.size();
  batch.nodes = nodes;
  const std::size_t rows = batch.rows();
  for (std::size_t d = 0; d < days; ++d) {
    Tensor x({rows, 1});
    Tensor a({rows, nodes});
    for (std::size_t g = 0; g < sequences.size(); ++g) {
      const GraphSequence& s = sequences[g];
      if (s.days() != days || s.nodes() != nodes || s.adjacency.size() != days) {
        throw DimensionError("stack_sequences: window " + std::to_string(g) + " has a different shape");
      }
      const Tensor& adj = s.adjacency[d];
      if (adj.rank() != 2 || adj.rows() != nodes || adj.cols() != nodes || s.features[d].size() != nodes) {
        throw DimensionError("stack_sequences: day " + std::to_string(d) + " of window " + std::to_string(g) +
                             " is not a " + std::to_string(nodes) + "-node graph");
      }
      for (std::size_t v = 0; v < nodes; ++v) {
        x[g * nodes + v] = s.features[d][v];
        for (std::size_t w = 0; w < nodes; ++w) a.at(g * nodes + v, w) = adj.at(v, w);
      }
    }
    batch.features.push_back(std::move(x));
    batch.adjacency.push_back(std::move(a));
  }
  return batch;
}

SequenceBatch make_batch(std::span<const DailyGraph> graphs, std::span<const WindowSample> windows,
                         std::size_t window_days) {
  std::vector<GraphSequence> seqs;
  seqs.reserve(windows.size());
  for (const WindowSample& w : windows) seqs.push_back(sequence_from(graphs, w.first, window_days));
  return stack_sequences(seqs);
}

Tensor make_targets(std::span<const DailyGraph> graphs, std::span<const WindowSample> windows,
                    std::size_t window_days) {
  if (windows.empty()) throw ContractError("make_targets: empty batch");
  const std::size_t nodes = graphs[windows.front().first].nodes();
  Tensor y({windows.size() * nodes, 1});
  for (std::size_t g = 0; g < windows.size(); ++g) {
    const std::size_t target = windows[g].first + window_days;
    if (target >= graphs.size()) throw ContractError("make_targets: window has no target day");
    for (std::size_t v = 0; v < nodes; ++v) y[g * nodes + v] = graphs[target].cases[v];
  }
  return y;
}

}  // namespace aerograph
