#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iccd/tensor.hpp"

namespace iccd {

// Feed-forward classifier with an embedding head. layer_dims is
// [input, hidden..., embed_dim, class_count]; hidden layers are ReLU, the
// embedding layer is linear, and the final layer maps the embedding to
// logits. Classifier and embedder share the trunk, so contrastive gradients
// reach the classifier parameters.
struct MLPModel {
  std::vector<int> layer_dims;
  std::vector<Tensor> weights;  // [in,out] per layer
  std::vector<Tensor> biases;   // [out] per layer
  int embed_layer_index = 0;    // layer whose output is the embedding

  int input_dim() const { return layer_dims.front(); }
  int embed_dim() const { return layer_dims[layer_dims.size() - 2]; }
  int class_count() const { return layer_dims.back(); }
  int layer_count() const { return static_cast<int>(layer_dims.size()) - 1; }

  // Shared handles to every parameter tensor, weights before biases per layer.
  std::vector<Tensor> parameters() const;
};

// Glorot-uniform weights (seeded), zero biases. Requires at least two layers,
// positive dims, and embed_dim > class_count.
MLPModel init_mlp(const std::vector<int>& layer_dims, std::uint64_t seed);

struct ForwardResult {
  Tensor embed_pre;  // pre-normalization embedding rows [N, embed_dim]
  Tensor logits;     // [N, class_count]
  Tensor probs;      // softmax_rows(logits)
};

// One graph for both heads; x_batch is [N, input_dim].
ForwardResult forward_full(const MLPModel& model, const Tensor& x_batch);

// Classifier head only.
ForwardResult forward_logits(const MLPModel& model, const Tensor& x_batch);

// L2-normalized embedding rows [N, embed_dim]. Throws NumericError when a
// row collapses to (near) zero before normalization.
Tensor embed_normalized(const MLPModel& model, const Tensor& x_batch);

// Versioned binary checkpoint; byte-exact round-trip.
void save_checkpoint(const MLPModel& model, const std::string& path);
MLPModel load_checkpoint(const std::string& path);

}  // namespace iccd
