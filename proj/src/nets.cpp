#include "iccd/nets.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "iccd/errors.hpp"
#include "iccd/rng.hpp"

namespace iccd {

namespace {

constexpr char kMagic[8] = {'I', 'C', 'C', 'D', 'N', 'E', 'T', '1'};

void validate_dims(const std::vector<int>& dims) {
  if (dims.size() < 3)
    throw ContractError("init_mlp needs at least two layers (input, embed_dim, class_count)");
  for (int d : dims)
    if (d < 1) throw ContractError("init_mlp: layer dims must be positive");
  const int embed = dims[dims.size() - 2];
  const int classes = dims.back();
  if (embed <= classes)
    throw ContractError("init_mlp: embed_dim (" + std::to_string(embed) +
                        ") must exceed class_count (" + std::to_string(classes) + ")");
}

}  // namespace

std::vector<Tensor> MLPModel::parameters() const {
  std::vector<Tensor> out;
  out.reserve(weights.size() * 2);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out.push_back(weights[i]);
    out.push_back(biases[i]);
  }
  return out;
}

MLPModel init_mlp(const std::vector<int>& layer_dims, std::uint64_t seed) {
  validate_dims(layer_dims);
  MLPModel m;
  m.layer_dims = layer_dims;
  m.embed_layer_index = static_cast<int>(layer_dims.size()) - 3;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const int fan_in = layer_dims[l];
    const int fan_out = layer_dims[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Rng rng(seed_mix(seed, 0x696e6974 /* "init" */, l));
    std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
    for (auto& v : w) v = rng.uniform(-limit, limit);
    m.weights.push_back(Tensor::from({fan_in, fan_out}, std::move(w), true));
    m.biases.push_back(Tensor::zeros({fan_out}, true));
  }
  return m;
}

ForwardResult forward_full(const MLPModel& model, const Tensor& x_batch) {
  if (x_batch.shape().size() != 2 || x_batch.shape()[1] != model.input_dim())
    throw DimensionError("forward: batch feature dim " +
                         std::to_string(x_batch.shape().empty() ? -1 : x_batch.shape().back()) +
                         " does not match input dim " + std::to_string(model.input_dim()));
  const int layers = model.layer_count();
  Tensor h = x_batch;
  for (int l = 0; l < layers; ++l) {
    h = add(matmul(h, model.weights[static_cast<std::size_t>(l)]),
            model.biases[static_cast<std::size_t>(l)]);
    if (l < model.embed_layer_index) h = relu(h);
    if (l == model.embed_layer_index) break;
  }
  ForwardResult out;
  out.embed_pre = h;
  out.logits = add(matmul(h, model.weights.back()), model.biases.back());
  out.probs = softmax_rows(out.logits);
  return out;
}

ForwardResult forward_logits(const MLPModel& model, const Tensor& x_batch) {
  return forward_full(model, x_batch);
}

Tensor embed_normalized(const MLPModel& model, const Tensor& x_batch) {
  return l2_normalize_rows(forward_full(model, x_batch).embed_pre);
}

void save_checkpoint(const MLPModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, sizeof kMagic);
  const auto n_dims = static_cast<std::uint32_t>(model.layer_dims.size());
  out.write(reinterpret_cast<const char*>(&n_dims), sizeof n_dims);
  for (int d : model.layer_dims) {
    const auto v = static_cast<std::int32_t>(d);
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    const auto w = model.weights[l].data();
    out.write(reinterpret_cast<const char*>(w.data()),
              static_cast<std::streamsize>(w.size() * sizeof(double)));
    const auto b = model.biases[l].data();
    out.write(reinterpret_cast<const char*>(b.data()),
              static_cast<std::streamsize>(b.size() * sizeof(double)));
  }
  if (!out) throw IoError("checkpoint write failed: " + path);
}

MLPModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint for reading: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw IoError("not a model checkpoint (bad magic): " + path);
  std::uint32_t n_dims = 0;
  in.read(reinterpret_cast<char*>(&n_dims), sizeof n_dims);
  if (!in || n_dims < 3 || n_dims > 64) throw IoError("corrupt checkpoint header: " + path);
  std::vector<int> dims(n_dims);
  for (auto& d : dims) {
    std::int32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    d = v;
  }
  if (!in) throw IoError("corrupt checkpoint dims: " + path);
  validate_dims(dims);

  MLPModel m;
  m.layer_dims = dims;
  m.embed_layer_index = static_cast<int>(dims.size()) - 3;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto rows = static_cast<std::size_t>(dims[l]);
    const auto cols = static_cast<std::size_t>(dims[l + 1]);
    std::vector<double> w(rows * cols);
    in.read(reinterpret_cast<char*>(w.data()),
            static_cast<std::streamsize>(w.size() * sizeof(double)));
    std::vector<double> b(cols);
    in.read(reinterpret_cast<char*>(b.data()),
            static_cast<std::streamsize>(b.size() * sizeof(double)));
    if (!in) throw IoError("truncated checkpoint payload: " + path);
    m.weights.push_back(Tensor::from({dims[l], dims[l + 1]}, std::move(w), true));
    m.biases.push_back(Tensor::from({dims[l + 1]}, std::move(b), true));
  }
  return m;
}

}  // namespace iccd
