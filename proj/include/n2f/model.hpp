#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "n2f/adam.hpp"
#include "n2f/conv.hpp"
#include "n2f/plane.hpp"

namespace n2f {

/// Output channels of the eight 3x3 ReLU convolutions, in order; a 1x1
/// single-channel convolution follows.
inline constexpr std::array<int, 8> kChannelPlan{32, 32, 64, 64, 128, 128, 256, 256};

template <class T>
struct Network {
  std::vector<ConvLayer<T>> layers;
  std::vector<AdamState<T>> weight_state;
  std::vector<AdamState<T>> bias_state;
  int in_channels = 1;
  std::uint64_t seed = 0;
  // Bumped on every parameter update; a cached forward pass records it.
  std::uint64_t version = 0;

  std::size_t parameter_count() const;
  std::vector<int> channel_plan() const;
};

/// Activations kept by a training forward pass: activations[0] is the input,
/// activations[l + 1] the output of layer l (the last one is the logits).
template <class T>
struct ForwardCache {
  std::vector<Tensor<T>> activations;
  const Network<T>* network = nullptr;
  std::uint64_t version = 0;
};

template <class T>
struct NetworkGrads {
  std::vector<Tensor<T>> weights;
  std::vector<std::vector<T>> bias;
};

/// He-uniform weights (bound sqrt(6 / fan_in)) drawn from a Philox stream
/// keyed by `seed`, zero biases, fresh Adam state.
template <class T>
Network<T> build_network(int in_channels, std::uint64_t seed, AdamHyper hyper = {});

/// A network with an arbitrary stack of layers (used to test composition).
template <class T>
Network<T> make_network(std::vector<ConvLayer<T>> layers, AdamHyper hyper = {});

template <class T>
Tensor<T> forward(const Network<T>& net, const Tensor<T>& input, ForwardCache<T>* cache = nullptr);

template <class T>
NetworkGrads<T> backward(const Network<T>& net, const ForwardCache<T>& cache, const Tensor<T>& grad_logits);

/// One Adam step on every parameter tensor.
template <class T>
void apply_gradients(Network<T>& net, const NetworkGrads<T>& grads);

/// sigmoid(forward(image)) for a single-channel network.
Plane predict(const Network<Real>& net, const Plane& image);

/// Checkpoint: "N2FW" magic, u32 version, u32 in_channels, u32 layer count,
/// per layer u32 (out, in, kh, kw, activation), u64 seed, then per layer the
/// weights and biases as little-endian float32.
void save_checkpoint(const Network<Real>& net, const std::filesystem::path& path);
Network<Real> load_checkpoint(const std::filesystem::path& path);

}  // namespace n2f
