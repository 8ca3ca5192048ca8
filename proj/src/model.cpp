#include "n2f/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "n2f/rng.hpp"

namespace n2f {
namespace {

constexpr char kMagic[4] = {'N', '2', 'F', 'W'};
constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void init_state(Network<T>& net, AdamHyper hyper) {
  net.weight_state.clear();
  net.bias_state.clear();
  for (const auto& layer : net.layers) {
    net.weight_state.emplace_back(layer.weights.size(), hyper);
    net.bias_state.emplace_back(layer.bias.size(), hyper);
  }
}

template <class U>
void write_pod(std::ofstream& out, U value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(U));
}

template <class U>
U read_pod(std::ifstream& in) {
  U value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(U));
  if (!in) throw std::runtime_error("checkpoint truncated");
  return value;
}

}  // namespace

template <class T>
std::size_t Network<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto& layer : layers) total += layer.parameter_count();
  return total;
}

template <class T>
std::vector<int> Network<T>::channel_plan() const {
  std::vector<int> plan;
  for (const auto& layer : layers) plan.push_back(layer.out_channels());
  return plan;
}

template <class T>
Network<T> build_network(int in_channels, std::uint64_t seed, AdamHyper hyper) {
  if (in_channels < 1) throw std::invalid_argument("build_network: in_channels must be >= 1");
  Network<T> net;
  net.in_channels = in_channels;
  net.seed = seed;
  int channels = in_channels;
  for (int out : kChannelPlan) {
    net.layers.emplace_back(channels, out, 3, Activation::relu);
    channels = out;
  }
  net.layers.emplace_back(channels, 1, 1, Activation::identity);

  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& layer = net.layers[l];
    const double fan_in = static_cast<double>(layer.in_channels()) * layer.kernel_h() * layer.kernel_w();
    const double bound = std::sqrt(6.0 / fan_in);
    const Philox stream(seed, l);
    T* w = layer.weights.data();
    for (std::size_t e = 0; e < layer.weights.size(); ++e) {
      w[e] = static_cast<T>((2.0 * stream.uniform(e) - 1.0) * bound);
    }
  }
  init_state(net, hyper);
  return net;
}

template <class T>
Network<T> make_network(std::vector<ConvLayer<T>> layers, AdamHyper hyper) {
  if (layers.empty()) throw std::invalid_argument("make_network: no layers");
  Network<T> net;
  net.in_channels = layers.front().in_channels();
  for (std::size_t l = 1; l < layers.size(); ++l) {
    if (layers[l].in_channels() != layers[l - 1].out_channels()) {
      throw ShapeError("make_network: layer " + std::to_string(l) + " input channels do not chain");
    }
  }
  net.layers = std::move(layers);
  init_state(net, hyper);
  return net;
}

template <class T>
Tensor<T> forward(const Network<T>& net, const Tensor<T>& input, ForwardCache<T>* cache) {
  if (input.c() != net.in_channels) {
    throw ShapeError("forward: input has " + std::to_string(input.c()) + " channels, network expects " +
                     std::to_string(net.in_channels));
  }
  if (cache) {
    cache->activations.resize(net.layers.size() + 1);
    cache->activations[0] = input;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      conv2d_forward_into(cache->activations[l], net.layers[l], cache->activations[l + 1]);
    }
    cache->network = &net;
    cache->version = net.version;
    return cache->activations.back();
  }
  Tensor<T> a;
  Tensor<T> b;
  const Tensor<T>* current = &input;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Tensor<T>& dst = (l % 2 == 0) ? a : b;
    conv2d_forward_into(*current, net.layers[l], dst);
    current = &dst;
  }
  return *current;
}

template <class T>
NetworkGrads<T> backward(const Network<T>& net, const ForwardCache<T>& cache, const Tensor<T>& grad_logits) {
  if (cache.network != &net || cache.version != net.version ||
      cache.activations.size() != net.layers.size() + 1) {
    throw std::logic_error("backward: cache is missing or stale for this network state");
  }
  if (grad_logits.shape() != cache.activations.back().shape()) {
    throw ShapeError("backward: grad_logits shape " + grad_logits.shape().str() + " != logits shape " +
                     cache.activations.back().shape().str());
  }
  const std::size_t count = net.layers.size();
  NetworkGrads<T> grads;
  grads.weights.resize(count);
  grads.bias.resize(count);
  Tensor<T> upstream = grad_logits;
  for (std::size_t l = count; l-- > 0;) {
    ConvGrads<T> g = conv2d_backward(upstream, cache.activations[l], cache.activations[l + 1], net.layers[l], l > 0);
    grads.weights[l] = std::move(g.weights);
    grads.bias[l] = std::move(g.bias);
    upstream = std::move(g.input);
  }
  return grads;
}

template <class T>
void apply_gradients(Network<T>& net, const NetworkGrads<T>& grads) {
  if (grads.weights.size() != net.layers.size()) throw std::invalid_argument("apply_gradients: layer count mismatch");
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    adam_step<T>(net.layers[l].weights.span(), grads.weights[l].span(), net.weight_state[l]);
    adam_step<T>(net.layers[l].bias, grads.bias[l], net.bias_state[l]);
  }
  ++net.version;
}

Plane predict(const Network<Real>& net, const Plane& image) {
  const Tensor<Real> logits = forward(net, image.as_tensor());
  Plane out(image.height, image.width);
  for (std::size_t k = 0; k < out.size(); ++k) out.pixels[k] = sigmoid(logits.data()[k]);
  return out;
}

void save_checkpoint(const Network<Real>& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  out.write(kMagic, 4);
  write_pod<std::uint32_t>(out, kCheckpointVersion);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(net.in_channels));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(net.layers.size()));
  for (const auto& layer : net.layers) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(layer.out_channels()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(layer.in_channels()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(layer.kernel_h()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(layer.kernel_w()));
    write_pod<std::uint32_t>(out, layer.activation == Activation::relu ? 1u : 0u);
  }
  write_pod<std::uint64_t>(out, net.seed);
  for (const auto& layer : net.layers) {
    for (Real v : layer.weights.span()) write_pod<float>(out, static_cast<float>(v));
    for (Real v : layer.bias) write_pod<float>(out, static_cast<float>(v));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

Network<Real> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("not a checkpoint file: " + path.string());
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const auto in_channels = read_pod<std::uint32_t>(in);
  const auto count = read_pod<std::uint32_t>(in);
  if (count == 0 || count > 1024) throw std::runtime_error("checkpoint: implausible layer count");
  std::vector<ConvLayer<Real>> layers;
  for (std::uint32_t l = 0; l < count; ++l) {
    const auto out_ch = read_pod<std::uint32_t>(in);
    const auto in_ch = read_pod<std::uint32_t>(in);
    const auto kh = read_pod<std::uint32_t>(in);
    const auto kw = read_pod<std::uint32_t>(in);
    const auto act = read_pod<std::uint32_t>(in);
    if (kh != kw || out_ch == 0 || in_ch == 0 || out_ch > 65536 || in_ch > 65536) {
      throw std::runtime_error("checkpoint: bad layer header");
    }
    layers.emplace_back(static_cast<int>(in_ch), static_cast<int>(out_ch), static_cast<int>(kh),
                        act ? Activation::relu : Activation::identity);
  }
  const auto seed = read_pod<std::uint64_t>(in);
  for (auto& layer : layers) {
    for (Real& v : layer.weights.span()) v = static_cast<Real>(read_pod<float>(in));
    for (Real& v : layer.bias) v = static_cast<Real>(read_pod<float>(in));
  }
  Network<Real> net = make_network(std::move(layers));
  if (net.in_channels != static_cast<int>(in_channels)) throw std::runtime_error("checkpoint: channel plan inconsistent");
  net.seed = seed;
  return net;
}

#define N2F_INSTANTIATE_MODEL(T)                                                                     \
  template struct Network<T>;                                                                        \
  template Network<T> build_network<T>(int, std::uint64_t, AdamHyper);                               \
  template Network<T> make_network<T>(std::vector<ConvLayer<T>>, AdamHyper);                         \
  template Tensor<T> forward<T>(const Network<T>&, const Tensor<T>&, ForwardCache<T>*);              \
  template NetworkGrads<T> backward<T>(const Network<T>&, const ForwardCache<T>&, const Tensor<T>&); \
  template void apply_gradients<T>(Network<T>&, const NetworkGrads<T>&);

N2F_INSTANTIATE_MODEL(float)
N2F_INSTANTIATE_MODEL(double)

}  // namespace n2f
