#include "n2f/trainer.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "n2f/loss.hpp"
#include "n2f/rng.hpp"

namespace n2f {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct PairTensors {
  Tensor<Real> input;
  Tensor<Real> target;
};

std::vector<PairTensors> training_tensors(const Plane& normalized, const TrainConfig& config, const Plane* clean,
                                          const NormRange& range) {
  std::vector<DownsamplePair> pairs;
  if (config.scheme == Scheme::exact) {
    pairs = make_exact_pairs(normalized, normalize_with(*clean, range));
    if (config.loss == LossKind::bce) {
      // Removing the signal offset can push a target slightly outside [0, 1].
      for (auto& p : pairs)
        for (Real& v : p.target.pixels) v = std::clamp(v, Real(0), Real(1));
    }
  } else {
    pairs = make_training_pairs(normalized, config.scheme);
  }
  std::vector<PairTensors> out;
  for (const auto& p : pairs) out.push_back({p.input.as_tensor(), p.target.as_tensor()});
  return out;
}

}  // namespace

std::string to_string(LossKind loss) { return loss == LossKind::bce ? "bce" : "mse"; }

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::checkerboard: return "checkerboard";
    case Scheme::quad: return "quad";
    case Scheme::exact: return "exact";
  }
  return "?";
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::patience: return "patience";
    case StopReason::max_epochs: return "max_epochs";
    case StopReason::degenerate_input: return "degenerate_input";
  }
  return "?";
}

LossKind parse_loss(const std::string& text) {
  if (text == "bce") return LossKind::bce;
  if (text == "mse") return LossKind::mse;
  throw std::invalid_argument("unknown loss '" + text + "' (expected bce or mse)");
}

Scheme parse_scheme(const std::string& text) {
  if (text == "checkerboard") return Scheme::checkerboard;
  if (text == "quad") return Scheme::quad;
  if (text == "exact") return Scheme::exact;
  throw std::invalid_argument("unknown scheme '" + text + "' (expected checkerboard, quad or exact)");
}

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("learning rate must be > 0");
  if (patience_epochs < 1) throw std::invalid_argument("patience must be >= 1");
  if (avg_window < 1) throw std::invalid_argument("averaging window must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("max epochs must be >= 1");
}

TrainState::TrainState(int avg_window)
    : ring_(static_cast<std::size_t>(std::max(avg_window, 1))), best_(std::numeric_limits<double>::infinity()) {}

const Plane& TrainState::buffered_at(std::size_t i) const {
  if (i >= count_) throw std::out_of_range("TrainState: buffer index out of range");
  const std::size_t oldest = (head_ + ring_.size() - count_) % ring_.size();
  return ring_[(oldest + i) % ring_.size()];
}

void TrainState::record(double score, Plane output) {
  history_.push_back(score);
  if (score < best_) {
    best_ = score;
    since_best_ = 0;
  } else {
    ++since_best_;
  }
  ring_[head_] = std::move(output);
  head_ = (head_ + 1) % ring_.size();
  count_ = std::min(count_ + 1, ring_.size());
}

StopDecision update_stop_state(TrainState& state, double score, Plane output, const TrainConfig& config) {
  if (!std::isfinite(score)) throw std::invalid_argument("validation score is not finite");
  state.record(score, std::move(output));
  if (state.since_best() >= config.patience_epochs || state.epoch() >= config.max_epochs) return StopDecision::stop;
  return StopDecision::keep_going;
}

Plane mean_buffered(const TrainState& state) {
  if (state.buffered() == 0) throw std::logic_error("finalize_output: no validation outputs buffered");
  const Plane& first = state.buffered_at(0);
  std::vector<double> sum(first.size(), 0.0);
  for (std::size_t i = 0; i < state.buffered(); ++i) {
    const Plane& p = state.buffered_at(i);
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += p.pixels[k];
  }
  Plane out(first.height, first.width);
  const double count = static_cast<double>(state.buffered());
  for (std::size_t k = 0; k < sum.size(); ++k) out.pixels[k] = static_cast<Real>(sum[k] / count);
  return out;
}

Plane finalize_output(const TrainState& state, const NormRange& range) {
  return denormalize(mean_buffered(state), range);
}

Validation validate(const Network<Real>& net, const Plane& normalized_noisy) {
  Validation v;
  v.output = predict(net, normalized_noisy);
  v.mse = mse(v.output, normalized_noisy);
  return v;
}

DenoiseResult train_single_channel(const Plane& noisy, const TrainConfig& config, const Plane* clean) {
  config.validate();
  if (noisy.height < 4 || noisy.width < 4) {
    throw std::invalid_argument("image must be at least 4x4, got " + std::to_string(noisy.height) + "x" +
                                std::to_string(noisy.width));
  }
  if (config.scheme == Scheme::exact) {
    if (!clean) throw std::invalid_argument("the exact scheme needs the clean image");
    if (!clean->same_shape(noisy)) throw std::invalid_argument("clean image shape differs from the noisy image");
  }
  const auto start = Clock::now();
  auto [normalized, range] = normalize(noisy);

  DenoiseResult result;
  if (range.degenerate()) {
    result.denoised = noisy;
    result.stop_reason = StopReason::degenerate_input;
    return result;
  }

  const auto pairs = training_tensors(normalized, config, clean, range);
  AdamHyper hyper;
  hyper.lr = config.lr;
  Network<Real> net = build_network<Real>(1, config.seed, hyper);
  TrainState state(config.avg_window);
  ForwardCache<Real> cache;

  for (;;) {
    EpochRecord record;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const Tensor<Real> logits = forward(net, pairs[i].input, &cache);
      const LossResult<Real> loss = config.loss == LossKind::bce ? bce_with_logits(logits, pairs[i].target)
                                                                  : mse_with_logits(logits, pairs[i].target);
      apply_gradients(net, backward(net, cache, loss.grad));
      record.pair_loss[i] = loss.loss;
    }
    Validation val = validate(net, normalized);
    record.epoch = state.epoch() + 1;
    record.val_mse = val.mse;
    record.seconds = seconds_since(start);
    double mean_loss = 0.0;
    for (double l : record.pair_loss) mean_loss += l;
    result.train_loss_history.push_back(mean_loss / static_cast<double>(pairs.size()));
    if (config.on_epoch) {
      record.output = &val.output;
      config.on_epoch(record);
      record.output = nullptr;
    }
    const StopDecision decision = update_stop_state(state, val.mse, std::move(val.output), config);
    if (decision == StopDecision::stop) break;
  }

  result.denoised = finalize_output(state, range);
  result.epochs_run = state.epoch();
  result.optimizer_steps = net.version;
  result.val_history = state.history();
  result.stop_reason = state.since_best() >= config.patience_epochs ? StopReason::patience : StopReason::max_epochs;
  result.wall_time = seconds_since(start);
  return result;
}

ImageData denoise_image(const ImageData& image, const TrainConfig& config, int threads, const ImageData* clean,
                        std::vector<ImageRun>* runs) {
  image.check();
  config.validate();
  if (clean && !clean->same_layout(image)) throw std::invalid_argument("clean image layout differs from the noisy image");
  if (config.scheme == Scheme::exact && !clean) throw std::invalid_argument("the exact scheme needs the clean image");

  const int jobs = image.slices * image.channels;
  std::vector<ImageRun> results(static_cast<std::size_t>(jobs));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));

  auto run_job = [&](int job) {
    const int slice = job / image.channels;
    const int channel = job % image.channels;
    try {
      TrainConfig local = config;
      local.seed = derive_seed(config.seed, static_cast<std::uint64_t>(slice), static_cast<std::uint64_t>(channel));
      if (config.on_epoch) {
        local.on_epoch = [&config, slice, channel](const EpochRecord& r) {
          EpochRecord tagged = r;
          tagged.slice = slice;
          tagged.channel = channel;
          config.on_epoch(tagged);
        };
      }
      const Plane noisy = image.plane(slice, channel);
      Plane reference;
      if (clean) reference = clean->plane(slice, channel);
      results[job] = {slice, channel, train_single_channel(noisy, local, clean ? &reference : nullptr)};
    } catch (...) {
      errors[job] = std::current_exception();
    }
  };

  const int workers = std::clamp(threads, 1, std::max(jobs, 1));
  if (workers == 1) {
    for (int j = 0; j < jobs; ++j) run_job(j);
  } else {
    std::atomic<int> next{0};
    std::vector<std::jthread> pool;
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        omp_set_num_threads(1);
        for (int j = next++; j < jobs; j = next++) run_job(j);
      });
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  ImageData out = image;
  for (const auto& r : results) out.set_plane(r.slice, r.channel, r.result.denoised);
  if (runs) *runs = std::move(results);
  return out;
}

}  // namespace n2f
