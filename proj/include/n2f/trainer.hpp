#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "n2f/downsample.hpp"
#include "n2f/imaging.hpp"
#include "n2f/model.hpp"

namespace n2f {

enum class LossKind { bce, mse };
enum class StopReason { patience, max_epochs, degenerate_input };

std::string to_string(LossKind loss);
std::string to_string(Scheme scheme);
std::string to_string(StopReason reason);
LossKind parse_loss(const std::string& text);
Scheme parse_scheme(const std::string& text);

struct EpochRecord {
  int slice = 0;
  int channel = 0;
  int epoch = 0;  // 1-based
  std::array<double, 4> pair_loss{};
  double val_mse = 0.0;
  double seconds = 0.0;  // since the start of this training run
  const Plane* output = nullptr;  // normalized validation output; valid during the callback only
};

struct TrainConfig {
  LossKind loss = LossKind::bce;
  Scheme scheme = Scheme::checkerboard;
  double lr = 0.001;
  int patience_epochs = 100;
  int avg_window = 100;
  int max_epochs = 20000;
  std::uint64_t seed = 0;
  // Called after every epoch. denoise_image may call it from several
  // threads at once when it runs jobs in parallel.
  std::function<void(const EpochRecord&)> on_epoch;

  // Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

/// Early-stopping and output-averaging state of one run.
class TrainState {
 public:
  explicit TrainState(int avg_window);

  int epoch() const { return static_cast<int>(history_.size()); }
  double best() const { return best_; }
  int since_best() const { return since_best_; }
  const std::vector<double>& history() const { return history_; }

  std::size_t buffered() const { return count_; }
  /// i-th buffered output, oldest first.
  const Plane& buffered_at(std::size_t i) const;

  void record(double score, Plane output);

 private:
  std::vector<Plane> ring_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
  double best_;
  int since_best_ = 0;
  std::vector<double> history_;
};

enum class StopDecision { keep_going, stop };

/// Records one validation result. A score strictly below the best resets the
/// patience counter; anything else increments it. Stops once the counter
/// reaches patience_epochs or the epoch count reaches max_epochs.
StopDecision update_stop_state(TrainState& state, double score, Plane output, const TrainConfig& config);

/// Elementwise mean of the buffered outputs (summed oldest to newest in
/// double precision), mapped back through `range`.
Plane finalize_output(const TrainState& state, const NormRange& range);
/// The same mean before denormalization.
Plane mean_buffered(const TrainState& state);

struct Validation {
  double mse = 0.0;
  Plane output;
};

Validation validate(const Network<Real>& net, const Plane& normalized_noisy);

struct DenoiseResult {
  Plane denoised;
  int epochs_run = 0;
  std::vector<double> val_history;
  std::vector<double> train_loss_history;  // mean loss over the four pairs, per epoch
  double wall_time = 0.0;
  std::uint64_t optimizer_steps = 0;  // Adam updates applied to every parameter tensor
  StopReason stop_reason = StopReason::patience;
};

/// Full single-plane run. `clean` is required for (and only used by) the exact scheme.
DenoiseResult train_single_channel(const Plane& noisy, const TrainConfig& config, const Plane* clean = nullptr);

struct ImageRun {
  int slice = 0;
  int channel = 0;
  DenoiseResult result;
};

/// Denoises every channel of every slice with an independent run seeded by
/// derive_seed(config.seed, slice, channel). Up to `threads` runs execute
/// concurrently; results do not depend on the thread count.
ImageData denoise_image(const ImageData& image, const TrainConfig& config, int threads = 1,
                        const ImageData* clean = nullptr, std::vector<ImageRun>* runs = nullptr);

}  // namespace n2f
