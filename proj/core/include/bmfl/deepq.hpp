#pragma once

// Feed-forward state-action Q-network with manual backpropagation, replay
// pool, target network and the double-DQN update.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bmfl/types.hpp"

namespace bmfl {

enum class Activation { Relu, Identity };

struct MlpSpec {
  std::vector<std::size_t> layerSizes;  // input, hidden..., output
  Activation hidden = Activation::Relu; // output layer is always linear

  // [inDim, 40, 60, 40, 1] unless overridden.
  static MlpSpec q_network(std::size_t inDim, std::vector<std::size_t> hidden = {40, 60, 40});

  std::size_t input_dim() const { return layerSizes.front(); }
  std::size_t output_dim() const { return layerSizes.back(); }
  std::size_t layer_count() const { return layerSizes.size() - 1; }
  std::size_t parameter_count() const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

// Flat parameters. Layer l stores its weight matrix input-major
// (w[i * n_out + o]) followed by n_out biases.
struct ModelWeights {
  MlpSpec spec;
  std::vector<double> params;

  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;
  double& weight(std::size_t layer, std::size_t in, std::size_t out);
  double weight(std::size_t layer, std::size_t in, std::size_t out) const;
  double& bias(std::size_t layer, std::size_t out);
  double bias(std::size_t layer, std::size_t out) const;

  friend bool operator==(const ModelWeights&, const ModelWeights&) = default;
};

ModelWeights zero_weights(const MlpSpec& spec);
// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer.
ModelWeights init_weights(const MlpSpec& spec, Rng& rng);
bool all_finite(const ModelWeights& w);

double forward(const ModelWeights& w, std::span<const double> x);
// dQ/dtheta * dLossDq for every parameter. ReLU'(0) = 0.
std::vector<double> backward(const ModelWeights& w, std::span<const double> x, double dLossDq);
// Adds dQ/dtheta * scale into `grad` (same length as params).
void backward_accumulate(const ModelWeights& w, std::span<const double> x, double scale,
                         std::span<double> grad);

// Little-endian float64 payload behind a shape header:
//   "BMQW" | u32 version | u32 n | n x u32 layer sizes | u32 activation |
//   u64 parameter count | parameters
std::vector<std::uint8_t> serialize_weights(const ModelWeights& w);
ModelWeights deserialize_weights(std::span<const std::uint8_t> bytes);
void save_weights(const ModelWeights& w, const std::filesystem::path& path);
ModelWeights load_weights(const std::filesystem::path& path);

// Backprop against central differences on `draws` random networks and
// inputs; relative error |a - n| / max(|a|, |n|, 1e-6) over every parameter.
struct GradientCheckReport {
  int draws = 0;
  std::size_t parameters = 0;
  double maxRelError = 0.0;
};
GradientCheckReport check_gradients(int draws, std::uint64_t seed, double h = 1e-5,
                                    std::size_t inDim = 19);

// Maps a state context plus a discrete action index to network input.
class QProblem {
 public:
  virtual ~QProblem() = default;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t action_count() const = 0;
  virtual void features(std::span<const double> context, std::size_t action,
                        std::span<double> out) const = 0;
  // argmax_a Q(context, a; w), lowest index on ties.
  virtual std::size_t greedy_action(std::span<const double> context, const ModelWeights& w) const;

  double q_value(std::span<const double> context, std::size_t action, const ModelWeights& w) const;
};

struct Experience {
  std::vector<double> state;
  std::size_t action = 0;
  double reward = 0.0;
  std::vector<double> nextState;
  bool terminal = false;
};

// Bounded FIFO ring buffer.
class ReplayPool {
 public:
  explicit ReplayPool(std::size_t capacity = 400);

  void push(Experience e);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  // i = 0 is the oldest stored experience.
  const Experience& at(std::size_t i) const;
  // Uniform index draw (with replacement).
  std::size_t sample_index(Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // oldest element once full
  std::vector<Experience> items_;
};

struct EpsilonSchedule {
  double start = 0.9;
  double decay = 0.995;
  double floor = 0.05;

  double at(std::int64_t step) const;
};

struct Hyperparams {
  double gamma = 0.8;
  double alpha = 0.1;              // gradient step size
  double lambda = 0.1;             // local model correction step size
  EpsilonSchedule epsilon;
  int targetInterval = 4;          // C
  std::size_t minibatch = 36;
  double gradClip = 10.0;          // max L2 norm of the applied gradient; 0 = off
  std::size_t replayCapacity = 400;
  bool bootstrapLastSlot = true;   // continuing task: terminal flags ignored
  std::vector<std::size_t> hidden = {40, 60, 40};

  void validate() const;
};

// y = r + gamma * Qhat(s', argmax_a Q(s', a; online)); y = r for a terminal
// transition when bootstrapLastSlot is false.
double ddqn_target(double reward, std::span<const double> nextState, bool terminal,
                   const ModelWeights& online, const ModelWeights& target,
                   const QProblem& problem, const Hyperparams& hp);

std::size_t select_action(std::span<const double> state, const ModelWeights& w,
                          const QProblem& problem, double epsilon, Rng& rng);

struct LossAndGradient {
  double loss = 0.0;              // mean (y - Q)^2 over the batch
  std::vector<double> gradient;   // d loss / d theta
};

LossAndGradient minibatch_loss(const ModelWeights& online, const ModelWeights& target,
                               std::span<const Experience* const> batch,
                               const QProblem& problem, const Hyperparams& hp);

struct TrainStepResult {
  double loss = 0.0;              // pre-step mean loss
  std::vector<double> gradient;   // d loss / d theta at the pre-step weights, after clipping
};

// Samples min(minibatch, pool size) experiences with replacement and applies
// theta += alpha * mean[(y - Q) * grad Q], i.e. theta -= (alpha / 2) * grad L,
// with grad L rescaled to norm gradClip when it is longer.
// Throws EmptyPool.
TrainStepResult train_step(ModelWeights& online, const ModelWeights& target,
                           const ReplayPool& pool, const QProblem& problem,
                           const Hyperparams& hp, Rng& rng);

// Copy of `online` when stepCount % C == 0, otherwise `target`.
ModelWeights sync_target(const ModelWeights& online, const ModelWeights& target,
                         std::int64_t stepCount, int C);

// One DDQN learner: online and target networks, replay pool, step counter and
// the most recent loss gradient.
class DdqnLearner {
 public:
  DdqnLearner(const MlpSpec& spec, const Hyperparams& hp, Rng rng);

  const ModelWeights& online() const { return online_; }
  const ModelWeights& target() const { return target_; }
  const ReplayPool& pool() const { return pool_; }
  const std::vector<double>& lastGradient() const { return lastGradient_; }
  std::int64_t trainSteps() const { return steps_; }
  Rng& rng() { return rng_; }

  // Replaces the online model and resets the target to it.
  void load_model(ModelWeights w);
  std::size_t act(std::span<const double> state, const QProblem& problem, double epsilon);
  void remember(Experience e) { pool_.push(std::move(e)); }
  // One train_step followed by the every-C target sync; returns the loss.
  double train(const QProblem& problem);

 private:
  Hyperparams hp_;
  ModelWeights online_;
  ModelWeights target_;
  ReplayPool pool_;
  std::vector<double> lastGradient_;
  std::int64_t steps_ = 0;
  Rng rng_;
};

}  // namespace bmfl
