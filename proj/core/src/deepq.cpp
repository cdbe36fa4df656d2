#include "bmfl/deepq.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "bmfl/error.hpp"

namespace bmfl {

MlpSpec MlpSpec::q_network(std::size_t inDim, std::vector<std::size_t> hidden) {
  MlpSpec s;
  s.layerSizes.push_back(inDim);
  s.layerSizes.insert(s.layerSizes.end(), hidden.begin(), hidden.end());
  s.layerSizes.push_back(1);
  return s;
}

std::size_t MlpSpec::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layerSizes.size(); ++l) {
    n += layerSizes[l] * layerSizes[l + 1] + layerSizes[l + 1];
  }
  return n;
}

std::size_t ModelWeights::weight_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) {
    off += spec.layerSizes[l] * spec.layerSizes[l + 1] + spec.layerSizes[l + 1];
  }
  return off;
}

std::size_t ModelWeights::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + spec.layerSizes[layer] * spec.layerSizes[layer + 1];
}

double& ModelWeights::weight(std::size_t layer, std::size_t in, std::size_t out) {
  return params[weight_offset(layer) + in * spec.layerSizes[layer + 1] + out];
}
double ModelWeights::weight(std::size_t layer, std::size_t in, std::size_t out) const {
  return params[weight_offset(layer) + in * spec.layerSizes[layer + 1] + out];
}
double& ModelWeights::bias(std::size_t layer, std::size_t out) {
  return params[bias_offset(layer) + out];
}
double ModelWeights::bias(std::size_t layer, std::size_t out) const {
  return params[bias_offset(layer) + out];
}

ModelWeights zero_weights(const MlpSpec& spec) {
  if (spec.layerSizes.size() < 2) throw Error(ErrorCode::ShapeMismatch, "MLP needs >= 2 layers");
  return ModelWeights{spec, std::vector<double>(spec.parameter_count(), 0.0)};
}

ModelWeights init_weights(const MlpSpec& spec, Rng& rng) {
  ModelWeights w = zero_weights(spec);
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::size_t nIn = spec.layerSizes[l];
    const std::size_t nOut = spec.layerSizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(nIn));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t i = 0; i < nIn * nOut + nOut; ++i) w.params[off + i] = u(rng);
    off += nIn * nOut + nOut;
  }
  return w;
}

bool all_finite(const ModelWeights& w) {
  return std::all_of(w.params.begin(), w.params.end(), [](double v) { return std::isfinite(v); });
}

namespace {

void check_input(const ModelWeights& w, std::size_t n) {
  if (n != w.spec.input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "input length " + std::to_string(n) +
                                                  " != in_dim " +
                                                  std::to_string(w.spec.input_dim()));
  }
}

inline double activate(Activation a, double z) {
  return a == Activation::Relu ? (z > 0.0 ? z : 0.0) : z;
}
inline double activate_grad(Activation a, double z) {
  return a == Activation::Relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0;
}

// out[o] = b[o] + sum_i in[i] * W[i][o]; zero inputs are skipped.
void affine(const double* p, std::size_t nIn, std::size_t nOut, const double* in, double* out) {
  const double* bias = p + nIn * nOut;
  for (std::size_t o = 0; o < nOut; ++o) out[o] = bias[o];
  for (std::size_t i = 0; i < nIn; ++i) {
    const double xi = in[i];
    if (xi == 0.0) continue;
    const double* row = p + i * nOut;
    for (std::size_t o = 0; o < nOut; ++o) out[o] += xi * row[o];
  }
}

// Activations of every layer for one input; a[0] is the input itself.
struct Trace {
  std::vector<std::vector<double>> z;  // pre-activations, per layer
  std::vector<std::vector<double>> a;  // outputs of each layer (a[0] = x)
};

void run_forward(const ModelWeights& w, std::span<const double> x, Trace& t) {
  const auto& sizes = w.spec.layerSizes;
  const std::size_t L = w.spec.layer_count();
  t.z.resize(L);
  t.a.resize(L + 1);
  t.a[0].assign(x.begin(), x.end());
  const double* p = w.params.data();
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t nIn = sizes[l];
    const std::size_t nOut = sizes[l + 1];
    t.z[l].resize(nOut);
    t.a[l + 1].resize(nOut);
    affine(p, nIn, nOut, t.a[l].data(), t.z[l].data());
    const bool last = (l + 1 == L);
    for (std::size_t o = 0; o < nOut; ++o) {
      t.a[l + 1][o] = last ? t.z[l][o] : activate(w.spec.hidden, t.z[l][o]);
    }
    p += nIn * nOut + nOut;
  }
}

}  // namespace

double forward(const ModelWeights& w, std::span<const double> x) {
  check_input(w, x.size());
  thread_local std::vector<double> bufA;
  thread_local std::vector<double> bufB;
  const auto& sizes = w.spec.layerSizes;
  const std::size_t L = w.spec.layer_count();
  std::size_t widest = 0;
  for (auto s : sizes) widest = std::max(widest, s);
  bufA.resize(widest);
  bufB.resize(widest);
  std::copy(x.begin(), x.end(), bufA.begin());
  double* in = bufA.data();
  double* out = bufB.data();
  const double* p = w.params.data();
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t nIn = sizes[l];
    const std::size_t nOut = sizes[l + 1];
    affine(p, nIn, nOut, in, out);
    if (l + 1 < L) {
      for (std::size_t o = 0; o < nOut; ++o) out[o] = activate(w.spec.hidden, out[o]);
    }
    p += nIn * nOut + nOut;
    std::swap(in, out);
  }
  return in[0];
}

void backward_accumulate(const ModelWeights& w, std::span<const double> x, double scale,
                         std::span<double> grad) {
  check_input(w, x.size());
  if (grad.size() != w.params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "gradient buffer length mismatch");
  }
  if (scale == 0.0) return;
  thread_local Trace t;
  run_forward(w, x, t);
  const auto& sizes = w.spec.layerSizes;
  const std::size_t L = w.spec.layer_count();
  thread_local std::vector<double> delta;
  thread_local std::vector<double> prev;
  delta.assign(sizes[L], scale);  // dLoss/dz of the linear output
  for (std::size_t l = L; l-- > 0;) {
    const std::size_t nIn = sizes[l];
    const std::size_t nOut = sizes[l + 1];
    const std::size_t wOff = w.weight_offset(l);
    const std::size_t bOff = wOff + nIn * nOut;
    for (std::size_t o = 0; o < nOut; ++o) grad[bOff + o] += delta[o];
    const std::vector<double>& input = t.a[l];
    for (std::size_t i = 0; i < nIn; ++i) {
      const double ai = input[i];
      if (ai == 0.0) continue;
      double* g = grad.data() + wOff + i * nOut;
      for (std::size_t o = 0; o < nOut; ++o) g[o] += ai * delta[o];
    }
    if (l == 0) break;
    prev.assign(nIn, 0.0);
    const double* W = w.params.data() + wOff;
    for (std::size_t i = 0; i < nIn; ++i) {
      const double* row = W + i * nOut;
      double s = 0.0;
      for (std::size_t o = 0; o < nOut; ++o) s += row[o] * delta[o];
      prev[i] = s * activate_grad(w.spec.hidden, t.z[l - 1][i]);
    }
    delta.swap(prev);
  }
}

std::vector<double> backward(const ModelWeights& w, std::span<const double> x, double dLossDq) {
  std::vector<double> grad(w.params.size(), 0.0);
  check_input(w, x.size());
  backward_accumulate(w, x, dLossDq, grad);
  return grad;
}

GradientCheckReport check_gradients(int draws, std::uint64_t seed, double h, std::size_t inDim) {
  GradientCheckReport rep;
  Rng rng = make_rng(seed, 7);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int d = 0; d < draws; ++d) {
    ModelWeights w = init_weights(MlpSpec::q_network(inDim), rng);
    std::vector<double> x(inDim);
    for (auto& v : x) v = gauss(rng);
    const auto g = backward(w, x, 1.0);
    for (std::size_t i = 0; i < w.params.size(); ++i) {
      const double keep = w.params[i];
      w.params[i] = keep + h;
      const double up = forward(w, x);
      w.params[i] = keep - h;
      const double down = forward(w, x);
      w.params[i] = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(g[i]), std::abs(numeric), 1e-6});
      rep.maxRelError = std::max(rep.maxRelError, std::abs(g[i] - numeric) / denom);
    }
    rep.parameters += w.params.size();
    ++rep.draws;
  }
  return rep;
}

// --- serialization ---------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'B', 'M', 'Q', 'W'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}
  std::uint64_t get(int n) {
    if (pos_ + static_cast<std::size_t>(n) > bytes_.size()) {
      throw Error(ErrorCode::ParseError, "truncated weight blob");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{bytes_[pos_ + static_cast<std::size_t>(i)]} << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_weights(const ModelWeights& w) {
  std::vector<std::uint8_t> out;
  out.reserve(32 + 8 * w.params.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(w.spec.layerSizes.size()));
  for (auto s : w.spec.layerSizes) put_u32(out, static_cast<std::uint32_t>(s));
  put_u32(out, w.spec.hidden == Activation::Relu ? 0u : 1u);
  put_u64(out, w.params.size());
  for (double v : w.params) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

ModelWeights deserialize_weights(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  for (char c : kMagic) {
    if (static_cast<char>(r.get(1)) != c) throw Error(ErrorCode::ParseError, "bad weight magic");
  }
  if (r.get(4) != kVersion) throw Error(ErrorCode::ParseError, "unsupported weight version");
  const auto n = r.get(4);
  if (n < 2 || n > 1024) throw Error(ErrorCode::ParseError, "bad layer count");
  MlpSpec spec;
  for (std::uint64_t i = 0; i < n; ++i) spec.layerSizes.push_back(static_cast<std::size_t>(r.get(4)));
  const auto act = r.get(4);
  if (act > 1) throw Error(ErrorCode::ParseError, "bad activation tag");
  spec.hidden = act == 0 ? Activation::Relu : Activation::Identity;
  const auto count = r.get(8);
  if (count != spec.parameter_count()) {
    throw Error(ErrorCode::ShapeMismatch, "parameter count does not match shape header");
  }
  ModelWeights w = zero_weights(spec);
  for (auto& v : w.params) v = std::bit_cast<double>(r.get(8));
  if (!r.done()) throw Error(ErrorCode::ParseError, "trailing bytes after weights");
  return w;
}

void save_weights(const ModelWeights& w, const std::filesystem::path& path) {
  const auto bytes = serialize_weights(w);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

ModelWeights load_weights(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return deserialize_weights(bytes);
}

// --- Q-learning ------------------------------------------------------------

double QProblem::q_value(std::span<const double> context, std::size_t action,
                         const ModelWeights& w) const {
  thread_local std::vector<double> x;
  x.resize(input_dim());
  features(context, action, x);
  return forward(w, x);
}

std::size_t QProblem::greedy_action(std::span<const double> context, const ModelWeights& w) const {
  const std::size_t n = action_count();
  std::size_t best = 0;
  double bestQ = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < n; ++a) {
    const double q = q_value(context, a, w);
    if (q > bestQ) {
      bestQ = q;
      best = a;
    }
  }
  return best;
}

ReplayPool::ReplayPool(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw Error(ErrorCode::RangeError, "replay capacity must be >= 1");
  items_.reserve(capacity_);
}

void ReplayPool::push(Experience e) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(e));
    return;
  }
  items_[head_] = std::move(e);
  head_ = (head_ + 1) % capacity_;
}

const Experience& ReplayPool::at(std::size_t i) const {
  if (i >= items_.size()) throw Error(ErrorCode::RangeError, "replay index out of range");
  return items_[(head_ + i) % items_.size()];
}

std::size_t ReplayPool::sample_index(Rng& rng) const {
  if (items_.empty()) throw Error(ErrorCode::EmptyPool, "cannot sample an empty replay pool");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  return pick(rng);
}

double EpsilonSchedule::at(std::int64_t step) const {
  return std::max(floor, start * std::pow(decay, static_cast<double>(step)));
}

void Hyperparams::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error(ErrorCode::RangeError, "discount must lie in [0,1]");
  if (!(alpha > 0.0)) throw Error(ErrorCode::RangeError, "learning rate must be positive");
  if (!(lambda >= 0.0)) throw Error(ErrorCode::RangeError, "local step size must be >= 0");
  if (targetInterval < 1) throw Error(ErrorCode::RangeError, "target interval must be >= 1");
  if (!(gradClip >= 0.0)) throw Error(ErrorCode::RangeError, "gradient clip must be >= 0");
  if (minibatch < 1) throw Error(ErrorCode::RangeError, "minibatch must be >= 1");
  if (replayCapacity < 1) throw Error(ErrorCode::RangeError, "replay capacity must be >= 1");
  if (!(epsilon.start >= 0.0 && epsilon.start <= 1.0 && epsilon.floor >= 0.0 &&
        epsilon.floor <= 1.0 && epsilon.decay > 0.0 && epsilon.decay <= 1.0)) {
    throw Error(ErrorCode::RangeError, "epsilon schedule out of range");
  }
}

double ddqn_target(double reward, std::span<const double> nextState, bool terminal,
                   const ModelWeights& online, const ModelWeights& target,
                   const QProblem& problem, const Hyperparams& hp) {
  if (problem.action_count() == 0) throw Error(ErrorCode::EmptyInput, "no actions");
  if (terminal && !hp.bootstrapLastSlot) return reward;
  if (hp.gamma == 0.0) return reward;
  const std::size_t best = problem.greedy_action(nextState, online);
  return reward + hp.gamma * problem.q_value(nextState, best, target);
}

std::size_t select_action(std::span<const double> state, const ModelWeights& w,
                          const QProblem& problem, double epsilon, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw Error(ErrorCode::RangeError, "epsilon must lie in [0,1]");
  // The exploration draw happens every call so the stream does not depend on
  // network outputs.
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const double c = coin(rng);
  if (c < epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, problem.action_count() - 1);
    return pick(rng);
  }
  return problem.greedy_action(state, w);
}

LossAndGradient minibatch_loss(const ModelWeights& online, const ModelWeights& target,
                               std::span<const Experience* const> batch,
                               const QProblem& problem, const Hyperparams& hp) {
  if (batch.empty()) throw Error(ErrorCode::EmptyPool, "empty minibatch");
  LossAndGradient out;
  out.gradient.assign(online.params.size(), 0.0);
  std::vector<double> x(problem.input_dim());
  const double n = static_cast<double>(batch.size());
  for (const Experience* e : batch) {
    const double y = ddqn_target(e->reward, e->nextState, e->terminal, online, target, problem, hp);
    problem.features(e->state, e->action, x);
    const double q = forward(online, x);
    const double residual = y - q;
    out.loss += residual * residual / n;
    backward_accumulate(online, x, -2.0 * residual / n, out.gradient);
  }
  return out;
}

TrainStepResult train_step(ModelWeights& online, const ModelWeights& target,
                           const ReplayPool& pool, const QProblem& problem,
                           const Hyperparams& hp, Rng& rng) {
  if (pool.empty()) throw Error(ErrorCode::EmptyPool, "train_step on an empty replay pool");
  const std::size_t n = std::min(hp.minibatch, pool.size());
  std::vector<const Experience*> batch;
  batch.reserve(n);
  for (std::size_t i = 0; i < n; ++i) batch.push_back(&pool.at(pool.sample_index(rng)));
  LossAndGradient lg = minibatch_loss(online, target, batch, problem, hp);
  if (hp.gradClip > 0.0) {
    double sq = 0.0;
    for (double g : lg.gradient) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > hp.gradClip) {
      const double k = hp.gradClip / norm;
      for (double& g : lg.gradient) g *= k;
    }
  }
  // grad L = -2 mean[(y - Q) grad Q]; the factor 2 is absorbed into alpha.
  const double step = hp.alpha / 2.0;
  for (std::size_t i = 0; i < online.params.size(); ++i) online.params[i] -= step * lg.gradient[i];
  return TrainStepResult{lg.loss, std::move(lg.gradient)};
}

ModelWeights sync_target(const ModelWeights& online, const ModelWeights& target,
                         std::int64_t stepCount, int C) {
  if (C < 1) throw Error(ErrorCode::RangeError, "target interval must be >= 1");
  return stepCount % C == 0 ? online : target;
}

DdqnLearner::DdqnLearner(const MlpSpec& spec, const Hyperparams& hp, Rng rng)
    : hp_(hp), pool_(hp.replayCapacity), rng_(std::move(rng)) {
  hp_.validate();
  online_ = init_weights(spec, rng_);
  target_ = online_;
  lastGradient_.assign(online_.params.size(), 0.0);
}

void DdqnLearner::load_model(ModelWeights w) {
  if (!(w.spec == online_.spec)) throw Error(ErrorCode::ShapeMismatch, "model shape differs");
  online_ = std::move(w);
  target_ = online_;
}

std::size_t DdqnLearner::act(std::span<const double> state, const QProblem& problem, double epsilon) {
  return select_action(state, online_, problem, epsilon, rng_);
}

double DdqnLearner::train(const QProblem& problem) {
  TrainStepResult r = train_step(online_, target_, pool_, problem, hp_, rng_);
  lastGradient_ = std::move(r.gradient);
  ++steps_;
  target_ = sync_target(online_, target_, steps_, hp_.targetInterval);
  return r.loss;
}

}  // namespace bmfl
