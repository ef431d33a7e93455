#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rmpm/linalg/matrix.hpp"
#include "rmpm/trainer/dataset.hpp"

namespace rmpm::trainer {

struct LayerSpec {
  enum class Kind { conv2d, relu, maxpool, flatten, dense };

  Kind kind = Kind::relu;
  std::size_t in = 0;      // conv: in channels; dense: in features
  std::size_t out = 0;     // conv: out channels; dense: out features
  std::size_t kernel = 0;  // conv only; stride 1, no padding
  std::string tap;         // non-empty marks this layer's output as a tap point

  std::string describe() const;
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkSpec {
  Shape input;
  std::vector<LayerSpec> layers;

  // Whitespace-separated layers, each optionally suffixed with "@tap":
  //   conv(in,out,k) relu maxpool flatten@cnn dense(in,out)@fc1 dense(in,C)
  // Inside dense(), "C" stands for `classes`.
  static NetworkSpec parse(std::string_view text, Shape input, std::size_t classes);
  std::string to_string() const;

  std::vector<std::string> taps() const;
  std::size_t outputs() const;
  // Throws Errc::shape_mismatch naming the first layer that does not compose.
  void validate(std::size_t classes) const;
};

// conv(1,8,3)-relu-maxpool-conv(8,16,3)-relu-maxpool-flatten@cnn-dense(F,64)@fc1-dense(64,C)
// where F follows from the input size.
NetworkSpec desk_network(Shape input, std::size_t classes);
// conv(c,48,3)-relu-maxpool-conv(48,96,3)-relu-maxpool-conv(96,80,3)-relu-conv(80,96,3)-relu-
// flatten@cnn-dense(F,512)@fc1-dense(512,C); F = 96 for 28x28 inputs, 384 for 32x32.
NetworkSpec large_network(Shape input, std::size_t classes);

struct LayerPlan {
  LayerSpec spec;
  Shape in_shape;
  Shape out_shape;
  std::size_t weight_offset = 0;  // into Model::params
  std::size_t bias_offset = 0;
  std::size_t param_count = 0;
};

class Model {
 public:
  Model() = default;
  explicit Model(NetworkSpec spec);

  const NetworkSpec& spec() const noexcept { return spec_; }
  const std::vector<LayerPlan>& plan() const noexcept { return plan_; }
  std::size_t classes() const noexcept { return spec_.outputs(); }

  std::vector<double>& params() noexcept { return params_; }
  const std::vector<double>& params() const noexcept { return params_; }

  friend bool operator==(const Model& a, const Model& b) {
    return a.spec_.to_string() == b.spec_.to_string() && a.params_ == b.params_;
  }

 private:
  NetworkSpec spec_;
  std::vector<LayerPlan> plan_;
  std::vector<double> params_;
};

// He fan-in normal weights, zero biases; deterministic in (spec, seed).
Model init_network(const NetworkSpec& spec, std::uint64_t seed);

// Per-sample scratch buffers reused across calls.
struct Workspace {
  std::vector<std::vector<double>> acts;  // acts[0] = input, acts[i + 1] = output of layer i
  std::vector<std::vector<std::uint32_t>> argmax;
  std::vector<double> delta;
  std::vector<double> delta_next;
};

// Fills ws.acts; returns the logits (last activation).
std::span<const double> forward_sample(const Model& m, std::span<const double> input, Workspace& ws);

// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(logits), using the
// activations left in `ws` by forward_sample.
void backward_sample(const Model& m, std::span<const double> dlogits, Workspace& ws,
                     std::span<double> grad);

void softmax(std::span<const double> logits, std::span<double> probs);

struct ForwardResult {
  linalg::Matrix logits;  // samples x classes
  linalg::Matrix probs;
  std::map<std::string, linalg::Matrix> taps;  // samples x units
};

ForwardResult forward(const Model& m, const Dataset& d);

// Mean softmax cross-entropy over `batch` and its gradient.
double loss_and_gradient(const Model& m, const Dataset& d, std::span<const std::size_t> batch,
                         std::vector<double>& grad);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
};

// One bias-corrected Adam update in place.
void adam_update(std::span<double> params, std::span<const double> grad, AdamState& s, double lr);

// One optimization step on `batch`; returns the batch loss. Throws
// Errc::non_finite_loss and leaves the model untouched when the loss is not finite.
double train_step(Model& m, const Dataset& d, std::span<const std::size_t> batch, AdamState& s,
                  double lr);

double evaluate_accuracy(const Model& m, const Dataset& d);

}  // namespace rmpm::trainer
