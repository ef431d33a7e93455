#include "rmpm/trainer/network.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "rmpm/error.hpp"
#include "rmpm/rng.hpp"

namespace rmpm::trainer {
namespace {

using Kind = LayerSpec::Kind;

[[noreturn]] void bad_layer(std::size_t index, const LayerSpec& l, const std::string& why) {
  fail(Errc::shape_mismatch,
       "layer " + std::to_string(index) + " " + l.describe() + ": " + why);
}

std::vector<std::size_t> parse_args(std::string_view args, std::string_view token,
                                    std::size_t classes) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= args.size()) {
    auto end = args.find(',', start);
    if (end == std::string_view::npos) end = args.size();
    auto part = args.substr(start, end - start);
    while (!part.empty() && std::isspace(static_cast<unsigned char>(part.front()))) part.remove_prefix(1);
    while (!part.empty() && std::isspace(static_cast<unsigned char>(part.back()))) part.remove_suffix(1);
    if (part == "C") {
      out.push_back(classes);
    } else {
      std::size_t v = 0;
      const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
      if (part.empty() || ec != std::errc{} || ptr != part.data() + part.size()) {
        fail(Errc::config, "bad layer argument in '" + std::string(token) + "'");
      }
      out.push_back(v);
    }
    start = end + 1;
  }
  return out;
}

LayerSpec parse_layer(std::string_view token, std::size_t classes) {
  LayerSpec l;
  std::string_view body = token;
  if (const auto at = token.find('@'); at != std::string_view::npos) {
    l.tap = std::string(token.substr(at + 1));
    body = token.substr(0, at);
    if (l.tap.empty()) fail(Errc::config, "empty tap name in '" + std::string(token) + "'");
  }
  std::string_view name = body;
  std::vector<std::size_t> args;
  if (const auto open = body.find('('); open != std::string_view::npos) {
    if (body.back() != ')') fail(Errc::config, "unbalanced parentheses in '" + std::string(token) + "'");
    name = body.substr(0, open);
    args = parse_args(body.substr(open + 1, body.size() - open - 2), token, classes);
  }
  if (name == "conv" || name == "conv2d") {
    if (args.size() != 3) fail(Errc::config, "conv needs (in,out,kernel): " + std::string(token));
    l.kind = Kind::conv2d;
    l.in = args[0];
    l.out = args[1];
    l.kernel = args[2];
  } else if (name == "dense" || name == "fc") {
    if (args.size() != 2) fail(Errc::config, "dense needs (in,out): " + std::string(token));
    l.kind = Kind::dense;
    l.in = args[0];
    l.out = args[1];
  } else if (name == "relu" && args.empty()) {
    l.kind = Kind::relu;
  } else if (name == "maxpool" && (args.empty() || (args.size() == 2 && args[0] == 2 && args[1] == 2))) {
    l.kind = Kind::maxpool;
  } else if (name == "flatten" && args.empty()) {
    l.kind = Kind::flatten;
  } else {
    fail(Errc::config, "unknown layer '" + std::string(token) + "'");
  }
  return l;
}

// Output shapes for each layer, validating as it goes.
std::vector<Shape> infer_shapes(const NetworkSpec& spec) {
  std::vector<Shape> shapes{spec.input};
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const Shape in = shapes.back();
    Shape out = in;
    switch (l.kind) {
      case Kind::conv2d:
        if (l.in == 0 || l.out == 0 || l.kernel == 0) bad_layer(i, l, "zero-sized conv");
        if (in.channels != l.in) {
          bad_layer(i, l, "expects " + std::to_string(l.in) + " channels, got " + to_string(in));
        }
        if (in.height < l.kernel || in.width < l.kernel) bad_layer(i, l, "kernel larger than " + to_string(in));
        out = Shape{l.out, in.height - l.kernel + 1, in.width - l.kernel + 1};
        break;
      case Kind::dense:
        if (l.in == 0 || l.out == 0) bad_layer(i, l, "zero-sized dense");
        if (in.size() != l.in) {
          bad_layer(i, l, "expects " + std::to_string(l.in) + " inputs, got " + to_string(in));
        }
        out = Shape{l.out, 1, 1};
        break;
      case Kind::maxpool:
        if (in.height < 2 || in.width < 2) bad_layer(i, l, "input " + to_string(in) + " too small to pool");
        out = Shape{in.channels, in.height / 2, in.width / 2};
        break;
      case Kind::flatten:
        out = Shape{in.size(), 1, 1};
        break;
      case Kind::relu:
        break;
    }
    shapes.push_back(out);
  }
  return shapes;
}

Shape flat_after(const NetworkSpec& partial) { return infer_shapes(partial).back(); }

}  // namespace

std::string LayerSpec::describe() const {
  std::string s;
  switch (kind) {
    case Kind::conv2d:
      s = "conv(" + std::to_string(in) + "," + std::to_string(out) + "," + std::to_string(kernel) + ")";
      break;
    case Kind::dense: s = "dense(" + std::to_string(in) + "," + std::to_string(out) + ")"; break;
    case Kind::relu: s = "relu"; break;
    case Kind::maxpool: s = "maxpool"; break;
    case Kind::flatten: s = "flatten"; break;
  }
  if (!tap.empty()) s += "@" + tap;
  return s;
}

NetworkSpec NetworkSpec::parse(std::string_view text, Shape input, std::size_t classes) {
  NetworkSpec spec;
  spec.input = input;
  std::istringstream in{std::string(text)};
  std::string token;
  while (in >> token) spec.layers.push_back(parse_layer(token, classes));
  if (spec.layers.empty()) fail(Errc::config, "network spec has no layers");
  spec.validate(classes);
  return spec;
}

std::string NetworkSpec::to_string() const {
  std::string s;
  for (const auto& l : layers) {
    if (!s.empty()) s += ' ';
    s += l.describe();
  }
  return s;
}

std::vector<std::string> NetworkSpec::taps() const {
  std::vector<std::string> out;
  for (const auto& l : layers)
    if (!l.tap.empty()) out.push_back(l.tap);
  return out;
}

std::size_t NetworkSpec::outputs() const {
  return layers.empty() ? 0 : infer_shapes(*this).back().size();
}

void NetworkSpec::validate(std::size_t classes) const {
  require(input.size() > 0, Errc::shape_mismatch, "network input shape is empty");
  if (layers.empty()) fail(Errc::shape_mismatch, "network has no layers");
  const auto shapes = infer_shapes(*this);
  if (shapes.back().size() != classes) {
    fail(Errc::shape_mismatch, "layer " + std::to_string(layers.size() - 1) + " " +
                                   layers.back().describe() + ": produces " +
                                   std::to_string(shapes.back().size()) + " outputs for " +
                                   std::to_string(classes) + " classes");
  }
  std::set<std::string> seen;
  for (const auto& t : taps()) {
    if (!seen.insert(t).second) fail(Errc::config, "duplicate tap '" + t + "'");
  }
  if (seen.empty()) fail(Errc::config, "network spec declares no tap point");
}

NetworkSpec desk_network(Shape input, std::size_t classes) {
  NetworkSpec spec;
  spec.input = input;
  spec.layers = {
      {Kind::conv2d, input.channels, 8, 3, {}},
      {Kind::relu, 0, 0, 0, {}},
      {Kind::maxpool, 0, 0, 0, {}},
      {Kind::conv2d, 8, 16, 3, {}},
      {Kind::relu, 0, 0, 0, {}},
      {Kind::maxpool, 0, 0, 0, {}},
      {Kind::flatten, 0, 0, 0, "cnn"},
  };
  const std::size_t features = flat_after(spec).size();
  spec.layers.push_back({Kind::dense, features, 64, 0, "fc1"});
  spec.layers.push_back({Kind::dense, 64, classes, 0, {}});
  spec.validate(classes);
  return spec;
}

NetworkSpec large_network(Shape input, std::size_t classes) {
  NetworkSpec spec;
  spec.input = input;
  spec.layers = {
      {Kind::conv2d, input.channels, 48, 3, {}},
      {Kind::relu, 0, 0, 0, {}},
      {Kind::maxpool, 0, 0, 0, {}},
      {Kind::conv2d, 48, 96, 3, {}},
      {Kind::relu, 0, 0, 0, {}},
      {Kind::maxpool, 0, 0, 0, {}},
      {Kind::conv2d, 96, 80, 3, {}},
      {Kind::relu, 0, 0, 0, {}},
      {Kind::conv2d, 80, 96, 3, {}},
      {Kind::relu, 0, 0, 0, {}},
      {Kind::flatten, 0, 0, 0, "cnn"},
  };
  const std::size_t features = flat_after(spec).size();
  spec.layers.push_back({Kind::dense, features, 512, 0, "fc1"});
  spec.layers.push_back({Kind::dense, 512, classes, 0, {}});
  spec.validate(classes);
  return spec;
}

Model::Model(NetworkSpec spec) : spec_(std::move(spec)) {
  const auto shapes = infer_shapes(spec_);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    LayerPlan p;
    p.spec = spec_.layers[i];
    p.in_shape = shapes[i];
    p.out_shape = shapes[i + 1];
    std::size_t weights = 0, biases = 0;
    if (p.spec.kind == Kind::conv2d) {
      weights = p.spec.out * p.spec.in * p.spec.kernel * p.spec.kernel;
      biases = p.spec.out;
    } else if (p.spec.kind == Kind::dense) {
      weights = p.spec.out * p.spec.in;
      biases = p.spec.out;
    }
    p.weight_offset = offset;
    p.bias_offset = offset + weights;
    p.param_count = weights + biases;
    offset += p.param_count;
    plan_.push_back(p);
  }
  params_.assign(offset, 0.0);
}

Model init_network(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate(spec.outputs());
  Model m(spec);
  Rng rng(derive_seed(seed, "init"));
  for (const auto& p : m.plan()) {
    if (p.param_count == 0) continue;
    const std::size_t fan_in = p.spec.kind == Kind::conv2d ? p.spec.in * p.spec.kernel * p.spec.kernel
                                                           : p.spec.in;
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (std::size_t i = p.weight_offset; i < p.bias_offset; ++i) m.params()[i] = rng.normal(0.0, sd);
  }
  return m;
}

std::span<const double> forward_sample(const Model& m, std::span<const double> input, Workspace& ws) {
  const auto& plan = m.plan();
  require(input.size() == m.spec().input.size(), Errc::shape_mismatch,
          "input size does not match the network input shape");
  ws.acts.resize(plan.size() + 1);
  ws.argmax.resize(plan.size());
  ws.acts[0].assign(input.begin(), input.end());
  const double* params = m.params().data();

  for (std::size_t li = 0; li < plan.size(); ++li) {
    const auto& p = plan[li];
    const auto& in = ws.acts[li];
    auto& out = ws.acts[li + 1];
    out.resize(p.out_shape.size());
    switch (p.spec.kind) {
      case Kind::conv2d: {
        const std::size_t k = p.spec.kernel, ih = p.in_shape.height, iw = p.in_shape.width;
        const std::size_t oh = p.out_shape.height, ow = p.out_shape.width;
        const double* w = params + p.weight_offset;
        const double* b = params + p.bias_offset;
        for (std::size_t o = 0; o < p.spec.out; ++o) {
          double* op = out.data() + o * oh * ow;
          std::fill(op, op + oh * ow, b[o]);
          for (std::size_t c = 0; c < p.spec.in; ++c) {
            const double* ip = in.data() + c * ih * iw;
            const double* wk = w + (o * p.spec.in + c) * k * k;
            for (std::size_t ky = 0; ky < k; ++ky) {
              for (std::size_t kx = 0; kx < k; ++kx) {
                const double wv = wk[ky * k + kx];
                for (std::size_t y = 0; y < oh; ++y) {
                  const double* irow = ip + (y + ky) * iw + kx;
                  double* orow = op + y * ow;
                  for (std::size_t x = 0; x < ow; ++x) orow[x] += wv * irow[x];
                }
              }
            }
          }
        }
        break;
      }
      case Kind::dense: {
        const double* w = params + p.weight_offset;
        const double* b = params + p.bias_offset;
        for (std::size_t o = 0; o < p.spec.out; ++o) {
          const double* wr = w + o * p.spec.in;
          double acc = b[o];
          for (std::size_t i = 0; i < p.spec.in; ++i) acc += wr[i] * in[i];
          out[o] = acc;
        }
        break;
      }
      case Kind::relu:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
        break;
      case Kind::maxpool: {
        auto& arg = ws.argmax[li];
        arg.resize(out.size());
        const std::size_t ih = p.in_shape.height, iw = p.in_shape.width;
        const std::size_t oh = p.out_shape.height, ow = p.out_shape.width;
        for (std::size_t c = 0; c < p.out_shape.channels; ++c) {
          for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
              std::size_t best = c * ih * iw + (2 * y) * iw + 2 * x;
              for (std::size_t dy = 0; dy < 2; ++dy) {
                for (std::size_t dx = 0; dx < 2; ++dx) {
                  const std::size_t idx = c * ih * iw + (2 * y + dy) * iw + 2 * x + dx;
                  if (in[idx] > in[best]) best = idx;
                }
              }
              const std::size_t o = (c * oh + y) * ow + x;
              out[o] = in[best];
              arg[o] = static_cast<std::uint32_t>(best);
            }
          }
        }
        break;
      }
      case Kind::flatten:
        std::copy(in.begin(), in.end(), out.begin());
        break;
    }
  }
  return ws.acts.back();
}

void backward_sample(const Model& m, std::span<const double> dlogits, Workspace& ws,
                     std::span<double> grad) {
  const auto& plan = m.plan();
  const double* params = m.params().data();
  ws.delta.assign(dlogits.begin(), dlogits.end());

  for (std::size_t li = plan.size(); li-- > 0;) {
    const auto& p = plan[li];
    const auto& in = ws.acts[li];
    const auto& out = ws.acts[li + 1];
    const auto& d = ws.delta;
    auto& dn = ws.delta_next;
    dn.assign(p.in_shape.size(), 0.0);
    switch (p.spec.kind) {
      case Kind::conv2d: {
        const std::size_t k = p.spec.kernel, ih = p.in_shape.height, iw = p.in_shape.width;
        const std::size_t oh = p.out_shape.height, ow = p.out_shape.width;
        const double* w = params + p.weight_offset;
        double* gw = grad.data() + p.weight_offset;
        double* gb = grad.data() + p.bias_offset;
        for (std::size_t o = 0; o < p.spec.out; ++o) {
          const double* dp = d.data() + o * oh * ow;
          double bsum = 0.0;
          for (std::size_t i = 0; i < oh * ow; ++i) bsum += dp[i];
          gb[o] += bsum;
          for (std::size_t c = 0; c < p.spec.in; ++c) {
            const double* ip = in.data() + c * ih * iw;
            double* dip = dn.data() + c * ih * iw;
            const std::size_t wbase = (o * p.spec.in + c) * k * k;
            for (std::size_t ky = 0; ky < k; ++ky) {
              for (std::size_t kx = 0; kx < k; ++kx) {
                const double wv = w[wbase + ky * k + kx];
                double acc = 0.0;
                for (std::size_t y = 0; y < oh; ++y) {
                  const double* irow = ip + (y + ky) * iw + kx;
                  double* direw = dip + (y + ky) * iw + kx;
                  const double* drow = dp + y * ow;
                  for (std::size_t x = 0; x < ow; ++x) {
                    acc += drow[x] * irow[x];
                    direw[x] += drow[x] * wv;
                  }
                }
                gw[wbase + ky * k + kx] += acc;
              }
            }
          }
        }
        break;
      }
      case Kind::dense: {
        const double* w = params + p.weight_offset;
        double* gw = grad.data() + p.weight_offset;
        double* gb = grad.data() + p.bias_offset;
        for (std::size_t o = 0; o < p.spec.out; ++o) {
          const double dv = d[o];
          gb[o] += dv;
          if (dv == 0.0) continue;
          const double* wr = w + o * p.spec.in;
          double* gr = gw + o * p.spec.in;
          for (std::size_t i = 0; i < p.spec.in; ++i) {
            gr[i] += dv * in[i];
            dn[i] += dv * wr[i];
          }
        }
        break;
      }
      case Kind::relu:
        for (std::size_t i = 0; i < dn.size(); ++i) dn[i] = out[i] > 0.0 ? d[i] : 0.0;
        break;
      case Kind::maxpool: {
        const auto& arg = ws.argmax[li];
        for (std::size_t o = 0; o < d.size(); ++o) dn[arg[o]] += d[o];
        break;
      }
      case Kind::flatten:
        std::copy(d.begin(), d.end(), dn.begin());
        break;
    }
    std::swap(ws.delta, ws.delta_next);
  }
}

void softmax(std::span<const double> logits, std::span<double> probs) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - mx);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
}

ForwardResult forward(const Model& m, const Dataset& d) {
  require(d.shape == m.spec().input, Errc::shape_mismatch,
          "dataset shape does not match the network input");
  const std::size_t n = d.size(), c = m.classes();
  ForwardResult r;
  r.logits = linalg::Matrix(n, c);
  r.probs = linalg::Matrix(n, c);
  std::vector<std::size_t> tap_layers;
  for (std::size_t li = 0; li < m.plan().size(); ++li) {
    const auto& p = m.plan()[li];
    if (p.spec.tap.empty()) continue;
    tap_layers.push_back(li);
    r.taps.emplace(p.spec.tap, linalg::Matrix(n, p.out_shape.size()));
  }
  Workspace ws;
  for (std::size_t i = 0; i < n; ++i) {
    const auto logits = forward_sample(m, d.image(i), ws);
    std::copy(logits.begin(), logits.end(), r.logits.row(i).begin());
    softmax(logits, r.probs.row(i));
    for (std::size_t li : tap_layers) {
      const auto& a = ws.acts[li + 1];
      std::copy(a.begin(), a.end(), r.taps.at(m.plan()[li].spec.tap).row(i).begin());
    }
  }
  return r;
}

double loss_and_gradient(const Model& m, const Dataset& d, std::span<const std::size_t> batch,
                         std::vector<double>& grad) {
  require(!batch.empty(), Errc::empty_input, "empty batch");
  require(d.shape == m.spec().input, Errc::shape_mismatch,
          "dataset shape does not match the network input");
  grad.assign(m.params().size(), 0.0);
  const std::size_t c = m.classes();
  const double inv = 1.0 / static_cast<double>(batch.size());
  std::vector<double> dlogits(c);
  Workspace ws;
  double loss = 0.0;
  for (std::size_t idx : batch) {
    require(idx < d.size(), Errc::invalid_argument, "batch index out of range");
    const auto logits = forward_sample(m, d.image(idx), ws);
    const std::size_t y = d.labels[idx];
    require(y < c, Errc::invalid_argument, "label exceeds network outputs");
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    loss += lse - logits[y];
    for (std::size_t j = 0; j < c; ++j) dlogits[j] = std::exp(logits[j] - lse) * inv;
    dlogits[y] -= inv;
    backward_sample(m, dlogits, ws, grad);
  }
  return loss * inv;
}

void adam_update(std::span<double> params, std::span<const double> grad, AdamState& s, double lr) {
  require(lr > 0.0, Errc::invalid_argument, "learning rate must be positive");
  require(params.size() == grad.size(), Errc::shape_mismatch, "gradient size mismatch");
  if (s.m.size() != params.size()) {
    s.m.assign(params.size(), 0.0);
    s.v.assign(params.size(), 0.0);
    s.step = 0;
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grad[i];
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
    const double mhat = s.m[i] / c1;
    const double vhat = s.v[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + s.epsilon);
  }
}

double train_step(Model& m, const Dataset& d, std::span<const std::size_t> batch, AdamState& s,
                  double lr) {
  std::vector<double> grad;
  const double loss = loss_and_gradient(m, d, batch, grad);
  if (!std::isfinite(loss)) fail(Errc::non_finite_loss, "loss is " + std::to_string(loss));
  adam_update(m.params(), grad, s, lr);
  return loss;
}

double evaluate_accuracy(const Model& m, const Dataset& d) {
  require(d.size() > 0, Errc::empty_input, "cannot evaluate on an empty dataset");
  require(d.shape == m.spec().input, Errc::shape_mismatch,
          "dataset shape does not match the network input");
  Workspace ws;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto logits = forward_sample(m, d.image(i), ws);
    const auto best = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (best == d.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(d.size());
}

}  // namespace rmpm::trainer
