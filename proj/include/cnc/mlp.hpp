#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "cnc/errors.hpp"
#include "cnc/linalg.hpp"
#include "cnc/loss.hpp"
#include "cnc/rng.hpp"

namespace cnc {

struct MlpExample {
  Vec input;
  std::size_t label;
};

// Small fully-connected classifier: sigmoid hidden layers, softmax output,
// cross-entropy loss averaged over the dataset. Parameters live in a single
// flattened vector (per layer: weight matrix row-major, then bias), so the
// optimizers and the finite-difference Hessian can treat it like any other
// objective. No analytic Hessian on purpose.
class TinyMlp {
 public:
  TinyMlp(std::vector<std::size_t> layer_sizes, std::vector<MlpExample> dataset)
      : layers_(std::move(layer_sizes)), data_(std::move(dataset)) {
    if (layers_.size() < 2) throw ValidationError("need at least input and output layer");
    for (std::size_t s : layers_)
      if (s == 0) throw ValidationError("zero-width layer");
    if (data_.empty()) throw EmptyDataset();
    dim_ = 0;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l)
      dim_ += (layers_[l] + 1) * layers_[l + 1];
    for (const auto& ex : data_) {
      if (ex.input.size() != layers_.front()) throw DimensionMismatch();
      if (ex.label >= layers_.back()) throw IndexOutOfRange("label out of class range");
    }
  }

  std::size_t dim() const { return dim_; }
  std::size_t num_samples() const { return data_.size(); }
  double sample_prob(std::size_t) const { return 1.0 / static_cast<double>(data_.size()); }
  std::size_t num_classes() const { return layers_.back(); }
  const std::vector<std::size_t>& layer_sizes() const { return layers_; }

  // Class probabilities for one input (softmax output).
  Vec forward(const Vec& w, const Vec& input) const {
    check_dim(w);
    std::vector<Vec> acts;
    return forward_pass(w, input, acts);
  }

  double value(const Vec& w) const {
    check_dim(w);
    double s = 0.0;
    for (const auto& ex : data_) s += example_loss(w, ex);
    return s / static_cast<double>(data_.size());
  }

  Vec grad(const Vec& w) const {
    check_dim(w);
    Vec g(dim_, 0.0);
    for (std::size_t i = 0; i < data_.size(); ++i) {
      Vec gi = example_grad(w, data_[i]);
      axpy(1.0, gi, g);
    }
    double inv_n = 1.0 / static_cast<double>(data_.size());
    for (auto& x : g) x *= inv_n;
    return g;
  }

  Vec sample_grad(const Vec& w, std::size_t index) const {
    check_dim(w);
    if (index >= data_.size()) throw IndexOutOfRange();
    return example_grad(w, data_[index]);
  }

 private:
  void check_dim(const Vec& w) const {
    if (w.size() != dim_) throw DimensionMismatch();
  }

  // Weight layout per layer l: W[l] is (out x in) row-major, then bias (out).
  struct LayerView {
    std::size_t w_off, b_off, in, out;
  };

  LayerView layer_view(std::size_t l) const {
    std::size_t off = 0;
    for (std::size_t k = 0; k < l; ++k) off += (layers_[k] + 1) * layers_[k + 1];
    return {off, off + layers_[l] * layers_[l + 1], layers_[l], layers_[l + 1]};
  }

  // acts[l] holds the activations entering layer l; the return value is the
  // softmax output. Activations are kept for backprop.
  Vec forward_pass(const Vec& w, const Vec& input, std::vector<Vec>& acts) const {
    acts.clear();
    Vec a = input;
    std::size_t n_layers = layers_.size() - 1;
    for (std::size_t l = 0; l < n_layers; ++l) {
      acts.push_back(a);
      LayerView v = layer_view(l);
      Vec z(v.out, 0.0);
      for (std::size_t i = 0; i < v.out; ++i) {
        double s = w[v.b_off + i];
        for (std::size_t j = 0; j < v.in; ++j) s += w[v.w_off + i * v.in + j] * a[j];
        z[i] = s;
      }
      if (l + 1 < n_layers) {
        for (auto& x : z) x = detail::sigmoid(x);
        a = std::move(z);
      } else {
        a = softmax(z);
      }
    }
    return a;
  }

  static Vec softmax(const Vec& z) {
    double zmax = *std::max_element(z.begin(), z.end());
    Vec p(z.size());
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      p[i] = std::exp(z[i] - zmax);
      s += p[i];
    }
    for (auto& x : p) x /= s;
    return p;
  }

  double example_loss(const Vec& w, const MlpExample& ex) const {
    std::vector<Vec> acts;
    Vec p = forward_pass(w, ex.input, acts);
    return -std::log(std::max(p[ex.label], 1e-300));
  }

  Vec example_grad(const Vec& w, const MlpExample& ex) const {
    std::vector<Vec> acts;
    Vec p = forward_pass(w, ex.input, acts);
    Vec g(dim_, 0.0);
    std::size_t n_layers = layers_.size() - 1;
    // softmax + cross-entropy: dL/dz = p - onehot(label)
    Vec delta = p;
    delta[ex.label] -= 1.0;
    for (std::size_t l = n_layers; l-- > 0;) {
      LayerView v = layer_view(l);
      const Vec& a = acts[l];
      for (std::size_t i = 0; i < v.out; ++i) {
        g[v.b_off + i] = delta[i];
        for (std::size_t j = 0; j < v.in; ++j) g[v.w_off + i * v.in + j] = delta[i] * a[j];
      }
      if (l == 0) break;
      Vec prev(v.in, 0.0);
      for (std::size_t j = 0; j < v.in; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < v.out; ++i) s += w[v.w_off + i * v.in + j] * delta[i];
        prev[j] = s * a[j] * (1.0 - a[j]);  // sigmoid'(z) = a(1-a)
      }
      delta = std::move(prev);
    }
    return g;
  }

  std::vector<std::size_t> layers_;
  std::vector<MlpExample> data_;
  std::size_t dim_ = 0;
};

// Gaussian class blobs, one mean direction per class, deterministic in seed.
inline std::vector<MlpExample> make_blob_dataset(std::size_t n, std::size_t in_dim,
                                                 std::size_t classes, std::uint64_t seed,
                                                 double spread = 1.5) {
  if (n == 0 || in_dim == 0 || classes == 0) throw InvalidCount();
  Rng rng(seed);
  std::vector<Vec> means(classes);
  for (std::size_t c = 0; c < classes; ++c) means[c] = spread * rng.unit_sphere(in_dim);
  std::vector<MlpExample> data;
  data.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = i % classes;
    Vec x = rng.normal_vec(in_dim);
    axpy(1.0, means[c], x);
    data.push_back({std::move(x), c});
  }
  return data;
}

}  // namespace cnc
