#pragma once

#include <concepts>
#include <cstddef>

#include "cnc/linalg.hpp"

namespace cnc {

template <class T>
concept Objective = requires(const T& o, const Vec& w) {
  { o.dim() } -> std::convertible_to<std::size_t>;
  { o.value(w) } -> std::convertible_to<double>;
  { o.grad(w) } -> std::same_as<Vec>;
};

// Finite-support stochastic objective: per-sample gradients indexed over the
// support, with probabilities that make exact enumeration possible.
template <class T>
concept StochasticObjective = Objective<T> && requires(const T& o, const Vec& w, std::size_t i) {
  { o.num_samples() } -> std::convertible_to<std::size_t>;
  { o.sample_grad(w, i) } -> std::same_as<Vec>;
  { o.sample_prob(i) } -> std::convertible_to<double>;
};

template <class T>
concept HasHessian = requires(const T& o, const Vec& w) {
  { o.hessian(w) } -> std::same_as<Mat>;
};

}  // namespace cnc
