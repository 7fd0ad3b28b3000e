#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cnc/csv.hpp"
#include "cnc/errors.hpp"
#include "cnc/linalg.hpp"

namespace cnc {

enum class Method { gd, sgd, iso_pgd, cnc_pgd, cnc_sgd };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::gd: return "gd";
    case Method::sgd: return "sgd";
    case Method::iso_pgd: return "iso_pgd";
    case Method::cnc_pgd: return "cnc_pgd";
    case Method::cnc_sgd: return "cnc_sgd";
  }
  return "?";
}

// Per-run log. State indices are 0-based: state 0 is the start point and
// state k is reached after k update steps. f_values and grad_norms cover
// states 0..T inclusive. perturbation_steps holds the 1-based step numbers
// at which a perturbation / large step fired (the step from state t-1 to t),
// matching the algorithm descriptions' loop counter.
struct Trajectory {
  Method method = Method::gd;
  std::uint64_t seed = 0;
  std::vector<double> f_values;
  std::vector<double> grad_norms;
  std::vector<std::int64_t> perturbation_steps;
  std::map<std::size_t, Vec> snapshots;            // state index -> iterate
  std::map<std::size_t, Vec> step_noise;           // step-from-state index -> grad noise
  std::string params_echo;                         // header comment payload

  std::size_t steps_completed() const { return f_values.empty() ? 0 : f_values.size() - 1; }

  bool perturbed_from(std::size_t state_index) const {
    for (std::int64_t t : perturbation_steps)
      if (static_cast<std::size_t>(t - 1) == state_index) return true;
    return false;
  }

  const Vec& snapshot(std::size_t state_index) const {
    auto it = snapshots.find(state_index);
    if (it == snapshots.end()) throw MissingSnapshots("no snapshot for state " + std::to_string(state_index));
    return it->second;
  }

  bool has_snapshot(std::size_t state_index) const { return snapshots.count(state_index) != 0; }

  // columns: iter, f, grad_norm, perturbed_flag
  std::string to_csv() const {
    std::string out;
    out += "# method=" + method_name(method) + " seed=" + std::to_string(seed) + "\n";
    if (!params_echo.empty()) out += "# " + params_echo + "\n";
    out += "iter,f,grad_norm,perturbed_flag\n";
    for (std::size_t k = 0; k < f_values.size(); ++k) {
      out += join_csv({fmt_int(static_cast<long long>(k)), fmt_double(f_values[k]),
                       fmt_double(grad_norms[k]), perturbed_from(k) ? "1" : "0"});
      out += "\n";
    }
    return out;
  }
};

}  // namespace cnc
