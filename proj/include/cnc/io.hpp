#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cnc/analysis.hpp"
#include "cnc/csv.hpp"
#include "cnc/halfspace.hpp"
#include "cnc/spectrum.hpp"

namespace cnc {

// One row per sample: the d coordinates of z_i. The folded-label convention
// (z_i = -y_i x_i, unit ball) is stated in the header block.
inline std::string halfspace_to_csv(const HalfspaceProblem& p) {
  std::string out;
  out += "# halfspace dataset: one row per sample, d comma-separated coordinates\n";
  out += "# convention: labels folded into the data, z_i = -y_i * x_i, all rows in the unit ball\n";
  out += "# n=" + std::to_string(p.num_samples()) + " d=" + std::to_string(p.dim()) + "\n";
  for (const Vec& z : p.data()) {
    std::vector<std::string> fields;
    fields.reserve(z.size());
    for (double x : z) fields.push_back(fmt_double(x));
    out += join_csv(fields) + "\n";
  }
  return out;
}

inline HalfspaceProblem halfspace_from_csv(const std::string& text, LossFn loss,
                                           double reg_weight) {
  std::vector<Vec> zs;
  std::size_t line_no = 0;
  for (const std::string& raw : split(text, '\n')) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    Vec z;
    for (const std::string& f : split(line, ',')) {
      try {
        z.push_back(std::stod(f));
      } catch (const std::exception&) {
        throw ParseError("bad number at line " + std::to_string(line_no) + ": " + f);
      }
    }
    zs.push_back(std::move(z));
  }
  if (zs.empty()) throw EmptyDataset("no data rows");
  return HalfspaceProblem(std::move(zs), std::move(loss), reg_weight);
}

// Row per eigenpair: eigenvalue, then the eigenvector components.
inline std::string spectrum_to_csv(const SpectrumReport& rep) {
  std::string out = "# eigenvalue,components...\n";
  for (std::size_t k = 0; k < rep.eigenvalues.size(); ++k) {
    std::vector<std::string> fields{fmt_double(rep.eigenvalues[k])};
    for (double x : rep.eigenvectors[k]) fields.push_back(fmt_double(x));
    out += join_csv(fields) + "\n";
  }
  return out;
}

// Row per eigendirection of an aggregated estimate.
inline std::string cnc_estimate_to_csv(const CncEstimate& est) {
  std::string out = "# m=" + std::to_string(est.m) + " n=" + std::to_string(est.n) + "\n";
  out += "k,lambda,mu_raw,mu_normalized\n";
  for (const CncDirection& r : est.records) {
    out += join_csv({fmt_int(static_cast<long long>(r.k)), fmt_double(r.lambda),
                     fmt_double(r.mu_raw), fmt_double(r.mu_normalized)}) +
           "\n";
  }
  return out;
}

}  // namespace cnc
