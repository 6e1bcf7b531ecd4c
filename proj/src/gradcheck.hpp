#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace tpdr {

inline constexpr double kGradcheckTolerance = 1e-4;

struct GradcheckEntry {
  std::string component;
  FdReport report;
  double seconds = 0.0;
};

// Component names accepted by run_gradcheck, in canonical order.
const std::vector<std::string>& gradcheck_components();

// Checks analytic gradients against central finite differences on a freshly
// initialized instance of the named component ("all" runs every component).
// Each check builds a deterministic loss from the given seed.
std::vector<GradcheckEntry> run_gradcheck(const std::string& component, uint64_t seed);

bool gradcheck_passed(const std::vector<GradcheckEntry>& entries);

// {"tolerance":..., "pass":..., "components": {name: {max_rel_err, entries,
//  worst_param, worst_index, seconds}}}
std::string gradcheck_report_json(const std::vector<GradcheckEntry>& entries);

}  // namespace tpdr
