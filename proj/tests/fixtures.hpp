#pragma once
// Example designs shared by the test suites.

#include <string>
#include <vector>

#include "top/design.hpp"

namespace fixtures {

// Single ORR endpoint, phi 0.2 vs 0.4, N 40 with looks every 10.
inline top::DesignSpec example1(double window_days = 120) {
  top::DesignSpec s;
  s.structure = top::Structure::single;
  s.N = 40;
  s.looks = {10, 20, 30, 40};
  s.alpha = 0.1;
  s.endpoints = {{"ORR", window_days, top::EndpointKind::response, 0.2}};
  s.alternative = {0.4};
  return s;
}

// Co-primary ORR / PFS4, N 45 with looks at 15, 30, 45.
inline top::DesignSpec example2(double orr_window = 60, double pfs_window = 120) {
  top::DesignSpec s;
  s.structure = top::Structure::co_primary;
  s.N = 45;
  s.looks = {15, 30, 45};
  s.alpha = 0.1;
  s.endpoints = {{"ORR", orr_window, top::EndpointKind::response, 0.45},
                 {"PFS4", pfs_window, top::EndpointKind::progression_free, 0.3}};
  s.alternative = {0.65, 0.45};
  return s;
}

// ORR plus DLT monitor, N 46 with looks every 12 then 46.
inline top::DesignSpec example3() {
  top::DesignSpec s;
  s.structure = top::Structure::efficacy_toxicity;
  s.N = 46;
  s.looks = {12, 24, 36, 46};
  s.alpha = 0.1;
  s.endpoints = {{"ORR", 120, top::EndpointKind::response, 0.3}, {"DLT", 60, top::EndpointKind::toxicity, 0.3}};
  s.alternative = {0.5, 0.15};
  return s;
}

inline const top::CutoffParams kExample1Params{0.86, 1.0, {}, {}};
inline const top::CutoffParams kExample2Params{0.94, 0.5, {}, {}};

inline std::string data_path(const std::string& name) { return std::string(TOP_DATA_DIR) + "/" + name; }

}  // namespace fixtures
