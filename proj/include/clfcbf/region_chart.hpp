#pragma once

#include <map>
#include <string>
#include <vector>

#include "clfcbf/control_system.hpp"

namespace clfcbf {

enum class CellLabel { kUnsafe, kCompatible, kIncompatible, kOutside, kOffManifold };

const char* to_string(CellLabel label);

// Two display coordinates with ranges and resolution; the remaining state
// variables are fixed by `slice`. For the toy system the display coordinates
// may be the original pre-substitution angles, mapped through the change of
// variables per cell.
struct GridSpec {
  std::string x_name = "theta";
  std::string y_name = "gamma";
  double x_min = -3.14159265358979, x_max = 3.14159265358979;
  double y_min = -3.0, y_max = 3.0;
  int x_res = 200, y_res = 200;
  bool toy_angles = true;          // (theta, gamma) -> toy state map
  int x_state = -1, y_state = -1;  // state indices when toy_angles is false
  std::map<int, double> slice;     // fixed values for the remaining states
};

struct RegionCell {
  int ix = 0, iy = 0;
  double cx = 0.0, cy = 0.0;  // display coordinates of the cell center
  Eigen::VectorXd state;
  double constraint_residual = 0.0;
  bool unsafe = false;
  bool in_region = false;
  CellLabel label = CellLabel::kOutside;
};

// Cells in row-major order (iy outer, ix inner); labels are mutually
// exclusive with priority off-manifold > unsafe > region membership, and
// incompatible cells are by construction region members whose pointwise LP
// is infeasible.
struct RegionChart {
  GridSpec grid;
  std::vector<RegionCell> cells;
  int count(CellLabel label) const;
};

RegionChart plot_region(const ControlAffineSystem& sys, const UnsafeRegion& region,
                        const CertificatePair& cert, const GridSpec& grid,
                        const SolverSettings& settings = {}, int threads = 0);

// One row per cell: indices, display coordinates, the full state (so every
// incompatible cell can be re-verified from the file), flags and label.
std::string chart_to_csv(const ControlAffineSystem& sys, const RegionChart& chart);

// Four-layer rendering: grey unsafe, green compatible, cyan incompatible,
// white outside, hatched off-manifold.
std::string chart_to_svg(const RegionChart& chart);

}  // namespace clfcbf
