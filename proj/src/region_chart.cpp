#include "clfcbf/region_chart.hpp"

#include <charconv>
#include <sstream>
#include <thread>

namespace clfcbf {

const char* to_string(CellLabel label) {
  switch (label) {
    case CellLabel::kUnsafe: return "unsafe";
    case CellLabel::kCompatible: return "compatible";
    case CellLabel::kIncompatible: return "incompatible";
    case CellLabel::kOutside: return "outside";
    case CellLabel::kOffManifold: return "off-manifold";
  }
  return "?";
}

int RegionChart::count(CellLabel label) const {
  int n = 0;
  for (const RegionCell& cell : cells) {
    if (cell.label == label) ++n;
  }
  return n;
}

RegionChart plot_region(const ControlAffineSystem& sys, const UnsafeRegion& region,
                        const CertificatePair& cert, const GridSpec& grid,
                        const SolverSettings& settings, int threads) {
  RegionChart chart;
  chart.grid = grid;
  if (grid.x_res <= 0 || grid.y_res <= 0) return chart;  // empty chart
  if (!grid.toy_angles && (grid.x_state < 0 || grid.y_state < 0)) {
    throw std::invalid_argument("grid needs state indices unless toy_angles is set");
  }
  chart.cells.resize(static_cast<std::size_t>(grid.x_res) * grid.y_res);

  const CompatibilityOracle oracle(sys, cert);
  const int n = sys.num_states();

  auto evaluate_cell = [&](int ix, int iy) {
    RegionCell cell;
    cell.ix = ix;
    cell.iy = iy;
    cell.cx = grid.x_min + (ix + 0.5) * (grid.x_max - grid.x_min) / grid.x_res;
    cell.cy = grid.y_min + (iy + 0.5) * (grid.y_max - grid.y_min) / grid.y_res;

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (const auto& [idx, value] : grid.slice) x[idx] = value;
    if (grid.toy_angles) {
      x.head(3) = toy_state_from_angles(cell.cx, cell.cy);
    } else {
      x[grid.x_state] = cell.cx;
      x[grid.y_state] = cell.cy;
    }
    cell.state = x;

    cell.constraint_residual = sys.state_constraints.empty()
                                   ? 0.0
                                   : sys.constraint_values(x).lpNorm<Eigen::Infinity>();
    if (cell.constraint_residual > kManifoldTol) {
      cell.label = CellLabel::kOffManifold;
      return cell;
    }

    bool unsafe = region.mode == UnsafeRegion::Mode::kIntersection;
    for (const Polynomial& l : region.l) {
      const bool inside = l.evaluate(x) <= 0.0;
      unsafe = region.mode == UnsafeRegion::Mode::kUnion ? (unsafe || inside)
                                                         : (unsafe && inside);
    }
    cell.unsafe = unsafe;
    cell.in_region =
        cert.h.evaluate(x) >= -kRegionTol && cert.V.evaluate(x) <= 1.0 + kRegionTol;
    if (cell.unsafe) {
      cell.label = CellLabel::kUnsafe;
    } else if (!cell.in_region) {
      cell.label = CellLabel::kOutside;
    } else {
      const PointwiseResult r = oracle.query(x, settings);
      cell.label = r.kind == PointwiseResult::Kind::kIncompatible ? CellLabel::kIncompatible
                                                                  : CellLabel::kCompatible;
    }
    return cell;
  };

  int worker_count = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  worker_count = std::max(1, std::min(worker_count, grid.y_res));
  std::vector<std::thread> workers;
  std::atomic<int> next_row{0};
  auto run_rows = [&] {
    while (true) {
      const int iy = next_row.fetch_add(1);
      if (iy >= grid.y_res) break;
      for (int ix = 0; ix < grid.x_res; ++ix) {
        chart.cells[static_cast<std::size_t>(iy) * grid.x_res + ix] = evaluate_cell(ix, iy);
      }
    }
  };
  if (worker_count == 1) {
    run_rows();
  } else {
    workers.reserve(static_cast<std::size_t>(worker_count));
    for (int t = 0; t < worker_count; ++t) workers.emplace_back(run_rows);
    for (std::thread& w : workers) w.join();
  }
  return chart;
}

namespace {

std::string fmt(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string chart_to_csv(const ControlAffineSystem& sys, const RegionChart& chart) {
  std::ostringstream out;
  out << "ix,iy," << chart.grid.x_name << "," << chart.grid.y_name;
  for (int i = 0; i < sys.num_states(); ++i) out << "," << sys.vars.name_of(i);
  out << ",e_residual,unsafe,in_region,label\n";
  for (const RegionCell& cell : chart.cells) {
    out << cell.ix << "," << cell.iy << "," << fmt(cell.cx) << "," << fmt(cell.cy);
    for (int i = 0; i < sys.num_states(); ++i) out << "," << fmt(cell.state[i]);
    out << "," << fmt(cell.constraint_residual) << "," << (cell.unsafe ? 1 : 0) << ","
        << (cell.in_region ? 1 : 0) << "," << to_string(cell.label) << "\n";
  }
  return out.str();
}

std::string chart_to_svg(const RegionChart& chart) {
  const int width = 720, height = 720, margin = 40;
  const double cw = static_cast<double>(width - 2 * margin) / std::max(1, chart.grid.x_res);
  const double ch = static_cast<double>(height - 2 * margin) / std::max(1, chart.grid.y_res);
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const RegionCell& cell : chart.cells) {
    const char* fill = nullptr;
    switch (cell.label) {
      case CellLabel::kUnsafe: fill = "#9e9e9e"; break;
      case CellLabel::kCompatible: fill = "#57bb57"; break;
      case CellLabel::kIncompatible: fill = "#4dd0e1"; break;
      case CellLabel::kOffManifold: fill = "#efe6f7"; break;
      case CellLabel::kOutside: fill = nullptr; break;
    }
    if (fill == nullptr) continue;
    const double px = margin + cell.ix * cw;
    const double py = height - margin - (cell.iy + 1) * ch;  // y axis upward
    out << "<rect x=\"" << px << "\" y=\"" << py << "\" width=\"" << cw * 1.02
        << "\" height=\"" << ch * 1.02 << "\" fill=\"" << fill << "\"/>\n";
  }
  out << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << width - 2 * margin
      << "\" height=\"" << height - 2 * margin
      << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - 8 << "\" text-anchor=\"middle\">"
      << chart.grid.x_name << "</text>\n";
  out << "<text x=\"14\" y=\"" << height / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << height / 2 << ")\">" << chart.grid.y_name << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace clfcbf
