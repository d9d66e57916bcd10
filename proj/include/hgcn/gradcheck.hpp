#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "hgcn/autodiff.hpp"

namespace hgcn {

struct GradCheckRow {
  std::string name;
  double max_rel_err = 0.0;
  std::int64_t at = 0;  // flat index of the worst element
  double analytic = 0.0;
  double numeric = 0.0;
  std::int64_t non_finite = 0;  // perturbed evaluations that produced NaN/Inf
};

struct GradCheckReport {
  std::vector<GradCheckRow> rows;
  double worst = 0.0;
  bool pass(double tol) const { return worst <= tol; }
};

// Relative error with an absolute floor. The floor must sit well above the
// central-difference roundoff (~eps*|loss|/step ~ 1e-11 at step 1e-5), or
// near-zero gradient entries turn pure FD noise into large ratios.
inline double rel_err(double numeric, double analytic) {
  const double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-6});
  return std::fabs(numeric - analytic) / denom;
}

// Central-difference check of d(loss)/d(theta) for every element of every
// parameter. `loss` must be a pure function of the store's values: called with
// accumulate=true it must also run backward into the store's grad buffers.
inline GradCheckReport grad_check(const std::function<double(ParamStore&, bool)>& loss,
                                  ParamStore& store, double step = 1e-5) {
  store.zero_grad();
  loss(store, true);
  GradCheckReport report;
  for (std::size_t p = 0; p < store.size(); ++p) {
    auto& entry = store.entry(p);
    GradCheckRow row;
    row.name = entry.name;
    for (std::size_t i = 0; i < entry.value.data.size(); ++i) {
      const double saved = entry.value.data[i];
      entry.value.data[i] = saved + step;
      const double f_plus = loss(store, false);
      entry.value.data[i] = saved - step;
      const double f_minus = loss(store, false);
      entry.value.data[i] = saved;
      if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
        ++row.non_finite;
        continue;
      }
      const double fd = (f_plus - f_minus) / (2.0 * step);
      const double an = entry.grad.data[i];
      const double err = rel_err(fd, an);
      if (err >= row.max_rel_err) {
        row.max_rel_err = err;
        row.at = static_cast<std::int64_t>(i);
        row.analytic = an;
        row.numeric = fd;
      }
    }
    report.worst = std::max(report.worst, row.max_rel_err);
    report.rows.push_back(std::move(row));
  }
  return report;
}

inline std::string format_grad_check(const GradCheckReport& report, double tol) {
  std::string out;
  char line[256];
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof line, "%-28s max_rel_err=%.3e at=%lld analytic=%+.6e fd=%+.6e %s\n",
                  r.name.c_str(), r.max_rel_err, static_cast<long long>(r.at), r.analytic,
                  r.numeric, r.max_rel_err <= tol ? "ok" : "FAIL");
    out += line;
    if (r.non_finite > 0) {
      std::snprintf(line, sizeof line, "%-28s %lld non-finite perturbed evaluations\n",
                    r.name.c_str(), static_cast<long long>(r.non_finite));
      out += line;
    }
  }
  std::snprintf(line, sizeof line, "worst=%.3e tol=%.1e => %s\n", report.worst, tol,
                report.pass(tol) ? "PASS" : "FAIL");
  out += line;
  return out;
}

}  // namespace hgcn
