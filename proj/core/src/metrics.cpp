#include "photon_da/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace photon_da {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ValidationError(msg); }

void check_pair(const DepthMap& truth, const DepthMap& pred) {
  if (truth.nx < 1 || truth.ny < 1 ||
      truth.z.size() != static_cast<std::size_t>(truth.pixels()))
    fail("ground-truth depth map is malformed");
  if (truth.nx != pred.nx || truth.ny != pred.ny ||
      pred.z.size() != truth.z.size()) {
    std::ostringstream os;
    os << "depth maps disagree: " << truth.nx << " x " << truth.ny
       << " truth vs " << pred.nx << " x " << pred.ny << " prediction";
    fail(os.str());
  }
}

bool valid_pixel(float t, float p) {
  return std::isfinite(t) && std::isfinite(p);
}

template <typename Accum>
std::int64_t over_valid(const DepthMap& truth, const DepthMap& pred,
                        Accum&& accum) {
  std::int64_t n = 0;
  for (std::size_t i = 0; i < truth.z.size(); ++i)
    if (valid_pixel(truth.z[i], pred.z[i])) {
      ++n;
      accum(static_cast<double>(truth.z[i]),
            static_cast<double>(pred.z[i]));
    }
  return n;
}

bool passes_delta(double z, double z_hat, double delta) {
  if (z_hat <= 0.0 || z <= 0.0) return false;  // ratio +inf by convention
  return std::max(z / z_hat, z_hat / z) < delta;
}

}  // namespace

double rmse(const DepthMap& truth, const DepthMap& pred) {
  check_pair(truth, pred);
  double acc = 0.0;
  const auto n = over_valid(truth, pred, [&](double t, double p) {
    acc += (t - p) * (t - p);
  });
  if (n == 0) fail("rmse: no valid pixels");
  return std::sqrt(acc / static_cast<double>(n));
}

double abs_rel(const DepthMap& truth, const DepthMap& pred) {
  check_pair(truth, pred);
  double acc = 0.0;
  std::int64_t used = 0;
  const auto n = over_valid(truth, pred, [&](double t, double p) {
    if (t > 0.0) {
      acc += std::abs(t - p) / t;
      ++used;
    }
  });
  if (n == 0) fail("abs_rel: no valid pixels");
  if (used == 0) fail("abs_rel: no valid pixel has positive ground truth");
  return acc / static_cast<double>(used);
}

double accuracy_delta(const DepthMap& truth, const DepthMap& pred,
                      double delta) {
  check_pair(truth, pred);
  if (!(delta > 1.0)) fail("accuracy_delta: delta must exceed 1");
  std::int64_t pass = 0;
  const auto n = over_valid(truth, pred, [&](double t, double p) {
    if (passes_delta(t, p, delta)) ++pass;
  });
  if (n == 0) fail("accuracy_delta: no valid pixels");
  return static_cast<double>(pass) / static_cast<double>(n);
}

EvalReport evaluate(const DepthMap& truth, const DepthMap& pred,
                    const std::vector<double>& deltas) {
  check_pair(truth, pred);
  EvalReport rep;
  double se = 0.0, rel = 0.0;
  std::int64_t rel_used = 0;
  rep.pixel_count = over_valid(truth, pred, [&](double t, double p) {
    se += (t - p) * (t - p);
    if (t > 0.0) {
      rel += std::abs(t - p) / t;
      ++rel_used;
    }
  });
  if (rep.pixel_count == 0) fail("evaluate: no valid pixels");
  rep.rmse = std::sqrt(se / static_cast<double>(rep.pixel_count));
  rep.abs_rel_skipped = rep.pixel_count - rel_used;
  rep.abs_rel = rel_used > 0 ? rel / static_cast<double>(rel_used) : 0.0;
  for (double d : deltas) rep.acc[d] = accuracy_delta(truth, pred, d);
  return rep;
}

std::string EvalReport::to_csv() const {
  std::ostringstream head, row;
  head << "rmse,abs_rel";
  row << std::setprecision(10) << rmse << ',' << abs_rel;
  for (const auto& [delta, frac] : acc) {
    head << ",acc@" << delta;
    row << ',' << frac;
  }
  head << ",pixel_count,abs_rel_skipped";
  row << ',' << pixel_count << ',' << abs_rel_skipped;
  return head.str() + "\n" + row.str() + "\n";
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  os << std::left << std::setw(18) << "rmse (m)" << std::setprecision(6)
     << rmse << "\n"
     << std::setw(18) << "abs_rel" << abs_rel << "\n";
  for (const auto& [delta, frac] : acc) {
    std::ostringstream label;
    label << "acc@" << delta;
    os << std::setw(18) << label.str() << frac << "\n";
  }
  os << std::setw(18) << "valid pixels" << pixel_count << "\n"
     << std::setw(18) << "abs_rel skipped" << abs_rel_skipped << "\n";
  return os.str();
}

}  // namespace photon_da
