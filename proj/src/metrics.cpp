#include "facefit/metrics.h"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace facefit {

namespace {

constexpr double kRadToDeg = 57.29577951308232;

void mean_std(const std::vector<double>& xs, double& mean, double& stddev) {
  mean = 0.0;
  for (double x : xs) mean += x;
  mean /= double(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= double(xs.size());
  stddev = std::sqrt(var);
}

}  // namespace

MetricReport vertex_position_error(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt) {
  if (pred.size() != gt.size()) throw std::runtime_error("metrics: vertex count mismatch");
  if (pred.empty()) throw std::runtime_error("metrics: empty vertex set");
  std::vector<double> d(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) d[i] = norm(pred[i] - gt[i]);
  MetricReport r;
  r.count = d.size();
  mean_std(d, r.mean, r.stddev);
  return r;
}

MetricReport normal_angular_error(const Image& pred, const Image& gt, const Image& mask) {
  if (pred.width != gt.width || pred.height != gt.height || pred.width != mask.width ||
      pred.height != mask.height)
    throw std::runtime_error("metrics: normal image dimensions mismatch");
  bool warned = false;
  std::vector<double> deg;
  deg.reserve(std::size_t(pred.width) * pred.height);
  for (int y = 0; y < pred.height; ++y) {
    for (int x = 0; x < pred.width; ++x) {
      if (mask.at(x, y, 0) <= 0.0f) continue;
      Vec3 p{pred.at(x, y, 0), pred.at(x, y, 1), pred.at(x, y, 2)};
      Vec3 g{gt.at(x, y, 0), gt.at(x, y, 1), gt.at(x, y, 2)};
      double np = norm(p), ng = norm(g);
      if (np <= 0.0 || ng <= 0.0) continue;
      if ((std::abs(np - 1.0) > 1e-3 || std::abs(ng - 1.0) > 1e-3) && !warned) {
        std::fprintf(stderr, "metrics: renormalizing non-unit normals\n");
        warned = true;
      }
      double c = dot(p, g) / (np * ng);
      c = std::min(1.0, std::max(-1.0, c));
      deg.push_back(std::acos(c) * kRadToDeg);
    }
  }
  if (deg.empty()) throw std::runtime_error("metrics: empty mask");
  MetricReport r;
  r.count = deg.size();
  mean_std(deg, r.mean, r.stddev);
  double n20 = 0, n25 = 0, n30 = 0;
  for (double d : deg) {
    if (d < 20.0) n20 += 1;
    if (d < 25.0) n25 += 1;
    if (d < 30.0) n30 += 1;
  }
  r.pct20 = 100.0 * n20 / double(deg.size());
  r.pct25 = 100.0 * n25 / double(deg.size());
  r.pct30 = 100.0 * n30 / double(deg.size());
  return r;
}

double ssim(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height)
    throw std::runtime_error("metrics: ssim dimensions mismatch");
  const int win = 8;
  if (a.width < win || a.height < win) throw std::runtime_error("metrics: image smaller than ssim window");
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;

  auto luma = [](const Image& img, int x, int y) {
    if (img.channels == 1) return double(img.at(x, y, 0));
    return luminance(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2));
  };

  // Summed-area tables over luminance, its square, and the product.
  int w = a.width, h = a.height;
  std::vector<double> sa(std::size_t(w + 1) * (h + 1), 0.0), sb = sa, saa = sa, sbb = sa, sab = sa;
  auto at = [w](std::vector<double>& t, int x, int y) -> double& {
    return t[std::size_t(y) * (w + 1) + x];
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double la = luma(a, x, y), lb = luma(b, x, y);
      at(sa, x + 1, y + 1) = la + at(sa, x, y + 1) + at(sa, x + 1, y) - at(sa, x, y);
      at(sb, x + 1, y + 1) = lb + at(sb, x, y + 1) + at(sb, x + 1, y) - at(sb, x, y);
      at(saa, x + 1, y + 1) = la * la + at(saa, x, y + 1) + at(saa, x + 1, y) - at(saa, x, y);
      at(sbb, x + 1, y + 1) = lb * lb + at(sbb, x, y + 1) + at(sbb, x + 1, y) - at(sbb, x, y);
      at(sab, x + 1, y + 1) = la * lb + at(sab, x, y + 1) + at(sab, x + 1, y) - at(sab, x, y);
    }
  }
  auto box = [&](std::vector<double>& t, int x, int y) {
    return at(t, x + win, y + win) - at(t, x, y + win) - at(t, x + win, y) + at(t, x, y);
  };

  const double n = double(win) * win;
  double total = 0.0;
  std::size_t windows = 0;
  for (int y = 0; y + win <= h; ++y) {
    for (int x = 0; x + win <= w; ++x) {
      double ma = box(sa, x, y) / n, mb = box(sb, x, y) / n;
      double va = box(saa, x, y) / n - ma * ma;
      double vb = box(sbb, x, y) / n - mb * mb;
      double cov = box(sab, x, y) / n - ma * mb;
      double s = ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
                 ((ma * ma + mb * mb + c1) * (va + vb + c2));
      total += s;
      ++windows;
    }
  }
  return total / double(windows);
}

std::string metric_json(const MetricReport& r) {
  std::ostringstream out;
  out.precision(12);
  out << "{\n  \"mean\": " << r.mean << ",\n  \"stddev\": " << r.stddev
      << ",\n  \"pct_below_20\": " << r.pct20 << ",\n  \"pct_below_25\": " << r.pct25
      << ",\n  \"pct_below_30\": " << r.pct30 << ",\n  \"count\": " << r.count << "\n}\n";
  return out.str();
}

}  // namespace facefit
