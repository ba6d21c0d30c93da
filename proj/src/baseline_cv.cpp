#include "twincount/baseline_cv.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <tuple>

#include <nlohmann/json.hpp>

#include "twincount/errors.hpp"
#include "twincount/json_io.hpp"

namespace twincount {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1-D squared distance transform (Felzenszwalb & Huttenlocher).
void dt_1d(const double* f, int n, double* d, int* v, double* z) {
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    double s;
    while (true) {
      s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
      if (s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    d[q] = (q - v[k]) * (q - v[k]) + f[v[k]];
  }
}

}  // namespace

std::vector<double> distance_transform(const std::vector<uint8_t>& mask, int width,
                                       int height) {
  std::vector<double> dist(static_cast<size_t>(width) * height);
  for (size_t i = 0; i < dist.size(); ++i) dist[i] = mask[i] ? kInf : 0.0;

  std::vector<double> f(std::max(width, height));
  std::vector<double> d(std::max(width, height));
  std::vector<int> v(std::max(width, height));
  std::vector<double> z(std::max(width, height) + 1);

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) f[x] = dist[static_cast<size_t>(y) * width + x];
    dt_1d(f.data(), width, d.data(), v.data(), z.data());
    for (int x = 0; x < width; ++x) dist[static_cast<size_t>(y) * width + x] = d[x];
  }
  for (int x = 0; x < width; ++x) {
    for (int y = 0; y < height; ++y) f[y] = dist[static_cast<size_t>(y) * width + x];
    dt_1d(f.data(), height, d.data(), v.data(), z.data());
    for (int y = 0; y < height; ++y) dist[static_cast<size_t>(y) * width + x] = d[y];
  }
  return dist;
}

const char* to_string(Polarity p) {
  return p == Polarity::cells_dark ? "cells-dark" : "cells-bright";
}

Polarity polarity_from_string(const std::string& s) {
  if (s == "cells-dark") return Polarity::cells_dark;
  if (s == "cells-bright") return Polarity::cells_bright;
  throw ValidationError("unknown polarity: " + s);
}

void WatershedParams::validate() const {
  if (blur_kernel < 1 || blur_kernel % 2 == 0)
    throw ValidationError("blur_kernel must be odd and >= 1");
  if (threshold < 0 || threshold > 1)
    throw ValidationError("threshold must lie in [0,1]");
  if (crop_margin < 0 || 2 * crop_margin >= kImageSize)
    throw ValidationError("crop_margin out of range");
  if (distance_peak_min < 0) throw ValidationError("distance_peak_min must be >= 0");
  if (min_region_area < 0) throw ValidationError("min_region_area must be >= 0");
}

void GridSpec::validate() const {
  if (crop_margin.empty() || blur_kernel.empty() || threshold.empty() ||
      polarity.empty() || distance_peak_min.empty() || min_region_area.empty())
    throw ValidationError("grid candidate lists must be nonempty");
}

LabelMap segment(const Image& image, const WatershedParams& params) {
  params.validate();
  const int w = image.width, h = image.height;
  const Image blurred = box_blur(image, params.blur_kernel);

  // threshold with polarity, margins masked out
  std::vector<uint8_t> mask(static_cast<size_t>(w) * h, 0);
  const int m = params.crop_margin;
  for (int y = m; y < h - m; ++y)
    for (int x = m; x < w - m; ++x) {
      const float v = blurred.at(x, y);
      const bool fg = params.polarity == Polarity::cells_bright
                          ? v > params.threshold
                          : v < params.threshold;
      mask[static_cast<size_t>(y) * w + x] = fg ? 1 : 0;
    }

  const std::vector<double> dist2 = distance_transform(mask, w, h);

  // candidate markers: 8-neighborhood maxima of the distance transform
  struct Peak {
    double d;
    int x, y;
  };
  std::vector<Peak> peaks;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double d = dist2[static_cast<size_t>(y) * w + x];
      if (d <= 0) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          if (dist2[static_cast<size_t>(ny) * w + nx] > d) {
            is_max = false;
            break;
          }
        }
      if (is_max) peaks.push_back({d, x, y});
    }
  std::sort(peaks.begin(), peaks.end(), [w](const Peak& a, const Peak& b) {
    if (a.d != b.d) return a.d > b.d;
    return a.y * w + a.x < b.y * w + b.x;
  });

  // greedy minimum-separation selection
  std::vector<Peak> markers;
  const double min_d2 = params.distance_peak_min * params.distance_peak_min;
  for (const auto& p : peaks) {
    bool ok = true;
    for (const auto& q : markers) {
      const double dx = p.x - q.x, dy = p.y - q.y;
      if (dx * dx + dy * dy < min_d2) {
        ok = false;
        break;
      }
    }
    if (ok) markers.push_back(p);
  }

  // priority-flood watershed on the negated distance, 4-connected
  LabelMap out;
  out.width = w;
  out.height = h;
  out.labels.assign(static_cast<size_t>(w) * h, 0);
  using Entry = std::tuple<double, int64_t, int>;  // (-dist, insertion order, idx)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> pq;
  int64_t order = 0;
  for (size_t i = 0; i < markers.size(); ++i) {
    const int idx = markers[i].y * w + markers[i].x;
    out.labels[idx] = static_cast<int>(i + 1);
    pq.emplace(-markers[i].d, order++, idx);
  }
  const int dx4[4] = {1, -1, 0, 0};
  const int dy4[4] = {0, 0, 1, -1};
  while (!pq.empty()) {
    const auto [negd, ord, idx] = pq.top();
    pq.pop();
    const int x = idx % w, y = idx / w;
    const int label = out.labels[idx];
    for (int k = 0; k < 4; ++k) {
      const int nx = x + dx4[k], ny = y + dy4[k];
      if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
      const int nidx = ny * w + nx;
      if (!mask[nidx] || out.labels[nidx] != 0) continue;
      out.labels[nidx] = label;
      pq.emplace(-dist2[nidx], order++, nidx);
    }
  }

  // drop regions below the minimum area, then renumber
  std::vector<int> area(markers.size() + 1, 0);
  for (int l : out.labels)
    if (l > 0) ++area[l];
  std::vector<int> remap(markers.size() + 1, 0);
  int next = 0;
  for (size_t l = 1; l < area.size(); ++l)
    if (area[l] >= params.min_region_area && area[l] > 0) remap[l] = ++next;
  for (auto& l : out.labels) l = remap[l];
  out.num_regions = next;
  return out;
}

int count_cells(const Image& image, const WatershedParams& params) {
  return segment(image, params).num_regions;
}

GridSearchResult grid_search(const DatasetManifest& dataset, const GridSpec& grid) {
  grid.validate();
  if (dataset.empty()) throw ValidationError("grid_search: empty dataset");
  std::vector<int> labels;
  labels.reserve(dataset.size());
  for (const auto& s : dataset.samples) {
    if (!s.label)
      throw ValidationError("grid_search: dataset must be fully labeled");
    labels.push_back(*s.label);
  }

  // materialize the grid in lexicographic candidate order
  std::vector<WatershedParams> points;
  for (int cm : grid.crop_margin)
    for (int bk : grid.blur_kernel)
      for (double th : grid.threshold)
        for (Polarity pol : grid.polarity)
          for (double pk : grid.distance_peak_min)
            for (int ar : grid.min_region_area) {
              WatershedParams p;
              p.crop_margin = cm;
              p.blur_kernel = bk;
              p.threshold = th;
              p.polarity = pol;
              p.distance_peak_min = pk;
              p.min_region_area = ar;
              points.push_back(p);
            }

  GridSearchResult result;
  result.table.resize(points.size());
#pragma omp parallel for schedule(dynamic)
  for (size_t gi = 0; gi < points.size(); ++gi) {
    std::vector<double> preds(dataset.size());
    for (size_t i = 0; i < dataset.size(); ++i)
      preds[i] = count_cells(dataset.samples[i].image, points[gi]);
    result.table[gi] = {points[gi], metrics(preds, labels)};
  }

  size_t best = 0;
  for (size_t gi = 1; gi < result.table.size(); ++gi) {
    const auto& a = result.table[gi].report;
    const auto& b = result.table[best].report;
    if (a.mae < b.mae || (a.mae == b.mae && a.accuracy > b.accuracy)) best = gi;
  }
  result.best = result.table[best].params;
  result.best_report = result.table[best].report;
  return result;
}

void write_grid_csv(const GridSearchResult& result, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f << "crop_margin,blur_kernel,threshold,polarity,distance_peak_min,"
       "min_region_area,mae,mre,acc\n";
  char buf[64];
  for (const auto& row : result.table) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g", row.report.mae,
                  row.report.mre, row.report.accuracy);
    f << row.params.crop_margin << ',' << row.params.blur_kernel << ','
      << row.params.threshold << ',' << to_string(row.params.polarity) << ','
      << row.params.distance_peak_min << ',' << row.params.min_region_area << ','
      << buf << "\n";
  }
}

void write_params_json(const WatershedParams& params, const std::string& path) {
  nlohmann::json j = params;
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f << j.dump(2) << "\n";
}

}  // namespace twincount
