#pragma once

#include <string>
#include <vector>

#include "twincount/dataio.hpp"
#include "twincount/evaluation.hpp"
#include "twincount/image.hpp"

namespace twincount {

enum class Polarity { cells_dark, cells_bright };

const char* to_string(Polarity p);
Polarity polarity_from_string(const std::string& s);

struct WatershedParams {
  int crop_margin = 6;      // pixels masked out on every side
  int blur_kernel = 3;      // odd, mean filter
  double threshold = 0.5;   // gray level in [0,1]
  Polarity polarity = Polarity::cells_bright;
  double distance_peak_min = 7.0;  // min distance between marker peaks
  int min_region_area = 8;         // regions below this are dropped

  void validate() const;
};

struct LabelMap {
  int width = 0, height = 0;
  std::vector<int> labels;  // 0 = background, 1..num_regions
  int num_regions = 0;

  int at(int x, int y) const { return labels[static_cast<size_t>(y) * width + x]; }
};

// Crop, mean blur, threshold, Euclidean distance transform, peak markers,
// priority-flood watershed, small-region removal.
LabelMap segment(const Image& image, const WatershedParams& params);

int count_cells(const Image& image, const WatershedParams& params);

// Exact squared Euclidean distance transform to the nearest zero entry.
std::vector<double> distance_transform(const std::vector<uint8_t>& mask, int width,
                                       int height);

struct GridSpec {
  std::vector<int> crop_margin{6};
  std::vector<int> blur_kernel{1, 3, 5};
  std::vector<double> threshold{0.35, 0.45, 0.55, 0.65};
  std::vector<Polarity> polarity{Polarity::cells_bright};
  std::vector<double> distance_peak_min{5, 7, 9};
  std::vector<int> min_region_area{4, 10};

  size_t total() const {
    return crop_margin.size() * blur_kernel.size() * threshold.size() *
           polarity.size() * distance_peak_min.size() * min_region_area.size();
  }
  void validate() const;
};

struct GridPointResult {
  WatershedParams params;
  MetricsReport report;
};

struct GridSearchResult {
  WatershedParams best;
  MetricsReport best_report;
  std::vector<GridPointResult> table;  // deterministic grid order
};

// Exhaustive, deterministic; selects lowest MAE, ties broken by higher
// accuracy then lexicographic parameter order.
GridSearchResult grid_search(const DatasetManifest& dataset, const GridSpec& grid);

void write_grid_csv(const GridSearchResult& result, const std::string& path);
void write_params_json(const WatershedParams& params, const std::string& path);

}  // namespace twincount
