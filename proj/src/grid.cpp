#include "subcast/grid.hpp"

#include <algorithm>
#include <cmath>

namespace subcast {

namespace {
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

template <typename T>
double area_mean_impl(const Grid& grid, const T* values, const Region& region,
                      const std::uint8_t* mask, double* retained_fraction) {
  grid.validate();
  double sum = 0.0, wsum = 0.0, wregion = 0.0;
  bool any_inside = false;
  for (int i = 0; i < grid.nlat; ++i) {
    const double w = grid.weights[i];
    for (int j = 0; j < grid.nlon; ++j) {
      if (!region.contains(grid.lat[i], grid.lon[j])) continue;
      any_inside = true;
      wregion += w;
      const int p = grid.point(i, j);
      if (mask != nullptr && mask[p]) continue;
      const double v = static_cast<double>(values[p]);
      if (!std::isfinite(v)) continue;
      sum += w * v;
      wsum += w;
    }
  }
  if (!any_inside) {
    throw ConfigError("region '" + region.name + "' does not intersect grid");
  }
  if (wsum <= 0.0) {
    throw NumericalError("region '" + region.name +
                         "': all points masked or non-finite");
  }
  if (retained_fraction != nullptr) *retained_fraction = wsum / wregion;
  return sum / wsum;
}
}  // namespace

Grid Grid::regular(std::vector<double> lats, std::vector<double> lons) {
  Grid g;
  g.nlat = static_cast<int>(lats.size());
  g.nlon = static_cast<int>(lons.size());
  g.lat = std::move(lats);
  g.lon = std::move(lons);
  double total = 0.0;
  g.weights.resize(g.nlat);
  for (int i = 0; i < g.nlat; ++i) {
    g.weights[i] = std::cos(g.lat[i] * kDegToRad);
    total += g.weights[i];
  }
  for (double& w : g.weights) w /= total;
  g.validate();
  return g;
}

void Grid::validate() const {
  if (nlat <= 0 || nlon <= 0) throw ConfigError("grid: empty dimension");
  if (static_cast<int>(lat.size()) != nlat ||
      static_cast<int>(lon.size()) != nlon ||
      static_cast<int>(weights.size()) != nlat) {
    throw ConfigError("grid: coordinate array length mismatch");
  }
  for (int i = 0; i < nlat; ++i) {
    if (lat[i] < -90.0 || lat[i] > 90.0) {
      throw ConfigError("grid: latitude out of [-90, 90]");
    }
    if (i > 0 && lat[i] <= lat[i - 1]) {
      throw ConfigError("grid: latitudes not strictly increasing");
    }
    if (!(weights[i] > 0.0)) throw ConfigError("grid: non-positive weight");
  }
  for (int j = 0; j < nlon; ++j) {
    if (lon[j] < 0.0 || lon[j] >= 360.0) {
      throw ConfigError("grid: longitude out of [0, 360)");
    }
    if (j > 0 && lon[j] <= lon[j - 1]) {
      throw ConfigError("grid: longitudes not strictly increasing");
    }
  }
}

bool Grid::same_as(const Grid& other, double tol) const {
  if (nlat != other.nlat || nlon != other.nlon) return false;
  for (int i = 0; i < nlat; ++i) {
    if (std::abs(lat[i] - other.lat[i]) > tol) return false;
  }
  for (int j = 0; j < nlon; ++j) {
    if (std::abs(lon[j] - other.lon[j]) > tol) return false;
  }
  return true;
}

int Grid::nearest(double lat_deg, double lon_deg) const {
  validate();
  int best_i = 0;
  double best_dlat = std::abs(lat[0] - lat_deg);
  for (int i = 1; i < nlat; ++i) {
    const double d = std::abs(lat[i] - lat_deg);
    if (d < best_dlat) {
      best_dlat = d;
      best_i = i;
    }
  }
  int best_j = 0;
  double best_dlon = 361.0;
  for (int j = 0; j < nlon; ++j) {
    double d = std::abs(lon[j] - lon_deg);
    d = std::min(d, 360.0 - d);
    if (d < best_dlon) {
      best_dlon = d;
      best_j = j;
    }
  }
  return point(best_i, best_j);
}

double area_mean(const Grid& grid, const float* values, const Region& region,
                 const std::uint8_t* mask, double* retained_fraction) {
  return area_mean_impl(grid, values, region, mask, retained_fraction);
}

double area_mean(const Grid& grid, const double* values, const Region& region,
                 const std::uint8_t* mask, double* retained_fraction) {
  return area_mean_impl(grid, values, region, mask, retained_fraction);
}

}  // namespace subcast
