#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "subcast/errors.hpp"

namespace subcast {

// Regular lat/lon grid. Latitude weights are proportional to cos(lat) and
// normalized to sum to 1, so area means of constant fields are exact.
struct Grid {
  int nlat = 0;
  int nlon = 0;
  std::vector<double> lat;      // degrees, strictly increasing in [-90, 90]
  std::vector<double> lon;      // degrees, strictly increasing in [0, 360)
  std::vector<double> weights;  // length nlat, cos-lat normalized

  static Grid regular(std::vector<double> lats, std::vector<double> lons);

  int npoints() const { return nlat * nlon; }
  int point(int i, int j) const { return i * nlon + j; }

  void validate() const;
  bool same_as(const Grid& other, double tol = 1e-9) const;

  // Nearest grid point to (lat, lon); longitude distance is circular.
  int nearest(double lat_deg, double lon_deg) const;
};

// Lat/lon box. lon_min > lon_max means the box wraps across 0 degrees.
struct Region {
  std::string name = "global";
  double lat_min = -90.0, lat_max = 90.0;
  double lon_min = 0.0, lon_max = 360.0;

  static Region global() { return Region{}; }
  static Region box(std::string name, double lat0, double lat1, double lon0,
                    double lon1) {
    return Region{std::move(name), lat0, lat1, lon0, lon1};
  }

  bool contains(double lat_deg, double lon_deg) const {
    if (lat_deg < lat_min || lat_deg > lat_max) return false;
    if (lon_min > lon_max) return lon_deg >= lon_min || lon_deg <= lon_max;
    return lon_deg >= lon_min && lon_deg <= lon_max;
  }
};

// Cos-lat weighted mean over the grid points inside `region`.
// Masked (mask != 0) and non-finite values are skipped. Throws on empty
// intersection or when every candidate point is masked.
// retained_fraction, when given, receives (retained weight) / (region weight).
double area_mean(const Grid& grid, const float* values, const Region& region,
                 const std::uint8_t* mask = nullptr,
                 double* retained_fraction = nullptr);
double area_mean(const Grid& grid, const double* values, const Region& region,
                 const std::uint8_t* mask = nullptr,
                 double* retained_fraction = nullptr);

}  // namespace subcast
