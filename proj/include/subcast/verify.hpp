#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "subcast/climatology.hpp"
#include "subcast/hindcast.hpp"
#include "subcast/metrics.hpp"

namespace subcast::verify {

// Windowed inputs for one variable, assembled from archives (or synthesized
// directly in tests). Index helpers flatten [window][init][member][point].
struct VerifyCase {
  std::string variable;
  Grid grid;
  std::vector<metrics::LeadWindow> windows;
  int n_inits = 0;
  int n_members = 0;
  bool precip_like = false;  // apply the dry mask to skill rows
  // Climatology-forecast baseline: category probabilities are the
  // climatological ones and the forecast anomaly is zero, so BSS and RPSS
  // vanish by construction while flowing through the same metric path.
  bool climatological_probs = false;

  // Raw windowed values.
  std::vector<float> obs_window;     // [w][i][np]
  std::vector<float> fc_window;      // [w][i][m][np]
  std::vector<std::uint8_t> member_valid;  // [i][m], 1 = usable

  // Observed-climatology references (always required): windowed mean for
  // anomalies plus category boundaries for the observation side.
  std::vector<float> obs_clim_mean;  // [w][i][np]
  std::vector<float> obs_q33, obs_q66, obs_q90;  // [w][i][np]

  // Forecast-side references per requested climatology kind.
  struct KindRef {
    ClimKind kind = ClimKind::observed;
    std::vector<float> fc_clim_mean;       // [w][i][np]
    std::vector<float> q33, q66, q90;      // [w][i][np]
  };
  std::vector<KindRef> refs;

  // Dry mask per (window, init); empty unless precip_like.
  std::vector<std::uint8_t> dry;  // [w][i][np]

  std::size_t wi(int w, int i) const {
    return (static_cast<std::size_t>(w) * n_inits + i) * grid.npoints();
  }
  std::size_t wim(int w, int i, int m) const {
    return ((static_cast<std::size_t>(w) * n_inits + i) * n_members + m) *
           grid.npoints();
  }
  void allocate();
  void validate() const;
};

struct MapArtifact {
  std::string metric, clim_kind, window;
  std::vector<double> map;
};

struct VerifyOptions {
  std::vector<Region> regions = {Region::global()};
  bool emit_maps = true;
  bool rmse_rows = true;
  int threads = 1;
  // Alternative aggregate: per-init spatial ACC averaged over inits, emitted
  // as extra ACC_spatial rows when enabled.
  bool spatial_acc_rows = false;
  double q90_clim_prob = 0.1;
};

struct CaseResult {
  std::vector<metrics::SkillRow> rows;
  std::vector<MapArtifact> maps;
};

// Deterministic regardless of threading: per-point accumulations run in init
// order and tasks write into preallocated slots.
CaseResult verify_case(const VerifyCase& vc, const VerifyOptions& options);

// Convenience: verify a list of cases (parallel across cases x windows) and
// concatenate rows in case order.
CaseResult verify_cases(const std::vector<VerifyCase>& cases,
                        const VerifyOptions& options);

}  // namespace subcast::verify
