#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "subcast/archive.hpp"

namespace subcast {

// Member x lead x grid forecast block for one initialization time.
// Lead 0 is the (possibly perturbed) initial snapshot; leads run 0..n_leads.
struct EnsembleHindcast {
  Grid grid;
  std::vector<std::string> variables;
  std::int64_t init_step = 0;
  int n_leads = 0;    // stored lead count is n_leads + 1
  int n_members = 0;
  std::vector<std::uint64_t> member_seeds;
  std::uint64_t config_hash = 0;
  // values[member][var][(lead)*npoints + p]
  std::vector<std::vector<std::vector<float>>> values;
  std::vector<std::uint8_t> member_failed;  // rollout blow-ups, recorded per member

  static EnsembleHindcast create(Grid grid, std::vector<std::string> variables,
                                 std::int64_t init_step, int n_members,
                                 int n_leads);

  int lead_count() const { return n_leads + 1; }
  int var_index(const std::string& name) const;

  float* field(int member, int var, int lead) {
    return values[member][var].data() +
           static_cast<std::size_t>(lead) * grid.npoints();
  }
  const float* field(int member, int var, int lead) const {
    return values[member][var].data() +
           static_cast<std::size_t>(lead) * grid.npoints();
  }

  void validate() const;
};

// Directory format: ensemble.json manifest plus one archive directory per
// member (member_000, member_001, ...), each in the standard archive format
// with the member's valid times on the time axis.
void write_hindcast(const EnsembleHindcast& h,
                    const std::filesystem::path& dir);
EnsembleHindcast load_hindcast(const std::filesystem::path& dir);

}  // namespace subcast
