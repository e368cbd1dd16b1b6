#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mobagent/bench/cluster.hpp"
#include "mobagent/taskmodel/bundle.hpp"

namespace mobagent::bench {

// Byte accounting of one task run for R rounds.
//
//   STATE_ONLY     = H * B + sum(S)   (one multicast, then state frames)
//   CODE_AND_STATE = M * B + sum(S)   (the bundle rides along on every hop)
//
// H servers, B bundle frame bytes, M agent-state frames, S their sizes.
struct MigrateReport {
  std::string template_name;
  std::size_t hosts = 0;
  std::size_t rounds = 0;
  std::uint64_t bundle_frame_bytes = 0;  // B, from encoding the bundle
  std::size_t bundle_frames = 0;         // CODE_BUNDLE frames captured
  std::size_t bundle_frames_after_first_dispatch = 0;
  std::size_t state_frames = 0;          // M, captured
  std::size_t expected_state_frames = 0;  // from the plan: sum(|route| + 1) per round
  std::uint64_t state_bytes = 0;         // sum(S), captured
  std::size_t state_frames_with_program_text = 0;
  std::uint64_t measured_state_only = 0;      // every captured bundle and state byte
  std::uint64_t measured_code_and_state = 0;  // captured state frames each widened by B
  std::uint64_t closed_state_only = 0;
  std::uint64_t closed_code_and_state = 0;
  std::size_t values_records = 0;
  double ratio = 0;  // B : mean(S)

  bool reconciled() const {
    return measured_state_only == closed_state_only && measured_code_and_state == closed_code_and_state &&
           state_frames == expected_state_frames && bundle_frames == hosts;
  }
};

nlohmann::json to_json(const MigrateReport& r);

// The three service-type templates the bench exercises.
std::vector<taskmodel::MagForm> builtin_templates();

MigrateReport migrate_compare(LocalCluster& cluster, const taskmodel::MagForm& form, std::size_t rounds);
// Fresh cluster per template.
std::vector<MigrateReport> migrate_compare_all(std::size_t rounds, std::size_t hosts = 5);

std::string render_table(const std::vector<MigrateReport>& reports);

}  // namespace mobagent::bench
