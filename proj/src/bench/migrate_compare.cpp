#include "mobagent/bench/migrate_compare.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace mobagent::bench {

namespace {

bool contains(const Bytes& hay, const std::string& needle) {
  if (needle.empty()) return false;
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

}  // namespace

nlohmann::json to_json(const MigrateReport& r) {
  return {{"template", r.template_name},
          {"hosts", r.hosts},
          {"rounds", r.rounds},
          {"bundle_frame_bytes", r.bundle_frame_bytes},
          {"bundle_frames", r.bundle_frames},
          {"bundle_frames_after_first_dispatch", r.bundle_frames_after_first_dispatch},
          {"state_frames", r.state_frames},
          {"expected_state_frames", r.expected_state_frames},
          {"state_bytes", r.state_bytes},
          {"state_frames_with_program_text", r.state_frames_with_program_text},
          {"state_only_bytes", r.measured_state_only},
          {"code_and_state_bytes", r.measured_code_and_state},
          {"closed_form_state_only", r.closed_state_only},
          {"closed_form_code_and_state", r.closed_code_and_state},
          {"values_records", r.values_records},
          {"bundle_to_state_ratio", r.ratio},
          {"reconciled", r.reconciled()}};
}

std::vector<taskmodel::MagForm> builtin_templates() {
  taskmodel::MagForm scalar;
  scalar.name = "scalarPoll";
  scalar.service_type = proto::ServiceType::kScalarPoll;
  scalar.oids = {"1.3.6.1.2.1.1.3.0", "1.3.6.1.2.1.4.8.0", "1.3.6.1.2.1.4.10.0"};
  scalar.frequency_s = 30;

  taskmodel::MagForm table;
  table.name = "ifTableFilter";
  table.service_type = proto::ServiceType::kTableFilter;
  table.oids = {"1.3.6.1.2.1.2.2"};
  table.filter = proto::FilterPredicate{2, proto::Comparator::kGt, std::int64_t{0}};
  table.frequency_s = 30;

  taskmodel::MagForm threshold;
  threshold.name = "ipDiscardRate";
  threshold.service_type = proto::ServiceType::kThresholdMonitor;
  threshold.oids = {"1.3.6.1.2.1.4.8.0"};
  threshold.threshold = proto::ThresholdSpec{proto::ThresholdExpr::kDeltaPerSecond, proto::Comparator::kGt, 1.0};
  threshold.frequency_s = 30;

  return {scalar, table, threshold};
}

MigrateReport migrate_compare(LocalCluster& cluster, const taskmodel::MagForm& form, std::size_t rounds) {
  if (rounds < 1) throw Error(Errc::kFieldRange, "rounds must be >= 1");
  auto& m = cluster.manager();
  cluster.announce_all();
  cluster.capture().clear();

  const auto created = m.create_task(form);
  if (!created.failed.empty()) {
    throw Error(Errc::kPartialDistribution, "bundle missed " + std::to_string(created.failed.size()) + " server(s)");
  }
  for (std::size_t r = 0; r < rounds; ++r) {
    if (r > 0) {
      for (std::size_t i = 0; i < cluster.size(); ++i) cluster.host(i).mib().tick(form.frequency_s);
    }
    m.run_round(form.name);
    if (!cluster.wait_returned(form.name)) throw Error(Errc::kLost, "round " + std::to_string(r + 1) + " did not return");
  }

  const auto bundle = m.bundle(form.name);
  if (!bundle) throw Error(Errc::kUnknownTask, form.name);

  MigrateReport rep;
  rep.template_name = std::string(proto::to_string(form.service_type));
  rep.hosts = m.directory().active().size();
  rep.rounds = rounds;
  rep.bundle_frame_bytes = proto::pack(proto::MsgType::kCodeBundle, proto::encode(*bundle), proto::flags::kSigned).size();

  bool dispatched = false;
  for (const auto& f : cluster.capture().frames()) {
    if (f.type == proto::MsgType::kCodeBundle) {
      ++rep.bundle_frames;
      if (dispatched) ++rep.bundle_frames_after_first_dispatch;
      rep.measured_state_only += f.bytes.size();
    } else if (f.type == proto::MsgType::kAgentState) {
      dispatched = true;
      ++rep.state_frames;
      rep.state_bytes += f.bytes.size();
      rep.measured_state_only += f.bytes.size();
      rep.measured_code_and_state += f.bytes.size() + rep.bundle_frame_bytes;
      const auto frame = proto::decode_frame(f.bytes);
      if (contains(f.bytes, bundle->program_text) || contains(proto::unpack_payload(frame), bundle->program_text)) {
        ++rep.state_frames_with_program_text;
      }
    }
  }
  for (const auto& d : m.dispatches(form.name)) rep.expected_state_frames += d.route.size() + 1;

  rep.closed_state_only = rep.hosts * rep.bundle_frame_bytes + rep.state_bytes;
  rep.closed_code_and_state = rep.state_frames * rep.bundle_frame_bytes + rep.state_bytes;
  if (rep.state_frames > 0) {
    rep.ratio = static_cast<double>(rep.bundle_frame_bytes) /
                (static_cast<double>(rep.state_bytes) / static_cast<double>(rep.state_frames));
  }
  manager::ResultFilter filter;
  filter.task = form.name;
  filter.kind = "VALUES";
  rep.values_records = m.query_results(filter).size();
  return rep;
}

std::vector<MigrateReport> migrate_compare_all(std::size_t rounds, std::size_t hosts) {
  std::vector<MigrateReport> out;
  for (const auto& form : builtin_templates()) {
    ClusterOptions opts;
    opts.hosts = hosts;
    LocalCluster cluster(opts);
    out.push_back(migrate_compare(cluster, form, rounds));
  }
  return out;
}

std::string render_table(const std::vector<MigrateReport>& reports) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-18s %5s %6s %8s %7s %12s %14s %8s %10s\n", "template", "hosts", "rounds",
                "bundle_B", "frames", "STATE_ONLY", "CODE_AND_STATE", "B:S", "reconciled");
  os << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-18s %5zu %6zu %8llu %7zu %12llu %14llu %8.2f %10s\n", r.template_name.c_str(),
                  r.hosts, r.rounds, static_cast<unsigned long long>(r.bundle_frame_bytes), r.state_frames,
                  static_cast<unsigned long long>(r.measured_state_only),
                  static_cast<unsigned long long>(r.measured_code_and_state), r.ratio,
                  r.reconciled() ? "yes" : "NO");
    os << line;
  }
  os << "ratio: bundle frame bytes over mean state frame bytes\n";
  return os.str();
}

}  // namespace mobagent::bench
