#include <gtest/gtest.h>

#include <thread>

#include "mobagent/mibsim/mib.hpp"
#include "mobagent/runtime/agent.hpp"
#include "support.hpp"

using namespace mobagent;
using namespace mobagent::testing;
using proto::EntryKind;

namespace {

const char* const kDiscards = "1.3.6.1.2.1.4.8.0";

// Facilitator backed by a Mib; counts calls so tests can prove a read never happened.
class MibSf : public runtime::ServiceFacilitator {
 public:
  explicit MibSf(mibsim::Mib& mib) : mib_(mib) {}
  std::vector<proto::QueryValue> get_scalar(const std::vector<std::string>& oids) override {
    ++scalar_calls;
    std::vector<proto::QueryValue> out;
    for (const auto& o : oids) out.push_back(mib_.get(o));
    return out;
  }
  std::vector<proto::Row> get_table(const std::string& table_oid) override {
    ++table_calls;
    return mib_.get_table(table_oid);
  }
  int scalar_calls = 0;
  int table_calls = 0;

 private:
  mibsim::Mib& mib_;
};

proto::AgentState agent_for(const std::string& cls, bool encrypt = false) {
  runtime::AgentHeader h;
  h.agent_id = cls + ":1";
  h.class_id = {cls, 1};
  h.origin = "127.0.0.1:7700";
  h.encrypt = encrypt;
  h.itinerary = {"127.0.0.1:7701"};
  return runtime::init_agent(h, manager_key());
}

proto::TaskProgram threshold_program(proto::ThresholdExpr expr, proto::Comparator cmp, double limit) {
  proto::TaskProgram p;
  p.service_type = proto::ServiceType::kThresholdMonitor;
  p.oids = {kDiscards};
  p.threshold = proto::ThresholdSpec{expr, cmp, limit};
  return p;
}

std::vector<proto::AlarmPayload> alarms(const proto::AgentState& a) {
  std::vector<proto::AlarmPayload> out;
  for (const auto& e : a.data_folder) {
    if (e.kind == EntryKind::kAlarm) out.push_back(proto::decode_alarm(*e.payload));
  }
  return out;
}

proto::ErrorPayload only_error(const proto::AgentState& a) {
  EXPECT_EQ(a.data_folder.size(), 1u);
  EXPECT_EQ(a.data_folder.at(0).kind, EntryKind::kError);
  return proto::decode_error(*a.data_folder.at(0).payload);
}

}  // namespace

TEST(Execute, ScalarPollRecordsValuesInOrderWithMissingMarkers) {
  auto mib = mibsim::Mib::parse_script("1.3.6.1.2.1.1.3.0 linear 0 100\n1.3.6.1.2.1.1.5.0 string \"r1\"\n");
  mib.tick(3);
  MibSf sf(mib);
  auto a = agent_for("poll");
  proto::TaskProgram p;
  p.oids = {"1.3.6.1.2.1.1.5.0", "1.3.6.1.2.1.9.9.0", "1.3.6.1.2.1.1.3.0"};
  ManualClock clock(5000);
  const auto out = runtime::execute_on_host(a, p, sf, {}, {"h1", &clock});
  EXPECT_TRUE(out.ok);
  ASSERT_EQ(a.data_folder.size(), 1u);
  const auto& e = a.data_folder[0];
  EXPECT_EQ(e.kind, EntryKind::kValues);
  EXPECT_EQ(e.host, "h1");
  EXPECT_EQ(e.timestamp, 5000);
  const auto v = proto::decode_values(*e.payload);
  ASSERT_EQ(v.samples.size(), 3u);
  EXPECT_EQ(v.samples[0].value, proto::QueryValue{std::string("r1")});
  EXPECT_EQ(v.samples[1].value, proto::QueryValue{proto::NoSuchOid{}});
  EXPECT_EQ(v.samples[2].value, proto::QueryValue{std::int64_t{300}});
}

TEST(Execute, TableFilterKeepsMatchingRows) {
  auto mib = mibsim::Mib::parse_script("table 1.3.6.1.2.1.2.2\nrow 1 \"lo\" 0\nrow 2 \"eth0\" 50\nrow 3 \"eth1\" 7\n");
  MibSf sf(mib);
  auto a = agent_for("tf");
  proto::TaskProgram p;
  p.service_type = proto::ServiceType::kTableFilter;
  p.oids = {"1.3.6.1.2.1.2.2"};
  p.filter = proto::FilterPredicate{2, proto::Comparator::kGt, std::int64_t{5}};
  runtime::execute_on_host(a, p, sf, {}, {"h1"});
  ASSERT_EQ(a.data_folder.size(), 1u);
  const auto r = proto::decode_rows(*a.data_folder[0].payload);
  EXPECT_EQ(r.total_rows, 3u);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].index, 2u);
  EXPECT_EQ(r.rows[1].index, 3u);
}

TEST(Execute, MissingTableBecomesAnErrorEntry) {
  mibsim::Mib mib;
  MibSf sf(mib);
  auto a = agent_for("tf");
  proto::TaskProgram p;
  p.service_type = proto::ServiceType::kTableFilter;
  p.oids = {"1.3.6.1.2.1.2.2"};
  p.filter = proto::FilterPredicate{1, proto::Comparator::kEq, std::string("x")};
  const auto out = runtime::execute_on_host(a, p, sf, {}, {"h1"});
  EXPECT_FALSE(out.ok);
  EXPECT_EQ(only_error(a).code, "SF_ERROR");
}

TEST(Execute, GetTableUnderScalarOnlyPolicyNeverReadsTheTable) {
  auto mib = mibsim::Mib::parse_script("table 1.3.6.1.2.1.2.2\nrow 1 \"lo\" 0\n");
  MibSf sf(mib);
  auto a = agent_for("tf");
  proto::TaskProgram p;
  p.service_type = proto::ServiceType::kTableFilter;
  p.oids = {"1.3.6.1.2.1.2.2"};
  p.filter = proto::FilterPredicate{2, proto::Comparator::kGe, std::int64_t{0}};
  proto::AuthPolicy scalar_only;
  scalar_only.allowed_ops = {proto::SfOp::kGetScalar};
  const auto out = runtime::execute_on_host(a, p, sf, scalar_only, {"h1"});
  EXPECT_FALSE(out.ok);
  EXPECT_EQ(out.error, Errc::kAuthorizationViolation);
  EXPECT_EQ(sf.table_calls, 0);
  EXPECT_EQ(only_error(a).code, "AUTHORIZATION_VIOLATION");
}

TEST(Execute, QueryQuotaIsEnforced) {
  mibsim::Mib mib;
  MibSf sf(mib);
  auto a = agent_for("poll");
  proto::TaskProgram p;
  p.oids = {"1.1", "1.2", "1.3"};
  proto::AuthPolicy tight;
  tight.max_oids_per_query = 2;
  runtime::execute_on_host(a, p, sf, tight, {"h1"});
  EXPECT_EQ(sf.scalar_calls, 0);
  const auto err = only_error(a);
  EXPECT_EQ(err.code, "AUTHORIZATION_VIOLATION");
  EXPECT_NE(err.message.find("max_oids"), std::string::npos);
}

TEST(Execute, DeltaPerSecondUsesTheHostsPreviousSample) {
  // 100 -> 150 over 10 s is 5.0/s.
  mibsim::Mib mib;
  mib.set_scalar(kDiscards, mibsim::ScriptedSeries::linear(100, 5));
  MibSf sf(mib);
  ManualClock clock(1'000'000);
  runtime::SampleMemory memory;
  const auto p = threshold_program(proto::ThresholdExpr::kDeltaPerSecond, proto::Comparator::kGe, 5.0);
  auto first = agent_for("rate");
  runtime::execute_on_host(first, p, sf, {}, {"h1", &clock, &memory});
  EXPECT_TRUE(first.data_folder.empty());
  mib.tick(10);
  clock.advance_ms(10'000);
  auto second = agent_for("rate");
  runtime::execute_on_host(second, p, sf, {}, {"h1", &clock, &memory});
  const auto a = alarms(second);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_DOUBLE_EQ(a[0].observed, 5.0);
  EXPECT_EQ(a[0].oid, kDiscards);
  EXPECT_EQ(a[0].expr, proto::ThresholdExpr::kDeltaPerSecond);
  // Memory is per host: a different host has no prior sample yet.
  auto other = agent_for("rate");
  runtime::execute_on_host(other, p, sf, {}, {"h2", &clock, &memory});
  EXPECT_TRUE(other.data_folder.empty());
}

TEST(Execute, AlarmsFireOncePerCrossing) {
  mibsim::Mib mib;
  MibSf sf(mib);
  ManualClock clock;
  runtime::SampleMemory memory;
  const auto p = threshold_program(proto::ThresholdExpr::kValue, proto::Comparator::kGt, 50);
  const std::vector<std::int64_t> series = {10, 60, 70, 80, 20, 30, 90, 95, 40};
  std::vector<double> fired;
  for (auto v : series) {
    mib.set_scalar(kDiscards, mibsim::ScriptedSeries::constant(v));
    auto a = agent_for("thr");
    runtime::execute_on_host(a, p, sf, {}, {"h1", &clock, &memory});
    for (const auto& al : alarms(a)) fired.push_back(al.observed);
    clock.advance_ms(30'000);
  }
  EXPECT_EQ(fired, (std::vector<double>{60, 90}));
}

TEST(Execute, StepSeriesCrossingGivesExactlyOneAlarm) {
  auto mib = mibsim::Mib::parse_script(std::string(kDiscards) + " step 60 10 500\n");
  MibSf sf(mib);
  ManualClock clock;
  runtime::SampleMemory memory;
  const auto p = threshold_program(proto::ThresholdExpr::kValue, proto::Comparator::kGt, 100);
  std::size_t count = 0;
  for (int round = 0; round < 8; ++round) {
    auto a = agent_for("thr");
    runtime::execute_on_host(a, p, sf, {}, {"h1", &clock, &memory});
    count += alarms(a).size();
    mib.tick(30);
    clock.advance_ms(30'000);
  }
  EXPECT_EQ(count, 1u);
}

TEST(Execute, NonNumericThresholdInputIsAnSfError) {
  auto mib = mibsim::Mib::parse_script(std::string(kDiscards) + " string \"n/a\"\n");
  MibSf sf(mib);
  auto a = agent_for("thr");
  runtime::execute_on_host(a, threshold_program(proto::ThresholdExpr::kValue, proto::Comparator::kGt, 1), sf, {},
                           {"h1"});
  EXPECT_EQ(only_error(a).code, "SF_ERROR");
}

TEST(Execute, SlowVisitsTimeOutButSuspendedTimeIsFree) {
  struct SlowSf : runtime::ServiceFacilitator {
    int pause_ms = 0;
    int work_ms = 0;
    void checkpoint() override { std::this_thread::sleep_for(std::chrono::milliseconds(pause_ms)); }
    std::vector<proto::QueryValue> get_scalar(const std::vector<std::string>& oids) override {
      std::this_thread::sleep_for(std::chrono::milliseconds(work_ms));
      return std::vector<proto::QueryValue>(oids.size(), std::int64_t{1});
    }
    std::vector<proto::Row> get_table(const std::string&) override { return {}; }
  };
  proto::TaskProgram p;
  p.oids = {"1.1"};
  proto::AuthPolicy policy;
  policy.max_exec_millis_per_host = 50;

  SlowSf slow;
  slow.work_ms = 120;
  auto a = agent_for("poll");
  const auto out = runtime::execute_on_host(a, p, slow, policy, {"h1"});
  EXPECT_EQ(out.error, Errc::kExecTimeout);
  EXPECT_EQ(only_error(a).code, "EXEC_TIMEOUT");

  SlowSf paused;
  paused.pause_ms = 120;
  auto b = agent_for("poll");
  EXPECT_TRUE(runtime::execute_on_host(b, p, paused, policy, {"h1"}).ok);
}

TEST(Execute, FolderQuotaTurnsIntoOversizeError) {
  auto mib = mibsim::Mib::parse_script("1.3.6.1.2.1.1.5.0 string \"" + std::string(300, 'x') + "\"\n");
  MibSf sf(mib);
  auto a = agent_for("poll");
  proto::TaskProgram p;
  p.oids = {"1.3.6.1.2.1.1.5.0"};
  proto::AuthPolicy policy;
  policy.max_data_folder_bytes = 200;
  runtime::execute_on_host(a, p, sf, policy, {"h1"});
  EXPECT_EQ(only_error(a).code, "OVERSIZE");
  EXPECT_LE(runtime::folder_bytes(a), 200u);
}

TEST(Execute, EncryptedAgentsSealEveryEntry) {
  auto mib = mibsim::Mib::parse_script("1.3.6.1.2.1.1.3.0 constant 77\n");
  MibSf sf(mib);
  auto a = agent_for("poll", true);
  proto::TaskProgram p;
  p.oids = {"1.3.6.1.2.1.1.3.0"};
  runtime::ExecContext ctx{"h1"};
  ctx.seal_key = &manager_key().public_key();
  runtime::execute_on_host(a, p, sf, {}, ctx);
  ASSERT_EQ(a.data_folder.size(), 1u);
  ASSERT_TRUE(a.data_folder[0].sealed.has_value());
  const auto v = proto::decode_values(runtime::entry_payload(a.data_folder[0], &manager_key()));
  EXPECT_EQ(v.samples[0].value, proto::QueryValue{std::int64_t{77}});
}

TEST(Execute, HooksFireAroundTheVisit) {
  mibsim::Mib mib;
  MibSf sf(mib);
  std::vector<std::string> seen;
  runtime::LifecycleHooks hooks;
  hooks.on_start = [&](const auto&) { seen.push_back("start"); };
  hooks.on_stop = [&](const auto&) { seen.push_back("stop"); };
  auto a = agent_for("poll");
  proto::TaskProgram p;
  p.oids = {"1.1"};
  runtime::ExecContext ctx{"h1"};
  ctx.hooks = &hooks;
  runtime::execute_on_host(a, p, sf, {}, ctx);
  EXPECT_EQ(seen, (std::vector<std::string>{"start", "stop"}));
}

TEST(Itinerary, AdvanceWalksHopsThenHome) {
  runtime::AgentHeader h;
  h.agent_id = "x:1";
  h.class_id = {"x", 1};
  h.origin = "m:1";
  h.itinerary = {"a:1", "b:1"};
  auto s = runtime::init_agent(h, manager_key());
  EXPECT_FALSE(runtime::tour_complete(s));
  EXPECT_EQ(runtime::advance_itinerary(s), (runtime::Hop{"a:1", false}));
  EXPECT_EQ(runtime::advance_itinerary(s), (runtime::Hop{"b:1", false}));
  EXPECT_TRUE(runtime::tour_complete(s));
  EXPECT_EQ(runtime::advance_itinerary(s), (runtime::Hop{"m:1", true}));
  EXPECT_TRUE(runtime::verify_header(s, trust_manager()));
}

TEST(Compare, ValuesOfDifferentKindsAreOnlyUnequal) {
  using proto::Comparator;
  EXPECT_TRUE(runtime::compare(proto::Value{std::int64_t{3}}, Comparator::kLt, proto::Value{std::int64_t{4}}));
  EXPECT_TRUE(runtime::compare(proto::Value{std::string("b")}, Comparator::kGt, proto::Value{std::string("a")}));
  EXPECT_TRUE(runtime::compare(proto::Value{std::int64_t{3}}, Comparator::kNe, proto::Value{std::string("3")}));
  EXPECT_FALSE(runtime::compare(proto::Value{std::int64_t{3}}, Comparator::kEq, proto::Value{std::string("3")}));
  EXPECT_FALSE(runtime::compare(proto::Value{std::int64_t{3}}, Comparator::kLt, proto::Value{std::string("4")}));
}
