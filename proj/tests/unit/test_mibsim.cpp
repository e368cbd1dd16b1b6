#include <gtest/gtest.h>

#include <random>

#include "mobagent/mibsim/mib.hpp"

using namespace mobagent;
using mibsim::Mib;
using mibsim::ScriptedSeries;
using proto::Value;

namespace {

std::int64_t as_int(const proto::QueryValue& v) { return std::get<std::int64_t>(v); }

}  // namespace

TEST(Series, ConstantLinearAndStep) {
  EXPECT_EQ(ScriptedSeries::constant(std::int64_t{42}).at(0), Value{std::int64_t{42}});
  EXPECT_EQ(ScriptedSeries::constant(std::int64_t{42}).at(1e6), Value{std::int64_t{42}});
  EXPECT_EQ(ScriptedSeries::constant(std::string("x")).at(5), Value{std::string("x")});
  EXPECT_EQ(ScriptedSeries::linear(100, 5).at(0), Value{std::int64_t{100}});
  EXPECT_EQ(ScriptedSeries::linear(100, 5).at(10), Value{std::int64_t{150}});
  EXPECT_EQ(ScriptedSeries::linear(0, 0.5).at(3), Value{std::int64_t{1}});
  const auto s = ScriptedSeries::step(30, 10, 90);
  EXPECT_EQ(s.at(29), Value{std::int64_t{10}});
  EXPECT_EQ(s.at(29.999), Value{std::int64_t{10}});
  EXPECT_EQ(s.at(30), Value{std::int64_t{90}});
  EXPECT_EQ(s.at(31), Value{std::int64_t{90}});
}

TEST(Mib, ScriptDrivesValuesByTickedClock) {
  auto mib = Mib::parse_script(R"(
# comment
1.3.6.1.2.1.1.5.0 string "edge-1"
1.3.6.1.2.1.1.7.0 constant 42
1.3.6.1.2.1.4.10.0 linear 100 5
1.3.6.1.2.1.4.8.0 step 30 1 9
)");
  EXPECT_EQ(mib.scalar_count(), 4u);
  EXPECT_EQ(mib.get("1.3.6.1.2.1.1.5.0"), proto::QueryValue{std::string("edge-1")});
  EXPECT_EQ(as_int(mib.get("1.3.6.1.2.1.1.7.0")), 42);
  EXPECT_EQ(as_int(mib.get("1.3.6.1.2.1.4.10.0")), 100);
  mib.tick(10);
  EXPECT_EQ(as_int(mib.get("1.3.6.1.2.1.4.10.0")), 150);
  mib.tick(19);
  EXPECT_EQ(as_int(mib.get("1.3.6.1.2.1.4.8.0")), 1);
  mib.tick(1);
  EXPECT_EQ(as_int(mib.get("1.3.6.1.2.1.4.8.0")), 9);
  EXPECT_DOUBLE_EQ(mib.clock(), 30);
  EXPECT_EQ(mib.get("1.3.6.1.2.1.99.0"), proto::QueryValue{proto::NoSuchOid{}});
}

TEST(Mib, TickIsAdditive) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> step(0, 7);
  for (int trial = 0; trial < 50; ++trial) {
    Mib a;
    a.set_scalar("1.3.6.1.4.1.1.0", ScriptedSeries::linear(3, 1.25));
    Mib b = a;
    double total = 0;
    for (int i = 0; i < 6; ++i) {
      const double dt = step(rng);
      a.tick(dt);
      total += dt;
    }
    b.tick(total);
    EXPECT_NEAR(a.clock(), b.clock(), 1e-9);
    EXPECT_EQ(as_int(a.get("1.3.6.1.4.1.1.0")), std::get<std::int64_t>(ScriptedSeries::linear(3, 1.25).at(a.clock())));
  }
}

TEST(Mib, GetNextWalksInNumericOidOrder) {
  Mib mib;
  // Inserted out of order; 1.3.6.1.2.1.1.10.0 sorts after 1.3.6.1.2.1.1.9.0 numerically.
  for (const char* oid : {"1.3.6.1.2.1.2.1.0", "1.3.6.1.2.1.1.10.0", "1.3.6.1.2.1.1.9.0", "1.3.6.1.2.1.1.1.0"}) {
    mib.set_scalar(oid, ScriptedSeries::constant(std::int64_t{1}));
  }
  std::vector<std::string> walk;
  std::string cursor;
  while (auto next = mib.get_next(cursor)) {
    walk.push_back(next->oid);
    cursor = next->oid;
  }
  EXPECT_EQ(walk, (std::vector<std::string>{"1.3.6.1.2.1.1.1.0", "1.3.6.1.2.1.1.9.0", "1.3.6.1.2.1.1.10.0",
                                            "1.3.6.1.2.1.2.1.0"}));
  EXPECT_EQ(mib.get_next("1.3.6.1.2.1.1.9")->oid, "1.3.6.1.2.1.1.9.0");
  EXPECT_FALSE(mib.get_next("1.3.6.1.2.1.2.1.0").has_value());
  EXPECT_TRUE(mibsim::oid_less("1.3.6.1.2.1.1.9.0", "1.3.6.1.2.1.1.10.0"));
  EXPECT_FALSE(mibsim::oid_less("1.3.6.1.2.1.1.10.0", "1.3.6.1.2.1.1.9.0"));
}

TEST(Mib, TablesSnapshotAtTheCurrentClock) {
  auto mib = Mib::parse_script(R"(table 1.3.6.1.2.1.2.2
row 1 "lo" 0
row 2 "eth0" linear(100,20)
row 3 "eth1" step(5,0,7)
)");
  auto rows = mib.get_table("1.3.6.1.2.1.2.2");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].index, 1u);
  EXPECT_EQ(rows[1].cells, (std::vector<Value>{std::int64_t{2}, std::string("eth0"), std::int64_t{100}}));
  mib.tick(5);
  rows = mib.get_table("1.3.6.1.2.1.2.2");
  EXPECT_EQ(rows[1].cells[2], Value{std::int64_t{200}});
  EXPECT_EQ(rows[2].cells[2], Value{std::int64_t{7}});
  EXPECT_TRUE(mib.has_table("1.3.6.1.2.1.2.2"));
  try {
    mib.get_table("1.3.6.1.2.1.4.20");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kNoSuchTable);
  }
  EXPECT_THROW(mib.get_table("not-an-oid"), Error);
}

TEST(Mib, MalformedScriptsAreRejected) {
  EXPECT_THROW(Mib::parse_script("1.3.6 linear x 1\n"), Error);
  EXPECT_THROW(Mib::parse_script("1.3.6 wobble 1\n"), Error);
  EXPECT_THROW(Mib::parse_script("row 1 2\n"), Error);
  EXPECT_THROW(mibsim::parse_oid("1..3"), Error);
  EXPECT_THROW(mibsim::parse_oid("1.-3"), Error);
  EXPECT_EQ(mibsim::format_oid(mibsim::parse_oid("1.3.6.1")), "1.3.6.1");
}

TEST(Mib, ShippedScriptsParse) {
  for (const char* name : {"router.mib", "ramp.mib", "step_alarm.mib"}) {
    const auto mib = Mib::load(std::string(MOBAGENT_SOURCE_DIR) + "/share/mib/" + name);
    EXPECT_GT(mib.scalar_count(), 0u) << name;
  }
}
