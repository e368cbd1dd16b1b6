#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mobagent/proto/messages.hpp"

namespace mobagent::mibsim {

using proto::QueryValue;
using proto::Value;

// Numeric OID components; std::vector ordering is exactly SNMP tree order.
using OidKey = std::vector<std::uint32_t>;

// Throws FIELD_RANGE unless `oid` is dot-separated non-negative integers.
OidKey parse_oid(std::string_view oid);
std::string format_oid(const OidKey& key);
bool oid_less(std::string_view a, std::string_view b);

// Value of a managed object as a pure function of simulated time.
class ScriptedSeries {
 public:
  enum class Mode { kConstant, kLinear, kStep };

  static ScriptedSeries constant(Value v);
  static ScriptedSeries linear(double start, double slope_per_s);
  static ScriptedSeries step(double t_step, std::int64_t before, std::int64_t after);

  Value at(double t) const;
  Mode mode() const { return mode_; }

 private:
  Mode mode_ = Mode::kConstant;
  Value constant_{std::int64_t{0}};
  double a_ = 0;
  double b_ = 0;
  std::int64_t before_ = 0;
  std::int64_t after_ = 0;
};

struct NextEntry {
  std::string oid;
  Value value;
};

class Mib {
 public:
  Mib() = default;
  Mib(const Mib& other);
  Mib& operator=(const Mib& other);

  // Line format: "<oid> constant <int|"str">", "<oid> string "<str>"",
  // "<oid> linear <start> <slope>", "<oid> step <t> <before> <after>",
  // "table <oid>" followed by "row <cell>..." lines, where a cell is an
  // integer, a quoted string, linear(a,b) or step(t,a,b). '#' starts a comment.
  static Mib parse_script(std::string_view text);
  static Mib load(const std::string& path);

  void set_scalar(std::string_view oid, ScriptedSeries series);
  void add_table(std::string_view table_oid);
  void add_row(std::string_view table_oid, std::vector<ScriptedSeries> cells);

  QueryValue get(std::string_view oid) const;
  // Lexicographically next scalar after `oid` by numeric components; an empty
  // string means "before the first entry". nullopt is END_OF_MIB.
  std::optional<NextEntry> get_next(std::string_view oid) const;
  // Snapshot of all rows at the current clock. Throws NO_SUCH_TABLE.
  std::vector<proto::Row> get_table(std::string_view table_oid) const;
  bool has_table(std::string_view table_oid) const;

  void tick(double seconds);
  void set_clock(double seconds);
  double clock() const;

  std::size_t scalar_count() const;

 private:
  struct Table {
    std::vector<std::vector<ScriptedSeries>> rows;
  };

  mutable std::shared_mutex mu_;
  std::map<OidKey, ScriptedSeries> scalars_;
  std::map<OidKey, Table> tables_;
  double clock_ = 0;
};

}  // namespace mobagent::mibsim
