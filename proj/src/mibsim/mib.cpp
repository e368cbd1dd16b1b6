#include "mobagent/mibsim/mib.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

namespace mobagent::mibsim {

namespace {

std::int64_t to_int(std::string_view tok, int line) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size()) {
    throw Error(Errc::kFieldRange, "line " + std::to_string(line) + ": expected integer, got '" + std::string(tok) + "'");
  }
  return v;
}

double to_double(std::string_view tok, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(std::string(tok), &used);
    if (used == tok.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(Errc::kFieldRange, "line " + std::to_string(line) + ": expected number, got '" + std::string(tok) + "'");
}

// Splits on whitespace; double-quoted tokens keep their spaces and are
// returned with the quotes so callers can tell strings from numbers.
std::vector<std::string> tokenize(std::string_view line, int line_no) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
      continue;
    }
    if (line[i] == '#') break;
    std::string tok;
    if (line[i] == '"') {
      tok.push_back('"');
      ++i;
      while (i < line.size() && line[i] != '"') {
        if (line[i] == '\\' && i + 1 < line.size()) ++i;
        tok.push_back(line[i++]);
      }
      if (i >= line.size()) throw Error(Errc::kFieldRange, "line " + std::to_string(line_no) + ": unterminated string");
      tok.push_back('"');
      ++i;
    } else {
      int depth = 0;
      while (i < line.size() && (depth > 0 || !std::isspace(static_cast<unsigned char>(line[i])))) {
        if (line[i] == '(') ++depth;
        if (line[i] == ')') --depth;
        tok.push_back(line[i++]);
      }
    }
    out.push_back(std::move(tok));
  }
  return out;
}

bool is_quoted(const std::string& tok) { return tok.size() >= 2 && tok.front() == '"' && tok.back() == '"'; }

Value literal(const std::string& tok, int line) {
  if (is_quoted(tok)) return tok.substr(1, tok.size() - 2);
  return to_int(tok, line);
}

std::vector<std::string> call_args(const std::string& tok, std::string_view name, int line) {
  // name(a,b,...)
  const auto inner = tok.substr(name.size() + 1, tok.size() - name.size() - 2);
  std::vector<std::string> args;
  std::stringstream ss(inner);
  std::string a;
  while (std::getline(ss, a, ',')) {
    const auto b = a.find_first_not_of(' ');
    const auto e = a.find_last_not_of(' ');
    if (b == std::string::npos) throw Error(Errc::kFieldRange, "line " + std::to_string(line) + ": empty argument");
    args.push_back(a.substr(b, e - b + 1));
  }
  return args;
}

ScriptedSeries cell(const std::string& tok, int line) {
  auto is_call = [&](std::string_view name) {
    return tok.size() > name.size() + 1 && tok.compare(0, name.size(), name) == 0 && tok[name.size()] == '(' &&
           tok.back() == ')';
  };
  if (is_call("linear")) {
    auto a = call_args(tok, "linear", line);
    if (a.size() != 2) throw Error(Errc::kFieldRange, "line " + std::to_string(line) + ": linear(start,slope)");
    return ScriptedSeries::linear(to_double(a[0], line), to_double(a[1], line));
  }
  if (is_call("step")) {
    auto a = call_args(tok, "step", line);
    if (a.size() != 3) throw Error(Errc::kFieldRange, "line " + std::to_string(line) + ": step(t,before,after)");
    return ScriptedSeries::step(to_double(a[0], line), to_int(a[1], line), to_int(a[2], line));
  }
  return ScriptedSeries::constant(literal(tok, line));
}

}  // namespace

OidKey parse_oid(std::string_view oid) {
  OidKey key;
  if (oid.empty()) throw Error(Errc::kFieldRange, "empty OID");
  std::size_t start = 0;
  while (true) {
    const auto dot = oid.find('.', start);
    const auto part = oid.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
    std::uint32_t v = 0;
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (part.empty() || ec != std::errc{} || p != part.data() + part.size()) {
      throw Error(Errc::kFieldRange, "malformed OID '" + std::string(oid) + "'");
    }
    key.push_back(v);
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return key;
}

std::string format_oid(const OidKey& key) {
  std::string out;
  for (std::size_t i = 0; i < key.size(); ++i) {
    if (i) out.push_back('.');
    out += std::to_string(key[i]);
  }
  return out;
}

bool oid_less(std::string_view a, std::string_view b) { return parse_oid(a) < parse_oid(b); }

ScriptedSeries ScriptedSeries::constant(Value v) {
  ScriptedSeries s;
  s.mode_ = Mode::kConstant;
  s.constant_ = std::move(v);
  return s;
}

ScriptedSeries ScriptedSeries::linear(double start, double slope_per_s) {
  ScriptedSeries s;
  s.mode_ = Mode::kLinear;
  s.a_ = start;
  s.b_ = slope_per_s;
  return s;
}

ScriptedSeries ScriptedSeries::step(double t_step, std::int64_t before, std::int64_t after) {
  ScriptedSeries s;
  s.mode_ = Mode::kStep;
  s.a_ = t_step;
  s.before_ = before;
  s.after_ = after;
  return s;
}

Value ScriptedSeries::at(double t) const {
  switch (mode_) {
    case Mode::kConstant: return constant_;
    case Mode::kLinear: return static_cast<std::int64_t>(std::floor(a_ + b_ * t));
    case Mode::kStep: return t < a_ ? before_ : after_;
  }
  return std::int64_t{0};
}

Mib::Mib(const Mib& other) {
  std::shared_lock lock(other.mu_);
  scalars_ = other.scalars_;
  tables_ = other.tables_;
  clock_ = other.clock_;
}

Mib& Mib::operator=(const Mib& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  scalars_ = other.scalars_;
  tables_ = other.tables_;
  clock_ = other.clock_;
  return *this;
}

Mib Mib::parse_script(std::string_view text) {
  Mib mib;
  std::optional<std::string> current_table;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    const auto tok = tokenize(line, line_no);
    if (tok.empty()) continue;
    auto need = [&](std::size_t n) {
      if (tok.size() != n) {
        throw Error(Errc::kFieldRange, "line " + std::to_string(line_no) + ": expected " + std::to_string(n) +
                                           " fields, got " + std::to_string(tok.size()));
      }
    };

    if (tok[0] == "table") {
      need(2);
      mib.add_table(tok[1]);
      current_table = tok[1];
      continue;
    }
    if (tok[0] == "row") {
      if (!current_table) throw Error(Errc::kFieldRange, "line " + std::to_string(line_no) + ": row outside table");
      std::vector<ScriptedSeries> cells;
      for (std::size_t i = 1; i < tok.size(); ++i) cells.push_back(cell(tok[i], line_no));
      mib.add_row(*current_table, std::move(cells));
      continue;
    }

    current_table.reset();
    if (tok.size() < 3) throw Error(Errc::kFieldRange, "line " + std::to_string(line_no) + ": incomplete entry");
    const auto& mode = tok[1];
    if (mode == "constant") {
      need(3);
      mib.set_scalar(tok[0], ScriptedSeries::constant(literal(tok[2], line_no)));
    } else if (mode == "string") {
      need(3);
      if (!is_quoted(tok[2])) throw Error(Errc::kFieldRange, "line " + std::to_string(line_no) + ": expected quoted string");
      mib.set_scalar(tok[0], ScriptedSeries::constant(tok[2].substr(1, tok[2].size() - 2)));
    } else if (mode == "linear") {
      need(4);
      mib.set_scalar(tok[0], ScriptedSeries::linear(to_double(tok[2], line_no), to_double(tok[3], line_no)));
    } else if (mode == "step") {
      need(5);
      mib.set_scalar(tok[0], ScriptedSeries::step(to_double(tok[2], line_no), to_int(tok[3], line_no),
                                                  to_int(tok[4], line_no)));
    } else {
      throw Error(Errc::kFieldRange, "line " + std::to_string(line_no) + ": unknown mode '" + mode + "'");
    }
  }
  return mib;
}

Mib Mib::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot read MIB script " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_script(ss.str());
}

void Mib::set_scalar(std::string_view oid, ScriptedSeries series) {
  auto key = parse_oid(oid);
  std::unique_lock lock(mu_);
  scalars_.insert_or_assign(std::move(key), std::move(series));
}

void Mib::add_table(std::string_view table_oid) {
  auto key = parse_oid(table_oid);
  std::unique_lock lock(mu_);
  tables_.try_emplace(std::move(key));
}

void Mib::add_row(std::string_view table_oid, std::vector<ScriptedSeries> cells) {
  auto key = parse_oid(table_oid);
  std::unique_lock lock(mu_);
  auto it = tables_.find(key);
  if (it == tables_.end()) throw Error(Errc::kNoSuchTable, std::string(table_oid));
  it->second.rows.push_back(std::move(cells));
}

QueryValue Mib::get(std::string_view oid) const {
  OidKey key;
  try {
    key = parse_oid(oid);
  } catch (const Error&) {
    return proto::NoSuchOid{};
  }
  std::shared_lock lock(mu_);
  auto it = scalars_.find(key);
  if (it == scalars_.end()) return proto::NoSuchOid{};
  auto v = it->second.at(clock_);
  if (auto* i = std::get_if<std::int64_t>(&v)) return *i;
  return std::get<std::string>(std::move(v));
}

std::optional<NextEntry> Mib::get_next(std::string_view oid) const {
  std::shared_lock lock(mu_);
  auto it = oid.empty() ? scalars_.begin() : scalars_.upper_bound(parse_oid(oid));
  if (it == scalars_.end()) return std::nullopt;
  return NextEntry{format_oid(it->first), it->second.at(clock_)};
}

std::vector<proto::Row> Mib::get_table(std::string_view table_oid) const {
  OidKey key;
  try {
    key = parse_oid(table_oid);
  } catch (const Error&) {
    throw Error(Errc::kNoSuchTable, std::string(table_oid));
  }
  std::shared_lock lock(mu_);
  auto it = tables_.find(key);
  if (it == tables_.end()) throw Error(Errc::kNoSuchTable, std::string(table_oid));
  std::vector<proto::Row> out;
  out.reserve(it->second.rows.size());
  std::uint32_t index = 1;
  for (const auto& row : it->second.rows) {
    proto::Row r;
    r.index = index++;
    for (const auto& c : row) r.cells.push_back(c.at(clock_));
    out.push_back(std::move(r));
  }
  return out;
}

bool Mib::has_table(std::string_view table_oid) const {
  std::shared_lock lock(mu_);
  try {
    return tables_.count(parse_oid(table_oid)) > 0;
  } catch (const Error&) {
    return false;
  }
}

void Mib::tick(double seconds) {
  if (seconds < 0) throw Error(Errc::kFieldRange, "tick must be non-negative");
  std::unique_lock lock(mu_);
  clock_ += seconds;
}

void Mib::set_clock(double seconds) {
  std::unique_lock lock(mu_);
  clock_ = seconds;
}

double Mib::clock() const {
  std::shared_lock lock(mu_);
  return clock_;
}

std::size_t Mib::scalar_count() const {
  std::shared_lock lock(mu_);
  return scalars_.size();
}

}  // namespace mobagent::mibsim
