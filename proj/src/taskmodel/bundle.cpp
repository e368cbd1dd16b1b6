#include "mobagent/taskmodel/bundle.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mobagent/mibsim/mib.hpp"

namespace mobagent::taskmodel {

namespace fs = std::filesystem;
using proto::Comparator;
using proto::ServiceType;

namespace {

// Service-type skeletons. Slots are {{name}}; every slot must be filled.
constexpr std::string_view kCommonHeader =
    "agent {{class}} version {{version}}\n"
    "  extends {{base}}\n"
    "  poll-mode {{poll_mode}} frequency {{frequency}}s\n"
    "  device-class {{device_class}}\n"
    "  encrypt-results {{encrypt}}\n"
    "\n"
    "on create:\n"
    "  header.seal-once(agent_id, class, origin, created_at, priority, encrypt, itinerary)\n"
    "  header.sign(manager-key)\n"
    "\n"
    "on arrival(host):\n"
    "  require header.verify(trusted-signers)\n"
    "  require class.version == cache.latest(class.name)\n"
    "  registry.register(agent_id, status=ACTIVE)\n"
    "\n";

constexpr std::string_view kCommonFooter =
    "\n"
    "on before-dispatch:\n"
    "  next := itinerary[cursor]; cursor := cursor + 1\n"
    "  if cursor > len(itinerary): next := origin\n"
    "\n"
    "on migration-failure(host):\n"
    "  folder.append(ERROR, host, \"unreachable\")\n"
    "  retry with itinerary[cursor]\n"
    "\n"
    "on error(e):\n"
    "  folder.append(ERROR, host, e.code)\n"
    "  continue tour\n";

constexpr std::string_view kScalarPollBody =
    "on start(host, sf):\n"
    "  authorize(GET_SCALAR, count={{oid_count}})\n"
    "  values := sf.get_scalar([{{oids}}])\n"
    "  for v in values: if v is NO_SUCH_OID keep marker in place\n"
    "  entry := VALUES(host, now, values)\n"
    "  if encrypt-results: entry := seal(entry, manager-public-key)\n"
    "  folder.append(entry)\n";

constexpr std::string_view kTableFilterBody =
    "on start(host, sf):\n"
    "  authorize(GET_TABLE, count=1)\n"
    "  rows := sf.get_table({{table}})\n"
    "  kept := [row for row in rows if row[{{column}}] {{comparator}} {{constant}}]\n"
    "  entry := ROWS(host, now, table={{table}}, inspected=len(rows), kept)\n"
    "  if encrypt-results: entry := seal(entry, manager-public-key)\n"
    "  folder.append(entry)\n";

constexpr std::string_view kThresholdBody =
    "on start(host, sf):\n"
    "  authorize(GET_SCALAR, count={{oid_count}})\n"
    "  values := sf.get_scalar([{{oids}}])\n"
    "  for (oid, v) in values:\n"
    "    observed := {{expression}}\n"
    "    prior := host-memory.swap(class.name, oid, (v, now, observed {{comparator}} {{limit}}))\n"
    "    if observed {{comparator}} {{limit}} and not prior.satisfied:\n"
    "      entry := ALARM(host, now, oid, {{expression_name}}, {{comparator}}, {{limit}}, observed)\n"
    "      if encrypt-results: entry := seal(entry, manager-public-key)\n"
    "      folder.append(entry)\n";

std::string fill(std::string text, const std::vector<std::pair<std::string, std::string>>& slots) {
  for (const auto& [key, value] : slots) {
    const std::string pattern = "{{" + key + "}}";
    for (auto pos = text.find(pattern); pos != std::string::npos; pos = text.find(pattern, pos + value.size())) {
      text.replace(pos, pattern.size(), value);
    }
  }
  return text;
}

std::string comparator_symbol(Comparator c) {
  switch (c) {
    case Comparator::kEq: return "==";
    case Comparator::kNe: return "!=";
    case Comparator::kLt: return "<";
    case Comparator::kLe: return "<=";
    case Comparator::kGt: return ">";
    case Comparator::kGe: return ">=";
  }
  return "?";
}

std::string literal(const proto::Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  return "\"" + std::get<std::string>(v) + "\"";
}

std::string format_limit(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

std::string join_oids(const std::vector<std::string>& oids) {
  std::string out;
  for (std::size_t i = 0; i < oids.size(); ++i) {
    if (i) out += ", ";
    out += oids[i];
  }
  return out;
}

bool valid_oid(const std::string& oid) {
  try {
    mibsim::parse_oid(oid);
    return true;
  } catch (const Error&) {
    return false;
  }
}

TaskProgram program_from_form(const MagForm& form) {
  TaskProgram p;
  p.service_type = form.service_type;
  p.oids = form.oids;
  if (form.service_type == ServiceType::kTableFilter) p.filter = form.filter;
  if (form.service_type == ServiceType::kThresholdMonitor) p.threshold = form.threshold;
  p.poll_mode = form.poll_mode;
  p.frequency_s = form.frequency_s;
  p.encrypt = form.encrypt;
  p.device_class = form.device_class;
  return p;
}

}  // namespace

bool valid_class_name(std::string_view name) {
  if (name.empty() || name.size() > 128) return false;
  if (!std::isalpha(static_cast<unsigned char>(name[0])) && name[0] != '_') return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

std::vector<std::string> form_errors(const MagForm& form) {
  std::vector<std::string> bad;
  if (!valid_class_name(form.name)) bad.push_back("name");
  const bool oids_ok = !form.oids.empty() && std::all_of(form.oids.begin(), form.oids.end(), valid_oid) &&
                       (form.service_type != ServiceType::kTableFilter || form.oids.size() == 1);
  if (!oids_ok) bad.push_back("oids");
  if (form.service_type == ServiceType::kTableFilter && !form.filter) bad.push_back("filter");
  if (form.service_type == ServiceType::kThresholdMonitor && !form.threshold) bad.push_back("threshold");
  if (form.frequency_s < 1) bad.push_back("frequency_s");
  if (form.priority > proto::kMaxPriority) bad.push_back("priority");
  return bad;
}

void validate_program(const TaskProgram& p) {
  auto reject = [](const std::string& why) { throw Error(Errc::kInvalidProgram, why); };
  if (p.oids.empty()) reject("program has no OIDs");
  for (const auto& oid : p.oids) {
    if (!valid_oid(oid)) reject("malformed OID '" + oid + "'");
  }
  if (p.frequency_s < 1) reject("frequency_s must be at least 1");
  switch (p.service_type) {
    case ServiceType::kScalarPoll:
      if (p.filter || p.threshold) reject("SCALAR_POLL takes neither filter nor threshold");
      break;
    case ServiceType::kTableFilter:
      if (!p.filter) reject("TABLE_FILTER requires a filter");
      if (p.threshold) reject("TABLE_FILTER takes no threshold");
      if (p.oids.size() != 1) reject("TABLE_FILTER takes exactly one table OID");
      break;
    case ServiceType::kThresholdMonitor:
      if (!p.threshold) reject("THRESHOLD_MONITOR requires a threshold");
      if (p.filter) reject("THRESHOLD_MONITOR takes no filter");
      break;
  }
}

std::string render_skeleton(const AgentClassId& id, const TaskProgram& p) {
  std::vector<std::pair<std::string, std::string>> slots = {
      {"class", id.name},
      {"version", std::to_string(id.version)},
      {"poll_mode", std::string(proto::to_string(p.poll_mode))},
      {"frequency", std::to_string(p.frequency_s)},
      {"device_class", p.device_class.empty() ? "*" : p.device_class},
      {"encrypt", p.encrypt ? "yes" : "no"},
      {"oid_count", std::to_string(p.oids.size())},
      {"oids", join_oids(p.oids)},
  };
  std::string body;
  std::string base;
  switch (p.service_type) {
    case ServiceType::kScalarPoll:
      base = "ScalarPollAgent";
      body = std::string(kScalarPollBody);
      break;
    case ServiceType::kTableFilter:
      base = "TableFilterAgent";
      body = std::string(kTableFilterBody);
      slots.emplace_back("table", p.oids.front());
      slots.emplace_back("column", std::to_string(p.filter->column));
      slots.emplace_back("comparator", comparator_symbol(p.filter->comparator));
      slots.emplace_back("constant", literal(p.filter->constant));
      break;
    case ServiceType::kThresholdMonitor:
      base = "ThresholdMonitorAgent";
      body = std::string(kThresholdBody);
      slots.emplace_back("comparator", comparator_symbol(p.threshold->comparator));
      slots.emplace_back("limit", format_limit(p.threshold->limit));
      slots.emplace_back("expression_name", std::string(proto::to_string(p.threshold->expr)));
      slots.emplace_back("expression", p.threshold->expr == proto::ThresholdExpr::kValue
                                           ? "v"
                                           : "(v - prior.value) / seconds(now - prior.time)");
      break;
  }
  slots.emplace_back("base", base);
  return fill(std::string(kCommonHeader) + body + std::string(kCommonFooter), slots);
}

CodeBundle generate_bundle(const MagForm& form, std::uint32_t version, const security::KeyPair& manager_key,
                           TimestampMs created_at) {
  const auto bad = form_errors(form);
  if (!bad.empty()) {
    std::string fields;
    for (const auto& f : bad) fields += (fields.empty() ? "" : ",") + f;
    throw Error(Errc::kInvalidForm, "invalid field(s): " + fields, fields);
  }
  if (version < 1) throw Error(Errc::kInvalidForm, "version must be >= 1", "version");

  CodeBundle b;
  b.class_id = {form.name, version};
  b.program = program_from_form(form);
  b.program_text = render_skeleton(b.class_id, b.program);
  b.created_at = created_at;
  b.policy = form.policy.value_or(AuthPolicy{});
  if (b.policy.trusted_signer_key_ids.empty()) b.policy.trusted_signer_key_ids = {manager_key.key_id()};
  std::sort(b.policy.allowed_ops.begin(), b.policy.allowed_ops.end());
  std::sort(b.policy.trusted_signer_key_ids.begin(), b.policy.trusted_signer_key_ids.end());
  b.signature = security::sign(proto::encode_bundle_unsigned(b), manager_key);
  return b;
}

void validate_bundle(const CodeBundle& bundle, const security::TrustStore& trusted,
                     std::optional<std::uint32_t> latest_cached) {
  if (!security::verify(proto::encode_bundle_unsigned(bundle), bundle.signature, trusted)) {
    throw Error(Errc::kBadSignature, "bundle " + bundle_filename(bundle.class_id) + " fails signature check");
  }
  if (!valid_class_name(bundle.class_id.name) || bundle.class_id.version < 1) {
    throw Error(Errc::kInvalidProgram, "invalid class id");
  }
  validate_program(bundle.program);
  if (bundle.program_text != render_skeleton(bundle.class_id, bundle.program)) {
    throw Error(Errc::kInvalidProgram, "program listing does not match its skeleton instantiation");
  }
  if (latest_cached && bundle.class_id.version <= *latest_cached) {
    throw Error(Errc::kStaleVersion, bundle.class_id.name + " v" + std::to_string(bundle.class_id.version) +
                                         " is not newer than cached v" + std::to_string(*latest_cached));
  }
}

proto::Digest bundle_digest(const CodeBundle& bundle) { return security::sha256(proto::encode(bundle)); }

std::string bundle_filename(const AgentClassId& id) {
  return id.name + "." + std::to_string(id.version) + ".bundle";
}

CodeRepository::CodeRepository(std::string dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw Error(Errc::kIoError, "cannot create " + dir_ + ": " + ec.message());
}

void CodeRepository::store(const CodeBundle& bundle) const {
  const auto path = fs::path(dir_) / bundle_filename(bundle.class_id);
  const auto tmp = fs::path(path).concat(".tmp");
  const auto bytes = proto::encode(bundle);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::kIoError, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(Errc::kIoError, "cannot rename " + tmp.string() + ": " + ec.message());
}

std::optional<CodeBundle> CodeRepository::load(const AgentClassId& id) const {
  const auto path = fs::path(dir_) / bundle_filename(id);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return proto::decode_code_bundle(bytes);
}

std::vector<AgentClassId> CodeRepository::list() const {
  std::vector<AgentClassId> out;
  for (const auto& entry : fs::directory_iterator(dir_)) {
    const auto name = entry.path().filename().string();
    constexpr std::string_view kSuffix = ".bundle";
    if (name.size() <= kSuffix.size() || name.compare(name.size() - kSuffix.size(), kSuffix.size(), kSuffix) != 0) {
      continue;
    }
    const auto stem = name.substr(0, name.size() - kSuffix.size());
    const auto dot = stem.rfind('.');
    if (dot == std::string::npos) continue;
    try {
      const auto version = std::stoul(stem.substr(dot + 1));
      out.push_back({stem.substr(0, dot), static_cast<std::uint32_t>(version)});
    } catch (const std::exception&) {
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<CodeBundle> CodeRepository::latest(const std::string& name) const {
  std::optional<AgentClassId> best;
  for (const auto& id : list()) {
    if (id.name == name && (!best || id.version > best->version)) best = id;
  }
  if (!best) return std::nullopt;
  return load(*best);
}

void CodeRepository::prune(const std::string& name, std::uint32_t keep_version) const {
  for (const auto& id : list()) {
    if (id.name == name && id.version != keep_version) {
      std::error_code ec;
      fs::remove(fs::path(dir_) / bundle_filename(id), ec);
    }
  }
}

}  // namespace mobagent::taskmodel
