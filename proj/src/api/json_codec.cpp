#include "mobagent/api/json_codec.hpp"

#include <algorithm>

namespace mobagent::api {

namespace {

std::string str(std::string_view s) { return std::string(s); }

}  // namespace

std::string key_id_hex(const proto::KeyId& id) { return to_hex(id.data(), id.size()); }

json to_json(const proto::AuthPolicy& p) {
  json ops = json::array();
  for (auto op : p.allowed_ops) ops.push_back(str(proto::to_string(op)));
  json ids = json::array();
  for (const auto& id : p.trusted_signer_key_ids) ids.push_back(key_id_hex(id));
  return {{"allowed_ops", ops},
          {"max_oids_per_query", p.max_oids_per_query},
          {"max_exec_millis_per_host", p.max_exec_millis_per_host},
          {"max_data_folder_bytes", p.max_data_folder_bytes},
          {"trusted_signer_key_ids", ids}};
}

proto::AuthPolicy policy_from_json(const json& j) {
  proto::AuthPolicy p;
  try {
    if (j.contains("allowed_ops")) {
      p.allowed_ops.clear();
      for (const auto& op : j.at("allowed_ops")) p.allowed_ops.push_back(proto::parse_sf_op(op.get<std::string>()));
      std::sort(p.allowed_ops.begin(), p.allowed_ops.end());
      p.allowed_ops.erase(std::unique(p.allowed_ops.begin(), p.allowed_ops.end()), p.allowed_ops.end());
    }
    p.max_oids_per_query = j.value("max_oids_per_query", p.max_oids_per_query);
    p.max_exec_millis_per_host = j.value("max_exec_millis_per_host", p.max_exec_millis_per_host);
    p.max_data_folder_bytes = j.value("max_data_folder_bytes", p.max_data_folder_bytes);
  } catch (const json::exception& e) {
    throw Error(Errc::kFieldRange, std::string("policy: ") + e.what());
  }
  return p;
}

json to_json(const proto::MaInfo& m) {
  return {{"agent_id", m.agent_id},
          {"class_name", m.class_name},
          {"class_version", m.class_version},
          {"poll_mode", str(proto::to_string(m.poll_mode))},
          {"frequency_s", m.frequency_s},
          {"encrypt", m.encrypt},
          {"arrival_time", m.arrival_time},
          {"status", str(proto::to_string(m.status))},
          {"priority", m.priority}};
}

proto::MaInfo ma_info_from_json(const json& j) {
  proto::MaInfo m;
  m.agent_id = j.at("agent_id").get<std::string>();
  m.class_name = j.at("class_name").get<std::string>();
  m.class_version = j.at("class_version").get<std::uint32_t>();
  m.poll_mode = proto::parse_poll_mode(j.at("poll_mode").get<std::string>());
  m.frequency_s = j.at("frequency_s").get<std::uint32_t>();
  m.encrypt = j.at("encrypt").get<bool>();
  m.arrival_time = j.at("arrival_time").get<TimestampMs>();
  m.status = proto::parse_agent_status(j.at("status").get<std::string>());
  m.priority = j.at("priority").get<std::uint8_t>();
  return m;
}

json to_json(const proto::HostLoad& l) {
  return {{"cpu_percent", l.cpu_percent}, {"mem_bytes_used", l.mem_bytes_used}, {"sampled_at", l.sampled_at}};
}

proto::HostLoad host_load_from_json(const json& j) {
  return {j.at("cpu_percent").get<double>(), j.at("mem_bytes_used").get<std::uint64_t>(),
          j.at("sampled_at").get<TimestampMs>()};
}

json value_to_json(const proto::QueryValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  return {{"error", "NO_SUCH_OID"}};
}

proto::Value value_from_json(const json& j) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_string()) return j.get<std::string>();
  throw Error(Errc::kFieldRange, "value must be an integer or a string");
}

json to_json(const taskmodel::MagForm& f) {
  json j{{"name", f.name},
         {"service_type", str(proto::to_string(f.service_type))},
         {"oids", f.oids},
         {"poll_mode", str(proto::to_string(f.poll_mode))},
         {"frequency_s", f.frequency_s},
         {"encrypt", f.encrypt},
         {"device_class", f.device_class},
         {"priority", f.priority}};
  if (f.filter) {
    j["filter"] = {{"column", f.filter->column},
                   {"comparator", str(proto::to_string(f.filter->comparator))},
                   {"constant", value_to_json(proto::QueryValue(std::visit(
                                    [](const auto& x) -> proto::QueryValue { return x; }, f.filter->constant)))}};
  }
  if (f.threshold) {
    j["threshold"] = {{"expr", str(proto::to_string(f.threshold->expr))},
                      {"comparator", str(proto::to_string(f.threshold->comparator))},
                      {"limit", f.threshold->limit}};
  }
  if (f.policy) j["policy"] = to_json(*f.policy);
  return j;
}

taskmodel::MagForm form_from_json(const json& j) {
  taskmodel::MagForm f;
  std::vector<std::string> bad;
  auto field = [&](const char* name, auto&& read) {
    if (!j.contains(name) || j.at(name).is_null()) return;
    try {
      read(j.at(name));
    } catch (const std::exception&) {
      bad.emplace_back(name);
    }
  };
  if (!j.is_object()) throw Error(Errc::kInvalidForm, "form must be a JSON object", "form");
  field("name", [&](const json& v) { f.name = v.get<std::string>(); });
  field("service_type", [&](const json& v) { f.service_type = proto::parse_service_type(v.get<std::string>()); });
  field("oids", [&](const json& v) { f.oids = v.get<std::vector<std::string>>(); });
  field("filter", [&](const json& v) {
    proto::FilterPredicate p;
    p.column = v.at("column").get<std::uint16_t>();
    p.comparator = proto::parse_comparator(v.at("comparator").get<std::string>());
    p.constant = value_from_json(v.at("constant"));
    f.filter = p;
  });
  field("threshold", [&](const json& v) {
    proto::ThresholdSpec t;
    t.expr = proto::parse_threshold_expr(v.value("expr", std::string("VALUE")));
    t.comparator = proto::parse_comparator(v.at("comparator").get<std::string>());
    t.limit = v.at("limit").get<double>();
    f.threshold = t;
  });
  field("poll_mode", [&](const json& v) { f.poll_mode = proto::parse_poll_mode(v.get<std::string>()); });
  field("frequency_s", [&](const json& v) {
    const auto n = v.get<std::int64_t>();
    if (n < 0 || n > 0xffffffffLL) throw std::out_of_range("frequency_s");
    f.frequency_s = static_cast<std::uint32_t>(n);
  });
  field("encrypt", [&](const json& v) { f.encrypt = v.get<bool>(); });
  field("device_class", [&](const json& v) { f.device_class = v.get<std::string>(); });
  field("priority", [&](const json& v) {
    const auto n = v.get<std::int64_t>();
    if (n < 0 || n > 255) throw std::out_of_range("priority");
    f.priority = static_cast<std::uint8_t>(n);
  });
  field("policy", [&](const json& v) { f.policy = policy_from_json(v); });
  if (!bad.empty()) {
    std::string detail;
    for (const auto& b : bad) detail += (detail.empty() ? "" : ",") + b;
    throw Error(Errc::kInvalidForm, "malformed fields: " + detail, detail);
  }
  return f;
}

json payload_to_json(proto::EntryKind kind, const Bytes& canonical) {
  switch (kind) {
    case proto::EntryKind::kValues: {
      json values = json::array();
      for (const auto& s : proto::decode_values(canonical).samples) {
        values.push_back({{"oid", s.oid}, {"value", value_to_json(s.value)}});
      }
      return {{"values", values}};
    }
    case proto::EntryKind::kRows: {
      const auto r = proto::decode_rows(canonical);
      json rows = json::array();
      for (const auto& row : r.rows) {
        json cells = json::array();
        for (const auto& c : row.cells) {
          cells.push_back(std::visit([](const auto& x) { return json(x); }, c));
        }
        rows.push_back({{"index", row.index}, {"cells", cells}});
      }
      return {{"table_oid", r.table_oid}, {"total_rows", r.total_rows}, {"rows", rows}};
    }
    case proto::EntryKind::kAlarm: {
      const auto a = proto::decode_alarm(canonical);
      return {{"oid", a.oid},
              {"expr", str(proto::to_string(a.expr))},
              {"comparator", str(proto::to_string(a.comparator))},
              {"limit", a.limit},
              {"observed", a.observed}};
    }
    case proto::EntryKind::kError: {
      const auto e = proto::decode_error(canonical);
      return {{"code", e.code}, {"message", e.message}};
    }
  }
  return json::object();
}

}  // namespace mobagent::api
