#pragma once

#include <nlohmann/json.hpp>

#include "mobagent/proto/messages.hpp"
#include "mobagent/taskmodel/bundle.hpp"

// JSON shapes shared by configuration files, the manager HTTP API and the CLI.
namespace mobagent::api {

using nlohmann::json;

json to_json(const proto::AuthPolicy& p);
// Missing keys keep their defaults. Throws FIELD_RANGE.
proto::AuthPolicy policy_from_json(const json& j);

json to_json(const proto::MaInfo& m);
proto::MaInfo ma_info_from_json(const json& j);
json to_json(const proto::HostLoad& l);
proto::HostLoad host_load_from_json(const json& j);

json to_json(const taskmodel::MagForm& f);
// Throws INVALID_FORM whose detail names the malformed fields.
taskmodel::MagForm form_from_json(const json& j);

json value_to_json(const proto::QueryValue& v);
proto::Value value_from_json(const json& j);

// Decoded data-folder payload of the given kind.
json payload_to_json(proto::EntryKind kind, const Bytes& canonical);

std::string key_id_hex(const proto::KeyId& id);

}  // namespace mobagent::api
