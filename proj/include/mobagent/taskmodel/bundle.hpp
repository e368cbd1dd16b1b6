#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mobagent/proto/messages.hpp"
#include "mobagent/security/crypto.hpp"

namespace mobagent::taskmodel {

using proto::AgentClassId;
using proto::AuthPolicy;
using proto::CodeBundle;
using proto::TaskProgram;

// The fields an operator fills in to define a new monitoring agent.
struct MagForm {
  std::string name;
  proto::ServiceType service_type = proto::ServiceType::kScalarPoll;
  std::vector<std::string> oids;
  std::optional<proto::FilterPredicate> filter;
  std::optional<proto::ThresholdSpec> threshold;
  proto::PollMode poll_mode = proto::PollMode::kPeriodic;
  std::uint32_t frequency_s = 60;
  bool encrypt = false;
  std::string device_class;
  std::uint8_t priority = 5;
  std::optional<AuthPolicy> policy;
};

// Names of the offending fields; empty when the form is valid.
std::vector<std::string> form_errors(const MagForm& form);

bool valid_class_name(std::string_view name);

// Throws INVALID_PROGRAM when the program violates its service-type shape.
void validate_program(const TaskProgram& program);

// Instantiates the skeleton for the program's service type.
std::string render_skeleton(const AgentClassId& class_id, const TaskProgram& program);

// Template instantiation plus signing. Throws INVALID_FORM whose detail is a
// comma-separated list of the invalid fields.
CodeBundle generate_bundle(const MagForm& form, std::uint32_t version, const security::KeyPair& manager_key,
                           TimestampMs created_at);

// Throws BAD_SIGNATURE, INVALID_PROGRAM or STALE_VERSION (when `version` is
// not strictly above `latest_cached`).
void validate_bundle(const CodeBundle& bundle, const security::TrustStore& trusted,
                     std::optional<std::uint32_t> latest_cached = std::nullopt);

proto::Digest bundle_digest(const CodeBundle& bundle);

std::string bundle_filename(const AgentClassId& id);

// Directory of "<name>.<version>.bundle" files in canonical encoding.
class CodeRepository {
 public:
  explicit CodeRepository(std::string dir);

  void store(const CodeBundle& bundle) const;
  std::optional<CodeBundle> load(const AgentClassId& id) const;
  std::optional<CodeBundle> latest(const std::string& name) const;
  std::vector<AgentClassId> list() const;
  // Removes every version of `name` other than `keep_version`.
  void prune(const std::string& name, std::uint32_t keep_version) const;
  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
};

}  // namespace mobagent::taskmodel
