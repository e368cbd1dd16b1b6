#include "mobagent/security/policy.hpp"

#include <algorithm>

namespace mobagent::security {

void authorize(SfOp op, std::size_t query_size, const AuthPolicy& policy) {
  const auto& ops = policy.allowed_ops;
  if (std::find(ops.begin(), ops.end(), op) == ops.end()) {
    throw Error(Errc::kAuthorizationViolation,
                std::string(proto::to_string(op)) + " is not permitted by policy", std::string(kRuleOp));
  }
  if (query_size > policy.max_oids_per_query) {
    throw Error(Errc::kAuthorizationViolation,
                std::to_string(query_size) + " OIDs exceed the per-query limit of " +
                    std::to_string(policy.max_oids_per_query),
                std::string(kRuleMaxOids));
  }
}

bool is_trusted_signer(const AuthPolicy& policy, const proto::KeyId& id) {
  const auto& ids = policy.trusted_signer_key_ids;
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

AuthPolicy restrict_policy(const AuthPolicy& bundle_policy, const AuthPolicy& host_policy) {
  auto intersect = [](auto a, auto b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    decltype(a) out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  };
  AuthPolicy p;
  p.allowed_ops = intersect(bundle_policy.allowed_ops, host_policy.allowed_ops);
  p.trusted_signer_key_ids = intersect(bundle_policy.trusted_signer_key_ids, host_policy.trusted_signer_key_ids);
  p.max_oids_per_query = std::min(bundle_policy.max_oids_per_query, host_policy.max_oids_per_query);
  p.max_exec_millis_per_host = std::min(bundle_policy.max_exec_millis_per_host, host_policy.max_exec_millis_per_host);
  p.max_data_folder_bytes = std::min(bundle_policy.max_data_folder_bytes, host_policy.max_data_folder_bytes);
  return p;
}

}  // namespace mobagent::security
