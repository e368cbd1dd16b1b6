#pragma once

#include <cstddef>
#include <string_view>

#include "mobagent/proto/messages.hpp"

namespace mobagent::security {

using proto::AuthPolicy;
using proto::SfOp;

// Which authorization rule rejected a request; carried as Error::detail().
inline constexpr std::string_view kRuleOp = "op";
inline constexpr std::string_view kRuleMaxOids = "max_oids";

// Permits iff `op` is allowed and `query_size` is within the per-query quota;
// otherwise throws AUTHORIZATION_VIOLATION naming the failed rule.
void authorize(SfOp op, std::size_t query_size, const AuthPolicy& policy);

bool is_trusted_signer(const AuthPolicy& policy, const proto::KeyId& id);

// Narrows a bundle's policy with a host's local overrides: the intersection of
// allowed ops and trusted signers, and the smaller of every quota.
AuthPolicy restrict_policy(const AuthPolicy& bundle_policy, const AuthPolicy& host_policy);

}  // namespace mobagent::security
