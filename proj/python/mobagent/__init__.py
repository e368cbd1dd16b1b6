"""Python access to the mobile-agent monitoring core."""

import json

from ._core import (
    MobagentError,
    brute_force_plan,
    compress,
    decode_frame,
    decompress,
    encode_frame,
    mib_get,
    plan,
    route_cost,
    sha256,
)
from ._core import migrate_compare_json as _migrate_compare_json

AGENT_STATE = 1
CODE_BUNDLE = 2
CONTROL_REQ = 3
CONTROL_RESP = 4
ANNOUNCE = 5
RESULT = 6


def migrate_compare(rounds=10, hosts=5):
    """Byte accounting per service-type template, as a list of dicts."""
    return json.loads(_migrate_compare_json(rounds, hosts))


__all__ = [
    "MobagentError",
    "brute_force_plan",
    "compress",
    "decode_frame",
    "decompress",
    "encode_frame",
    "migrate_compare",
    "mib_get",
    "plan",
    "route_cost",
    "sha256",
]
