"""mailshade: one mailbox, many passwords, each a restricted view.

A middleware between mail clients and an upstream mailstore.  The account
owner mints extra passwords ("sub-users"), attaches a permission tuple to
each, and anyone logging in with such a password sees only the slice of the
mailbox that tuple allows — and can send, delete, or mark-unread only if it
says so.
"""

from .policy import (
    CapabilityDescriptor,
    InvalidTuple,
    ListRule,
    MalformedAddress,
    MessageRecord,
    PermissionTuple,
    PolicyError,
    SendDecision,
    SenderClass,
    SenderKind,
    action_allowed,
    capabilities_for,
    classify_sender,
    filter_mailbox,
    keyword_match,
    message_visible,
    normalize_address,
    send_allowed,
    validate_tuple,
)
from .store import AccountStore, Session, generate_subuser_password

__version__ = "0.1.0"

__all__ = [
    "AccountStore",
    "CapabilityDescriptor",
    "InvalidTuple",
    "ListRule",
    "MalformedAddress",
    "MessageRecord",
    "PermissionTuple",
    "PolicyError",
    "SendDecision",
    "SenderClass",
    "SenderKind",
    "Session",
    "action_allowed",
    "capabilities_for",
    "classify_sender",
    "filter_mailbox",
    "generate_subuser_password",
    "keyword_match",
    "message_visible",
    "normalize_address",
    "send_allowed",
    "validate_tuple",
    "__version__",
]
