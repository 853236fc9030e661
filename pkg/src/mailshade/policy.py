"""Pure access-control calculus for shared-mailbox views.

One mail account can be unlocked by several passwords.  The owner's password
grants everything; every other password belongs to a named *sub-user* whose
rights are described by a :class:`PermissionTuple`.  This module decides,
from a tuple and the owner's contact set alone, which messages a sub-user
may see, whom they may write to, and which mailbox actions are available.

Everything here is deterministic and side-effect free: values in, values
out.  Persistence, sessions and transport live elsewhere (`store`,
`gateway`); they call into this module for every decision so that the rules
exist in exactly one place.

Sender classification drives the read/send rules:

* a sender appearing in any of the tuple's named lists is governed by those
  lists alone (lists override the contact defaults, which is what lets a
  list act as a whitelist or a blacklist);
* otherwise a sender in the owner's contacts falls under the contact flags;
* everyone else falls under the non-contact flags.

When several lists contain the same sender, denial wins: every containing
list must grant the action, and their keyword conditions are pooled.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields
from datetime import datetime
from enum import Enum
from typing import Iterable, Literal, Mapping, Sequence


class PolicyError(Exception):
    """Base class for policy validation failures."""


class MalformedAddress(PolicyError):
    """A string could not be normalized into an email address."""


class InvalidTuple(PolicyError):
    """A permission tuple or list rule violates its invariants."""


# Tokens are maximal runs of alphanumerics; underscore is punctuation here.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_ADDRESS_FORBIDDEN = set(' \t\r\n\x00/\\')


def normalize_address(raw: str) -> str:
    """Return the canonical form of an email address: trimmed and lowercased.

    Idempotent.  Raises :class:`MalformedAddress` unless the result contains
    exactly one "@" with non-empty text on both sides and no whitespace or
    path separators (account addresses name on-disk directories).
    """
    address = raw.strip().lower()
    if not address or any(ch in _ADDRESS_FORBIDDEN for ch in address):
        raise MalformedAddress(f"not an email address: {raw!r}")
    local, sep, domain = address.partition("@")
    if not sep or not local or not domain or "@" in domain:
        raise MalformedAddress(f"not an email address: {raw!r}")
    return address


def subject_tokens(subject: str) -> list[str]:
    """Split a subject line into lowercased alphanumeric tokens."""
    return _TOKEN_RE.findall(subject.lower())


def keyword_match(subject: str, keywords: Iterable[str]) -> bool:
    """True iff any keyword equals a whole token of the subject.

    Matching is case-insensitive and token-exact: the keyword "accounts"
    matches "Q3 accounts summary" but not "Meet my accountant".  An empty
    keyword collection never matches.
    """
    wanted = {k.strip().lower() for k in keywords if k.strip()}
    if not wanted:
        return False
    return not wanted.isdisjoint(subject_tokens(subject))


def _canon_keywords(keywords: Iterable[str]) -> frozenset[str]:
    return frozenset(k.strip().lower() for k in keywords if k.strip())


@dataclass(frozen=True)
class ListRule:
    """A named set of addresses with a per-role <read, send, keywords> grant.

    ``read``/``send`` gate messages from / sends to the listed addresses.
    A non-empty ``keywords`` set adds a subject-line condition to ``read``.
    Member addresses are normalized on construction.
    """

    name: str
    members: frozenset[str] = frozenset()
    read: bool = False
    send: bool = False
    keywords: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "name", self.name.strip())
        object.__setattr__(
            self, "members", frozenset(normalize_address(m) for m in self.members)
        )
        object.__setattr__(self, "read", bool(self.read))
        object.__setattr__(self, "send", bool(self.send))
        object.__setattr__(self, "keywords", _canon_keywords(self.keywords))


def validate_list_rule(rule: ListRule) -> None:
    """Raise :class:`InvalidTuple` unless the rule satisfies its invariants."""
    if not rule.name:
        raise InvalidTuple("list rule needs a non-empty name")
    if not rule.members:
        raise InvalidTuple(f"list '{rule.name}' has no members")


_FLAG_FIELDS = (
    "read_contacts",
    "read_contacts_keyword",
    "send_contacts",
    "read_noncontacts",
    "read_noncontacts_keyword",
    "send_noncontacts",
    "delete_allowed",
    "mark_unread_allowed",
    "spoof_owner_view",
)


@dataclass(frozen=True)
class PermissionTuple:
    """The permission vector attached to one sub-user password.

    Nine binary flags plus an ordered collection of :class:`ListRule`:

    * ``read_contacts`` / ``read_noncontacts`` — unconditional read of mail
      from (non-)contacts.
    * ``read_contacts_keyword`` + ``contact_keywords`` — conditional read of
      contact mail whose subject matches a keyword (``read_noncontacts_keyword``
      + ``noncontact_keywords`` likewise for strangers).  The unconditional
      and keyword grants combine by OR.
    * ``send_contacts`` / ``send_noncontacts`` — compose/reply rights.
    * ``delete_allowed`` / ``mark_unread_allowed`` — mailbox actions.
    * ``spoof_owner_view`` — dress the restricted view up as the owner's own
      (non-functional compose affordances instead of missing ones).
    * ``list_rules`` — per-list grants that override the contact defaults for
      the listed senders.

    Flag values are coerced to bool on construction so callers may pass 0/1.
    """

    read_contacts: bool = False
    read_contacts_keyword: bool = False
    contact_keywords: frozenset[str] = frozenset()
    send_contacts: bool = False
    read_noncontacts: bool = False
    read_noncontacts_keyword: bool = False
    noncontact_keywords: frozenset[str] = frozenset()
    send_noncontacts: bool = False
    delete_allowed: bool = False
    mark_unread_allowed: bool = False
    spoof_owner_view: bool = False
    list_rules: tuple[ListRule, ...] = ()

    def __post_init__(self) -> None:
        for name in _FLAG_FIELDS:
            object.__setattr__(self, name, bool(getattr(self, name)))
        object.__setattr__(self, "contact_keywords", _canon_keywords(self.contact_keywords))
        object.__setattr__(self, "noncontact_keywords", _canon_keywords(self.noncontact_keywords))
        object.__setattr__(self, "list_rules", tuple(self.list_rules))


def validate_tuple(permissions: PermissionTuple) -> None:
    """Raise :class:`InvalidTuple` unless the tuple satisfies its invariants.

    A keyword read flag set to 1 demands a non-empty keyword set; list rule
    names must be unique within the tuple; every list rule must be valid.
    """
    if permissions.read_contacts_keyword and not permissions.contact_keywords:
        raise InvalidTuple("contact keyword read is enabled but no keywords are given")
    if permissions.read_noncontacts_keyword and not permissions.noncontact_keywords:
        raise InvalidTuple("non-contact keyword read is enabled but no keywords are given")
    seen: set[str] = set()
    for rule in permissions.list_rules:
        validate_list_rule(rule)
        if rule.name in seen:
            raise InvalidTuple(f"list '{rule.name}' referenced twice")
        seen.add(rule.name)


ALL_GRANTED = PermissionTuple(
    read_contacts=True,
    send_contacts=True,
    read_noncontacts=True,
    send_noncontacts=True,
    delete_allowed=True,
    mark_unread_allowed=True,
)


@dataclass(frozen=True)
class MessageRecord:
    """One mail message as the policy sees it."""

    id: str
    sender: str
    recipients: frozenset[str]
    subject: str
    body: str
    timestamp: datetime
    unread: bool = True
    deleted: bool = False


class SenderKind(Enum):
    LIST_MEMBER = "list_member"
    CONTACT = "contact"
    NON_CONTACT = "non_contact"


@dataclass(frozen=True)
class SenderClass:
    """Which rule family governs a sender.

    List membership takes precedence: a sender found in any list is a
    LIST_MEMBER even if it also appears in the contacts set.
    """

    kind: SenderKind
    list_names: frozenset[str] = frozenset()


def classify_sender(
    sender: str,
    contacts: frozenset[str] | set[str],
    list_rules: Sequence[ListRule],
) -> SenderClass:
    """Classify a (normalized) sender address against lists, then contacts."""
    names = frozenset(rule.name for rule in list_rules if sender in rule.members)
    if names:
        return SenderClass(SenderKind.LIST_MEMBER, names)
    if sender in contacts:
        return SenderClass(SenderKind.CONTACT)
    return SenderClass(SenderKind.NON_CONTACT)


def message_visible(
    message: MessageRecord,
    permissions: PermissionTuple,
    contacts: frozenset[str] | set[str],
) -> bool:
    """Decide whether one message belongs in this role's view.

    Deleted messages are never visible.  Otherwise the sender's class picks
    the rule family:

    * list member — visible iff *every* containing list grants read, and, if
      the union of the containing lists' keyword sets is non-empty, the
      subject matches that union;
    * contact — visible iff the unconditional contact read is granted OR the
      keyword read is granted and the subject matches its keywords;
    * non-contact — same shape with the non-contact flags.
    """
    if message.deleted:
        return False
    cls = classify_sender(message.sender, contacts, permissions.list_rules)
    if cls.kind is SenderKind.LIST_MEMBER:
        containing = [r for r in permissions.list_rules if r.name in cls.list_names]
        if not all(r.read for r in containing):
            return False
        pooled = frozenset().union(*(r.keywords for r in containing))
        if pooled:
            return keyword_match(message.subject, pooled)
        return True
    if cls.kind is SenderKind.CONTACT:
        return permissions.read_contacts or (
            permissions.read_contacts_keyword
            and keyword_match(message.subject, permissions.contact_keywords)
        )
    return permissions.read_noncontacts or (
        permissions.read_noncontacts_keyword
        and keyword_match(message.subject, permissions.noncontact_keywords)
    )


def filter_mailbox(
    messages: Sequence[MessageRecord],
    permissions: PermissionTuple,
    contacts: frozenset[str] | set[str],
) -> list[MessageRecord]:
    """Return the visible subsequence of ``messages``, order preserved."""
    return [m for m in messages if message_visible(m, permissions, contacts)]


@dataclass(frozen=True)
class RecipientDenial:
    recipient: str
    reason: str


@dataclass(frozen=True)
class SendDecision:
    """Outcome of a send check: allowed, or denied with per-recipient reasons."""

    allowed: bool
    denials: tuple[RecipientDenial, ...] = ()


def send_allowed(
    recipients: Iterable[str],
    permissions: PermissionTuple,
    contacts: frozenset[str] | set[str],
) -> SendDecision:
    """Check a send against every recipient; all must be allowed.

    A recipient in one or more lists is allowed only if every containing
    list grants send; otherwise the contact / non-contact send flag applies.
    Denial is a value, not an error — the decision carries one reason per
    refused recipient.
    """
    denials: list[RecipientDenial] = []
    for recipient in recipients:
        cls = classify_sender(recipient, contacts, permissions.list_rules)
        if cls.kind is SenderKind.LIST_MEMBER:
            refusing = sorted(
                r.name
                for r in permissions.list_rules
                if r.name in cls.list_names and not r.send
            )
            if refusing:
                denials.append(
                    RecipientDenial(recipient, f"list '{refusing[0]}' denies sending")
                )
        elif cls.kind is SenderKind.CONTACT:
            if not permissions.send_contacts:
                denials.append(
                    RecipientDenial(recipient, "sending to contacts is not permitted")
                )
        else:
            if not permissions.send_noncontacts:
                denials.append(
                    RecipientDenial(recipient, "sending to non-contacts is not permitted")
                )
    return SendDecision(allowed=not denials, denials=tuple(denials))


def action_allowed(action: Literal["delete", "mark_unread"], permissions: PermissionTuple) -> bool:
    """Whether the tuple grants a mailbox action (delete / mark_unread)."""
    if action == "delete":
        return permissions.delete_allowed
    if action == "mark_unread":
        return permissions.mark_unread_allowed
    raise ValueError(f"unknown action: {action!r}")


def has_read_grant(permissions: PermissionTuple) -> bool:
    """True if any rule could ever make a message visible."""
    return (
        permissions.read_contacts
        or permissions.read_contacts_keyword
        or permissions.read_noncontacts
        or permissions.read_noncontacts_keyword
        or any(r.read for r in permissions.list_rules)
    )


def has_send_grant(permissions: PermissionTuple) -> bool:
    """True if any rule could ever allow a send."""
    return (
        permissions.send_contacts
        or permissions.send_noncontacts
        or any(r.send for r in permissions.list_rules)
    )


ComposeState = Literal["real", "dummy", "absent"]
ActionState = Literal["real", "absent"]


@dataclass(frozen=True)
class CapabilityDescriptor:
    """Which affordances a role's interface carries, and whether they work.

    ``compose`` is "dummy" only for a fully send-denied tuple with the
    spoof flag set: the affordance is present but does nothing, so the
    view passes for the owner's own.  Owner-only features (configure
    account, import contacts, account activity) ride on ``owner_features``.
    """

    can_read: bool
    compose: ComposeState
    delete: ActionState
    mark_unread: ActionState
    owner_features: bool


OWNER_CAPABILITIES = CapabilityDescriptor(
    can_read=True, compose="real", delete="real", mark_unread="real", owner_features=True
)


def capabilities_for(permissions: PermissionTuple | None) -> CapabilityDescriptor:
    """Capability descriptor for a role; ``None`` means the owner."""
    if permissions is None:
        return OWNER_CAPABILITIES
    if has_send_grant(permissions):
        compose: ComposeState = "real"
    elif permissions.spoof_owner_view:
        compose = "dummy"
    else:
        compose = "absent"
    return CapabilityDescriptor(
        can_read=has_read_grant(permissions),
        compose=compose,
        delete="real" if permissions.delete_allowed else "absent",
        mark_unread="real" if permissions.mark_unread_allowed else "absent",
        owner_features=False,
    )


# --- wire / storage mapping -------------------------------------------------

def list_rule_to_dict(rule: ListRule, *, include_members: bool = True) -> dict:
    payload = {
        "name": rule.name,
        "read": rule.read,
        "send": rule.send,
        "keywords": sorted(rule.keywords),
    }
    if include_members:
        payload["members"] = sorted(rule.members)
    return payload


def list_rule_from_dict(data: Mapping) -> ListRule:
    try:
        return ListRule(
            name=str(data["name"]),
            members=frozenset(data.get("members") or ()),
            read=bool(data.get("read", False)),
            send=bool(data.get("send", False)),
            keywords=frozenset(data.get("keywords") or ()),
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise InvalidTuple(f"bad list rule: {exc}") from exc


def tuple_to_dict(permissions: PermissionTuple) -> dict:
    """JSON-ready form of a tuple; accepted back by :func:`tuple_from_dict`."""
    return {
        "read_contacts": permissions.read_contacts,
        "read_contacts_keyword": permissions.read_contacts_keyword,
        "contact_keywords": sorted(permissions.contact_keywords),
        "send_contacts": permissions.send_contacts,
        "read_noncontacts": permissions.read_noncontacts,
        "read_noncontacts_keyword": permissions.read_noncontacts_keyword,
        "noncontact_keywords": sorted(permissions.noncontact_keywords),
        "send_noncontacts": permissions.send_noncontacts,
        "delete_allowed": permissions.delete_allowed,
        "mark_unread_allowed": permissions.mark_unread_allowed,
        "spoof_owner_view": permissions.spoof_owner_view,
        "lists": [list_rule_to_dict(r) for r in permissions.list_rules],
    }


def tuple_from_dict(data: Mapping) -> PermissionTuple:
    """Parse a tuple from its wire form.

    Flags accept booleans or 0/1.  List entries may omit ``members`` (the
    store fills them in from the account's list pool before validating).
    Unknown keys are rejected so typos fail loudly.
    """
    if not isinstance(data, Mapping):
        raise InvalidTuple("permission tuple must be an object")
    known = {f.name for f in fields(PermissionTuple)} - {"list_rules"} | {"lists"}
    unknown = set(data) - known
    if unknown:
        raise InvalidTuple(f"unknown tuple fields: {', '.join(sorted(unknown))}")
    raw_lists = data.get("lists") or ()
    if not isinstance(raw_lists, Sequence) or isinstance(raw_lists, (str, bytes)):
        raise InvalidTuple("'lists' must be an array of list rules")

    def flag(name: str) -> bool:
        value = data.get(name, False)
        if value in (True, False, 0, 1):
            return bool(value)
        raise InvalidTuple(f"flag '{name}' must be 0/1 or boolean")

    return PermissionTuple(
        read_contacts=flag("read_contacts"),
        read_contacts_keyword=flag("read_contacts_keyword"),
        contact_keywords=frozenset(data.get("contact_keywords") or ()),
        send_contacts=flag("send_contacts"),
        read_noncontacts=flag("read_noncontacts"),
        read_noncontacts_keyword=flag("read_noncontacts_keyword"),
        noncontact_keywords=frozenset(data.get("noncontact_keywords") or ()),
        send_noncontacts=flag("send_noncontacts"),
        delete_allowed=flag("delete_allowed"),
        mark_unread_allowed=flag("mark_unread_allowed"),
        spoof_owner_view=flag("spoof_owner_view"),
        list_rules=tuple(list_rule_from_dict(entry) for entry in raw_lists),
    )


def capabilities_to_dict(caps: CapabilityDescriptor) -> dict:
    """Effective (three-valued) capability wire form, for owner-facing views."""
    return {
        "can_read": caps.can_read,
        "compose": caps.compose,
        "delete": caps.delete,
        "mark_unread": caps.mark_unread,
        "owner_features": caps.owner_features,
    }


def advertised_capabilities(caps: CapabilityDescriptor) -> dict:
    """Role-facing capability wire form.

    Booleans only: a dummy compose is advertised exactly like a real one,
    otherwise the spoofed view would give itself away.
    """
    return {
        "can_read": caps.can_read,
        "compose": caps.compose != "absent",
        "delete": caps.delete == "real",
        "mark_unread": caps.mark_unread == "real",
        "owner_features": caps.owner_features,
    }
