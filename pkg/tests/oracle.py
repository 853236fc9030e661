"""Independent reference semantics for view filtering and send checks.

This is the second, deliberately separate derivation of the access rules,
written as an explicit decision table over named clauses rather than the
engine's control flow.  Tests compare ``mailshade.policy`` against these
functions; keep this module free of imports from the policy internals
beyond the plain value types.
"""

from __future__ import annotations


def reference_tokens(subject: str) -> set[str]:
    """Tokenize by scanning characters (the engine uses a regex instead)."""
    tokens: set[str] = set()
    current: list[str] = []
    for ch in subject.lower():
        if ch.isalnum() and ch != "_":
            current.append(ch)
        elif current:
            tokens.add("".join(current))
            current = []
    if current:
        tokens.add("".join(current))
    return tokens


def reference_keyword_hit(subject: str, keywords) -> bool:
    cleaned = {k.strip().lower() for k in keywords if k.strip()}
    return bool(cleaned & reference_tokens(subject))


# Each clause: (applies_to_kind, predicate(msg, perms) -> bool).  A message is
# visible when the single row matching its sender kind grants it.

def _row_list_member(msg, perms, containing) -> bool:
    # every containing list must grant read
    if any(not rule.read for rule in containing):
        return False
    pooled = set()
    for rule in containing:
        pooled |= set(rule.keywords)
    if pooled:
        return reference_keyword_hit(msg.subject, pooled)
    return True


def _row_contact(msg, perms) -> bool:
    grants = [
        bool(perms.read_contacts),
        bool(perms.read_contacts_keyword)
        and reference_keyword_hit(msg.subject, perms.contact_keywords),
    ]
    return any(grants)


def _row_non_contact(msg, perms) -> bool:
    grants = [
        bool(perms.read_noncontacts),
        bool(perms.read_noncontacts_keyword)
        and reference_keyword_hit(msg.subject, perms.noncontact_keywords),
    ]
    return any(grants)


def reference_visible(msg, perms, contacts) -> bool:
    """Decision table: deleted -> hidden; list member -> list row;
    contact -> contact row; everyone else -> non-contact row."""
    if msg.deleted:
        return False
    containing = [rule for rule in perms.list_rules if msg.sender in rule.members]
    if containing:
        return _row_list_member(msg, perms, containing)
    if msg.sender in contacts:
        return _row_contact(msg, perms)
    return _row_non_contact(msg, perms)


def reference_recipient_allowed(recipient, perms, contacts) -> bool:
    containing = [rule for rule in perms.list_rules if recipient in rule.members]
    if containing:
        return all(bool(rule.send) for rule in containing)
    if recipient in contacts:
        return bool(perms.send_contacts)
    return bool(perms.send_noncontacts)


def reference_send_allowed(recipients, perms, contacts) -> bool:
    return all(reference_recipient_allowed(r, perms, contacts) for r in recipients)
