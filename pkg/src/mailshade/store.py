"""Durable per-account state: credentials, sub-users, lists, contacts, audit.

One account, many passwords.  The owner's gateway password and every
sub-user password are stored as salted scrypt hashes; the upstream provider
password is the only secret that must be recoverable and is kept as a
Fernet ciphertext under the server key (``MAILSHADE_KEY``, 32 bytes,
base64).  No plaintext secret ever reaches disk.

Layout on disk, one directory per account::

    <data>/<account-email>/config.json   # whole account document, atomic replace
    <data>/<account-email>/audit.jsonl   # append-only activity log

Mutations are serialized per account behind a lock; reads see the latest
committed state.  Sessions are process-local: a 128-bit bearer token mapped
to one role, renewed on use, idle-expired after 30 minutes, and invalidated
immediately when the role disappears.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import hmac
import json
import os
import secrets
import string
import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Iterable, Literal

from cryptography.fernet import Fernet, InvalidToken

from .policy import (
    CapabilityDescriptor,
    InvalidTuple,
    ListRule,
    MalformedAddress,
    PermissionTuple,
    capabilities_for,
    list_rule_from_dict,
    list_rule_to_dict,
    normalize_address,
    tuple_from_dict,
    tuple_to_dict,
    validate_list_rule,
    validate_tuple,
)

KEY_ENV_VAR = "MAILSHADE_KEY"
MIN_PASSWORD_LENGTH = 8
GENERATED_PASSWORD_LENGTH = 20
SESSION_IDLE_LIFETIME = timedelta(minutes=30)


class StoreError(Exception):
    """Base class for account-store failures."""


class DuplicateAccount(StoreError):
    pass


class UnknownAccount(StoreError):
    pass


class WeakPassword(StoreError):
    pass


class DuplicateName(StoreError):
    pass


class DuplicatePassword(StoreError):
    """The candidate password already unlocks another role on this account."""


class UnknownSubUser(StoreError):
    pass


class UnknownList(StoreError):
    pass


class EmptyMembers(StoreError):
    pass


class AuthenticationFailed(StoreError):
    """Uniform credential failure; never says which part was wrong."""


class NotOwner(StoreError):
    pass


class BadKey(StoreError):
    """Missing or malformed server encryption key."""


# --- password hashing ---------------------------------------------------------

@dataclass(frozen=True)
class ScryptParams:
    """Cost parameters for password hashing.

    The defaults are interactive-login strength.  Tests dial ``log2_n`` down;
    the encoded hash carries its own parameters so mixed costs verify fine.
    """

    log2_n: int = 14
    r: int = 8
    p: int = 1


def hash_password(password: str, params: ScryptParams = ScryptParams()) -> str:
    salt = secrets.token_bytes(16)
    derived = hashlib.scrypt(
        password.encode("utf-8"),
        salt=salt,
        n=1 << params.log2_n,
        r=params.r,
        p=params.p,
        dklen=32,
    )
    return "scrypt${}${}${}${}${}".format(
        params.log2_n,
        params.r,
        params.p,
        base64.b64encode(salt).decode("ascii"),
        base64.b64encode(derived).decode("ascii"),
    )


def verify_password(password: str, encoded: str) -> bool:
    try:
        scheme, log2_n, r, p, salt_b64, digest_b64 = encoded.split("$")
        if scheme != "scrypt":
            return False
        salt = base64.b64decode(salt_b64)
        expected = base64.b64decode(digest_b64)
        derived = hashlib.scrypt(
            password.encode("utf-8"),
            salt=salt,
            n=1 << int(log2_n),
            r=int(r),
            p=int(p),
            dklen=len(expected),
        )
    except (ValueError, binascii.Error):
        return False
    return hmac.compare_digest(derived, expected)


def generate_subuser_password(length: int = GENERATED_PASSWORD_LENGTH) -> str:
    """A fresh high-entropy password with all four character classes present."""
    if length < 16:
        raise ValueError("generated passwords are at least 16 characters")
    rng = secrets.SystemRandom()
    symbols = "!@#$%^&*-_=+"
    pools = (string.ascii_lowercase, string.ascii_uppercase, string.digits, symbols)
    chars = [rng.choice(pool) for pool in pools]
    alphabet = "".join(pools)
    chars.extend(rng.choice(alphabet) for _ in range(length - len(chars)))
    rng.shuffle(chars)
    return "".join(chars)


# --- server key ----------------------------------------------------------------

def _decode_key(value: str) -> bytes:
    padded = value.strip()
    padded += "=" * (-len(padded) % 4)
    for decoder in (base64.urlsafe_b64decode, base64.b64decode):
        try:
            raw = decoder(padded.encode("ascii"))
        except (ValueError, binascii.Error):
            continue
        if len(raw) == 32:
            return raw
    raise BadKey("server key must be 32 bytes, base64-encoded")


def load_server_key(value: str | None = None) -> bytes:
    """Resolve the server key from an explicit value or ``MAILSHADE_KEY``."""
    if value is None:
        value = os.environ.get(KEY_ENV_VAR)
    if not value:
        raise BadKey(f"no server key: set {KEY_ENV_VAR} (32 bytes, base64)")
    return _decode_key(value)


def generate_server_key() -> str:
    return base64.urlsafe_b64encode(secrets.token_bytes(32)).decode("ascii")


# --- in-memory account state ----------------------------------------------------

@dataclass
class SubUser:
    """A named role: its credential hash and permission tuple."""

    name: str
    password_hash: str
    password_fp: str
    permissions: PermissionTuple
    created_at: datetime


@dataclass
class AccountConfig:
    email: str
    owner_password_hash: str
    owner_password_fp: str
    upstream_credential: str  # Fernet token, never plaintext
    contacts: set[str] = field(default_factory=set)
    sub_users: dict[str, SubUser] = field(default_factory=dict)
    lists: dict[str, ListRule] = field(default_factory=dict)


@dataclass(frozen=True)
class AuditEvent:
    timestamp: datetime
    seq: int
    role: str
    action: str
    target: str
    outcome: str

    def to_dict(self) -> dict:
        return {
            "timestamp": self.timestamp.astimezone(timezone.utc).isoformat(),
            "seq": self.seq,
            "role": self.role,
            "action": self.action,
            "target": self.target,
            "outcome": self.outcome,
        }


@dataclass
class Session:
    """An authenticated bearer token resolved to exactly one role."""

    token: str
    email: str
    role_kind: Literal["owner", "subuser"]
    subuser: str | None
    capabilities: CapabilityDescriptor
    expires_at: datetime

    @property
    def is_owner(self) -> bool:
        return self.role_kind == "owner"

    @property
    def role_name(self) -> str:
        return "owner" if self.is_owner else str(self.subuser)


@dataclass
class _AccountSlot:
    config: AccountConfig
    lock: threading.RLock
    audit_seq: int


class AccountStore:
    """All durable state plus the session registry, rooted in one directory."""

    def __init__(
        self,
        data_dir: Path | str,
        *,
        key: str | None = None,
        kdf: ScryptParams = ScryptParams(),
        clock: Callable[[], datetime] | None = None,
        session_lifetime: timedelta = SESSION_IDLE_LIFETIME,
    ) -> None:
        self.data_dir = Path(data_dir)
        self._key_bytes = load_server_key(key)
        self._fernet = Fernet(base64.urlsafe_b64encode(self._key_bytes))
        self._kdf = kdf
        self._clock = clock or (lambda: datetime.now(timezone.utc))
        self._session_lifetime = session_lifetime
        self._slots: dict[str, _AccountSlot] = {}
        self._slots_lock = threading.Lock()
        self._sessions: dict[str, Session] = {}
        self._sessions_lock = threading.Lock()

    # -- paths and persistence --

    def account_dir(self, email: str) -> Path:
        return self.data_dir / email

    def _config_path(self, email: str) -> Path:
        return self.account_dir(email) / "config.json"

    def _audit_path(self, email: str) -> Path:
        return self.account_dir(email) / "audit.jsonl"

    def list_accounts(self) -> list[str]:
        if not self.data_dir.exists():
            return []
        return sorted(
            entry.name
            for entry in self.data_dir.iterdir()
            if (entry / "config.json").exists()
        )

    def _slot(self, email: str) -> _AccountSlot:
        email = normalize_address(email)
        with self._slots_lock:
            slot = self._slots.get(email)
            if slot is None:
                path = self._config_path(email)
                if not path.exists():
                    raise UnknownAccount(email)
                config = _config_from_dict(json.loads(path.read_text(encoding="utf-8")))
                slot = _AccountSlot(
                    config=config,
                    lock=threading.RLock(),
                    audit_seq=self._last_audit_seq(email),
                )
                self._slots[email] = slot
            return slot

    def _persist(self, config: AccountConfig) -> None:
        path = self._config_path(config.email)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(
            json.dumps(_config_to_dict(config), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        os.replace(tmp, path)

    def _last_audit_seq(self, email: str) -> int:
        path = self._audit_path(email)
        if not path.exists():
            return 0
        last = 0
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    last = json.loads(line).get("seq", last)
        return int(last)

    # -- accounts --

    def create_account(self, email: str, owner_password: str, upstream_password: str) -> str:
        """Register an account; secrets are hashed/encrypted before hitting disk."""
        email = normalize_address(email)
        _require_strength(owner_password)
        with self._slots_lock:
            if email in self._slots or self._config_path(email).exists():
                raise DuplicateAccount(email)
            config = AccountConfig(
                email=email,
                owner_password_hash=hash_password(owner_password, self._kdf),
                owner_password_fp=self._fingerprint(email, owner_password),
                upstream_credential=self._fernet.encrypt(
                    upstream_password.encode("utf-8")
                ).decode("ascii"),
            )
            self._persist(config)
            self._slots[email] = _AccountSlot(config, threading.RLock(), 0)
        self.record_event(email, "owner", "config_change", "account", "created")
        return email

    def get_config(self, email: str) -> AccountConfig:
        return self._slot(email).config

    def purge_account(self, email: str) -> None:
        """Forget an account entirely: files, cached state, live sessions."""
        email = normalize_address(email)
        with self._slots_lock:
            self._slots.pop(email, None)
        with self._sessions_lock:
            for token in [t for t, s in self._sessions.items() if s.email == email]:
                del self._sessions[token]
        account_dir = self.account_dir(email)
        if account_dir.exists():
            for entry in account_dir.iterdir():
                entry.unlink()
            account_dir.rmdir()

    def upstream_credential(self, email: str) -> str:
        """Decrypt the provider password for backend use; never logged."""
        config = self._slot(email).config
        try:
            return self._fernet.decrypt(config.upstream_credential.encode("ascii")).decode(
                "utf-8"
            )
        except InvalidToken as exc:
            raise BadKey("server key cannot decrypt the stored upstream credential") from exc

    # -- authentication and sessions --

    def _fingerprint(self, email: str, password: str) -> str:
        fp_key = hmac.new(
            self._key_bytes, b"password-fingerprint:" + email.encode("utf-8"), hashlib.sha256
        ).digest()
        return hmac.new(fp_key, password.encode("utf-8"), hashlib.sha256).hexdigest()

    def authenticate(self, email: str, password: str) -> Session:
        """Resolve (email, password) to a role and open a session.

        The owner hash is tried first, then each sub-user hash; duplicate
        rejection at write time guarantees at most one can match.  Failures
        are uniform: the caller cannot tell a bad address from a bad password.
        """
        try:
            slot = self._slot(normalize_address(email))
        except (UnknownAccount, MalformedAddress):
            raise AuthenticationFailed("invalid email or password") from None
        config = slot.config
        subuser: str | None = None
        matched = verify_password(password, config.owner_password_hash)
        if not matched:
            for candidate in config.sub_users.values():
                if verify_password(password, candidate.password_hash):
                    matched = True
                    subuser = candidate.name
                    break
        if not matched:
            self.record_event(config.email, "unknown", "login", "session", "failure")
            raise AuthenticationFailed("invalid email or password")
        session = self._open_session(config, subuser)
        self.record_event(config.email, session.role_name, "login", "session", "ok")
        return session

    def _open_session(self, config: AccountConfig, subuser: str | None) -> Session:
        permissions = None if subuser is None else config.sub_users[subuser].permissions
        session = Session(
            token=secrets.token_urlsafe(16),  # 128 bits
            email=config.email,
            role_kind="owner" if subuser is None else "subuser",
            subuser=subuser,
            capabilities=capabilities_for(permissions),
            expires_at=self._clock() + self._session_lifetime,
        )
        with self._sessions_lock:
            self._sessions[session.token] = session
        return session

    def get_session(self, token: str) -> Session:
        """Look up a bearer token; renews the idle timer on success."""
        now = self._clock()
        with self._sessions_lock:
            session = self._sessions.get(token)
            if session is None or session.expires_at <= now:
                self._sessions.pop(token, None)
                raise AuthenticationFailed("invalid or expired session")
            session.expires_at = now + self._session_lifetime
        # The role may have been revoked since login.
        config = self._slot(session.email).config
        if session.role_kind == "subuser" and session.subuser not in config.sub_users:
            self.drop_session(token)
            raise AuthenticationFailed("invalid or expired session")
        return session

    def drop_session(self, token: str) -> None:
        with self._sessions_lock:
            self._sessions.pop(token, None)

    def _drop_sessions_for(self, email: str, subuser: str) -> None:
        with self._sessions_lock:
            stale = [
                t
                for t, s in self._sessions.items()
                if s.email == email and s.subuser == subuser
            ]
            for token in stale:
                del self._sessions[token]

    @staticmethod
    def _require_owner(session: Session) -> None:
        if not session.is_owner:
            raise NotOwner("owner session required")

    # -- sub-users --

    def _check_password_unused(
        self, config: AccountConfig, password: str, *, exclude: str | None = None
    ) -> str:
        fp = self._fingerprint(config.email, password)
        matches = [hmac.compare_digest(fp, config.owner_password_fp)]
        matches.extend(
            hmac.compare_digest(fp, sub.password_fp)
            for sub in config.sub_users.values()
            if sub.name != exclude
        )
        if any(matches):
            raise DuplicatePassword(
                "this password already unlocks another role on the account"
            )
        return fp

    def materialize_permissions(self, email: str, permissions: PermissionTuple) -> PermissionTuple:
        """Resolve a tuple's list references against an account's list pool.

        Raises :class:`~mailshade.policy.InvalidTuple` if a referenced list
        does not exist, and validates the materialized tuple.
        """
        return self._materialize(self._slot(email).config, permissions)

    def _materialize(self, config: AccountConfig, permissions: PermissionTuple) -> PermissionTuple:
        """Swap canonical member sets into a tuple's list references."""
        rules = []
        for rule in permissions.list_rules:
            pooled = config.lists.get(rule.name)
            if pooled is None:
                raise InvalidTuple(f"tuple references unknown list '{rule.name}'")
            rules.append(
                ListRule(
                    name=rule.name,
                    members=pooled.members,
                    read=rule.read,
                    send=rule.send,
                    keywords=rule.keywords,
                )
            )
        materialized = PermissionTuple(
            read_contacts=permissions.read_contacts,
            read_contacts_keyword=permissions.read_contacts_keyword,
            contact_keywords=permissions.contact_keywords,
            send_contacts=permissions.send_contacts,
            read_noncontacts=permissions.read_noncontacts,
            read_noncontacts_keyword=permissions.read_noncontacts_keyword,
            noncontact_keywords=permissions.noncontact_keywords,
            send_noncontacts=permissions.send_noncontacts,
            delete_allowed=permissions.delete_allowed,
            mark_unread_allowed=permissions.mark_unread_allowed,
            spoof_owner_view=permissions.spoof_owner_view,
            list_rules=tuple(rules),
        )
        validate_tuple(materialized)
        return materialized

    def add_subuser(
        self, session: Session, name: str, password: str, permissions: PermissionTuple
    ) -> SubUser:
        self._require_owner(session)
        slot = self._slot(session.email)
        with slot.lock:
            config = slot.config
            name = name.strip()
            if not name:
                raise InvalidTuple("sub-user name must be non-empty")
            if name in config.sub_users:
                raise DuplicateName(name)
            _require_strength(password)
            fp = self._check_password_unused(config, password)
            sub = SubUser(
                name=name,
                password_hash=hash_password(password, self._kdf),
                password_fp=fp,
                permissions=self._materialize(config, permissions),
                created_at=self._clock(),
            )
            config.sub_users[name] = sub
            self._persist(config)
        self.record_event(session.email, "owner", "config_change", f"subuser:{name}", "created")
        return sub

    def update_subuser(
        self,
        session: Session,
        name: str,
        *,
        permissions: PermissionTuple | None = None,
        password: str | None = None,
    ) -> SubUser:
        self._require_owner(session)
        slot = self._slot(session.email)
        with slot.lock:
            config = slot.config
            sub = config.sub_users.get(name)
            if sub is None:
                raise UnknownSubUser(name)
            if permissions is not None:
                sub.permissions = self._materialize(config, permissions)
            if password is not None:
                _require_strength(password)
                sub.password_fp = self._check_password_unused(config, password, exclude=name)
                sub.password_hash = hash_password(password, self._kdf)
            self._persist(config)
        self.record_event(session.email, "owner", "config_change", f"subuser:{name}", "updated")
        return sub

    def delete_subuser(self, session: Session, name: str) -> None:
        """Remove the role; its live sessions die with it, its password stops working."""
        self._require_owner(session)
        slot = self._slot(session.email)
        with slot.lock:
            config = slot.config
            if name not in config.sub_users:
                raise UnknownSubUser(name)
            del config.sub_users[name]
            self._persist(config)
        self._drop_sessions_for(session.email, name)
        self.record_event(session.email, "owner", "config_change", f"subuser:{name}", "deleted")

    # -- lists and contacts --

    def put_list(self, session: Session, rule: ListRule) -> ListRule:
        """Create or replace a named list; member changes cascade into every
        sub-user tuple referencing the list (the per-role triples stay put)."""
        self._require_owner(session)
        slot = self._slot(session.email)
        with slot.lock:
            config = slot.config
            if not rule.name:
                raise InvalidTuple("list rule needs a non-empty name")
            if not rule.members:
                raise EmptyMembers(rule.name)
            validate_list_rule(rule)
            config.lists[rule.name] = rule
            for sub in config.sub_users.values():
                sub.permissions = self._materialize(config, sub.permissions)
            self._persist(config)
        self.record_event(session.email, "owner", "config_change", f"list:{rule.name}", "stored")
        return rule

    def delete_list(self, session: Session, name: str) -> None:
        """Drop a list and remove it from every tuple that referenced it."""
        self._require_owner(session)
        slot = self._slot(session.email)
        with slot.lock:
            config = slot.config
            if name not in config.lists:
                raise UnknownList(name)
            del config.lists[name]
            for sub in config.sub_users.values():
                kept = tuple(r for r in sub.permissions.list_rules if r.name != name)
                if len(kept) != len(sub.permissions.list_rules):
                    sub.permissions = _with_list_rules(sub.permissions, kept)
            self._persist(config)
        self.record_event(session.email, "owner", "config_change", f"list:{name}", "deleted")

    def import_contacts(self, session: Session, addresses: Iterable[str]) -> int:
        """Union addresses into the contact set; returns how many were new."""
        self._require_owner(session)
        normalized = {normalize_address(a) for a in addresses}
        slot = self._slot(session.email)
        with slot.lock:
            config = slot.config
            added = len(normalized - config.contacts)
            if added:
                config.contacts |= normalized
                self._persist(config)
        self.record_event(
            session.email, "owner", "config_change", "contacts", f"imported:{added}"
        )
        return added

    # -- audit --

    def record_event(self, email: str, role: str, action: str, target: str, outcome: str) -> AuditEvent:
        """Append one activity record; system-invoked, so no session check."""
        slot = self._slot(email)
        with slot.lock:
            slot.audit_seq += 1
            event = AuditEvent(
                timestamp=self._clock(),
                seq=slot.audit_seq,
                role=role,
                action=action,
                target=target,
                outcome=outcome,
            )
            path = self._audit_path(email)
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(event.to_dict()) + "\n")
        return event

    def query_activity(
        self,
        session: Session,
        *,
        since: datetime | None = None,
        until: datetime | None = None,
        role: str | None = None,
    ) -> list[AuditEvent]:
        """Owner-only chronological read of the activity log."""
        self._require_owner(session)
        path = self._audit_path(session.email)
        events: list[AuditEvent] = []
        if path.exists():
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    data = json.loads(line)
                    event = AuditEvent(
                        timestamp=datetime.fromisoformat(data["timestamp"]),
                        seq=int(data["seq"]),
                        role=data["role"],
                        action=data["action"],
                        target=data["target"],
                        outcome=data["outcome"],
                    )
                    if since is not None and event.timestamp < since:
                        continue
                    if until is not None and event.timestamp > until:
                        continue
                    if role is not None and event.role != role:
                        continue
                    events.append(event)
        events.sort(key=lambda e: (e.timestamp, e.seq))
        return events


def _require_strength(password: str) -> None:
    if len(password) < MIN_PASSWORD_LENGTH:
        raise WeakPassword(f"passwords must be at least {MIN_PASSWORD_LENGTH} characters")


def _with_list_rules(permissions: PermissionTuple, rules: tuple[ListRule, ...]) -> PermissionTuple:
    return PermissionTuple(
        read_contacts=permissions.read_contacts,
        read_contacts_keyword=permissions.read_contacts_keyword,
        contact_keywords=permissions.contact_keywords,
        send_contacts=permissions.send_contacts,
        read_noncontacts=permissions.read_noncontacts,
        read_noncontacts_keyword=permissions.read_noncontacts_keyword,
        noncontact_keywords=permissions.noncontact_keywords,
        send_noncontacts=permissions.send_noncontacts,
        delete_allowed=permissions.delete_allowed,
        mark_unread_allowed=permissions.mark_unread_allowed,
        spoof_owner_view=permissions.spoof_owner_view,
        list_rules=rules,
    )


# --- config document mapping ----------------------------------------------------

def _config_to_dict(config: AccountConfig) -> dict:
    return {
        "email": config.email,
        "owner_password_hash": config.owner_password_hash,
        "owner_password_fp": config.owner_password_fp,
        "upstream_credential": config.upstream_credential,
        "contacts": sorted(config.contacts),
        "lists": {
            name: list_rule_to_dict(rule) for name, rule in sorted(config.lists.items())
        },
        "sub_users": {
            name: {
                "password_hash": sub.password_hash,
                "password_fp": sub.password_fp,
                "created_at": sub.created_at.astimezone(timezone.utc).isoformat(),
                "permissions": tuple_to_dict(sub.permissions),
            }
            for name, sub in sorted(config.sub_users.items())
        },
    }


def _config_from_dict(data: dict) -> AccountConfig:
    lists = {
        name: list_rule_from_dict({**entry, "name": name})
        for name, entry in data.get("lists", {}).items()
    }
    sub_users = {}
    for name, entry in data.get("sub_users", {}).items():
        sub_users[name] = SubUser(
            name=name,
            password_hash=entry["password_hash"],
            password_fp=entry["password_fp"],
            permissions=tuple_from_dict(entry["permissions"]),
            created_at=datetime.fromisoformat(entry["created_at"]),
        )
    return AccountConfig(
        email=data["email"],
        owner_password_hash=data["owner_password_hash"],
        owner_password_fp=data["owner_password_fp"],
        upstream_credential=data["upstream_credential"],
        contacts=set(data.get("contacts", ())),
        sub_users=sub_users,
        lists=lists,
    )
