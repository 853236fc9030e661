"""Upstream mailbox backends.

The gateway never talks IMAP/SMTP directly; it goes through the
:class:`UpstreamMailbox` protocol, scoped to one account and driven by that
account's decrypted upstream credential.  Two implementations ship:

* :class:`FixtureMailbox` — deterministic, file-backed, used for tests and
  desk-scale runs.  Messages live in a JSON file, sent mail is journalled to
  a JSON-lines outbox, deletion marks records rather than dropping them (the
  owner's trash listing needs them).
* :class:`ImapSmtpMailbox` — a thin live backend over stdlib imaplib/smtplib.
  Optional; nothing in the test suite requires a live server.

Backends return policy ``MessageRecord`` values; all filtering is the
caller's job — a fetch is always the whole account.
"""

from __future__ import annotations

import email
import email.message
import email.utils
import imaplib
import json
import os
import smtplib
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Protocol, Sequence

from .policy import MessageRecord, normalize_address


class MailstoreError(Exception):
    """Base class for backend failures."""


class UpstreamUnavailable(MailstoreError):
    """The backend could not be reached or refused service."""


class BadCredential(MailstoreError):
    """The supplied upstream credential was rejected."""


class UnknownMessage(MailstoreError):
    """No message with the given id exists."""


@dataclass(frozen=True)
class DraftMessage:
    """An outgoing message before the backend stamps sender and id."""

    recipients: frozenset[str]
    subject: str
    body: str

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "recipients", frozenset(normalize_address(r) for r in self.recipients)
        )
        if not self.recipients:
            raise ValueError("draft needs at least one recipient")


class UpstreamMailbox(Protocol):
    """Contract every backend satisfies for a single account.

    Fetch returns each message id at most once and ids stay stable across
    fetches until the message is deleted.  Mutations are serialized per
    account by the implementation.
    """

    def fetch_messages(self, credential: str) -> list[MessageRecord]: ...

    def submit_message(self, credential: str, draft: DraftMessage) -> str: ...

    def delete_message(self, credential: str, message_id: str) -> None: ...

    def set_unread(self, credential: str, message_id: str, unread: bool) -> None: ...


# --- fixture file format ------------------------------------------------------
# A mailbox file is a JSON array of message objects:
#   {id, from, to: [...], subject, body, date (RFC 3339), unread}
# plus an optional "deleted" flag that this backend adds when persisting trash
# state (absent means false).  The outbox journal is JSON lines, one sent
# message per line in the same shape minus "unread"/"deleted".


def _parse_rfc3339(value: str) -> datetime:
    # Python 3.10's fromisoformat cannot digest a trailing "Z".
    if value.endswith(("Z", "z")):
        value = value[:-1] + "+00:00"
    stamp = datetime.fromisoformat(value)
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp.astimezone(timezone.utc)


def _format_rfc3339(stamp: datetime) -> str:
    return stamp.astimezone(timezone.utc).isoformat()


def message_from_json(data: dict) -> MessageRecord:
    return MessageRecord(
        id=str(data["id"]),
        sender=normalize_address(data["from"]),
        recipients=frozenset(normalize_address(r) for r in data["to"]),
        subject=str(data.get("subject", "")),
        body=str(data.get("body", "")),
        timestamp=_parse_rfc3339(data["date"]),
        unread=bool(data.get("unread", True)),
        deleted=bool(data.get("deleted", False)),
    )


def message_to_json(message: MessageRecord) -> dict:
    payload = {
        "id": message.id,
        "from": message.sender,
        "to": sorted(message.recipients),
        "subject": message.subject,
        "body": message.body,
        "date": _format_rfc3339(message.timestamp),
        "unread": message.unread,
    }
    if message.deleted:
        payload["deleted"] = True
    return payload


def load_mailbox_file(path: Path) -> list[MessageRecord]:
    """Read a fixture mailbox file; a missing file is an empty mailbox."""
    if not path.exists():
        return []
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise MailstoreError(f"{path}: mailbox file must be a JSON array")
    return [message_from_json(entry) for entry in raw]


def save_mailbox_file(path: Path, messages: Sequence[MessageRecord]) -> None:
    """Atomically write a fixture mailbox file."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(
        json.dumps([message_to_json(m) for m in messages], indent=2) + "\n",
        encoding="utf-8",
    )
    os.replace(tmp, path)


class FixtureMailbox:
    """File-backed mailbox for one account.

    Every operation checks the caller's credential against the account's
    expected one, mirroring a real provider login.  Mutations persist
    immediately: the mailbox file is rewritten atomically, the outbox only
    ever grows.
    """

    def __init__(
        self,
        mailbox_path: Path,
        outbox_path: Path,
        *,
        credential: str,
        owner_address: str,
        clock: Callable[[], datetime] | None = None,
    ) -> None:
        self._mailbox_path = Path(mailbox_path)
        self._outbox_path = Path(outbox_path)
        self._credential = credential
        self._owner = normalize_address(owner_address)
        self._clock = clock or (lambda: datetime.now(timezone.utc))
        self._lock = threading.Lock()
        self._messages: dict[str, MessageRecord] = {
            m.id: m for m in load_mailbox_file(self._mailbox_path)
        }

    def _check_credential(self, credential: str) -> None:
        if credential != self._credential:
            raise BadCredential("upstream rejected the credential")

    def fetch_messages(self, credential: str) -> list[MessageRecord]:
        self._check_credential(credential)
        with self._lock:
            return sorted(
                self._messages.values(), key=lambda m: (m.timestamp, m.id), reverse=True
            )

    def submit_message(self, credential: str, draft: DraftMessage) -> str:
        self._check_credential(credential)
        with self._lock:
            message_id = f"sent-{uuid.uuid4().hex[:12]}"
            entry = {
                "id": message_id,
                "from": self._owner,
                "to": sorted(draft.recipients),
                "subject": draft.subject,
                "body": draft.body,
                "date": _format_rfc3339(self._clock()),
            }
            self._outbox_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self._outbox_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry) + "\n")
            return message_id

    def delete_message(self, credential: str, message_id: str) -> None:
        self._check_credential(credential)
        with self._lock:
            record = self._messages.get(message_id)
            if record is None:
                raise UnknownMessage(message_id)
            self._messages[message_id] = MessageRecord(
                id=record.id,
                sender=record.sender,
                recipients=record.recipients,
                subject=record.subject,
                body=record.body,
                timestamp=record.timestamp,
                unread=record.unread,
                deleted=True,
            )
            self._persist()

    def set_unread(self, credential: str, message_id: str, unread: bool) -> None:
        self._check_credential(credential)
        with self._lock:
            record = self._messages.get(message_id)
            if record is None:
                raise UnknownMessage(message_id)
            if record.unread != unread:
                self._messages[message_id] = MessageRecord(
                    id=record.id,
                    sender=record.sender,
                    recipients=record.recipients,
                    subject=record.subject,
                    body=record.body,
                    timestamp=record.timestamp,
                    unread=unread,
                    deleted=record.deleted,
                )
                self._persist()

    def outbox_entries(self) -> list[dict]:
        """Parsed outbox journal, oldest first (test/inspection helper)."""
        if not self._outbox_path.exists():
            return []
        with open(self._outbox_path, encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]

    def _persist(self) -> None:
        ordered = sorted(self._messages.values(), key=lambda m: (m.timestamp, m.id))
        save_mailbox_file(self._mailbox_path, ordered)


class FixtureBackends:
    """Per-account :class:`FixtureMailbox` instances rooted in a data directory.

    The account's mailbox lives at ``<data>/<email>/mailbox.json`` and its
    outbox journal at ``<data>/<email>/outbox.jsonl``.  Instances are cached
    so per-account locking holds across requests.
    """

    def __init__(self, data_dir: Path, credential_for: Callable[[str], str]) -> None:
        self._data_dir = Path(data_dir)
        self._credential_for = credential_for
        self._cache: dict[str, FixtureMailbox] = {}
        self._lock = threading.Lock()

    def mailbox_path(self, account_email: str) -> Path:
        return self._data_dir / account_email / "mailbox.json"

    def outbox_path(self, account_email: str) -> Path:
        return self._data_dir / account_email / "outbox.jsonl"

    def __call__(self, account_email: str) -> FixtureMailbox:
        with self._lock:
            backend = self._cache.get(account_email)
            if backend is None:
                backend = FixtureMailbox(
                    self.mailbox_path(account_email),
                    self.outbox_path(account_email),
                    credential=self._credential_for(account_email),
                    owner_address=account_email,
                )
                self._cache[account_email] = backend
            return backend


@dataclass(frozen=True)
class ImapSmtpConfig:
    """Connection settings for the optional live backend (TLS required)."""

    imap_host: str
    smtp_host: str
    username: str
    imap_port: int = 993
    smtp_port: int = 465


class ImapSmtpMailbox:
    """Live backend over a provider's IMAP/SMTP endpoints.

    Deletion follows the provider's trash flow (flag + expunge).  This class
    is intentionally minimal: plain-text bodies, INBOX only, no IDLE.
    """

    def __init__(self, config: ImapSmtpConfig) -> None:
        self._config = config
        self._lock = threading.Lock()

    def _connect(self, credential: str) -> imaplib.IMAP4_SSL:
        try:
            conn = imaplib.IMAP4_SSL(self._config.imap_host, self._config.imap_port)
        except OSError as exc:
            raise UpstreamUnavailable(str(exc)) from exc
        try:
            conn.login(self._config.username, credential)
        except imaplib.IMAP4.error as exc:
            conn.logout()
            raise BadCredential(str(exc)) from exc
        return conn

    def fetch_messages(self, credential: str) -> list[MessageRecord]:
        with self._lock:
            conn = self._connect(credential)
            try:
                conn.select("INBOX")
                _, data = conn.uid("search", None, "ALL")
                records: list[MessageRecord] = []
                for uid in data[0].split():
                    _, parts = conn.uid("fetch", uid, "(FLAGS BODY.PEEK[])")
                    if not parts or parts[0] is None:
                        continue
                    flags = imaplib.ParseFlags(parts[0][0])
                    parsed = email.message_from_bytes(parts[0][1])
                    records.append(self._to_record(uid.decode(), parsed, flags))
                records.sort(key=lambda m: (m.timestamp, m.id), reverse=True)
                return records
            except imaplib.IMAP4.error as exc:
                raise UpstreamUnavailable(str(exc)) from exc
            finally:
                conn.logout()

    @staticmethod
    def _to_record(uid: str, parsed: email.message.Message, flags: tuple) -> MessageRecord:
        date = email.utils.parsedate_to_datetime(parsed.get("Date", "")) or datetime.now(
            timezone.utc
        )
        body = ""
        payload = parsed.get_payload(decode=True)
        if isinstance(payload, bytes):
            body = payload.decode("utf-8", errors="replace")
        sender = email.utils.parseaddr(parsed.get("From", ""))[1]
        recipients = [
            addr for _, addr in email.utils.getaddresses(parsed.get_all("To", []))
        ]
        return MessageRecord(
            id=uid,
            sender=normalize_address(sender),
            recipients=frozenset(normalize_address(r) for r in recipients if r),
            subject=parsed.get("Subject", ""),
            body=body,
            timestamp=date.astimezone(timezone.utc),
            unread=b"\\Seen" not in flags,
        )

    def submit_message(self, credential: str, draft: DraftMessage) -> str:
        message = email.message.EmailMessage()
        message["From"] = self._config.username
        message["To"] = ", ".join(sorted(draft.recipients))
        message["Subject"] = draft.subject
        message["Message-ID"] = email.utils.make_msgid()
        message.set_content(draft.body)
        try:
            with smtplib.SMTP_SSL(self._config.smtp_host, self._config.smtp_port) as smtp:
                smtp.login(self._config.username, credential)
                smtp.send_message(message)
        except smtplib.SMTPAuthenticationError as exc:
            raise BadCredential(str(exc)) from exc
        except (smtplib.SMTPException, OSError) as exc:
            raise UpstreamUnavailable(str(exc)) from exc
        return message["Message-ID"]

    def delete_message(self, credential: str, message_id: str) -> None:
        with self._lock:
            conn = self._connect(credential)
            try:
                conn.select("INBOX")
                status, _ = conn.uid("store", message_id, "+FLAGS", "(\\Deleted)")
                if status != "OK":
                    raise UnknownMessage(message_id)
                conn.expunge()
            except imaplib.IMAP4.error as exc:
                raise UpstreamUnavailable(str(exc)) from exc
            finally:
                conn.logout()

    def set_unread(self, credential: str, message_id: str, unread: bool) -> None:
        op = "-FLAGS" if unread else "+FLAGS"
        with self._lock:
            conn = self._connect(credential)
            try:
                conn.select("INBOX")
                status, _ = conn.uid("store", message_id, op, "(\\Seen)")
                if status != "OK":
                    raise UnknownMessage(message_id)
            except imaplib.IMAP4.error as exc:
                raise UpstreamUnavailable(str(exc)) from exc
            finally:
                conn.logout()
