from __future__ import annotations

import json

import pytest

from mailshade import fixtures
from mailshade.mailstore import (
    BadCredential,
    DraftMessage,
    FixtureMailbox,
    UnknownMessage,
    load_mailbox_file,
    message_from_json,
    save_mailbox_file,
)

CRED = "upstream-secret"


@pytest.fixture()
def mailbox(tmp_path) -> FixtureMailbox:
    path = tmp_path / "mailbox.json"
    save_mailbox_file(path, fixtures.BOB_MESSAGES)
    return FixtureMailbox(
        path,
        tmp_path / "outbox.jsonl",
        credential=CRED,
        owner_address=fixtures.OWNER_EMAIL,
    )


def test_file_round_trip(tmp_path):
    path = tmp_path / "m.json"
    save_mailbox_file(path, fixtures.BOB_MESSAGES)
    assert load_mailbox_file(path) == list(fixtures.BOB_MESSAGES)


def test_missing_file_is_empty_mailbox(tmp_path):
    assert load_mailbox_file(tmp_path / "nope.json") == []


def test_zulu_dates_parse():
    record = message_from_json(
        {"id": "z1", "from": "a@b.c", "to": ["d@e.f"], "subject": "s", "body": "",
         "date": "2024-03-11T08:05:00Z"}
    )
    assert record.timestamp.isoformat() == "2024-03-11T08:05:00+00:00"


def test_fetch_returns_all_newest_first(mailbox):
    msgs = mailbox.fetch_messages(CRED)
    assert len(msgs) == 10
    stamps = [m.timestamp for m in msgs]
    assert stamps == sorted(stamps, reverse=True)
    assert len({m.id for m in msgs}) == 10


def test_fetch_is_stable_without_mutation(mailbox):
    assert mailbox.fetch_messages(CRED) == mailbox.fetch_messages(CRED)


def test_wrong_credential_rejected(mailbox):
    with pytest.raises(BadCredential):
        mailbox.fetch_messages("not-the-credential")
    with pytest.raises(BadCredential):
        mailbox.delete_message("nope", "m01")


def test_empty_mailbox(tmp_path):
    empty = FixtureMailbox(
        tmp_path / "none.json", tmp_path / "out.jsonl",
        credential=CRED, owner_address=fixtures.OWNER_EMAIL,
    )
    assert empty.fetch_messages(CRED) == []


def test_submit_journals_with_owner_identity(mailbox, tmp_path):
    draft = DraftMessage(frozenset({fixtures.COLLABORATORS[0]}), "Re: tender", "On it.")
    first = mailbox.submit_message(CRED, draft)
    second = mailbox.submit_message(CRED, draft)
    assert first != second
    entries = mailbox.outbox_entries()
    assert len(entries) == 2
    assert all(e["from"] == fixtures.OWNER_EMAIL for e in entries)
    # no on-behalf-of marker of any kind
    assert all(set(e) == {"id", "from", "to", "subject", "body", "date"} for e in entries)


def test_draft_requires_recipients():
    with pytest.raises(ValueError):
        DraftMessage(frozenset(), "s", "b")


def test_draft_normalizes_recipients():
    draft = DraftMessage(frozenset({" Wife.MailGuru@Gmail.com "}), "s", "b")
    assert draft.recipients == frozenset({"wife.mailguru@gmail.com"})


def test_delete_marks_and_persists(mailbox, tmp_path):
    mailbox.delete_message(CRED, "m01")
    fetched = {m.id: m for m in mailbox.fetch_messages(CRED)}
    assert fetched["m01"].deleted
    # a fresh instance sees the same state
    reloaded = FixtureMailbox(
        tmp_path / "mailbox.json", tmp_path / "outbox.jsonl",
        credential=CRED, owner_address=fixtures.OWNER_EMAIL,
    )
    assert {m.id: m.deleted for m in reloaded.fetch_messages(CRED)}["m01"] is True


def test_delete_unknown_id(mailbox):
    with pytest.raises(UnknownMessage):
        mailbox.delete_message(CRED, "m99")


def test_set_unread_round_trip(mailbox):
    mailbox.set_unread(CRED, "m02", False)
    assert not {m.id: m for m in mailbox.fetch_messages(CRED)}["m02"].unread
    mailbox.set_unread(CRED, "m02", True)
    assert {m.id: m for m in mailbox.fetch_messages(CRED)}["m02"].unread


def test_set_unread_unknown_id(mailbox):
    with pytest.raises(UnknownMessage):
        mailbox.set_unread(CRED, "m99", True)


def test_outbox_length_equals_submit_count(mailbox):
    for i in range(5):
        mailbox.submit_message(
            CRED, DraftMessage(frozenset({fixtures.WIFE}), f"note {i}", "x")
        )
    assert len(mailbox.outbox_entries()) == 5


def test_mailbox_file_stays_valid_json(mailbox, tmp_path):
    mailbox.delete_message(CRED, "m03")
    raw = json.loads((tmp_path / "mailbox.json").read_text())
    assert isinstance(raw, list) and len(raw) == 10
    deleted_flags = [entry.get("deleted", False) for entry in raw]
    assert sum(deleted_flags) == 1
