"""The "bob-scenario" demo fixture.

A construction-company owner (Bob) shares one mailbox with four helpers,
each behind its own password:

* task 1 — lawyer Amy reads everything, sends and deletes nothing;
* task 2 — assistant Penny reads mail from the three collaborators only;
* task 3 — colleague Howard reads everything except mail from Bob's wife
  and son (a deny list over the "family" pool);
* task 4 — accountant Stuart sees only mail whose subject carries the
  token "accounts";
* task 5 — Bob revokes Howard's access again.

The mailbox holds exactly ten messages chosen so those four views have
cardinalities 10 / 3 / 6 / 1: two from the wife, two from the son, one from
each collaborator, one from the accountant (the only subject containing
"accounts"), and two from strangers who are not in Bob's contacts.
Everything is constant — addresses, subjects, timestamps — so repeated
loads produce identical mailboxes and stable expectations for tests and
``mailshade verify-task``.
"""

from __future__ import annotations

from datetime import datetime
from pathlib import Path

from .mailstore import save_mailbox_file
from .policy import ListRule, MessageRecord, PermissionTuple
from .store import AccountStore

OWNER_EMAIL = "bob.mailguru@gmail.com"
WIFE = "wife.mailguru@gmail.com"
SON = "son.mailguru@gmail.com"
COLLABORATORS = (
    "collaborator1.mailguru@gmail.com",
    "collaborator2.mailguru@gmail.com",
    "collaborator3.mailguru@gmail.com",
)
ACCOUNTANT = "acc0untant.mailguru@gmail.com"
STRANGERS = ("expo-news@buildfair.example.com", "quotes@steelmart.example.com")

CONTACTS = frozenset({WIFE, SON, *COLLABORATORS, ACCOUNTANT})

# Demo credentials; anyone deploying for real creates their own account.
DEFAULT_OWNER_PASSWORD = "bobs-corner-office-9am"
DEFAULT_UPSTREAM_PASSWORD = "upstream-app-secret-7741"

COLLABORATORS_LIST = "collaborators"
FAMILY_LIST = "family"

TASK_SUBUSERS = {1: "Amy", 2: "Penny", 3: "Howard", 4: "Stuart"}

_DAY = "2024-03-11"


def _at(hour: int, minute: int) -> datetime:
    return datetime.fromisoformat(f"{_DAY}T{hour:02d}:{minute:02d}:00+00:00")


def _msg(mid: str, sender: str, subject: str, body: str, stamp: datetime) -> MessageRecord:
    return MessageRecord(
        id=mid,
        sender=sender,
        recipients=frozenset({OWNER_EMAIL}),
        subject=subject,
        body=body,
        timestamp=stamp,
        unread=True,
    )


BOB_MESSAGES: tuple[MessageRecord, ...] = (
    _msg("m01", WIFE, "Dinner on Friday?", "The Rozhenkos asked us over at eight.", _at(7, 12)),
    _msg("m02", SON, "Soccer practice pickup", "Coach moved practice to 5pm, can you get me?", _at(7, 48)),
    _msg("m03", COLLABORATORS[0], "Steel tender timeline", "Bids close Thursday; draft attached earlier.", _at(8, 5)),
    _msg("m04", STRANGERS[0], "Builders expo invitation", "Reserve your booth for the spring expo.", _at(8, 31)),
    _msg("m05", COLLABORATORS[1], "Site survey photos", "Uploaded the north-lot survey shots.", _at(9, 2)),
    _msg("m06", ACCOUNTANT, "Q3 accounts summary", "Ledger attached; flagging two invoices for review.", _at(9, 40)),
    _msg("m07", WIFE, "Weekend at the lake house", "Shall we leave Saturday morning?", _at(10, 15)),
    _msg("m08", COLLABORATORS[2], "Contract draft, second pass", "Redlines folded in, ready for your read.", _at(11, 3)),
    _msg("m09", STRANGERS[1], "Rebar pricing update", "New quarter, new rates, see the sheet.", _at(11, 47)),
    _msg("m10", SON, "Report card attached", "Told you the maths grade would recover.", _at(12, 20)),
)

ACCOUNTS_MESSAGE_ID = "m06"


def collaborators_rule(read: bool = True, send: bool = False, keywords: frozenset[str] = frozenset()) -> ListRule:
    return ListRule(COLLABORATORS_LIST, frozenset(COLLABORATORS), read, send, keywords)


def family_rule(read: bool = False, send: bool = False, keywords: frozenset[str] = frozenset()) -> ListRule:
    return ListRule(FAMILY_LIST, frozenset({WIFE, SON}), read, send, keywords)


def task_permissions(task: int, *, grant_send: bool = False, with_list_rules: bool = True) -> PermissionTuple:
    """The canonical permission tuple for demo tasks 1-4.

    ``grant_send`` covers the two readings of task 3's "access" (read-only
    vs read-and-send); the view is the same either way.  ``with_list_rules``
    drops task 4's optional list grants, which are keyword-gated and do not
    change its view on this mailbox.
    """
    if task == 1:
        return PermissionTuple(read_contacts=True, read_noncontacts=True)
    if task == 2:
        return PermissionTuple(list_rules=(collaborators_rule(),))
    if task == 3:
        return PermissionTuple(
            read_contacts=True,
            read_noncontacts=True,
            send_contacts=grant_send,
            send_noncontacts=grant_send,
            list_rules=(collaborators_rule(), family_rule()),
        )
    if task == 4:
        keyed = frozenset({"accounts"})
        rules = (
            (collaborators_rule(True, False, keyed), family_rule(True, False, keyed))
            if with_list_rules
            else ()
        )
        return PermissionTuple(
            read_contacts_keyword=True,
            contact_keywords=keyed,
            read_noncontacts_keyword=True,
            noncontact_keywords=keyed,
            list_rules=rules,
        )
    raise ValueError(f"no permission tuple for task {task}")


def expected_task_view_ids(task: int) -> set[str]:
    """Visible-message ids each task's wording demands, derived from the
    fixture data itself (sender identity / subject token), not from the
    policy engine."""
    if task == 1:
        return {m.id for m in BOB_MESSAGES}
    if task == 2:
        return {m.id for m in BOB_MESSAGES if m.sender in COLLABORATORS}
    if task == 3:
        return {m.id for m in BOB_MESSAGES if m.sender not in {WIFE, SON}}
    if task == 4:
        return {
            m.id
            for m in BOB_MESSAGES
            if "accounts" in m.subject.lower().replace(",", " ").split()
        }
    raise ValueError(f"no expected view for task {task}")


def write_bob_mailbox(mailbox_path: Path) -> None:
    save_mailbox_file(mailbox_path, BOB_MESSAGES)


def load_bob_scenario(
    store: AccountStore,
    *,
    force: bool = False,
    owner_password: str = DEFAULT_OWNER_PASSWORD,
    upstream_password: str = DEFAULT_UPSTREAM_PASSWORD,
) -> str:
    """Create Bob's account, import his six contacts, install the mailbox.

    Returns the account email.  Refuses to overwrite an existing account
    unless ``force`` is set (then the account directory is rebuilt from
    scratch; sub-users and lists are gone afterwards).
    """
    account_dir = store.account_dir(OWNER_EMAIL)
    if (account_dir / "config.json").exists():
        if not force:
            raise FileExistsError(f"{OWNER_EMAIL} already exists; use force to rebuild")
        store.purge_account(OWNER_EMAIL)
    store.create_account(OWNER_EMAIL, owner_password, upstream_password)
    session = store.authenticate(OWNER_EMAIL, owner_password)
    store.import_contacts(session, CONTACTS)
    store.drop_session(session.token)
    write_bob_mailbox(account_dir / "mailbox.json")
    return OWNER_EMAIL
