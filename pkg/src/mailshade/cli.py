"""Operator command line: run the gateway, manage accounts, verify the demo tasks.

Exit codes: 0 success, 2 usage error, 3 store/policy/operational error,
4 verification failure.
"""

from __future__ import annotations

import errno
import json
import socket
import sys
from pathlib import Path

import click
import uvicorn

from . import fixtures
from .gateway import create_app
from .mailstore import FixtureBackends, ImapSmtpConfig, ImapSmtpMailbox, MailstoreError
from .policy import (
    ListRule,
    PermissionTuple,
    PolicyError,
    filter_mailbox,
    list_rule_to_dict,
    tuple_to_dict,
)
from .store import (
    AccountStore,
    AuthenticationFailed,
    Session,
    StoreError,
    generate_server_key,
    generate_subuser_password,
)

STORE_ERROR_EXIT = 3
VERIFY_FAIL_EXIT = 4


def _fail(message: str, code: int = STORE_ERROR_EXIT) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _open_store(data_dir: Path) -> AccountStore:
    try:
        return AccountStore(data_dir)
    except StoreError as exc:
        _fail(str(exc))
        raise AssertionError("unreachable")


def _resolve_account(store: AccountStore, account: str | None) -> str:
    if account:
        return account.strip().lower()
    accounts = store.list_accounts()
    if len(accounts) == 1:
        return accounts[0]
    if not accounts:
        raise click.UsageError("no accounts in the data directory; create one first")
    raise click.UsageError(
        f"several accounts exist ({', '.join(accounts)}); pick one with --account"
    )


def _owner_login(store: AccountStore, account: str, password: str | None) -> Session:
    if password is None:
        password = click.prompt("Owner password", hide_input=True)
    try:
        session = store.authenticate(account, password)
    except AuthenticationFailed:
        _fail("owner authentication failed")
        raise AssertionError("unreachable")
    if not session.is_owner:
        _fail("those credentials belong to a sub-user, not the owner")
    return session


data_option = click.option(
    "--data",
    "data_dir",
    envvar="MAILSHADE_DATA",
    required=True,
    type=click.Path(path_type=Path, file_okay=False),
    help="Data directory (or MAILSHADE_DATA).",
)
account_option = click.option(
    "--account", default=None, help="Account email; optional when only one account exists."
)
owner_password_option = click.option(
    "--owner-password",
    envvar="MAILSHADE_OWNER_PASSWORD",
    default=None,
    help="Owner password (or MAILSHADE_OWNER_PASSWORD; prompted when omitted).",
)
json_option = click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")


@click.group()
@click.version_option(package_name="mailshade")
def main() -> None:
    """One mailbox, many passwords: a policy-filtering mail gateway."""


# --- serve -----------------------------------------------------------------------

@main.command()
@click.option("--addr", envvar="MAILSHADE_ADDR", default="127.0.0.1:8080", show_default=True)
@data_option
@click.option(
    "--backend",
    type=click.Choice(["fixture", "imap"]),
    default="fixture",
    show_default=True,
)
@click.option("--imap-host", default=None, help="IMAP host (imap backend).")
@click.option("--smtp-host", default=None, help="SMTP host (imap backend).")
@click.option("--imap-port", default=993, show_default=True)
@click.option("--smtp-port", default=465, show_default=True)
def serve(addr, data_dir, backend, imap_host, smtp_host, imap_port, smtp_port) -> None:
    """Run the HTTP gateway until interrupted."""
    host, _, port_text = addr.rpartition(":")
    if not host or not port_text.isdigit():
        raise click.UsageError(f"--addr must look like HOST:PORT, got {addr!r}")
    port = int(port_text)

    store = _open_store(data_dir)
    if backend == "fixture":
        backends = FixtureBackends(store.data_dir, store.upstream_credential)
    else:
        if not imap_host or not smtp_host:
            raise click.UsageError("imap backend needs --imap-host and --smtp-host")

        def backends(email: str) -> ImapSmtpMailbox:
            return ImapSmtpMailbox(
                ImapSmtpConfig(
                    imap_host=imap_host,
                    smtp_host=smtp_host,
                    username=email,
                    imap_port=imap_port,
                    smtp_port=smtp_port,
                )
            )

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError as exc:
        if exc.errno == errno.EADDRINUSE:
            _fail(f"address already in use: {addr}")
        _fail(f"cannot bind {addr}: {exc}")
    finally:
        probe.close()

    app = create_app(store, backends)
    uvicorn.run(app, host=host, port=port, log_level="info")


@main.group()
def key() -> None:
    """Server encryption key helpers."""


@key.command("generate")
def key_generate() -> None:
    """Print a fresh MAILSHADE_KEY value."""
    click.echo(generate_server_key())


# --- fixture scenario -----------------------------------------------------------

@main.group()
def fixture() -> None:
    """Demo fixture management."""


@fixture.command("load")
@click.argument("scenario", type=click.Choice(["bob-scenario"]))
@data_option
@click.option("--force", is_flag=True, help="Rebuild the account if it already exists.")
@click.option("--owner-password", default=fixtures.DEFAULT_OWNER_PASSWORD, show_default=False)
@click.option("--upstream-password", default=fixtures.DEFAULT_UPSTREAM_PASSWORD, show_default=False)
def fixture_load(scenario, data_dir, force, owner_password, upstream_password) -> None:
    """Create the demo account, its six contacts, and the ten-message mailbox."""
    store = _open_store(data_dir)
    try:
        email = fixtures.load_bob_scenario(
            store,
            force=force,
            owner_password=owner_password,
            upstream_password=upstream_password,
        )
    except FileExistsError as exc:
        _fail(str(exc))
        return
    except (StoreError, PolicyError) as exc:
        _fail(str(exc))
        return
    click.echo(f"loaded {scenario}: account {email}, 6 contacts, 10 messages")


# --- verify-task ------------------------------------------------------------------

_TASK_LISTS = {
    2: (fixtures.COLLABORATORS_LIST,),
    3: (fixtures.COLLABORATORS_LIST, fixtures.FAMILY_LIST),
    4: (fixtures.COLLABORATORS_LIST, fixtures.FAMILY_LIST),
}

_LIST_MEMBERS = {
    fixtures.COLLABORATORS_LIST: frozenset(fixtures.COLLABORATORS),
    fixtures.FAMILY_LIST: frozenset({fixtures.WIFE, fixtures.SON}),
}


def _ensure_task_lists(store: AccountStore, session: Session, task: int) -> None:
    for name in _TASK_LISTS.get(task, ()):
        store.put_list(session, ListRule(name, _LIST_MEMBERS[name]))


def _install_task_subuser(store: AccountStore, session: Session, task: int) -> str:
    """Create or refresh the task's sub-user; returns its (fresh) password."""
    _ensure_task_lists(store, session, task)
    name = fixtures.TASK_SUBUSERS[task]
    password = generate_subuser_password()
    config = store.get_config(session.email)
    if name in config.sub_users:
        store.update_subuser(
            session, name, permissions=fixtures.task_permissions(task), password=password
        )
    else:
        store.add_subuser(session, name, password, fixtures.task_permissions(task))
    return password


def _actual_view_ids(store: AccountStore, email: str, subuser: str) -> set[str]:
    """The ids the sub-user's mailbox view shows right now (gateway semantics)."""
    backends = FixtureBackends(store.data_dir, store.upstream_credential)
    messages = backends(email).fetch_messages(store.upstream_credential(email))
    config = store.get_config(email)
    permissions = config.sub_users[subuser].permissions
    return {m.id for m in filter_mailbox(messages, permissions, config.contacts)}


def run_task_verification(store: AccountStore, email: str, session: Session, task: int) -> dict:
    """Set a task up from scratch and compare its view with the expectation."""
    if task in (1, 2, 3, 4):
        _install_task_subuser(store, session, task)
        name = fixtures.TASK_SUBUSERS[task]
        expected = fixtures.expected_task_view_ids(task)
        actual = _actual_view_ids(store, email, name)
        return {
            "task": task,
            "subuser": name,
            "expected": sorted(expected),
            "actual": sorted(actual),
            "passed": expected == actual,
        }
    # task 5: revoke Howard (from task 3) and prove the password is dead
    howard_password = _install_task_subuser(store, session, 3)
    store.delete_subuser(session, "Howard")
    try:
        store.authenticate(email, howard_password)
        rejected = False
    except AuthenticationFailed:
        rejected = True
    return {
        "task": 5,
        "subuser": "Howard",
        "expected": "login rejected after revocation",
        "actual": "login rejected" if rejected else "login still works",
        "passed": rejected,
    }


@main.command("verify-task")
@click.argument("task", type=click.IntRange(1, 5))
@data_option
@account_option
@click.option(
    "--owner-password",
    envvar="MAILSHADE_OWNER_PASSWORD",
    default=fixtures.DEFAULT_OWNER_PASSWORD,
    help="Owner password; defaults to the demo fixture's.",
)
@json_option
def verify_task(task, data_dir, account, owner_password, as_json) -> None:
    """Configure demo task TASK and check the resulting view end to end."""
    store = _open_store(data_dir)
    email = _resolve_account(store, account)
    session = _owner_login(store, email, owner_password)
    try:
        result = run_task_verification(store, email, session, task)
    except (StoreError, PolicyError, MailstoreError) as exc:
        _fail(str(exc))
        return
    if as_json:
        click.echo(json.dumps(result, indent=2))
    else:
        click.echo(f"task {task}: expected {result['expected']}")
        click.echo(f"task {task}: actual   {result['actual']}")
        click.echo(f"task {task}: {'PASS' if result['passed'] else 'FAIL'}")
    if not result["passed"]:
        sys.exit(VERIFY_FAIL_EXIT)


# --- account ------------------------------------------------------------------------

@main.group()
def account() -> None:
    """Account management."""


@account.command("create")
@data_option
@click.option("--email", required=True)
@click.option("--owner-password", default=None)
@click.option("--upstream-password", default=None)
def account_create(data_dir, email, owner_password, upstream_password) -> None:
    """Register an account with its gateway and upstream credentials."""
    if owner_password is None:
        owner_password = click.prompt("Owner password", hide_input=True, confirmation_prompt=True)
    if upstream_password is None:
        upstream_password = click.prompt("Upstream (provider) password", hide_input=True)
    store = _open_store(data_dir)
    try:
        stored = store.create_account(email, owner_password, upstream_password)
    except (StoreError, PolicyError) as exc:
        _fail(str(exc))
        return
    click.echo(f"created account {stored}")


@account.command("show")
@data_option
@account_option
@json_option
def account_show(data_dir, account, as_json) -> None:
    """Summarize an account's configuration (no secrets)."""
    store = _open_store(data_dir)
    email = _resolve_account(store, account)
    config = store.get_config(email)
    summary = {
        "email": config.email,
        "contacts": sorted(config.contacts),
        "lists": sorted(config.lists),
        "sub_users": sorted(config.sub_users),
    }
    if as_json:
        click.echo(json.dumps(summary, indent=2))
    else:
        click.echo(f"account  {summary['email']}")
        click.echo(f"contacts {len(summary['contacts'])}")
        click.echo(f"lists    {', '.join(summary['lists']) or '(none)'}")
        click.echo(f"subusers {', '.join(summary['sub_users']) or '(none)'}")


# --- sub-users -------------------------------------------------------------------------

def _parse_list_reference(store: AccountStore, email: str, spec_text: str) -> ListRule:
    """Parse NAME[:R,S[:kw1,kw2]]; omitted parts fall back to the stored list's triple."""
    parts = spec_text.split(":")
    name = parts[0].strip()
    config = store.get_config(email)
    stored = config.lists.get(name)
    read = stored.read if stored else False
    send = stored.send if stored else False
    keywords = stored.keywords if stored else frozenset()
    if len(parts) > 1 and parts[1]:
        flags = parts[1].split(",")
        if len(flags) != 2 or any(f.strip() not in ("0", "1") for f in flags):
            raise click.UsageError(f"list reference {spec_text!r}: flags must be R,S with 0/1")
        read, send = flags[0].strip() == "1", flags[1].strip() == "1"
    if len(parts) > 2:
        keywords = frozenset(k.strip() for k in parts[2].split(",") if k.strip())
    members = stored.members if stored else frozenset({"placeholder@nowhere.invalid"})
    return ListRule(name, members, read, send, keywords)


def _warn_all_zero_lists(permissions: PermissionTuple) -> None:
    for rule in permissions.list_rules:
        if not rule.read and not rule.send and not rule.keywords:
            click.echo(
                f"note: list '{rule.name}' is referenced with all-zero permissions; "
                "it blocks reading from and sending to its members",
                err=True,
            )


def _tuple_from_flags(
    store,
    email,
    read_contacts,
    contact_keywords,
    send_contacts,
    read_noncontacts,
    noncontact_keywords,
    send_noncontacts,
    allow_delete,
    allow_mark_unread,
    spoof,
    list_refs,
) -> PermissionTuple:
    contact_kw = frozenset(k.strip() for k in (contact_keywords or "").split(",") if k.strip())
    noncontact_kw = frozenset(
        k.strip() for k in (noncontact_keywords or "").split(",") if k.strip()
    )
    rules = tuple(_parse_list_reference(store, email, ref) for ref in list_refs)
    return PermissionTuple(
        read_contacts=read_contacts,
        read_contacts_keyword=bool(contact_kw),
        contact_keywords=contact_kw,
        send_contacts=send_contacts,
        read_noncontacts=read_noncontacts,
        read_noncontacts_keyword=bool(noncontact_kw),
        noncontact_keywords=noncontact_kw,
        send_noncontacts=send_noncontacts,
        delete_allowed=allow_delete,
        mark_unread_allowed=allow_mark_unread,
        spoof_owner_view=spoof,
        list_rules=rules,
    )


def _tuple_flag_options(fn):
    options = [
        click.option("--read-contacts", is_flag=True, help="Read mail from contacts."),
        click.option(
            "--read-contacts-keyword",
            "contact_keywords",
            default=None,
            help="Comma-separated subject keywords unlocking contact mail.",
        ),
        click.option("--send-contacts", is_flag=True, help="Send/reply to contacts."),
        click.option("--read-noncontacts", is_flag=True, help="Read mail from non-contacts."),
        click.option(
            "--read-noncontacts-keyword",
            "noncontact_keywords",
            default=None,
            help="Comma-separated subject keywords unlocking non-contact mail.",
        ),
        click.option("--send-noncontacts", is_flag=True, help="Send/reply to non-contacts."),
        click.option("--allow-delete", is_flag=True, help="Allow deleting messages."),
        click.option("--allow-mark-unread", is_flag=True, help="Allow marking unread."),
        click.option("--spoof", is_flag=True, help="Dress the view up as the owner's own."),
        click.option(
            "--list",
            "list_refs",
            multiple=True,
            help="Reference a list: NAME[:R,S[:kw1,kw2]]; defaults to the stored triple.",
        ),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


@main.group()
def subuser() -> None:
    """Sub-user (extra password) management."""


@subuser.command("add")
@click.argument("name")
@data_option
@account_option
@owner_password_option
@click.option("--password", default=None, help="Sub-user password (see also --generate).")
@click.option("--generate", is_flag=True, help="Generate and print the password once.")
@_tuple_flag_options
def subuser_add(
    name, data_dir, account, owner_password, password, generate, **tuple_flags
) -> None:
    """Create a sub-user with the given permission flags."""
    store = _open_store(data_dir)
    email = _resolve_account(store, account)
    session = _owner_login(store, email, owner_password)
    if generate:
        password = generate_subuser_password()
    if password is None:
        password = click.prompt("Sub-user password", hide_input=True, confirmation_prompt=True)
    try:
        permissions = _tuple_from_flags(store, email, **tuple_flags)
        store.add_subuser(session, name, password, permissions)
    except (StoreError, PolicyError) as exc:
        _fail(str(exc))
        return
    _warn_all_zero_lists(permissions)
    click.echo(f"created sub-user {name}")
    if generate:
        click.echo(f"password (shown once): {password}")


@subuser.command("rm")
@click.argument("name")
@data_option
@account_option
@owner_password_option
def subuser_rm(name, data_dir, account, owner_password) -> None:
    """Delete a sub-user; its password and sessions stop working immediately."""
    store = _open_store(data_dir)
    email = _resolve_account(store, account)
    session = _owner_login(store, email, owner_password)
    try:
        store.delete_subuser(session, name)
    except StoreError as exc:
        _fail(str(exc))
        return
    click.echo(f"deleted sub-user {name}")


@subuser.command("show")
@click.argument("name", required=False)
@data_option
@account_option
@owner_password_option
@json_option
def subuser_show(name, data_dir, account, owner_password, as_json) -> None:
    """Show one sub-user's permissions, or list them all."""
    store = _open_store(data_dir)
    email = _resolve_account(store, account)
    _owner_login(store, email, owner_password)
    config = store.get_config(email)
    if name is not None and name not in config.sub_users:
        _fail(f"unknown sub-user: {name}")
    names = [name] if name else sorted(config.sub_users)
    payload = [
        {
            "name": n,
            "created_at": config.sub_users[n].created_at.isoformat(),
            "permissions": tuple_to_dict(config.sub_users[n].permissions),
        }
        for n in names
    ]
    if as_json:
        click.echo(json.dumps(payload, indent=2))
        return
    for entry in payload:
        perms = entry["permissions"]
        grants = [k for k, v in perms.items() if v is True]
        lists = ", ".join(
            f"{r['name']}<{int(r['read'])},{int(r['send'])},{','.join(r['keywords']) or '-'}>"
            for r in perms["lists"]
        )
        click.echo(f"{entry['name']}: {', '.join(grants) or 'no grants'}"
                   + (f"; lists: {lists}" if lists else ""))


@subuser.command("passwd")
@click.argument("name")
@data_option
@account_option
@owner_password_option
@click.option("--password", default=None)
@click.option("--generate", is_flag=True, help="Generate and print the new password once.")
def subuser_passwd(name, data_dir, account, owner_password, password, generate) -> None:
    """Rotate a sub-user's password."""
    store = _open_store(data_dir)
    email = _resolve_account(store, account)
    session = _owner_login(store, email, owner_password)
    if generate:
        password = generate_subuser_password()
    if password is None:
        password = click.prompt("New sub-user password", hide_input=True, confirmation_prompt=True)
    try:
        store.update_subuser(session, name, password=password)
    except StoreError as exc:
        _fail(str(exc))
        return
    click.echo(f"updated password for {name}")
    if generate:
        click.echo(f"password (shown once): {password}")


# --- lists ------------------------------------------------------------------------------

@main.group(name="list")
def list_group() -> None:
    """Named address list management."""


@list_group.command("add")
@click.argument("name")
@data_option
@account_option
@owner_password_option
@click.option("--members", required=True, help="Comma-separated email addresses.")
@click.option("--read", "read_flag", is_flag=True, help="Default read grant (off by default).")
@click.option("--send", "send_flag", is_flag=True, help="Default send grant (off by default).")
@click.option("--keywords", default=None, help="Comma-separated default subject keywords.")
def list_add(name, data_dir, account, owner_password, members, read_flag, send_flag, keywords) -> None:
    """Create or replace a list; its default triple is <0,0,-> unless flags say otherwise."""
    store = _open_store(data_dir)
    email = _resolve_account(store, account)
    session = _owner_login(store, email, owner_password)
    member_set = frozenset(m.strip() for m in members.split(",") if m.strip())
    keyword_set = frozenset(k.strip() for k in (keywords or "").split(",") if k.strip())
    rule = ListRule(name, member_set, read_flag, send_flag, keyword_set)
    try:
        store.put_list(session, rule)
    except (StoreError, PolicyError) as exc:
        _fail(str(exc))
        return
    if not read_flag and not send_flag and not keyword_set:
        click.echo(
            f"note: list '{name}' stored with all-zero default permissions; "
            "sub-users referencing it without an explicit triple deny its members",
            err=True,
        )
    click.echo(f"stored list {name} ({len(member_set)} members)")


@list_group.command("rm")
@click.argument("name")
@data_option
@account_option
@owner_password_option
def list_rm(name, data_dir, account, owner_password) -> None:
    """Delete a list; it disappears from every sub-user that referenced it."""
    store = _open_store(data_dir)
    email = _resolve_account(store, account)
    session = _owner_login(store, email, owner_password)
    try:
        store.delete_list(session, name)
    except StoreError as exc:
        _fail(str(exc))
        return
    click.echo(f"deleted list {name}")


@list_group.command("show")
@click.argument("name", required=False)
@data_option
@account_option
@owner_password_option
@json_option
def list_show(name, data_dir, account, owner_password, as_json) -> None:
    """Show one list, or all of them."""
    store = _open_store(data_dir)
    email = _resolve_account(store, account)
    _owner_login(store, email, owner_password)
    config = store.get_config(email)
    if name is not None and name not in config.lists:
        _fail(f"unknown list: {name}")
    names = [name] if name else sorted(config.lists)
    payload = [list_rule_to_dict(config.lists[n]) for n in names]
    if as_json:
        click.echo(json.dumps(payload, indent=2))
        return
    for entry in payload:
        click.echo(
            f"{entry['name']}: {len(entry['members'])} members, "
            f"default <{int(entry['read'])},{int(entry['send'])},"
            f"{','.join(entry['keywords']) or '-'}>"
        )


# --- contacts ------------------------------------------------------------------------------

@main.group()
def contact() -> None:
    """Contact management."""


@contact.command("import")
@click.argument("addresses", nargs=-1, required=True)
@data_option
@account_option
@owner_password_option
def contact_import(addresses, data_dir, account, owner_password) -> None:
    """Add addresses to the owner's contact set."""
    store = _open_store(data_dir)
    email = _resolve_account(store, account)
    session = _owner_login(store, email, owner_password)
    try:
        added = store.import_contacts(session, addresses)
    except (StoreError, PolicyError) as exc:
        _fail(str(exc))
        return
    click.echo(f"imported {added} new contact(s)")


@contact.command("show")
@data_option
@account_option
@owner_password_option
@json_option
def contact_show(data_dir, account, owner_password, as_json) -> None:
    """List the owner's contacts."""
    store = _open_store(data_dir)
    email = _resolve_account(store, account)
    _owner_login(store, email, owner_password)
    contacts = sorted(store.get_config(email).contacts)
    if as_json:
        click.echo(json.dumps(contacts, indent=2))
    else:
        for address in contacts:
            click.echo(address)


if __name__ == "__main__":
    main()
