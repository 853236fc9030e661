from __future__ import annotations

import base64
import json
import os
import signal
import socket
import subprocess
import sys
import time
import urllib.request
from pathlib import Path

import pytest
from click.testing import CliRunner

from mailshade import fixtures
from mailshade.cli import main, run_task_verification
from mailshade.store import AccountStore
from conftest import FAST_KDF, TEST_KEY


@pytest.fixture()
def runner() -> CliRunner:
    return CliRunner(env={"MAILSHADE_KEY": TEST_KEY})


@pytest.fixture()
def data_dir(tmp_path) -> Path:
    return tmp_path / "data"


def invoke(runner, args, **kwargs):
    result = runner.invoke(main, args, **kwargs)
    return result


def load_fixture(runner, data_dir, *extra):
    result = invoke(runner, ["fixture", "load", "bob-scenario", "--data", str(data_dir), *extra])
    assert result.exit_code == 0, result.output
    return result


def read_config(data_dir) -> dict:
    path = data_dir / fixtures.OWNER_EMAIL / "config.json"
    return json.loads(path.read_text())


# --- key and fixture loading -------------------------------------------------

def test_key_generate_emits_32_byte_key(runner):
    result = invoke(runner, ["key", "generate"])
    assert result.exit_code == 0
    assert len(base64.urlsafe_b64decode(result.output.strip())) == 32


def test_fixture_load_creates_account_contacts_mailbox(runner, data_dir):
    load_fixture(runner, data_dir)
    config = read_config(data_dir)
    assert config["email"] == fixtures.OWNER_EMAIL
    assert len(config["contacts"]) == 6
    mailbox = json.loads((data_dir / fixtures.OWNER_EMAIL / "mailbox.json").read_text())
    assert len(mailbox) == 10


def test_fixture_reload_requires_force(runner, data_dir):
    load_fixture(runner, data_dir)
    again = invoke(runner, ["fixture", "load", "bob-scenario", "--data", str(data_dir)])
    assert again.exit_code == 3
    assert "force" in again.stderr
    load_fixture(runner, data_dir, "--force")


def test_fixture_load_is_deterministic_modulo_salts(runner, data_dir):
    load_fixture(runner, data_dir)
    first_config = read_config(data_dir)
    first_mailbox = (data_dir / fixtures.OWNER_EMAIL / "mailbox.json").read_bytes()
    load_fixture(runner, data_dir, "--force")
    second_config = read_config(data_dir)
    second_mailbox = (data_dir / fixtures.OWNER_EMAIL / "mailbox.json").read_bytes()

    assert first_mailbox == second_mailbox
    salted = ("owner_password_hash", "upstream_credential")
    for field in salted:
        assert first_config.pop(field) != second_config.pop(field)
    assert first_config == second_config


def test_unknown_scenario_is_usage_error(runner, data_dir):
    result = invoke(runner, ["fixture", "load", "carol-scenario", "--data", str(data_dir)])
    assert result.exit_code == 2


def test_missing_key_fails_cleanly(data_dir):
    runner = CliRunner(env={"MAILSHADE_KEY": None})
    result = runner.invoke(main, ["fixture", "load", "bob-scenario", "--data", str(data_dir)])
    assert result.exit_code == 3
    assert "MAILSHADE_KEY" in result.stderr


# --- verify-task ----------------------------------------------------------------

def test_verify_all_five_tasks_pass(runner, data_dir):
    load_fixture(runner, data_dir)
    for task in (1, 2, 3, 4, 5):
        result = invoke(runner, ["verify-task", str(task), "--data", str(data_dir)])
        assert result.exit_code == 0, result.output
        assert "PASS" in result.output


def test_verify_task_json_reports_exact_sets(runner, data_dir):
    load_fixture(runner, data_dir)
    result = invoke(runner, ["verify-task", "2", "--data", str(data_dir), "--json"])
    payload = json.loads(result.output)
    assert payload["passed"] is True
    assert payload["actual"] == payload["expected"] == ["m03", "m05", "m08"]


def test_verify_task_range_is_usage_checked(runner, data_dir):
    result = invoke(runner, ["verify-task", "9", "--data", str(data_dir)])
    assert result.exit_code == 2


def test_cli_verification_matches_programmatic_outcome(runner, data_dir, tmp_path):
    load_fixture(runner, data_dir)
    cli_results = {}
    for task in (1, 2, 3, 4, 5):
        result = invoke(runner, ["verify-task", str(task), "--data", str(data_dir), "--json"])
        cli_results[task] = json.loads(result.output)["passed"]

    store = AccountStore(tmp_path / "direct", key=TEST_KEY, kdf=FAST_KDF)
    fixtures.load_bob_scenario(store)
    session = store.authenticate(fixtures.OWNER_EMAIL, fixtures.DEFAULT_OWNER_PASSWORD)
    direct_results = {
        task: run_task_verification(store, fixtures.OWNER_EMAIL, session, task)["passed"]
        for task in (1, 2, 3, 4, 5)
    }
    assert cli_results == direct_results == {t: True for t in (1, 2, 3, 4, 5)}


# --- sub-user / list / contact subcommands -------------------------------------------

OWNER_ARGS = ["--owner-password", fixtures.DEFAULT_OWNER_PASSWORD]


def test_subuser_add_builds_expected_tuple(runner, data_dir):
    load_fixture(runner, data_dir)
    result = invoke(
        runner,
        ["subuser", "add", "Amy", "--data", str(data_dir), *OWNER_ARGS,
         "--password", "amy-task1-password", "--read-contacts", "--read-noncontacts"],
    )
    assert result.exit_code == 0, result.output
    stored = read_config(data_dir)["sub_users"]["Amy"]["permissions"]
    assert stored["read_contacts"] and stored["read_noncontacts"]
    assert not stored["send_contacts"] and not stored["delete_allowed"]
    assert stored["lists"] == []


def test_subuser_add_duplicate_password_exits_3(runner, data_dir):
    load_fixture(runner, data_dir)
    invoke(
        runner,
        ["subuser", "add", "Amy", "--data", str(data_dir), *OWNER_ARGS,
         "--password", "amy-task1-password", "--read-contacts"],
    )
    result = invoke(
        runner,
        ["subuser", "add", "Amy2", "--data", str(data_dir), *OWNER_ARGS,
         "--password", "amy-task1-password"],
    )
    assert result.exit_code == 3
    assert "password" in result.stderr.lower()


def test_subuser_add_generate_prints_password_once(runner, data_dir):
    load_fixture(runner, data_dir)
    result = invoke(
        runner,
        ["subuser", "add", "Gen", "--data", str(data_dir), *OWNER_ARGS,
         "--generate", "--read-contacts"],
    )
    assert result.exit_code == 0
    line = next(l for l in result.output.splitlines() if "shown once" in l)
    password = line.split(":", 1)[1].strip()
    store = AccountStore(data_dir, key=TEST_KEY)
    assert store.authenticate(fixtures.OWNER_EMAIL, password).subuser == "Gen"


def test_keyword_flags_build_keyword_tuple(runner, data_dir):
    load_fixture(runner, data_dir)
    result = invoke(
        runner,
        ["subuser", "add", "Stuart", "--data", str(data_dir), *OWNER_ARGS,
         "--password", "stuart-task4-pw",
         "--read-contacts-keyword", "accounts",
         "--read-noncontacts-keyword", "accounts"],
    )
    assert result.exit_code == 0, result.output
    stored = read_config(data_dir)["sub_users"]["Stuart"]["permissions"]
    assert stored["read_contacts_keyword"] and stored["contact_keywords"] == ["accounts"]
    assert stored["read_noncontacts_keyword"] and stored["noncontact_keywords"] == ["accounts"]


def test_list_add_defaults_all_zero_with_note(runner, data_dir):
    load_fixture(runner, data_dir)
    result = invoke(
        runner,
        ["list", "add", "family", "--data", str(data_dir), *OWNER_ARGS,
         "--members", f"{fixtures.WIFE},{fixtures.SON}"],
    )
    assert result.exit_code == 0
    assert "all-zero" in result.stderr
    stored = read_config(data_dir)["lists"]["family"]
    assert stored["read"] is False and stored["send"] is False
    assert sorted(stored["members"]) == sorted([fixtures.WIFE, fixtures.SON])


def test_subuser_referencing_all_zero_list_warns(runner, data_dir):
    load_fixture(runner, data_dir)
    invoke(
        runner,
        ["list", "add", "family", "--data", str(data_dir), *OWNER_ARGS,
         "--members", f"{fixtures.WIFE},{fixtures.SON}"],
    )
    result = invoke(
        runner,
        ["subuser", "add", "Howard", "--data", str(data_dir), *OWNER_ARGS,
         "--password", "howard-task3-pw", "--read-contacts", "--read-noncontacts",
         "--list", "family"],
    )
    assert result.exit_code == 0, result.output
    assert "all-zero" in result.stderr
    stored = read_config(data_dir)["sub_users"]["Howard"]["permissions"]["lists"]
    assert stored[0]["name"] == "family" and stored[0]["read"] is False


def test_list_reference_with_explicit_triple(runner, data_dir):
    load_fixture(runner, data_dir)
    invoke(
        runner,
        ["list", "add", "collaborators", "--data", str(data_dir), *OWNER_ARGS,
         "--members", ",".join(fixtures.COLLABORATORS)],
    )
    result = invoke(
        runner,
        ["subuser", "add", "Penny", "--data", str(data_dir), *OWNER_ARGS,
         "--password", "penny-task2-pw", "--list", "collaborators:1,0"],
    )
    assert result.exit_code == 0, result.output
    stored = read_config(data_dir)["sub_users"]["Penny"]["permissions"]["lists"][0]
    assert stored["read"] is True and stored["send"] is False


def test_subuser_rm_is_not_idempotent_but_reports(runner, data_dir):
    load_fixture(runner, data_dir)
    invoke(
        runner,
        ["subuser", "add", "Howard", "--data", str(data_dir), *OWNER_ARGS,
         "--password", "howard-task3-pw"],
    )
    first = invoke(runner, ["subuser", "rm", "Howard", "--data", str(data_dir), *OWNER_ARGS])
    assert first.exit_code == 0
    second = invoke(runner, ["subuser", "rm", "Howard", "--data", str(data_dir), *OWNER_ARGS])
    assert second.exit_code == 3
    assert "Howard" in second.stderr


def test_subuser_show_json(runner, data_dir):
    load_fixture(runner, data_dir)
    invoke(
        runner,
        ["subuser", "add", "Amy", "--data", str(data_dir), *OWNER_ARGS,
         "--password", "amy-task1-password", "--read-contacts"],
    )
    result = invoke(runner, ["subuser", "show", "--data", str(data_dir), *OWNER_ARGS, "--json"])
    payload = json.loads(result.output)
    assert payload[0]["name"] == "Amy"
    assert payload[0]["permissions"]["read_contacts"] is True
    assert "password" not in json.dumps(payload)


def test_contact_import_and_show(runner, data_dir):
    load_fixture(runner, data_dir)
    result = invoke(
        runner,
        ["contact", "import", "new.person@example.com", "--data", str(data_dir), *OWNER_ARGS],
    )
    assert result.exit_code == 0 and "1 new" in result.output
    bad = invoke(runner, ["contact", "import", "nope", "--data", str(data_dir), *OWNER_ARGS])
    assert bad.exit_code == 3
    shown = invoke(runner, ["contact", "show", "--data", str(data_dir), *OWNER_ARGS, "--json"])
    assert "new.person@example.com" in json.loads(shown.output)


def test_account_show(runner, data_dir):
    load_fixture(runner, data_dir)
    result = invoke(runner, ["account", "show", "--data", str(data_dir), "--json"])
    payload = json.loads(result.output)
    assert payload["email"] == fixtures.OWNER_EMAIL
    assert len(payload["contacts"]) == 6


def test_wrong_owner_password_exits_3(runner, data_dir):
    load_fixture(runner, data_dir)
    result = invoke(
        runner,
        ["subuser", "show", "--data", str(data_dir), "--owner-password", "wrong-password"],
    )
    assert result.exit_code == 3


# --- serve ------------------------------------------------------------------------

def _free_port() -> int:
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        return probe.getsockname()[1]


def test_serve_reports_addr_in_use(runner, data_dir):
    data_dir.mkdir(parents=True)
    blocker = socket.socket()
    try:
        blocker.bind(("127.0.0.1", 0))
        port = blocker.getsockname()[1]
        result = invoke(
            runner, ["serve", "--addr", f"127.0.0.1:{port}", "--data", str(data_dir)]
        )
        assert result.exit_code == 3
        assert "in use" in result.stderr
    finally:
        blocker.close()


def test_serve_requires_key(data_dir):
    runner = CliRunner(env={"MAILSHADE_KEY": None})
    result = runner.invoke(
        main, ["serve", "--addr", f"127.0.0.1:{_free_port()}", "--data", str(data_dir)]
    )
    assert result.exit_code == 3


def test_serve_answers_health_checks(tmp_path):
    data = tmp_path / "data"
    env = {**os.environ, "MAILSHADE_KEY": TEST_KEY}
    subprocess.run(
        [sys.executable, "-m", "mailshade.cli", "fixture", "load", "bob-scenario",
         "--data", str(data)],
        env=env, check=True, capture_output=True,
    )
    port = _free_port()
    proc = subprocess.Popen(
        [sys.executable, "-m", "mailshade.cli", "serve",
         "--addr", f"127.0.0.1:{port}", "--data", str(data)],
        env=env, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL,
    )
    try:
        deadline = time.time() + 15
        body = None
        while time.time() < deadline:
            try:
                with urllib.request.urlopen(f"http://127.0.0.1:{port}/health", timeout=1) as rsp:
                    body = json.loads(rsp.read())
                    break
            except OSError:
                time.sleep(0.2)
        assert body == {"status": "ok"}
    finally:
        proc.send_signal(signal.SIGTERM)
        assert proc.wait(timeout=10) is not None
