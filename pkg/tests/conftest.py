from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from mailshade import fixtures
from mailshade.gateway import create_app
from mailshade.mailstore import FixtureBackends
from mailshade.store import AccountStore, ScryptParams, generate_server_key

# Low-cost hashing so suites that create many roles stay fast; the encoded
# hash carries its parameters, so nothing else changes.
FAST_KDF = ScryptParams(log2_n=4)

TEST_KEY = generate_server_key()


@pytest.fixture()
def store(tmp_path) -> AccountStore:
    return AccountStore(tmp_path / "data", key=TEST_KEY, kdf=FAST_KDF)


@pytest.fixture()
def bob_store(store) -> AccountStore:
    fixtures.load_bob_scenario(store)
    return store


@pytest.fixture()
def owner_session(bob_store):
    return bob_store.authenticate(fixtures.OWNER_EMAIL, fixtures.DEFAULT_OWNER_PASSWORD)


@pytest.fixture()
def app_client(bob_store) -> TestClient:
    backends = FixtureBackends(bob_store.data_dir, bob_store.upstream_credential)
    return TestClient(create_app(bob_store, backends))


def login(client: TestClient, password: str, email: str = fixtures.OWNER_EMAIL) -> str:
    response = client.post("/session", json={"email": email, "password": password})
    assert response.status_code == 200, response.text
    return response.json()["token"]


def bearer(token: str) -> dict[str, str]:
    return {"Authorization": f"Bearer {token}"}
