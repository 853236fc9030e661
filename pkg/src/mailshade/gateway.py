"""The network-facing gateway: HTTP/1.1 + JSON over the policy engine.

Any (email, password) pair logs in at ``POST /session``; the resulting
bearer token resolves to the owner or to one sub-user, and every mailbox
route filters, gates, and audits through ``policy`` and ``store``.  Hidden
messages 404 exactly like nonexistent ones, so probing ids reveals nothing.

Owner-only surface: ``/config/subusers``, ``/config/lists``,
``/contacts/import``, ``/activity``, and the what-if ``/preview`` routes
(which create no sessions, mark nothing read, and write no audit events).
"""

from __future__ import annotations

from datetime import datetime
from typing import Callable

from fastapi import Body, Depends, FastAPI, Header, Query, Request
from fastapi.exceptions import HTTPException, RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, RedirectResponse

from .mailstore import (
    BadCredential,
    DraftMessage,
    MailstoreError,
    UnknownMessage,
    UpstreamMailbox,
    UpstreamUnavailable,
)
from .policy import (
    InvalidTuple,
    MalformedAddress,
    MessageRecord,
    PermissionTuple,
    PolicyError,
    action_allowed,
    advertised_capabilities,
    capabilities_for,
    capabilities_to_dict,
    filter_mailbox,
    list_rule_from_dict,
    list_rule_to_dict,
    message_visible,
    normalize_address,
    send_allowed,
    tuple_from_dict,
    tuple_to_dict,
)
from .store import (
    AccountStore,
    AuthenticationFailed,
    DuplicateAccount,
    DuplicateName,
    DuplicatePassword,
    EmptyMembers,
    NotOwner,
    Session,
    StoreError,
    UnknownList,
    UnknownSubUser,
    WeakPassword,
    generate_subuser_password,
)

BackendProvider = Callable[[str], UpstreamMailbox]


def _error(status: int, code: str, message: str, **extra) -> HTTPException:
    return HTTPException(status_code=status, detail={"error": code, "message": message, **extra})


_STORE_ERROR_STATUS: tuple[tuple[type, int], ...] = (
    (AuthenticationFailed, 401),
    (NotOwner, 403),
    (DuplicateName, 409),
    (DuplicatePassword, 409),
    (DuplicateAccount, 409),
    (UnknownSubUser, 404),
    (UnknownList, 404),
    (WeakPassword, 422),
    (EmptyMembers, 422),
    (InvalidTuple, 422),
    (MalformedAddress, 422),
    (BadCredential, 502),
    (UpstreamUnavailable, 502),
)


def _status_for(exc: Exception) -> int:
    for kind, status in _STORE_ERROR_STATUS:
        if isinstance(exc, kind):
            return status
    return 500


def summaries(messages: list[MessageRecord]) -> list[dict]:
    return [
        {
            "id": m.id,
            "sender": m.sender,
            "subject": m.subject,
            "timestamp": m.timestamp.isoformat(),
            "unread": m.unread,
        }
        for m in messages
    ]


def visible_for_subuser(
    messages: list[MessageRecord], permissions: PermissionTuple, contacts
) -> list[MessageRecord]:
    return filter_mailbox(messages, permissions, contacts)


def create_app(store: AccountStore, backends: BackendProvider) -> FastAPI:
    app = FastAPI(title="mailshade gateway", docs_url=None, redoc_url=None)
    # The admin console is served from elsewhere; auth is bearer-token, not
    # cookie-based, so a permissive CORS policy adds no ambient authority.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(HTTPException)
    async def _http_error(request: Request, exc: HTTPException):
        detail = exc.detail if isinstance(exc.detail, dict) else {"error": str(exc.detail)}
        return JSONResponse(status_code=exc.status_code, content=detail)

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={"error": "InvalidRequest", "message": str(exc.errors()[:1])},
        )

    @app.exception_handler(StoreError)
    async def _store_error(request: Request, exc: StoreError):
        status = _status_for(exc)
        code = type(exc).__name__
        if status == 401:
            return JSONResponse(
                status_code=401,
                content={"error": "AuthenticationFailed", "message": "invalid credentials"},
            )
        return JSONResponse(status_code=status, content={"error": code, "message": str(exc)})

    @app.exception_handler(PolicyError)
    async def _policy_error(request: Request, exc: PolicyError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={"error": type(exc).__name__, "message": str(exc)},
        )

    @app.exception_handler(MailstoreError)
    async def _mailstore_error(request: Request, exc: MailstoreError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={"error": type(exc).__name__, "message": str(exc)},
        )

    def current_session(authorization: str | None = Header(default=None)) -> Session:
        if not authorization or not authorization.startswith("Bearer "):
            raise _error(401, "AuthenticationFailed", "invalid credentials")
        return store.get_session(authorization.removeprefix("Bearer ").strip())

    def owner_session(session: Session = Depends(current_session)) -> Session:
        if not session.is_owner:
            raise _error(403, "NotOwner", "this feature belongs to the account owner")
        return session

    def _fetch_all(session: Session) -> list[MessageRecord]:
        backend = backends(session.email)
        return backend.fetch_messages(store.upstream_credential(session.email))

    def _subuser_permissions(session: Session) -> PermissionTuple:
        return store.get_config(session.email).sub_users[session.subuser].permissions

    def _role_display(session: Session) -> str:
        if session.is_owner:
            return session.email
        if _subuser_permissions(session).spoof_owner_view:
            return session.email  # masquerade as the owner's own mailbox
        return session.subuser or ""

    # -- sessions ---------------------------------------------------------

    @app.post("/session")
    def open_session(payload: dict = Body(...)):
        email = str(payload.get("email", ""))
        password = str(payload.get("password", ""))
        session = store.authenticate(email, password)
        return {
            "token": session.token,
            "role_kind": session.role_kind,
            "capabilities": advertised_capabilities(session.capabilities),
        }

    # -- mailbox ----------------------------------------------------------

    @app.get("/mailbox")
    def mailbox(
        session: Session = Depends(current_session),
        include_deleted: bool = Query(default=False),
    ):
        messages = _fetch_all(session)
        if session.is_owner:
            if not include_deleted:
                messages = [m for m in messages if not m.deleted]
        else:
            config = store.get_config(session.email)
            messages = visible_for_subuser(
                messages, _subuser_permissions(session), config.contacts
            )
        store.record_event(session.email, session.role_name, "view", "mailbox", "ok")
        return {
            "role": _role_display(session),
            "role_kind": session.role_kind,
            "capabilities": advertised_capabilities(session.capabilities),
            "messages": summaries(messages),
        }

    def _visible_message(session: Session, message_id: str) -> MessageRecord:
        """The message, if this role may see it; hidden and missing look alike."""
        for message in _fetch_all(session):
            if message.id != message_id:
                continue
            if session.is_owner:
                return message
            config = store.get_config(session.email)
            if message_visible(message, _subuser_permissions(session), config.contacts):
                return message
            break
        raise _error(404, "NotFound", "no such message")

    @app.get("/messages/{message_id}")
    def read_message(message_id: str, session: Session = Depends(current_session)):
        message = _visible_message(session, message_id)
        if message.unread:
            backends(session.email).set_unread(
                store.upstream_credential(session.email), message_id, False
            )
        store.record_event(session.email, session.role_name, "read", message_id, "ok")
        return {
            "id": message.id,
            "sender": message.sender,
            "recipients": sorted(message.recipients),
            "subject": message.subject,
            "body": message.body,
            "timestamp": message.timestamp.isoformat(),
            "unread": False,
        }

    @app.post("/messages")
    def send_message(payload: dict = Body(...), session: Session = Depends(current_session)):
        raw_to = payload.get("to") or []
        if not isinstance(raw_to, list) or not raw_to:
            raise _error(422, "InvalidRequest", "'to' must be a non-empty array")
        recipients = frozenset(normalize_address(r) for r in raw_to)
        subject = str(payload.get("subject", ""))
        body = str(payload.get("body", ""))

        if not session.is_owner:
            config = store.get_config(session.email)
            decision = send_allowed(recipients, _subuser_permissions(session), config.contacts)
            if not decision.allowed:
                denied = [
                    {"recipient": d.recipient, "reason": d.reason} for d in decision.denials
                ]
                if session.capabilities.compose == "dummy":
                    # The spoofed compose affordance: pretend nothing happened.
                    store.record_event(
                        session.email, session.role_name, "denied_action", "send", "dummy"
                    )
                    return RedirectResponse(url="/mailbox", status_code=303)
                store.record_event(
                    session.email, session.role_name, "denied_action", "send", "denied"
                )
                raise _error(403, "PolicyDenied", "send not permitted", denied=denied)

        draft = DraftMessage(recipients=recipients, subject=subject, body=body)
        message_id = backends(session.email).submit_message(
            store.upstream_credential(session.email), draft
        )
        store.record_event(session.email, session.role_name, "send", message_id, "ok")
        return {"id": message_id}

    @app.delete("/messages/{message_id}")
    def delete_message(message_id: str, session: Session = Depends(current_session)):
        _visible_message(session, message_id)
        if not session.is_owner and not action_allowed(
            "delete", _subuser_permissions(session)
        ):
            store.record_event(
                session.email, session.role_name, "denied_action", f"delete:{message_id}", "denied"
            )
            raise _error(403, "PolicyDenied", "deleting messages is not permitted")
        backends(session.email).delete_message(
            store.upstream_credential(session.email), message_id
        )
        store.record_event(session.email, session.role_name, "delete", message_id, "ok")
        return {"deleted": message_id}

    @app.post("/messages/{message_id}/unread")
    def mark_unread(
        message_id: str,
        payload: dict | None = Body(default=None),
        session: Session = Depends(current_session),
    ):
        unread = True if payload is None else bool(payload.get("unread", True))
        _visible_message(session, message_id)
        if not session.is_owner and not action_allowed(
            "mark_unread", _subuser_permissions(session)
        ):
            store.record_event(
                session.email, session.role_name, "denied_action",
                f"mark_unread:{message_id}", "denied",
            )
            raise _error(403, "PolicyDenied", "marking messages unread is not permitted")
        backends(session.email).set_unread(
            store.upstream_credential(session.email), message_id, unread
        )
        store.record_event(session.email, session.role_name, "mark_unread", message_id, "ok")
        return {"id": message_id, "unread": unread}

    # -- owner configuration ------------------------------------------------

    def _subuser_payload(name: str, config) -> dict:
        sub = config.sub_users[name]
        return {
            "name": sub.name,
            "created_at": sub.created_at.isoformat(),
            "permissions": tuple_to_dict(sub.permissions),
        }

    @app.get("/config/subusers")
    def list_subusers(session: Session = Depends(owner_session)):
        config = store.get_config(session.email)
        return {"subusers": [_subuser_payload(n, config) for n in sorted(config.sub_users)]}

    @app.get("/config/subusers/{name}")
    def get_subuser(name: str, session: Session = Depends(owner_session)):
        config = store.get_config(session.email)
        if name not in config.sub_users:
            raise _error(404, "UnknownSubUser", name)
        return _subuser_payload(name, config)

    @app.put("/config/subusers/{name}")
    def put_subuser(
        name: str, payload: dict = Body(...), session: Session = Depends(owner_session)
    ):
        raw_permissions = payload.get("permissions")
        password = payload.get("password")
        config = store.get_config(session.email)
        if name in config.sub_users:
            store.update_subuser(
                session,
                name,
                permissions=tuple_from_dict(raw_permissions) if raw_permissions is not None else None,
                password=str(password) if password is not None else None,
            )
        else:
            if not password:
                raise _error(422, "InvalidRequest", "creating a sub-user requires a password")
            store.add_subuser(session, name, str(password), tuple_from_dict(raw_permissions or {}))
        return _subuser_payload(name, store.get_config(session.email))

    @app.delete("/config/subusers/{name}")
    def delete_subuser(name: str, session: Session = Depends(owner_session)):
        store.delete_subuser(session, name)
        return {"deleted": name}

    @app.get("/config/lists")
    def list_lists(session: Session = Depends(owner_session)):
        config = store.get_config(session.email)
        return {"lists": [list_rule_to_dict(config.lists[n]) for n in sorted(config.lists)]}

    @app.get("/config/lists/{name}")
    def get_list(name: str, session: Session = Depends(owner_session)):
        config = store.get_config(session.email)
        if name not in config.lists:
            raise _error(404, "UnknownList", name)
        return list_rule_to_dict(config.lists[name])

    @app.put("/config/lists/{name}")
    def put_list(name: str, payload: dict = Body(...), session: Session = Depends(owner_session)):
        rule = list_rule_from_dict({**payload, "name": name})
        stored = store.put_list(session, rule)
        return list_rule_to_dict(stored)

    @app.delete("/config/lists/{name}")
    def delete_list(name: str, session: Session = Depends(owner_session)):
        store.delete_list(session, name)
        return {"deleted": name}

    @app.post("/contacts/import")
    def import_contacts(payload: dict = Body(...), session: Session = Depends(owner_session)):
        addresses = payload.get("addresses") or []
        if not isinstance(addresses, list):
            raise _error(422, "InvalidRequest", "'addresses' must be an array")
        added = store.import_contacts(session, addresses)
        return {"added": added}

    @app.get("/contacts")
    def list_contacts(session: Session = Depends(owner_session)):
        return {"contacts": sorted(store.get_config(session.email).contacts)}

    @app.post("/config/passwords")
    def suggest_password(session: Session = Depends(owner_session)):
        return {"password": generate_subuser_password()}

    @app.get("/activity")
    def activity(
        session: Session = Depends(owner_session),
        since: str | None = Query(default=None),
        until: str | None = Query(default=None),
        role: str | None = Query(default=None),
    ):
        def parse(stamp: str | None) -> datetime | None:
            if stamp is None:
                return None
            try:
                return datetime.fromisoformat(stamp.replace("Z", "+00:00"))
            except ValueError:
                raise _error(422, "InvalidRequest", f"bad timestamp: {stamp!r}")

        events = store.query_activity(
            session, since=parse(since), until=parse(until), role=role
        )
        return {"events": [e.to_dict() for e in events]}

    # -- preview (what-if views; no sessions, no audit, no read marks) --------

    def _preview_response(session: Session, permissions: PermissionTuple, label: str) -> dict:
        config = store.get_config(session.email)
        messages = [m for m in _fetch_all(session) if not m.deleted]
        view = visible_for_subuser(messages, permissions, config.contacts)
        return {
            "subuser": label,
            "capabilities": capabilities_to_dict(capabilities_for(permissions)),
            "messages": summaries(view),
        }

    @app.get("/preview")
    def preview_saved(
        subuser: str = Query(...), session: Session = Depends(owner_session)
    ):
        config = store.get_config(session.email)
        if subuser not in config.sub_users:
            raise _error(404, "UnknownSubUser", subuser)
        return _preview_response(session, config.sub_users[subuser].permissions, subuser)

    @app.post("/preview")
    def preview_pending(payload: dict = Body(...), session: Session = Depends(owner_session)):
        permissions = tuple_from_dict(payload.get("permissions") or {})
        # resolve list references against the account pool, exactly as a save would
        materialized = store.materialize_permissions(session.email, permissions)
        return _preview_response(
            session, materialized, str(payload.get("name", "(pending)"))
        )

    @app.get("/health")
    def health():
        return {"status": "ok"}

    return app
