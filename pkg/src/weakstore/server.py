"""HTTP/JSON access to a shared store.

One store per server; clients hold opaque session tokens (header
``X-Session-Token``) mapping to store sessions.  Key-value endpoints
drive one transaction step each; ``/sql`` runs one statement against the
server's schema; ``/history`` dumps the full history for offline
checking.  A begin that must wait for another session's commit blocks
the request up to a configurable timeout and then returns 409.

Request handling is freely concurrent; all store access funnels through
the store's own begin-to-commit lock.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Optional

from .history import HistoryError
from .isolation import IsolationError
from .program import ProgramError
from .sql import DuplicateKey, SqlEngine, SqlError, SqlSyntaxError, SqlTypeError, UnknownColumn, UnknownTable
from .store import BeginTimeout, NoLiveTransaction, SessionHandle, Store, StoreConfig
from .history import LiveTransactionExists


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message
        super().__init__(message)


@dataclass
class ApiSession:
    token: str
    handle: SessionHandle
    expires_at: float


class StoreService:
    """Store + SQL engine + token table; the HTTP layer only routes."""

    def __init__(
        self,
        config: StoreConfig,
        begin_timeout: float = 30.0,
        session_ttl: float = 1800.0,
    ):
        self.config = config
        self.store = Store(config)
        self.engine = SqlEngine()
        self.begin_timeout = begin_timeout
        self.session_ttl = session_ttl
        self._sessions: dict[str, ApiSession] = {}
        self._mu = threading.Lock()

    # -- session lifecycle --------------------------------------------------

    def create_session(self) -> str:
        token = uuid.uuid4().hex
        with self._mu:
            self._sweep()
            self._sessions[token] = ApiSession(
                token, self.store.session(), time.monotonic() + self.session_ttl
            )
        return token

    def drop_session(self, token: str) -> None:
        session = self._resolve(token)
        if session.handle.live_txn is not None:
            raise ApiError(
                409,
                "live-transaction",
                "session holds a live transaction; commit before deleting it",
            )
        with self._mu:
            self._sessions.pop(token, None)

    def _resolve(self, token: Optional[str]) -> ApiSession:
        if not token:
            raise ApiError(400, "missing-token", "X-Session-Token header required")
        with self._mu:
            session = self._sessions.get(token)
            if session is None:
                raise ApiError(404, "unknown-session", f"no session for token {token!r}")
            session.expires_at = time.monotonic() + self.session_ttl
            return session

    def _sweep(self) -> None:
        now = time.monotonic()
        for token, session in list(self._sessions.items()):
            if session.expires_at < now and session.handle.live_txn is None:
                del self._sessions[token]

    # -- operations -----------------------------------------------------------

    def kv_begin(self, token: str) -> dict:
        session = self._resolve(token)
        txn = session.handle.begin(timeout=self.begin_timeout)
        return {"txn": txn}

    def kv_read(self, token: str, key: Any) -> dict:
        session = self._resolve(token)
        if not isinstance(key, str) or not key:
            raise ApiError(400, "bad-key", "key must be a non-empty string")
        return {"value": session.handle.read(key)}

    def kv_write(self, token: str, key: Any, value: Any) -> dict:
        session = self._resolve(token)
        if not isinstance(key, str) or not key:
            raise ApiError(400, "bad-key", "key must be a non-empty string")
        session.handle.write(key, value)
        return {"ok": True}

    def kv_commit(self, token: str) -> dict:
        session = self._resolve(token)
        session.handle.commit()
        return {"ok": True}

    def sql(self, token: str, query: Any) -> dict:
        session = self._resolve(token)
        if not isinstance(query, str) or not query.strip():
            raise ApiError(400, "bad-query", "query must be a non-empty string")
        result = self.engine.execute_text(session.handle, query)
        if isinstance(result, list):
            return {"rows": result}
        if isinstance(result, int):
            return {"count": result}
        return {"ok": True}

    def history_json(self) -> dict:
        with self.store._cond:
            return self.store.history.serialize()

    def config_json(self) -> dict:
        return {
            "isolation": self.store.level.name,
            "seed": self.config.seed,
            "latest_reads": self.config.latest_per_session,
            "delay_ms": self.config.delay_max_ms,
            "default_value": self.config.default_value,
        }


def _to_api_error(exc: Exception) -> ApiError:
    if isinstance(exc, ApiError):
        return exc
    if isinstance(exc, BeginTimeout):
        return ApiError(409, "begin-timeout", str(exc))
    if isinstance(exc, LiveTransactionExists):
        return ApiError(409, "live-transaction", str(exc))
    if isinstance(exc, NoLiveTransaction):
        return ApiError(409, "no-live-transaction", str(exc))
    if isinstance(exc, DuplicateKey):
        return ApiError(409, "duplicate-key", str(exc))
    if isinstance(exc, UnknownTable):
        return ApiError(400, "unknown-table", str(exc))
    if isinstance(exc, UnknownColumn):
        return ApiError(400, "unknown-column", str(exc))
    if isinstance(exc, SqlSyntaxError):
        return ApiError(400, "sql-syntax-error", str(exc))
    if isinstance(exc, SqlTypeError):
        return ApiError(400, "sql-type-error", str(exc))
    if isinstance(exc, (SqlError, HistoryError, IsolationError, ProgramError)):
        return ApiError(400, "bad-request", str(exc))
    return ApiError(500, "internal-error", f"{type(exc).__name__}: {exc}")


class _Handler(BaseHTTPRequestHandler):
    service: StoreService  # set on the subclass by make_server

    protocol_version = "HTTP/1.1"

    def log_message(self, format, *args):  # silence default stderr chatter
        pass

    # -- plumbing -----------------------------------------------------------

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if length == 0:
            return {}
        raw = self.rfile.read(length)
        try:
            data = json.loads(raw)
        except json.JSONDecodeError:
            raise ApiError(400, "malformed-request", "body is not valid JSON")
        if not isinstance(data, dict):
            raise ApiError(400, "malformed-request", "body must be a JSON object")
        return data

    def _token(self) -> Optional[str]:
        return self.headers.get("X-Session-Token")

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _dispatch(self, fn) -> None:
        try:
            self._send(200, fn())
        except Exception as exc:  # noqa: BLE001 - mapped to wire errors
            err = _to_api_error(exc)
            self._send(err.status, {"error": {"code": err.code, "message": err.message}})

    # -- routes ---------------------------------------------------------------

    def do_POST(self) -> None:
        service = self.service

        def kv_read():
            return service.kv_read(self._token(), self._body().get("key"))

        def kv_write():
            body = self._body()
            return service.kv_write(self._token(), body.get("key"), body.get("value"))

        def sql():
            return service.sql(self._token(), self._body().get("query"))

        routes = {
            "/session": lambda: {"token": service.create_session()},
            "/kv/begin": lambda: service.kv_begin(self._token()),
            "/kv/read": kv_read,
            "/kv/write": kv_write,
            "/kv/commit": lambda: service.kv_commit(self._token()),
            "/sql": sql,
        }
        handler = routes.get(self.path)
        if handler is None:
            self._send(404, {"error": {"code": "not-found", "message": self.path}})
        else:
            self._dispatch(handler)

    def do_GET(self) -> None:
        if self.path == "/history":
            self._dispatch(self.service.history_json)
        elif self.path == "/config":
            self._dispatch(self.service.config_json)
        else:
            self._send(404, {"error": {"code": "not-found", "message": self.path}})

    def do_DELETE(self) -> None:
        if self.path.startswith("/session/"):
            token = self.path[len("/session/") :]

            def drop():
                self.service.drop_session(token)
                return {"ok": True}

            self._dispatch(drop)
        else:
            self._send(404, {"error": {"code": "not-found", "message": self.path}})


def make_server(
    service: StoreService, host: str = "127.0.0.1", port: int = 0
) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)


class ServerThread:
    """In-process server for tests and embedding: start, talk, stop."""

    def __init__(self, config: StoreConfig, host: str = "127.0.0.1", port: int = 0, **kw):
        self.service = StoreService(config, **kw)
        self.httpd = make_server(self.service, host, port)
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    @property
    def address(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    def __enter__(self) -> "ServerThread":
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        self._thread.join(timeout=5)


def serve(
    config: StoreConfig,
    bind: str = "127.0.0.1:7474",
    begin_timeout: float = 30.0,
    dump_history_path: Optional[str] = None,
) -> None:
    """Run the service until interrupted; optionally dump the final
    history to a file on shutdown."""
    host, _, port_text = bind.rpartition(":")
    if not host or not port_text.isdigit():
        raise ValueError(f"bind address must look like host:port, got {bind!r}")
    service = StoreService(config, begin_timeout=begin_timeout)
    httpd = make_server(service, host, int(port_text))
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()
        if dump_history_path:
            with open(dump_history_path, "w", encoding="utf-8") as f:
                json.dump(service.history_json(), f, indent=2)
