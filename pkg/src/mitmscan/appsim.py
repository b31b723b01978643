"""Synthetic app fleet: scripted UI exploration driving real TLS flows.

Each synthetic app is a small screen graph. Exercising an action triggers
network flows; flows to hosts in the routing allowlist are forwarded to the
interception engine, everything else goes to a plain echo endpoint. The app's
TLS client behavior comes from its :class:`~mitmscan.profiles.ClientProfile`.
"""

from __future__ import annotations

import datetime
import json
import logging
import random
import socket
import socketserver
import ssl
import threading
import time
from dataclasses import dataclass, field

from .certforge import TrustStore
from .engine import parse_chain_pem
from .flowledger import CHANNELS, POLICIES
from .profiles import ClientProfile, client_accepts

log = logging.getLogger(__name__)

STRATEGIES = ("random", "scripted", "external_llm")

BACK_ACTION = "back"


@dataclass(frozen=True)
class ScanConfig:
    strategy: str = "random"
    n_steps: int = 10  # -1 means unbounded, stop on t_max
    t_max: float | None = None  # seconds of session budget
    t_wait: float = 0.0  # settle time between actions
    policy: str = "P1_always"
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"bad strategy: {self.strategy}")
        if self.n_steps < 1 and self.n_steps != -1:
            raise ValueError("n_steps must be >= 1, or -1 for unbounded")
        if self.n_steps == -1 and self.t_max is None:
            raise ValueError("unbounded sessions need a time budget")
        if self.t_wait < 0:
            raise ValueError("t_wait must be >= 0")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy: {self.policy}")


@dataclass(frozen=True)
class FlowSpec:
    fqdn: str
    channel: str = "native"

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ValueError(f"bad channel: {self.channel}")


@dataclass(frozen=True)
class Action:
    label: str
    flows: tuple[FlowSpec, ...] = ()
    goto: str | None = None


@dataclass(frozen=True)
class Screen:
    name: str
    actions: tuple[Action, ...] = ()


@dataclass
class SyntheticApp:
    app_id: str
    profile: ClientProfile
    screens: dict[str, Screen]
    start_screen: str

    def __post_init__(self):
        if self.start_screen not in self.screens:
            raise ValueError(f"start screen {self.start_screen!r} not defined")
        for screen in self.screens.values():
            for action in screen.actions:
                if action.goto is not None and action.goto not in self.screens:
                    raise ValueError(f"action {action.label!r} jumps to unknown screen")

    def fqdns(self) -> list[str]:
        seen: dict[str, None] = {}
        for screen in self.screens.values():
            for action in screen.actions:
                for flow in action.flows:
                    seen.setdefault(flow.fqdn)
        return list(seen)


class RoutingTable:
    """Per-host routing decision: MITM for allowlisted hosts, DIRECT otherwise."""

    def __init__(self, mitm_hosts: set[str] | None = None):
        self.mitm_hosts = {h.lower() for h in (mitm_hosts or set())}

    def route(self, fqdn: str) -> str:
        return "MITM" if fqdn.lower() in self.mitm_hosts else "DIRECT"


# -- exploration strategies --------------------------------------------------


def _candidate_actions(screen: Screen, at_start: bool) -> list[Action]:
    actions = list(screen.actions)
    if not at_start:
        actions.append(Action(label=BACK_ACTION))
    return actions


def next_action(
    app: SyntheticApp,
    screen: Screen,
    rng: random.Random,
    strategy: str,
    script: list[str] | None = None,
    step: int = 0,
    llm=None,
) -> Action:
    """Choose the next UI action on a screen under the given strategy."""
    at_start = screen.name == app.start_screen
    candidates = _candidate_actions(screen, at_start)
    if strategy == "random":
        return rng.choice(candidates)
    if strategy == "scripted":
        if script is None or step >= len(script):
            raise ValueError("scripted strategy exhausted its script")
        label = script[step]
        for action in candidates:
            if action.label == label:
                return action
        raise ValueError(f"script step {label!r} not available on {screen.name!r}")
    # external_llm: ask the backend, fall back to random on unusable output.
    prompt = build_action_prompt(app, screen, candidates)
    try:
        reply = llm(prompt) if llm else ""
    except Exception as exc:
        log.warning("action backend failed (%s); choosing randomly", exc)
        return rng.choice(candidates)
    chosen = parse_action_reply(reply, candidates)
    if chosen is None:
        log.warning("unparsable action reply %r; choosing randomly", reply)
        return rng.choice(candidates)
    return chosen


def build_action_prompt(app: SyntheticApp, screen: Screen, candidates: list[Action]) -> str:
    labels = ", ".join(a.label for a in candidates)
    return (
        f"You are exploring the app {app.app_id}. Current screen: {screen.name}.\n"
        f"Available actions: {labels}.\n"
        "Reply with two lines:\n"
        "Thoughts: <one sentence>\n"
        "Action: <one action name from the list>"
    )


def parse_action_reply(reply: str, candidates: list[Action]) -> Action | None:
    for line in reply.splitlines():
        if line.lower().startswith("action:"):
            label = line.split(":", 1)[1].strip()
            for action in candidates:
                if action.label == label:
                    return action
    return None


# -- flow execution ----------------------------------------------------------


@dataclass
class FlowResult:
    fqdn: str
    channel: str
    route: str
    accepted: bool | None  # None for DIRECT flows and transport errors
    error: str | None = None


@dataclass
class SessionResult:
    app_id: str
    flows: list[FlowResult] = field(default_factory=list)
    steps_taken: int = 0
    partial: bool = False  # time budget expired before the step budget


def _read_line(sock: socket.socket) -> bytes:
    # One byte at a time so no TLS record bytes are consumed by buffering.
    buf = bytearray()
    while not buf.endswith(b"\n"):
        chunk = sock.recv(1)
        if not chunk:
            break
        buf += chunk
    return bytes(buf)


def perform_flow(
    app: SyntheticApp,
    spec: FlowSpec,
    engine_addr: tuple[str, int],
    store: TrustStore,
    now: datetime.datetime,
    timeout: float = 10.0,
) -> FlowResult:
    """Run one intercepted flow: preamble, TLS handshake, accept or abort."""
    try:
        raw = socket.create_connection(engine_addr, timeout=timeout)
    except OSError as exc:
        return FlowResult(spec.fqdn, spec.channel, "MITM", None, f"connect: {exc}")
    try:
        preamble = {"app_id": app.app_id, "fqdn": spec.fqdn, "channel": spec.channel}
        raw.sendall(json.dumps(preamble).encode() + b"\n")
        reply = json.loads(_read_line(raw))
        chain = parse_chain_pem(reply["chain_pem"])
        accepted = client_accepts(app.profile, chain, spec.fqdn, spec.channel, store, now)

        ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_CLIENT)
        ctx.check_hostname = False
        ctx.verify_mode = ssl.CERT_NONE
        tls = ctx.wrap_socket(raw, server_hostname=spec.fqdn)
        if accepted:
            tls.sendall(b"ping")
            tls.recv(64)
        tls.close()
        return FlowResult(spec.fqdn, spec.channel, "MITM", accepted)
    except (OSError, ssl.SSLError, json.JSONDecodeError, KeyError, ValueError) as exc:
        return FlowResult(spec.fqdn, spec.channel, "MITM", None, str(exc))
    finally:
        raw.close()


def perform_direct_flow(
    spec: FlowSpec, direct_addr: tuple[str, int], timeout: float = 10.0
) -> FlowResult:
    try:
        with socket.create_connection(direct_addr, timeout=timeout) as sock:
            sock.sendall(b"ping")
            sock.recv(64)
        return FlowResult(spec.fqdn, spec.channel, "DIRECT", None)
    except OSError as exc:
        return FlowResult(spec.fqdn, spec.channel, "DIRECT", None, str(exc))


def execute_session(
    app: SyntheticApp,
    config: ScanConfig,
    routing: RoutingTable,
    engine_addr: tuple[str, int],
    direct_addr: tuple[str, int] | None,
    store: TrustStore,
    now: datetime.datetime,
    script: list[str] | None = None,
    llm=None,
) -> SessionResult:
    """Explore one app sequentially, executing every flow its actions trigger."""
    rng = random.Random(f"{config.seed}:{app.app_id}")
    result = SessionResult(app_id=app.app_id)
    screen = app.screens[app.start_screen]
    history: list[str] = []
    started = time.monotonic()
    step = 0
    while config.n_steps == -1 or step < config.n_steps:
        if config.t_max is not None and time.monotonic() - started >= config.t_max:
            result.partial = config.n_steps != -1
            break
        action = next_action(app, screen, rng, config.strategy, script, step, llm)
        step += 1
        result.steps_taken = step
        for spec in action.flows:
            if routing.route(spec.fqdn) == "MITM":
                result.flows.append(
                    perform_flow(app, spec, engine_addr, store, now)
                )
            elif direct_addr is not None:
                result.flows.append(perform_direct_flow(spec, direct_addr))
            else:
                result.flows.append(FlowResult(spec.fqdn, spec.channel, "DIRECT", None))
        if action.label == BACK_ACTION:
            history.pop() if history else None
            screen = app.screens[history[-1] if history else app.start_screen]
        elif action.goto is not None:
            history.append(screen.name)
            screen = app.screens[action.goto]
        if config.t_wait:
            time.sleep(config.t_wait)
    return result


# -- plain echo endpoint for DIRECT traffic -----------------------------------


class _EchoHandler(socketserver.BaseRequestHandler):
    def handle(self):
        try:
            data = self.request.recv(4096)
            if data:
                self.request.sendall(data)
        except OSError:
            pass


class EchoServer:
    """Plain TCP echo endpoint standing in for untouched upstream servers."""

    def __init__(self):
        self._server = socketserver.ThreadingTCPServer(("127.0.0.1", 0), _EchoHandler)
        self._server.daemon_threads = True
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    def start(self) -> tuple[str, int]:
        self._thread.start()
        return self._server.server_address

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.stop()
