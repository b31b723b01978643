"""TLS interception engine: terminate flows with forged chains, classify outcomes.

Connections arrive over localhost TCP with a one-line JSON preamble carrying
the forwarder metadata (app id, destination FQDN, channel). The engine replies
with the chain it is about to present, then runs a real TLS handshake over the
same socket. The preamble stands in for the per-app VPN forwarder; the chain
echo compensates for the stdlib ssl module not exposing the peer chain to
clients on this Python version.
"""

from __future__ import annotations

import datetime
import json
import logging
import socket
import socketserver
import ssl
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path

from cryptography import x509

from .certforge import (
    CertConfig,
    CertSetupError,
    LeafCertificate,
    RootAuthority,
    TrustStore,
    cert_pem,
    issue_leaf,
    key_pem,
    make_root,
)
from .flowledger import DedupKey, FlowLedger, FlowRecord
from .profiles import ClientProfile, client_accepts

log = logging.getLogger(__name__)

ATTACKER_NAME = "attacker.invalid"
DEFAULT_GRACE_SECONDS = 3.0
FROZEN_WALL_TS = "2025-04-01T00:00:00+00:00"

TEST_KINDS = ("T1", "T2", "T3")


@dataclass
class MitmMaterial:
    """Roots and stores needed by the three test categories."""

    untrusted_root: RootAuthority
    lab_trusted_root: RootAuthority
    installed_root: RootAuthority
    client_store: TrustStore
    config: CertConfig = field(default_factory=CertConfig)

    @classmethod
    def generate(cls, config: CertConfig | None = None) -> "MitmMaterial":
        config = config or CertConfig()
        untrusted = make_root("attacker-untrusted", trusted=False, config=config)
        lab = make_root("lab-trusted", trusted=True, config=config)
        installed = make_root("installed-root", trusted=True, config=config)
        return cls(
            untrusted_root=untrusted,
            lab_trusted_root=lab,
            installed_root=installed,
            client_store=TrustStore([lab, installed]),
            config=config,
        )


def forge_for(test: str, target_fqdn: str, material: MitmMaterial) -> LeafCertificate:
    """The forged leaf a given test presents for a target destination."""
    if test not in TEST_KINDS:
        raise ValueError(f"unknown test kind: {test}")
    for attr in ("untrusted_root", "lab_trusted_root", "installed_root"):
        if getattr(material, attr, None) is None:
            raise CertSetupError(f"material missing {attr}")
    if test == "T1":
        return issue_leaf(
            material.untrusted_root, target_fqdn, [target_fqdn], 90, material.config
        )
    if test == "T2":
        return issue_leaf(
            material.lab_trusted_root, ATTACKER_NAME, [ATTACKER_NAME], 90, material.config
        )
    return issue_leaf(
        material.installed_root, target_fqdn, [target_fqdn], 90, material.config
    )


def legit_for(target_fqdn: str, material: MitmMaterial) -> LeafCertificate:
    """A correct-name, trusted-chain leaf, presented when a test is skipped."""
    return issue_leaf(
        material.lab_trusted_root, target_fqdn, [target_fqdn], 90, material.config
    )


def expected_outcome(
    profile: ClientProfile,
    test: str,
    presented: LeafCertificate,
    requested_fqdn: str,
    store: TrustStore,
    channel: str = "native",
    now: datetime.datetime | None = None,
) -> str:
    """Ground-truth oracle: "vulnerable" or "secure" for one profile x test."""
    now = now or presented.issuer.self_signed_cert.not_valid_before_utc + datetime.timedelta(days=2)
    chain = [presented.cert, presented.issuer.self_signed_cert]
    accepted = client_accepts(profile, chain, requested_fqdn, channel, store, now)
    return "vulnerable" if accepted else "secure"


@dataclass
class InterceptResult:
    app_id: str
    fqdn: str
    channel: str
    test: str
    outcome: str
    handshake_completed: bool
    client_sent_data: bool
    failure_stage: str | None = None  # pre_cert | post_cert_alert | timeout

    def __post_init__(self):
        if self.handshake_completed and self.failure_stage is not None:
            raise ValueError("completed handshakes carry no failure stage")


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):  # noqa: D102 - dispatch only
        try:
            self.server.engine._handle_connection(self.request)
        except Exception as exc:
            log.warning("connection handler error: %s", exc)


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class MitmEngine:
    """One engine instance runs one MitM test kind against incoming flows."""

    def __init__(
        self,
        material: MitmMaterial,
        test: str,
        policy: str,
        ledger: FlowLedger,
        grace_seconds: float = DEFAULT_GRACE_SECONDS,
        freeze_time: bool = False,
    ):
        if test not in TEST_KINDS:
            raise ValueError(f"unknown test kind: {test}")
        self.material = material
        self.test = test
        self.policy = policy
        self.ledger = ledger
        self.grace_seconds = grace_seconds
        self.freeze_time = freeze_time
        self.results: list[InterceptResult] = []
        self.observed_app_ids: set[str] = set()
        self._contexts: dict[tuple[str, bool], ssl.SSLContext] = {}
        self._tmpdir = tempfile.TemporaryDirectory(prefix="mitmscan-engine-")
        self._server: _Server | None = None
        self._thread: threading.Thread | None = None

    # -- lifecycle ---------------------------------------------------------

    def start(self, host: str = "127.0.0.1", port: int = 0) -> tuple[str, int]:
        try:
            self._server = _Server((host, port), _Handler)
        except OSError as exc:
            raise RuntimeError(f"listener bind failed: {exc}") from exc
        self._server.engine = self
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self._server.server_address

    @property
    def address(self) -> tuple[str, int]:
        assert self._server is not None, "engine not started"
        return self._server.server_address

    def stop(self) -> None:
        if self._server:
            self._server.shutdown()
            self._server.server_close()
            self._server = None
        self._tmpdir.cleanup()

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.stop()

    # -- per-connection flow -----------------------------------------------

    def _context_for(self, fqdn: str, forged: bool) -> ssl.SSLContext:
        key = (fqdn, forged)
        if key not in self._contexts:
            leaf = (
                forge_for(self.test, fqdn, self.material)
                if forged
                else legit_for(fqdn, self.material)
            )
            base = Path(self._tmpdir.name) / f"{len(self._contexts)}"
            chain_path = base.with_suffix(".pem")
            key_path = base.with_suffix(".key")
            chain_path.write_bytes(leaf.chain_pem())
            key_path.write_bytes(key_pem(leaf.key_pair))
            ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_SERVER)
            ctx.load_cert_chain(str(chain_path), str(key_path))
            self._contexts[key] = ctx
        return self._contexts[key]

    def _chain_pem_for(self, fqdn: str, forged: bool) -> bytes:
        leaf = (
            forge_for(self.test, fqdn, self.material)
            if forged
            else legit_for(fqdn, self.material)
        )
        return leaf.chain_pem()

    def _handle_connection(self, sock: socket.socket) -> None:
        sock.settimeout(max(self.grace_seconds * 4, 5.0))
        fh = sock.makefile("rb")
        line = fh.readline()
        if not line:
            return
        meta = json.loads(line)
        app_id = meta["app_id"]
        fqdn = meta["fqdn"]
        channel = meta.get("channel", "native")
        self.observed_app_ids.add(app_id)

        # Decide-then-record is one critical section per flow.
        with self.ledger.lock:
            decision = self.ledger.decide_retest(
                DedupKey(app_id, fqdn), self.policy, self.test
            )
            forged = decision == "test"
            sock.sendall(
                json.dumps(
                    {
                        "action": decision,
                        "chain_pem": self._chain_pem_for(fqdn, forged).decode(),
                    }
                ).encode()
                + b"\n"
            )
            result = self._run_tls(sock, fqdn, forged)
            outcome = "skipped" if not forged else result.outcome
            self._record(app_id, fqdn, channel, outcome, result)
            if forged:
                self.results.append(
                    InterceptResult(
                        app_id=app_id,
                        fqdn=fqdn,
                        channel=channel,
                        test=self.test,
                        outcome=result.outcome,
                        handshake_completed=result.handshake_completed,
                        client_sent_data=result.client_sent_data,
                        failure_stage=result.failure_stage,
                    )
                )

    @dataclass
    class _TlsResult:
        outcome: str
        handshake_completed: bool
        client_sent_data: bool
        failure_stage: str | None
        tls_version: str = "unknown"

    def _run_tls(self, sock: socket.socket, fqdn: str, forged: bool) -> "_TlsResult":
        ctx = self._context_for(fqdn, forged)
        try:
            tls = ctx.wrap_socket(sock, server_side=True)
        except ssl.SSLError as exc:
            # The certificate flight was already sent; an alert here is the
            # client rejecting it.
            log.debug("post-certificate alert from client: %s", exc)
            return self._TlsResult("secure", False, False, "post_cert_alert")
        except (ConnectionError, socket.timeout, OSError) as exc:
            log.debug("pre-certificate transport failure: %s", exc)
            stage = "timeout" if isinstance(exc, socket.timeout) else "pre_cert"
            return self._TlsResult("inconclusive", False, False, stage)

        version = {"TLSv1.2": "TLS1.2", "TLSv1.3": "TLS1.3"}.get(
            tls.version() or "", "unknown"
        )
        tls.settimeout(self.grace_seconds)
        try:
            data = tls.recv(4096)
        except socket.timeout:
            # Connection idles open with no application data: no evidence.
            return self._TlsResult("inconclusive", True, False, None, version)
        except (ssl.SSLError, ConnectionError, OSError):
            data = b""
        if data:
            try:
                tls.sendall(data)  # echo, so clients can run request/response
                tls.close()
            except (ssl.SSLError, ConnectionError, OSError):
                pass
            return self._TlsResult("vulnerable", True, True, None, version)
        # Clean close right after the handshake: the client aborted on the
        # certificate it saw.
        return self._TlsResult("secure", True, False, None, version)

    def _record(
        self, app_id: str, fqdn: str, channel: str, outcome: str, tls: "_TlsResult"
    ) -> None:
        ts_mono = self.ledger.next_ts_mono()
        if self.freeze_time:
            ts_wall = FROZEN_WALL_TS
        else:
            ts_wall = datetime.datetime.now(datetime.timezone.utc).isoformat()
        self.ledger.record_flow(
            FlowRecord(
                app_id=app_id,
                fqdn=fqdn,
                ts_wall=ts_wall,
                ts_mono=ts_mono,
                transport="TCP",
                tls_version=tls.tls_version,
                channel=channel,
                test_applied=self.test,
                outcome=outcome,
            )
        )

    # -- reporting -----------------------------------------------------------

    def summary(self) -> dict:
        """Vulnerable (app, fqdn, test) triples seen by this engine run."""
        vulnerable = sorted(
            {(r.app_id, r.fqdn) for r in self.results if r.outcome == "vulnerable"}
        )
        return {
            "test": self.test,
            "policy": self.policy,
            "vulnerable": [
                {"app_id": a, "fqdn": f, "test": self.test} for a, f in vulnerable
            ],
            "flows_tested": len(self.results),
        }


def parse_chain_pem(pem: str) -> list[x509.Certificate]:
    """Split concatenated PEM into certificates, leaf first."""
    return x509.load_pem_x509_certificates(pem.encode())
