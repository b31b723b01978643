import datetime
import json
import socket
import ssl

import pytest

from mitmscan.appsim import Action, FlowSpec, Screen, SyntheticApp, perform_flow
from mitmscan.certforge import verify_chain
from mitmscan.engine import (
    ATTACKER_NAME,
    InterceptResult,
    MitmEngine,
    expected_outcome,
    forge_for,
    legit_for,
    parse_chain_pem,
)
from mitmscan.flowledger import POLICY_ALWAYS, POLICY_ONCE, FlowLedger
from mitmscan.profiles import ClientProfile


def test_forge_t1_untrusted_root(material):
    leaf = forge_for("T1", "api.example.com", material)
    assert leaf.subject_cn == "api.example.com"
    assert leaf.issuer is material.untrusted_root
    assert not verify_chain(leaf, material.client_store, material.config.now)


def test_forge_t2_wrong_name_valid_chain(material):
    leaf = forge_for("T2", "api.example.com", material)
    assert leaf.subject_cn == ATTACKER_NAME
    assert verify_chain(leaf, material.client_store, material.config.now)


def test_forge_t3_installed_root(material):
    leaf = forge_for("T3", "api.example.com", material)
    assert leaf.issuer is material.installed_root
    assert verify_chain(leaf, material.client_store, material.config.now)


def test_forge_unknown_test(material):
    with pytest.raises(ValueError):
        forge_for("T4", "api.example.com", material)


def test_expected_outcome_oracle(material):
    t1_leaf = forge_for("T1", "a.example.com", material)
    secure = ClientProfile()
    trusting = ClientProfile(trust_behavior="T1", hostname_behavior="H1")
    assert expected_outcome(secure, "T1", t1_leaf, "a.example.com", material.client_store) == "secure"
    assert (
        expected_outcome(trusting, "T1", t1_leaf, "a.example.com", material.client_store)
        == "vulnerable"
    )


def _one_screen_app(app_id, fqdn, profile, channel="native"):
    screen = Screen(name="home", actions=(Action(label="go", flows=(FlowSpec(fqdn, channel),)),))
    return SyntheticApp(app_id=app_id, profile=profile, screens={"home": screen}, start_screen="home")


def _run_one(material, test, profile, channel="native", policy=POLICY_ALWAYS):
    app = _one_screen_app("com.test.app", "svc.example.com", profile, channel)
    ledger = FlowLedger()
    with MitmEngine(material, test, policy, ledger, grace_seconds=0.3) as engine:
        result = perform_flow(
            app,
            FlowSpec("svc.example.com", channel),
            engine.address,
            material.client_store,
            material.config.now,
        )
    return ledger.records(), result


def test_engine_vulnerable_flow(material):
    records, result = _run_one(
        material, "T1", ClientProfile(trust_behavior="T1", hostname_behavior="H1")
    )
    assert result.accepted is True
    assert [r.outcome for r in records] == ["vulnerable"]
    assert records[0].tls_version in ("TLS1.2", "TLS1.3")
    assert records[0].test_applied == "T1"


def test_engine_secure_flow(material):
    records, result = _run_one(material, "T1", ClientProfile())
    assert result.accepted is False
    assert [r.outcome for r in records] == ["secure"]


def test_engine_skip_policy(material):
    app = _one_screen_app(
        "com.test.app", "svc.example.com", ClientProfile(trust_behavior="T1", hostname_behavior="H1")
    )
    ledger = FlowLedger()
    with MitmEngine(material, "T1", POLICY_ONCE, ledger, grace_seconds=0.3) as engine:
        for _ in range(2):
            perform_flow(
                app,
                FlowSpec("svc.example.com", "native"),
                engine.address,
                material.client_store,
                material.config.now,
            )
    assert [r.outcome for r in ledger.records()] == ["vulnerable", "skipped"]
    # the skipped connection was served the legitimate chain
    legit = legit_for("svc.example.com", material)
    assert legit.subject_cn == "svc.example.com"


def test_engine_inconclusive_on_early_abort(material):
    ledger = FlowLedger()
    with MitmEngine(material, "T1", POLICY_ALWAYS, ledger, grace_seconds=0.3) as engine:
        sock = socket.create_connection(engine.address, timeout=5)
        sock.sendall(
            json.dumps({"app_id": "com.test.app", "fqdn": "svc.example.com", "channel": "native"}).encode()
            + b"\n"
        )
        sock.recv(1)  # preamble reply starts flowing
        sock.close()  # abort before any TLS handshake
        import time

        deadline = time.monotonic() + 5
        while not ledger.records() and time.monotonic() < deadline:
            time.sleep(0.02)
    assert [r.outcome for r in ledger.records()] == ["inconclusive"]


def test_intercept_result_invariant():
    with pytest.raises(ValueError):
        InterceptResult(
            app_id="a",
            fqdn="f",
            channel="native",
            test="T1",
            outcome="secure",
            handshake_completed=True,
            client_sent_data=False,
            failure_stage="pre_cert",
        )


def test_preamble_chain_matches_presented(material):
    """The chain echoed in the preamble is the chain served in the handshake."""
    ledger = FlowLedger()
    with MitmEngine(material, "T2", POLICY_ALWAYS, ledger, grace_seconds=0.3) as engine:
        sock = socket.create_connection(engine.address, timeout=5)
        sock.sendall(
            json.dumps({"app_id": "com.test.app", "fqdn": "svc.example.com", "channel": "native"}).encode()
            + b"\n"
        )
        buf = b""
        while not buf.endswith(b"\n"):
            buf += sock.recv(1)
        reply = json.loads(buf)
        chain = parse_chain_pem(reply["chain_pem"])
        ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_CLIENT)
        ctx.check_hostname = False
        ctx.verify_mode = ssl.CERT_NONE
        tls = ctx.wrap_socket(sock, server_hostname="svc.example.com")
        presented = tls.getpeercert(binary_form=True)
        from cryptography.hazmat.primitives import serialization

        assert chain[0].public_bytes(serialization.Encoding.DER) == presented
        tls.close()


def test_summary_lists_vulnerable_triples(material):
    records, _ = _run_one(
        material, "T3", ClientProfile(trust_behavior="T1", hostname_behavior="H1")
    )
    assert records[0].outcome == "vulnerable"
