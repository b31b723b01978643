"""Correlate runtime validation events with vulnerable flows.

Consumes validation-event logs (JSONL) produced by instrumentation or by the
synthetic fleet's self-reporting, and attributes each vulnerable flow to the
code location whose validation logic accepted it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict, field
from fractions import Fraction
from pathlib import Path

from .flowledger import FlowRecord, normalize_fqdn

INTERFACE_KINDS = ("trust_manager", "hostname_verifier", "webview_client")
FAILURE_CAUSES = ("untriggered_path", "native_code", "non_standard_implementation")


@dataclass
class ValidationEvent:
    event_id: str
    app_id: str
    code_location: str
    interface_kind: str
    verdict: str
    mitm_active: bool
    ts: float
    hostname_param: str | None = None
    cert_cn: str | None = None
    cert_sans: list[str] | None = None

    def __post_init__(self):
        if self.interface_kind not in INTERFACE_KINDS:
            raise ValueError(f"bad interface_kind: {self.interface_kind}")
        if self.verdict not in ("accepted", "rejected"):
            raise ValueError(f"bad verdict: {self.verdict}")
        if self.interface_kind in ("hostname_verifier", "webview_client"):
            if self.hostname_param is None:
                raise ValueError(f"{self.interface_kind} events need hostname_param")
        elif self.cert_cn is None and not self.cert_sans:
            raise ValueError("trust_manager events need certificate names")

    def cert_names(self) -> list[str]:
        names = []
        if self.cert_cn:
            names.append(self.cert_cn)
        names.extend(self.cert_sans or [])
        return names

    @classmethod
    def from_json(cls, line: str) -> "ValidationEvent":
        return cls(**json.loads(line))

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class Attribution:
    code_location: str
    matched_flows: set[tuple[str, str, int]]
    match_mode: str  # direct_hostname | cert_name | active_mitm

    def __post_init__(self):
        if not self.matched_flows:
            raise ValueError("attribution must match at least one flow")


def load_events(path: str | Path) -> list[ValidationEvent]:
    events = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            events.append(ValidationEvent.from_json(line))
    return events


def save_events(events: list[ValidationEvent], path: str | Path) -> None:
    with Path(path).open("w") as fh:
        for event in events:
            fh.write(event.to_json() + "\n")


def match_cert_names(fqdn: str, names: list[str]) -> bool:
    """Case-insensitive exact match, or a single leftmost-label wildcard.

    ``*.example.com`` matches ``a.example.com`` but not ``example.com`` or
    ``a.b.example.com``.
    """
    fqdn = normalize_fqdn(fqdn)
    for name in names:
        name = normalize_fqdn(name)
        if name == fqdn:
            return True
        if name.startswith("*."):
            suffix = name[2:]
            if fqdn.endswith("." + suffix) and fqdn.count(".") == suffix.count(".") + 1:
                return True
    return False


def _event_matches_flow(event: ValidationEvent, flow: FlowRecord) -> str | None:
    """Returns the passive match mode linking event to flow, or None."""
    if event.app_id != flow.app_id:
        return None
    if event.hostname_param is not None:
        if normalize_fqdn(event.hostname_param) == flow.fqdn:
            return "direct_hostname"
        return None
    if match_cert_names(flow.fqdn, event.cert_names()):
        return "cert_name"
    return None


def correlate(
    events: list[ValidationEvent],
    vulnerable_flows: list[FlowRecord],
    window_seconds: float | None = None,
    flow_times: dict[tuple[str, str, int], float] | None = None,
) -> tuple[list[Attribution], list[FlowRecord]]:
    """Attribute vulnerable flows to code locations.

    Passive pass: hostname equality or certificate-name matching. Active pass:
    where accepting mitm_active events exist for a flow, they override passive
    links so only the code path that actually accepted the forged certificate
    is attributed. Returns (attributions, unmatched_flows).
    """
    links: dict[tuple[str, str, int], list[tuple[ValidationEvent, str]]] = {}
    for flow in vulnerable_flows:
        for event in events:
            mode = _event_matches_flow(event, flow)
            if mode is None:
                continue
            if window_seconds is not None and flow_times is not None:
                flow_ts = flow_times.get(flow.identity)
                if flow_ts is not None and abs(event.ts - flow_ts) > window_seconds:
                    continue
            links.setdefault(flow.identity, []).append((event, mode))

    by_location: dict[str, Attribution] = {}
    unmatched: list[FlowRecord] = []
    for flow in vulnerable_flows:
        linked = links.get(flow.identity, [])
        if not linked:
            unmatched.append(flow)
            continue
        active = [
            (e, m) for e, m in linked if e.mitm_active and e.verdict == "accepted"
        ]
        chosen = [(e, "active_mitm") for e, _ in active] if active else linked
        for event, mode in chosen:
            attribution = by_location.get(event.code_location)
            if attribution is None:
                by_location[event.code_location] = Attribution(
                    code_location=event.code_location,
                    matched_flows={flow.identity},
                    match_mode=mode,
                )
            else:
                attribution.matched_flows.add(flow.identity)
                if mode == "active_mitm":
                    attribution.match_mode = "active_mitm"
    return list(by_location.values()), unmatched


@dataclass
class CoverageReport:
    fqdn_cov: Fraction | None
    flow_cov: Fraction | None
    app_all: Fraction | None
    app_one: Fraction | None

    def as_dict(self) -> dict:
        def fmt(v):
            return None if v is None else float(v)

        return {k: fmt(v) for k, v in asdict(self).items()}


def coverage(
    attributions: list[Attribution],
    vulnerable_flows: list[FlowRecord],
    apps: list[str],
) -> CoverageReport:
    """Locator coverage ratios; undefined (None) rather than 0 on empty sets."""
    attributed = set()
    for attribution in attributions:
        attributed |= attribution.matched_flows

    vuln_fqdns = {(f.app_id, f.fqdn) for f in vulnerable_flows}
    located_fqdns = {
        (f.app_id, f.fqdn) for f in vulnerable_flows if f.identity in attributed
    }
    vuln_apps = {f.app_id for f in vulnerable_flows if f.app_id in set(apps)}

    def ratio(num: int, den: int) -> Fraction | None:
        return None if den == 0 else Fraction(num, den)

    app_all = app_one = None
    if vuln_apps:
        all_located = sum(
            1
            for app in vuln_apps
            if all(
                f.identity in attributed
                for f in vulnerable_flows
                if f.app_id == app
            )
        )
        one_located = sum(
            1
            for app in vuln_apps
            if any(
                f.identity in attributed
                for f in vulnerable_flows
                if f.app_id == app
            )
        )
        app_all = Fraction(all_located, len(vuln_apps))
        app_one = Fraction(one_located, len(vuln_apps))

    return CoverageReport(
        fqdn_cov=ratio(len(located_fqdns), len(vuln_fqdns)),
        flow_cov=ratio(
            sum(1 for f in vulnerable_flows if f.identity in attributed),
            len(vulnerable_flows),
        ),
        app_all=app_all,
        app_one=app_one,
    )


@dataclass
class FailureAnalysis:
    """Unlocatable flows tagged with their declared failure cause."""

    causes: dict[str, int] = field(default_factory=dict)

    @classmethod
    def from_tags(cls, tags: dict[tuple[str, str, int], str]) -> "FailureAnalysis":
        causes: dict[str, int] = {}
        for cause in tags.values():
            if cause not in FAILURE_CAUSES:
                raise ValueError(f"unknown failure cause: {cause}")
            causes[cause] = causes.get(cause, 0) + 1
        return cls(causes=causes)
