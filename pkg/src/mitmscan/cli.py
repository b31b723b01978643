"""Command line pipeline: scan, locate, classify, report."""

from __future__ import annotations

import argparse
import datetime
import json
import logging
import os
import sys
import time
import urllib.request
from pathlib import Path

from . import appsim, classifier, fleet, locator, metrics, party
from .certforge import CertConfig
from .engine import FROZEN_WALL_TS, MitmEngine, MitmMaterial, forge_for
from .flowledger import POLICY_ALIASES, FlowLedger
from .profiles import cert_dns_names

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2

TESTS = ("T1", "T2", "T3")


class ConfigError(Exception):
    """Invalid configuration or missing inputs; maps to exit code 2."""


def _utc_now(freeze: bool) -> str:
    if freeze:
        return FROZEN_WALL_TS
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


# -- scan ----------------------------------------------------------------------


def _load_scan_config(args) -> appsim.ScanConfig:
    values = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            values = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    overrides = {
        "n_steps": args.steps,
        "t_wait": args.wait,
        "t_max": args.time_budget,
        "strategy": args.strategy,
        "seed": args.seed,
    }
    if args.policy:
        overrides["policy"] = POLICY_ALIASES.get(args.policy, args.policy)
    for key, value in overrides.items():
        if value is not None:
            values[key] = value
    allowlist = values.pop("allowlist", None)
    try:
        return appsim.ScanConfig(**values), allowlist
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scan config: {exc}") from exc


def _event_for_flow(rec, app, material) -> locator.ValidationEvent:
    """Self-reported validation event mirroring what instrumentation would log."""
    accepted = rec.outcome == "vulnerable"
    if rec.channel == "webview":
        return locator.ValidationEvent(
            event_id=f"ev-{rec.test_applied}-{rec.ts_mono}",
            app_id=rec.app_id,
            code_location=f"{rec.app_id}.web.Client.onReceivedSslError",
            interface_kind="webview_client",
            verdict="accepted" if accepted else "rejected",
            mitm_active=True,
            ts=float(rec.ts_mono),
            hostname_param=rec.fqdn,
        )
    leaf = forge_for(rec.test_applied, rec.fqdn, material)
    names = cert_dns_names(leaf.cert)
    return locator.ValidationEvent(
        event_id=f"ev-{rec.test_applied}-{rec.ts_mono}",
        app_id=rec.app_id,
        code_location=f"{rec.app_id}.tls.Validator.checkServerTrusted",
        interface_kind="trust_manager",
        verdict="accepted" if accepted else "rejected",
        mitm_active=True,
        ts=float(rec.ts_mono),
        cert_cn=names[0],
        cert_sans=names[1:] or None,
    )


def cmd_scan(args) -> int:
    config, allowlist = _load_scan_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()

    material = MitmMaterial.generate(CertConfig(seed=config.seed))
    if args.fleet:
        apps = fleet.load_fleet(args.fleet)
    else:
        apps = fleet.demo_fleet(material)
    if allowlist is None:
        allowlist = sorted({f for app in apps for f in app.fqdns()})
    routing = appsim.RoutingTable(set(allowlist))
    now = material.config.now

    per_app: dict[str, dict] = {
        app.app_id: {"steps": 0, "flows": 0, "partial": False, "vulnerable": {}}
        for app in apps
    }
    events: list[locator.ValidationEvent] = []
    entity_summaries = {}
    grace = args.grace if args.grace is not None else 1.0

    for test in TESTS:
        ledger_path = out / f"ledger_{test}.jsonl"
        ledger_path.touch()
        ledger = FlowLedger(ledger_path)
        engine = MitmEngine(
            material,
            test,
            config.policy,
            ledger,
            grace_seconds=grace,
            freeze_time=args.freeze_time,
        )
        with engine:
            for app in apps:
                script = None
                if config.strategy == "scripted":
                    script = [a.label for a in app.screens[app.start_screen].actions]
                    steps = len(script) or 1
                    session_config = appsim.ScanConfig(
                        strategy="scripted",
                        n_steps=steps,
                        t_max=config.t_max,
                        t_wait=config.t_wait,
                        policy=config.policy,
                        seed=config.seed,
                    )
                else:
                    session_config = config
                session = appsim.execute_session(
                    app,
                    session_config,
                    routing,
                    engine.address,
                    None,
                    material.client_store,
                    now,
                    script=script,
                )
                stats = per_app[app.app_id]
                stats["steps"] += session.steps_taken
                stats["flows"] += len(session.flows)
                stats["partial"] = stats["partial"] or session.partial
        for rec in ledger.records():
            if rec.outcome == "skipped":
                continue
            app = next(a for a in apps if a.app_id == rec.app_id)
            events.append(_event_for_flow(rec, app, material))
            if rec.outcome == "vulnerable":
                vuln = per_app[rec.app_id]["vulnerable"].setdefault(test, [])
                entry = {"fqdn": rec.fqdn, "channel": rec.channel}
                if entry not in vuln:
                    vuln.append(entry)
        entity_summaries[test] = ledger.unique_entities()

    locator.save_events(events, out / "events.jsonl")
    fleet.save_fleet(apps, out / "fleet.json")

    report = {
        "generated_at": _utc_now(args.freeze_time),
        "config": {
            "strategy": config.strategy,
            "n_steps": config.n_steps,
            "t_wait": config.t_wait,
            "t_max": config.t_max,
            "policy": config.policy,
            "seed": config.seed,
            "allowlist": allowlist,
        },
        "apps": per_app,
        "entities": entity_summaries,
        "elapsed_seconds": 0.0 if args.freeze_time else round(time.monotonic() - started, 3),
    }
    (out / "scan_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"scan complete: {len(apps)} apps, reports in {out}")
    return EXIT_OK


# -- locate --------------------------------------------------------------------


def cmd_locate(args) -> int:
    events_path = Path(args.events)
    ledger_path = Path(args.ledger)
    if not events_path.exists():
        raise ConfigError(f"events file not found: {events_path}")
    if not ledger_path.exists():
        raise ConfigError(f"ledger file not found: {ledger_path}")
    events = locator.load_events(events_path)
    ledger = FlowLedger(ledger_path)
    vulnerable = [r for r in ledger.records() if r.outcome == "vulnerable"]
    attributions, unmatched = locator.correlate(events, vulnerable)
    apps = sorted({r.app_id for r in ledger.records()})
    cov = locator.coverage(attributions, vulnerable, apps)
    report = {
        "attributions": [
            {
                "code_location": a.code_location,
                "match_mode": a.match_mode,
                "matched_flows": sorted(list(f) for f in a.matched_flows),
            }
            for a in sorted(attributions, key=lambda a: a.code_location)
        ],
        "unmatched_flows": sorted([list(f.identity) for f in unmatched]),
        "coverage": cov.as_dict(),
    }
    Path(args.out).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"located {len(attributions)} code locations, {len(unmatched)} unmatched flows")
    return EXIT_OK


# -- classify --------------------------------------------------------------------


def _llm_backend_from_env():
    endpoint = os.environ.get("MITMSCAN_LLM_ENDPOINT")
    model = os.environ.get("MITMSCAN_LLM_MODEL")
    if not endpoint or not model:
        raise ConfigError(
            "--backend llm needs MITMSCAN_LLM_ENDPOINT and MITMSCAN_LLM_MODEL"
        )
    api_key = os.environ.get("MITMSCAN_LLM_API_KEY", "")

    def backend(prompt: str) -> str:
        payload = json.dumps({"model": model, "prompt": prompt}).encode()
        req = urllib.request.Request(
            endpoint,
            data=payload,
            headers={
                "Content-Type": "application/json",
                "Authorization": f"Bearer {api_key}",
            },
        )
        with urllib.request.urlopen(req, timeout=60) as resp:
            return json.loads(resp.read())["completion"]

    return backend


def cmd_classify(args) -> int:
    corpus_dir = Path(args.corpus)
    if not (corpus_dir / "manifest.json").exists():
        raise ConfigError(f"no manifest.json under {corpus_dir}")
    corpus = classifier.load_corpus(corpus_dir)
    corpus = classifier.dedup_by_class(corpus)
    if args.backend == "llm":
        backend = _llm_backend_from_env()
        predictions = classifier.classify_llm_batch(
            [s for s, _ in corpus], backend, variant=args.variant
        )
    else:
        predictions = {s.snippet_id: classifier.classify_rule(s) for s, _ in corpus}
    truth = {s.snippet_id: labels for s, labels in corpus}
    evaluation = classifier.evaluate(predictions, truth)
    report = {
        "backend": args.backend,
        "predictions": {sid: sorted(labels) for sid, labels in sorted(predictions.items())},
        "evaluation": evaluation,
    }
    Path(args.out).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    exact = sum(1 for sid in truth if predictions[sid] == truth[sid])
    print(f"classified {len(truth)} snippets, {exact} exact matches")
    return EXIT_OK


# -- report ----------------------------------------------------------------------


def cmd_report(args) -> int:
    scan_dir = Path(args.scan)
    if not scan_dir.exists():
        raise ConfigError(f"scan directory not found: {scan_dir}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    prevalence_by_test = {}
    ratio_values: list[float] = []
    for test in TESTS:
        path = scan_dir / f"ledger_{test}.jsonl"
        if not path.exists():
            raise ConfigError(f"missing ledger for {test}: {path}")
        stats = metrics.prevalence(FlowLedger(path))
        prevalence_by_test[test] = stats
        ratio_values.extend(stats["per_app_ratio"]["values"])

    events_path = scan_dir / "events.jsonl"
    party_report = None
    if events_path.exists():
        events = locator.load_events(events_path)
        accepted = [e for e in events if e.verdict == "accepted"]
        refs = {}
        for event in accepted:
            ref = refs.get(event.code_location)
            fqdn = event.hostname_param or event.cert_cn or ""
            if ref is None:
                refs[event.code_location] = party.CodeSnippetRef(
                    snippet_id=event.code_location,
                    app_id=event.app_id,
                    code_location=event.code_location,
                    fqdns=frozenset({fqdn} if fqdn else set()),
                )
            else:
                refs[event.code_location] = party.CodeSnippetRef(
                    snippet_id=ref.snippet_id,
                    app_id=ref.app_id,
                    code_location=ref.code_location,
                    fqdns=ref.fqdns | ({fqdn} if fqdn else set()),
                )
        annotations = party.load_annotations(args.annotations)
        party_report = party.attribute(list(refs.values()), annotations).as_dict()

    points = metrics.cdf(ratio_values)
    metrics.write_cdf_csv(points, out / "cdf_per_app_ratio.csv")

    report = {
        "generated_at": _utc_now(args.freeze_time),
        "prevalence": prevalence_by_test,
        "party_attribution": party_report,
        "cdf_files": ["cdf_per_app_ratio.csv"],
    }
    if args.classification and Path(args.classification).exists():
        report["classification"] = json.loads(Path(args.classification).read_text())
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"report written to {out / 'report.json'}")
    return EXIT_OK


# -- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mitmscan",
        description="TLS interception vulnerability scanner for synthetic app fleets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    scan = sub.add_parser("scan", help="run the three interception tests over a fleet")
    scan.add_argument("--config", help="JSON scan config file")
    scan.add_argument("--fleet", help="fleet definition JSON (default: built-in demo fleet)")
    scan.add_argument("--out", default="scan_out", help="output directory")
    scan.add_argument("--steps", type=int, help="exploration steps per app (N_steps)")
    scan.add_argument("--wait", type=float, help="settle seconds between actions (T_wait)")
    scan.add_argument("--time-budget", type=float, help="session time budget (T_max)")
    scan.add_argument("--strategy", choices=appsim.STRATEGIES)
    scan.add_argument("--policy", choices=sorted(POLICY_ALIASES))
    scan.add_argument("--seed", type=int)
    scan.add_argument("--grace", type=float, help="post-handshake grace window seconds")
    scan.add_argument("--freeze-time", action="store_true", help="pin report timestamps")
    scan.set_defaults(func=cmd_scan)

    locate = sub.add_parser("locate", help="correlate validation events with vulnerable flows")
    locate.add_argument("--events", required=True)
    locate.add_argument("--ledger", required=True)
    locate.add_argument("--out", default="locate_report.json")
    locate.set_defaults(func=cmd_locate)

    cls = sub.add_parser("classify", help="label validation code snippets")
    cls.add_argument("--corpus", required=True, help="snippet directory with manifest.json")
    cls.add_argument("--backend", choices=("rule", "llm"), default="rule")
    cls.add_argument("--variant", choices=("P1", "P2"), default="P2")
    cls.add_argument("--out", default="classify_report.json")
    cls.set_defaults(func=cmd_classify)

    rep = sub.add_parser("report", help="consolidate metrics and attribution")
    rep.add_argument("--scan", required=True, help="scan output directory")
    rep.add_argument("--classification", help="classify report to embed")
    rep.add_argument("--annotations", help="package annotation JSON (default: built-in)")
    rep.add_argument("--out", default="report_out")
    rep.add_argument("--freeze-time", action="store_true")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # pragma: no cover - defensive catch-all
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
