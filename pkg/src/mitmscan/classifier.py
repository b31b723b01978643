"""Label TLS validation code snippets, by rules or via a text-completion backend.

The rule backend is the deterministic default: it extracts the focus method's
body and applies ordered token-level patterns per interface kind. The
completion backend builds the few-shot prompt protocol and parses model
replies, repairing invariant violations deterministically.
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .taxonomy import (
    FAMILY_BY_KIND,
    SECURE_LABELS,
    UNKNOWN_LABELS,
    repair_labels,
    validate_labels,
)

log = logging.getLogger(__name__)

FOCUS_METHODS = {
    "trust_manager": "checkServerTrusted",
    "hostname_verifier": "verify",
    "webview_client": "onReceivedSslError",
}

UNKNOWN_BY_KIND = {
    "trust_manager": "TU",
    "hostname_verifier": "HU",
    "webview_client": "WU",
}


class SnippetParseError(ValueError):
    """The focus method body could not be extracted from the source text."""


@dataclass(frozen=True)
class Snippet:
    snippet_id: str
    source_text: str
    interface_kind: str
    focus_class: str
    focus_method: str

    def __post_init__(self):
        if not self.source_text:
            raise ValueError("source_text must be non-empty")
        expected = FOCUS_METHODS.get(self.interface_kind)
        if expected is None:
            raise ValueError(f"unknown interface_kind: {self.interface_kind}")
        if self.focus_method != expected:
            raise ValueError(
                f"{self.interface_kind} snippets focus on {expected}, "
                f"got {self.focus_method}"
            )


# -- source text handling ------------------------------------------------------


def strip_comments(text: str) -> str:
    text = re.sub(r"/\*.*?\*/", " ", text, flags=re.S)
    return re.sub(r"//[^\n]*", " ", text)


def extract_method_body(source_text: str, method_name: str) -> str:
    """Body of the first declaration of ``method_name``, braces excluded."""
    text = strip_comments(source_text)
    pattern = re.compile(rf"\b{re.escape(method_name)}\s*\(")
    for match in pattern.finditer(text):
        # Skip call sites: a declaration is preceded by a type or modifier,
        # not by a dot.
        before = text[: match.start()].rstrip()
        if before.endswith("."):
            continue
        depth = 0
        i = match.end() - 1
        while i < len(text):  # skip the parameter list
            if text[i] == "(":
                depth += 1
            elif text[i] == ")":
                depth -= 1
                if depth == 0:
                    break
            i += 1
        rest = text[i + 1 :]
        brace = rest.find("{")
        semi = rest.find(";")
        if brace == -1 or (semi != -1 and semi < brace):
            continue  # abstract or call statement
        depth = 0
        for j in range(brace, len(rest)):
            ch = rest[j]
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    return rest[brace + 1 : j]
        raise SnippetParseError(f"unbalanced braces in {method_name}")
    raise SnippetParseError(f"no declaration of {method_name} found")


def _statements(body: str) -> list[str]:
    return [s.strip() for s in body.replace("\n", " ").split(";") if s.strip()]


# -- rule backend ---------------------------------------------------------------


def classify_rule(snippet: Snippet) -> set[str]:
    """Deterministic pattern classification of one snippet."""
    try:
        body = extract_method_body(snippet.source_text, snippet.focus_method)
    except SnippetParseError as exc:
        log.warning("snippet %s: %s", snippet.snippet_id, exc)
        return {UNKNOWN_BY_KIND[snippet.interface_kind]}
    if snippet.interface_kind == "trust_manager":
        labels = _classify_trust(body)
    elif snippet.interface_kind == "hostname_verifier":
        labels = _classify_hostname(body)
    else:
        labels = _classify_webview(body)
    return repair_labels(labels, snippet.interface_kind)


def _is_trivial(stmt: str) -> bool:
    return stmt == "return" or stmt.startswith(("Log.", "System.out.", "log."))


def _classify_trust(body: str) -> list[str]:
    stmts = _statements(body)
    if all(_is_trivial(s) for s in stmts):
        return ["T1"]

    delegates = re.search(
        r"\.\s*checkServerTrusted\s*\(|TrustManagerFactory|getTrustManagers", body
    )
    swallows = _swallowed_validation(body)
    conditional_bypass = re.search(
        r"if\s*\([^)]*(\bauthType\b|getIssuerDN|getIssuerX500Principal)", body
    )
    if delegates and not swallows and not conditional_bypass:
        return ["T0"]

    labels: list[str] = []
    has_validity = ".checkValidity(" in body.replace(" ", "")
    has_self_verify = re.search(r"\.verify\s*\([^)]*getPublicKey", body)
    has_subject = re.search(r"getSubjectDN|getSubjectX500Principal|getSubjectAlternativeNames", body)
    has_null_guard = re.search(r"==\s*null|\.length\s*[<>=!]|\.length\s*==", body)

    if conditional_bypass:
        labels.append("T2-F")
    if has_validity:
        labels.append("T2-A")
    elif has_self_verify:
        labels.append("T2-D")
    elif has_subject:
        labels.append("T2-C")
    elif has_null_guard and not labels:
        labels.append("T2-B")
    if swallows:
        labels.append("T2-E")
    if not labels:
        return ["TU"]
    return labels


def _swallowed_validation(body: str) -> bool:
    """A try block attempts real validation whose exception the catch discards."""
    if "try" not in body or "catch" not in body:
        return False
    if not re.search(r"checkServerTrusted|checkValidity|\.verify\s*\(", body):
        return False
    for match in re.finditer(r"catch\s*\([^)]*\)\s*\{", body):
        depth = 0
        for j in range(match.end() - 1, len(body)):
            if body[j] == "{":
                depth += 1
            elif body[j] == "}":
                depth -= 1
                if depth == 0:
                    inner = body[match.end() : j]
                    if "throw" not in inner:
                        return True
                    break
    return False


def _classify_hostname(body: str) -> list[str]:
    if re.search(r"getDefaultHostnameVerifier|OkHostnameVerifier|\w+Verifier\s*\.\s*verify\s*\(", body):
        return ["H0"]
    stmts = _statements(body)
    if re.fullmatch(r"return\s+(true|1)", stmts[0]) and len(stmts) == 1:
        return ["H1"]
    consults_cert = re.search(
        r"session\s*\.|getPeerCertificates|getSubjectDN|getSubjectX500Principal"
        r"|getSubjectAlternativeNames|getPeerPrincipal",
        body,
    )
    if not consults_cert:
        # Logic over the hostname parameter alone; the certificate is ignored.
        if re.search(r"\bhostname\b|\bhost\b", body):
            return ["H2-A"]
        return ["HU"]
    if re.search(r"\.contains\s*\(|indexOf\s*\(|\.endsWith\s*\(|\.startsWith\s*\(", body):
        return ["H2-B"]
    if re.search(r"\.equals\s*\(|\.equalsIgnoreCase\s*\(", body):
        return ["H0"]
    return ["HU"]


def _classify_webview(body: str) -> list[str]:
    has_proceed = re.search(r"\bproceed\s*\(", body)
    if not has_proceed:
        if re.search(r"\bcancel\s*\(|super\s*\.\s*onReceivedSslError", body):
            return ["W0"]
        return ["WU"]
    dialog = re.search(r"AlertDialog|Dialog\b|setPositiveButton|setNegativeButton", body)
    if dialog:
        return ["W2-A"]
    error_gated = re.search(r"getPrimaryError|\berror\s*==|hasError\s*\(", body)
    if error_gated:
        return ["W2-B"]
    if re.search(r"\bif\s*\(", body):
        # Conditional on something other than the error itself: app state.
        return ["W2-C"]
    return ["W1"]


# -- prompt protocol -----------------------------------------------------------

_CATEGORY_LINES = {
    "trust_manager": [
        ("T0", "Secure TrustManager"),
        ("T1", "Empty TrustManager"),
        ("T2-A", "Only checked validity period"),
        ("T2-B", "Only checked if the parameters were empty or null"),
        ("T2-C", "Only checked the certificate's subject"),
        ("T2-D", "Verified signature but not certificate chain"),
        ("T2-E", "Ignored certificate validation exception"),
        ("T2-F", "Verified certificates only under limited conditions"),
    ],
    "hostname_verifier": [
        ("H0", "Secure HostnameVerifier"),
        ("H1", "HostnameVerifier that always returns true"),
        ("H2-A", "Incorrect use of the hostname parameter for validation"),
        ("H2-B", "Flawed matching of the certificate subject"),
    ],
    "webview_client": [
        ("W0", "Secure WebViewClient SSL error handling"),
        ("W1", "Unconditionally proceeds on SSL errors"),
        ("W2-A", "Lets the user decide whether to proceed"),
        ("W2-B", "Ignored specific error types"),
        ("W2-C", "Ignored errors when the app is in a specific state"),
    ],
}

_UNKNOWN_LINE = {
    "trust_manager": ("TU", "Unknown, unable to determine, or not classifiable above"),
    "hostname_verifier": ("HU", "Unknown, unable to determine, or not classifiable above"),
    "webview_client": ("WU", "Unknown, unable to determine, or not classifiable above"),
}


def build_prompt(
    snippet: Snippet,
    examples: list[tuple["Snippet", set[str], str | None]] | None = None,
    variant: str = "P2",
) -> str:
    """Few-shot classification prompt; P1 omits the unknown category, P2 keeps it."""
    if variant not in ("P1", "P2"):
        raise ValueError(f"unknown prompt variant: {variant}")
    lines = [
        "Task",
        "You are a professional information security researcher, and you need to",
        "thoroughly analyze the code snippet provided by the user that may be",
        "benign or contain SSL vulnerabilities.",
        "Refer to the categories provided below to determine whether the code has",
        "vulnerabilities and the category of the vulnerabilities:",
        "",
        "Categories",
    ]
    categories = list(_CATEGORY_LINES[snippet.interface_kind])
    if variant == "P2":
        categories.append(_UNKNOWN_LINE[snippet.interface_kind])
    lines += [f"- {code}: {desc}" for code, desc in categories]
    for i, (ex, labels, comment) in enumerate(examples or [], 1):
        lines += ["", f"Example {i}", "Input:", ex.source_text.strip()]
        lines.append("Output: " + ",".join(sorted(labels)))
        if comment:
            lines.append(f"Comment: {comment}")
    lines += [
        "",
        "Requirements",
        "- If the code belongs to multiple vulnerability categories at the same",
        "  level, output all categories separated by commas.",
        "- T2-A / T2-B / T2-C / T2-D are mutually exclusive. At any time, the code",
        "  will not contain more than three types of vulnerabilities.",
        "- DO NOT use any format or include any additional content, only output",
        "  the classification category code.",
        "- You must strictly follow the above category definitions, and are",
        "  prohibited from defining any new categories.",
        "",
        f"Focus only on the method {snippet.focus_method} of class {snippet.focus_class}.",
        "",
        "Input:",
        snippet.source_text.strip(),
        "Output:",
    ]
    return "\n".join(lines)


def parse_completion(completion: str, interface_kind: str) -> set[str]:
    """Parse a model reply into a valid label set, repairing violations."""
    family = set(FAMILY_BY_KIND[interface_kind])
    tokens = [t.strip() for t in completion.replace("\n", ",").split(",") if t.strip()]
    recognized = [t for t in tokens if t in family]
    if not recognized:
        log.warning("unparsable completion %r for %s", completion, interface_kind)
        return {UNKNOWN_BY_KIND[interface_kind]}
    return repair_labels(recognized, interface_kind)


class BackendError(Exception):
    """The text-completion backend failed after all retries."""


def classify_llm(
    snippet: Snippet,
    backend,
    variant: str = "P2",
    examples: list[tuple[Snippet, set[str], str | None]] | None = None,
    max_retries: int = 3,
) -> set[str]:
    """Classify via a ``prompt -> completion`` callable with bounded retries."""
    prompt = build_prompt(snippet, examples, variant)
    last_error: Exception | None = None
    for attempt in range(max_retries):
        try:
            completion = backend(prompt)
            break
        except Exception as exc:
            last_error = exc
            log.warning("backend attempt %d failed: %s", attempt + 1, exc)
    else:
        raise BackendError(f"backend failed after {max_retries} attempts") from last_error
    return parse_completion(completion, snippet.interface_kind)


def classify_llm_batch(
    snippets: list[Snippet],
    backend,
    variant: str = "P2",
    examples=None,
    max_retries: int = 3,
    max_concurrency: int = 4,
) -> dict[str, set[str]]:
    with ThreadPoolExecutor(max_workers=max_concurrency) as pool:
        futures = {
            s.snippet_id: pool.submit(
                classify_llm, s, backend, variant, examples, max_retries
            )
            for s in snippets
        }
        return {sid: fut.result() for sid, fut in futures.items()}


# -- evaluation ------------------------------------------------------------------


def _micro(tp: int, fp: int, fn: int) -> dict[str, float | None]:
    precision = tp / (tp + fp) if tp + fp else None
    recall = tp / (tp + fn) if tp + fn else None
    if precision and recall:
        f1 = 2 * precision * recall / (precision + recall)
    elif precision is None or recall is None:
        f1 = None
    else:
        f1 = 0.0
    return {"precision": precision, "recall": recall, "f1": f1}


def evaluate(
    predictions: dict[str, set[str]], ground_truth: dict[str, set[str]]
) -> dict[str, dict]:
    """Multi-label micro precision/recall/F1 per category plus grouped roll-ups."""
    if set(predictions) != set(ground_truth):
        raise ValueError("predictions and ground truth cover different snippets")
    labels = sorted({l for s in ground_truth.values() for l in s}
                    | {l for s in predictions.values() for l in s})
    counts = {l: [0, 0, 0] for l in labels}  # tp, fp, fn
    for sid, truth in ground_truth.items():
        pred = predictions[sid]
        for label in labels:
            if label in pred and label in truth:
                counts[label][0] += 1
            elif label in pred:
                counts[label][1] += 1
            elif label in truth:
                counts[label][2] += 1

    report = {label: _micro(*counts[label]) for label in labels}

    def rollup(members: list[str]) -> dict:
        tp = sum(counts[l][0] for l in members if l in counts)
        fp = sum(counts[l][1] for l in members if l in counts)
        fn = sum(counts[l][2] for l in members if l in counts)
        return _micro(tp, fp, fn)

    report["All Categories"] = rollup(labels)
    report["T2 Subcategories"] = rollup(["T2-A", "T2-B", "T2-C", "T2-D", "T2-E", "T2-F"])
    report["W2 Subcategories"] = rollup(["W2-A", "W2-B", "W2-C"])
    report["H2 Subcategories"] = rollup(["H2-A", "H2-B"])
    return report


# -- corpus ---------------------------------------------------------------------


def load_corpus(path: str | Path) -> list[tuple[Snippet, set[str]]]:
    """Load snippets and ground truth from a directory with a manifest.json."""
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    corpus = []
    for filename, meta in sorted(manifest.items()):
        source = (path / filename).read_text()
        snippet = Snippet(
            snippet_id=filename,
            source_text=source,
            interface_kind=meta["interface_kind"],
            focus_class=meta["focus_class"],
            focus_method=meta["focus_method"],
        )
        truth = set(meta["labels"])
        validate_labels(truth, snippet.interface_kind)
        corpus.append((snippet, truth))
    return corpus


def dedup_by_class(corpus: list[tuple[Snippet, set[str]]]) -> list[tuple[Snippet, set[str]]]:
    """Keep the first snippet per fully qualified focus class."""
    seen: set[str] = set()
    result = []
    for snippet, truth in corpus:
        if snippet.focus_class in seen:
            continue
        seen.add(snippet.focus_class)
        result.append((snippet, truth))
    return result
