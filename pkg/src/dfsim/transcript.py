"""Game transcripts: serialization, parsing, and independent verification.

A transcript is JSONL: one header object, then one object per round.
Floats are written with 17 significant digits, which reparses to the
identical binary64 value.  Every line carries a sha256 digest of its own
canonical form, so any tampering — including fields no semantic check
constrains tightly — is detectable from the file alone.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field, asdict, is_dataclass

import numpy as np

from .errors import ParseError, SchemaVersionMismatch, SinkFailure
from .simplex import tv_distance

SCHEMA = "df-transcript/1"
TOL = 1e-9


def eps_n_at(schedule, n):
    """Per-round support-diameter budget from a schedule spec.

    Supported kinds: {"kind": "constant", "c": x} and
    {"kind": "geometric", "a": a, "r": r, "floor": f} meaning a * r**n
    clipped from below at f (floor optional, default 0).
    """
    kind = schedule.get("kind")
    if kind == "constant":
        return float(schedule["c"])
    if kind == "geometric":
        val = float(schedule["a"]) * float(schedule["r"]) ** n
        return max(val, float(schedule.get("floor", 0.0)))
    raise ParseError(0, f"unknown eps_n schedule kind {kind!r}")


@dataclass
class RoundRecord:
    n: int
    support: list      # support points of the round's forecast
    weights: list
    omega: int
    drawn: int         # index into support of the realized forecast
    f: list            # side-bet values on support (zeros for continuous)
    payoff: list       # S(omega, p): rows outcomes, columns support points
    K: float
    F: float


@dataclass
class Transcript:
    header: dict
    rounds: list = field(default_factory=list)
    verdict: object = None


# --- canonical serialization ------------------------------------------------


def _ser(obj):
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        # +0.0: "-0" would reparse as integer zero and break round-tripping
        return format(float(obj) + 0.0, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _ser(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_ser(x) for x in obj) + "]"
    if isinstance(obj, dict):
        return "{" + ",".join(json.dumps(str(k)) + ":" + _ser(v)
                              for k, v in obj.items()) + "}"
    raise TypeError(f"cannot serialize {type(obj)}")


def _digest(payload: dict) -> str:
    return hashlib.sha256(_ser(payload).encode()).hexdigest()


def _line(payload: dict) -> str:
    return _ser({**payload, "digest": _digest(payload)})


def _round_payload(r: RoundRecord) -> dict:
    return {"n": r.n, "support": r.support, "weights": r.weights,
            "omega": r.omega, "drawn": r.drawn, "f": r.f,
            "payoff": r.payoff, "K": r.K, "F": r.F}


def write(transcript: Transcript, sink=None) -> bytes:
    """Serialize to JSONL bytes; optionally also write them to sink
    (a path or a binary file object)."""
    verdict = transcript.verdict
    if is_dataclass(verdict):
        verdict = asdict(verdict)
    # keys with a leading underscore are in-memory bookkeeping, not payload
    header = {k: v for k, v in transcript.header.items()
              if not k.startswith("_")}
    header["verdict"] = verdict
    lines = [_line(header)]
    lines += [_line(_round_payload(r)) for r in transcript.rounds]
    data = ("\n".join(lines) + "\n").encode()
    if sink is not None:
        try:
            if hasattr(sink, "write"):
                sink.write(data)
            else:
                with open(sink, "wb") as fh:
                    fh.write(data)
        except OSError as exc:
            raise SinkFailure(str(exc)) from exc
    return data


def read(source) -> Transcript:
    """Parse JSONL from a path, bytes, or file object."""
    if isinstance(source, (bytes, bytearray)):
        text = source.decode()
    elif hasattr(source, "read"):
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode()
    else:
        try:
            with open(source, "rb") as fh:
                text = fh.read().decode()
        except OSError as exc:
            raise ParseError(0, f"cannot read {source}: {exc}") from exc

    lines = [ln for ln in text.split("\n") if ln.strip()]
    if not lines:
        raise ParseError(0, "empty transcript")
    parsed = []
    for i, ln in enumerate(lines, start=1):
        try:
            parsed.append(json.loads(ln))
        except json.JSONDecodeError as exc:
            raise ParseError(i, f"invalid JSON: {exc.msg}") from exc

    header = parsed[0]
    if header.get("schema") != SCHEMA:
        raise SchemaVersionMismatch(
            f"expected schema {SCHEMA!r}, got {header.get('schema')!r}")
    verdict = header.pop("verdict", None)
    header_digest = header.pop("digest", None)  # re-derived on write

    rounds = []
    keys = {"n", "support", "weights", "omega", "drawn", "f", "payoff", "K", "F"}
    for i, obj in enumerate(parsed[1:], start=2):
        missing = keys - obj.keys()
        if missing:
            raise ParseError(i, f"round missing keys {sorted(missing)}")
        rounds.append(RoundRecord(
            n=obj["n"], support=obj["support"], weights=obj["weights"],
            omega=obj["omega"], drawn=obj["drawn"], f=obj["f"],
            payoff=obj["payoff"], K=obj["K"], F=obj["F"]))
        if obj["n"] != i - 1:
            raise ParseError(i, f"round numbered {obj['n']}, expected {i - 1}")

    t = Transcript(header=header, rounds=rounds, verdict=verdict)
    t.header["_digests"] = [header_digest] + [obj.get("digest")
                                              for obj in parsed[1:]]
    return t


# --- verification -----------------------------------------------------------

CHECKS = ("recursion", "bet_mean", "expected_gain", "support",
          "diameter", "capital_bound", "bet_identity", "digest")


@dataclass
class VerificationReport:
    checks_run: tuple
    num_rounds: int
    failures: dict  # check name -> list of (round n, detail)

    @property
    def ok(self):
        return not any(self.failures.values())

    def summary(self):
        out = []
        for c in self.checks_run:
            fails = self.failures.get(c, [])
            status = "pass" if not fails else f"FAIL at rounds {[n for n, _ in fails][:5]}"
            out.append(f"{c}: {status} ({self.num_rounds - len(fails)}/{self.num_rounds})")
        return "\n".join(out)


def verify(transcript: Transcript) -> VerificationReport:
    """Re-check every protocol constraint from the stored record alone.

    Per round: (a) capital recursions; (b) bet has nonpositive mean;
    (c) worst expected gain under the forecast is below eps*2^-n;
    (d) support size and weight normalization; (e) TV diameter within
    the round's budget; (f) K <= (1+eps)F; (g) the defensive bet formula
    links f to the stored payoffs; (h) line digests.  Checks (b)-(g)
    apply to randomized games only; (g) only when the header declares
    the defensive forecaster.
    """
    h = transcript.header
    game = h.get("game", "randomized")
    M = int(h["M"])
    eps = float(h.get("eps", 0.0))
    schedule = h.get("eps_n_schedule")
    defensive_f = h.get("forecaster") == "defensive"
    randomized = game == "randomized"

    failures = {c: [] for c in CHECKS}

    digests = h.get("_digests")
    if digests:
        header_payload = {k: v for k, v in h.items() if k not in ("_digests",)}
        header_payload["verdict"] = transcript.verdict
        if _digest(header_payload) != digests[0]:
            failures["digest"].append((0, "header digest mismatch"))

    K_prev, F_prev = 1.0, 1.0
    for i, r in enumerate(transcript.rounds):
        n = r.n
        w = np.asarray(r.weights, dtype=float)
        pts = np.asarray(r.support, dtype=float)
        payoff = np.asarray(r.payoff, dtype=float)
        fv = np.asarray(r.f, dtype=float)
        # numeric checks are relative to the round's capital scale: float64
        # carries ~16 digits, so an absolute 1e-9 is unverifiable once the
        # capitals pass ~1e7 (the digest check still pins every stored byte)
        scale = max(1.0, abs(r.K), abs(r.F),
                    float(np.abs(payoff).max(initial=0.0)),
                    float(np.abs(fv).max(initial=0.0)))
        tol = TOL * scale

        # (a) capital recursions
        if abs(r.K - (K_prev + payoff[r.omega, r.drawn])) > tol or \
           abs(r.F - (F_prev + fv[r.drawn])) > tol:
            failures["recursion"].append((n, f"K={r.K} F={r.F}"))
        K_prev, F_prev = r.K, r.F

        # (d) support shape
        ok_shape = (1 <= pts.shape[0] <= M and pts.shape[1] == M
                    and payoff.shape == (M, pts.shape[0])
                    and w.shape == (pts.shape[0],) and np.all(w > 0)
                    and abs(w.sum() - 1.0) <= TOL)
        if not ok_shape:
            failures["support"].append((n, f"support shape {pts.shape}, sum w {w.sum()}"))

        if randomized:
            # (b) nonpositive bet mean
            mean = float(w @ fv)
            if mean > tol:
                failures["bet_mean"].append((n, f"mean {mean:g}"))
            # (c) worst expected sceptic gain
            worst = float((payoff @ w).max())
            if worst > eps * 2.0 ** (-n) + tol:
                failures["expected_gain"].append((n, f"worst {worst:g}"))
            # (e) support diameter
            if schedule is not None:
                budget = eps_n_at(schedule, n)
                diam = max((tv_distance(pts[a], pts[b])
                            for a in range(len(pts)) for b in range(a + 1, len(pts))),
                           default=0.0)
                if diam > budget + 1e-12:
                    failures["diameter"].append((n, f"diam {diam:g} > {budget:g}"))
            # (f) capital domination
            if r.K > (1.0 + eps) * r.F + tol:
                failures["capital_bound"].append((n, f"K={r.K} F={r.F}"))
            # (g) defensive bet formula
            if defensive_f:
                expect = (payoff[r.omega, :] - eps * 2.0 ** (-n)) / (1.0 + eps)
                if np.abs(fv - expect).max() > tol:
                    failures["bet_identity"].append((n, "f deviates from bet formula"))

        # (h) line digest
        if digests and i + 1 < len(digests):
            if _digest(_round_payload(r)) != digests[i + 1]:
                failures["digest"].append((n, "round digest mismatch"))

    return VerificationReport(checks_run=CHECKS, num_rounds=len(transcript.rounds),
                              failures=failures)
