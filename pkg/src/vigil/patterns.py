"""Temporal sequence patterns over the event stream.

Grammar (whitespace-insensitive, keywords uppercase)::

    pattern := term | "SEQ(" pattern ("," pattern)+ ")" "WITHIN" <int> "s" [scope]
    term    := concept_id [">=" confidence]
    scope   := "SAME" "CAMERA"

A match binds one event per term, in term order, timestamps strictly
increasing, intervening events ignored (skip till any match).  Each SEQ
bounds the span of the events under it and may pin them to one camera.
Terms match by ontology subsumption.  For every feasible final event the
matcher reports the single latest-start assignment: earlier events chosen
as late as possible, compared on (timestamp, event_id) from the
second-to-last term backwards.
"""

from __future__ import annotations

import re
from bisect import bisect_left
from dataclasses import dataclass

from .events import SensorEvent
from .ontology import Ontology

ROOT_WITHIN_NONE = 0  # bare-term patterns have no window


class PatternError(Exception):
    """Base for pattern parse and matcher failures."""


class PatternSyntaxError(PatternError):
    def __init__(self, position: int, expected: str, found: str = ""):
        shown = found if found else "end of input"
        super().__init__(f"at offset {position}: expected {expected}, found {shown}")
        self.position = position
        self.expected = expected
        self.found = found


class OutOfOrderEvent(PatternError):
    def __init__(self, event_id: str, timestamp: int, last_timestamp: int):
        super().__init__(
            f"event {event_id!r} at {timestamp} arrived after stream reached {last_timestamp}"
        )
        self.event_id = event_id
        self.timestamp = timestamp
        self.last_timestamp = last_timestamp


@dataclass(frozen=True)
class Term:
    concept: str
    min_confidence: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.min_confidence <= 1.0):
            raise PatternError(f"min_confidence {self.min_confidence} outside [0,1]")


@dataclass(frozen=True)
class Seq:
    children: tuple
    within: int  # ms
    same_camera: bool = False

    def __post_init__(self):
        if len(self.children) < 2:
            raise PatternError("SEQ needs at least 2 children")
        if self.within <= 0:
            raise PatternError("within must be positive")


@dataclass(frozen=True)
class Match:
    event_ids: tuple[str, ...]
    start: int
    end: int
    pattern_text: str


_WORD_RE = re.compile(r"[A-Za-z0-9_.]+")
_DURATION_RE = re.compile(r"([0-9]+)s")
_KEYWORDS = ("SEQ", "WITHIN", "SAME", "CAMERA")


def _tokenize(text: str) -> list[tuple[str, int]]:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if text.startswith(">=", i):
            out.append((">=", i))
            i += 2
            continue
        if ch in "(),":
            out.append((ch, i))
            i += 1
            continue
        m = _WORD_RE.match(text, i)
        if m is None:
            raise PatternSyntaxError(i, "concept id, keyword, or number", ch)
        out.append((m.group(0), i))
        i = m.end()
    return out


class _Parser:
    def __init__(self, text: str, ontology: Ontology):
        self.text = text
        self.ontology = ontology
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> tuple[str, int]:
        if self.pos < len(self.tokens):
            return self.tokens[self.pos]
        return "", len(self.text)

    def take(self) -> tuple[str, int]:
        tok = self.peek()
        self.pos += 1
        return tok

    def expect(self, want: str) -> None:
        tok, at = self.take()
        if tok != want:
            raise PatternSyntaxError(at, repr(want), tok)

    def parse(self):
        node = self.node()
        tok, at = self.peek()
        if tok:
            raise PatternSyntaxError(at, "end of pattern", tok)
        return node

    def node(self):
        tok, at = self.peek()
        if tok == "SEQ":
            return self.seq()
        if not tok:
            raise PatternSyntaxError(at, "a term or SEQ(...)")
        return self.term()

    def seq(self):
        self.take()  # SEQ
        self.expect("(")
        children = [self.node()]
        while True:
            tok, at = self.take()
            if tok == ",":
                children.append(self.node())
            elif tok == ")":
                break
            else:
                raise PatternSyntaxError(at, "',' or ')'", tok)
        if len(children) < 2:
            raise PatternSyntaxError(at, "at least two children in SEQ")
        self.expect("WITHIN")
        dur, at = self.take()
        m = _DURATION_RE.fullmatch(dur)
        if m is None:
            raise PatternSyntaxError(at, "a duration like 300s", dur)
        within = int(m.group(1)) * 1000
        if within <= 0:
            raise PatternSyntaxError(at, "a positive duration", dur)
        same = False
        if self.peek()[0] == "SAME":
            self.take()
            self.expect("CAMERA")
            same = True
        return Seq(tuple(children), within, same)

    def term(self):
        tok, at = self.take()
        if tok in _KEYWORDS or not _WORD_RE.fullmatch(tok):
            raise PatternSyntaxError(at, "a concept id", tok)
        concept = self.ontology.validate_term(tok)
        conf = 0.0
        if self.peek()[0] == ">=":
            self.take()
            num, nat = self.take()
            try:
                conf = float(num)
            except ValueError:
                raise PatternSyntaxError(nat, "a confidence in [0,1]", num) from None
            if not (0.0 <= conf <= 1.0):
                raise PatternSyntaxError(nat, "a confidence in [0,1]", num)
        return Term(concept, conf)


def parse_pattern(text: str, ontology: Ontology):
    """Parse pattern text to an AST, validating concepts against the ontology."""
    return _Parser(text, ontology).parse()


def format_pattern(node) -> str:
    """Canonical text for an AST; parse_pattern(format_pattern(p)) == p."""
    if isinstance(node, Term):
        if node.min_confidence > 0:
            return f"{node.concept} >= {node.min_confidence:g}"
        return node.concept
    inner = ", ".join(format_pattern(c) for c in node.children)
    seconds = node.within // 1000 if node.within % 1000 == 0 else node.within / 1000
    text = f"SEQ({inner}) WITHIN {seconds:g}s"
    if node.same_camera:
        text += " SAME CAMERA"
    return text


def _event_key(e: SensorEvent) -> tuple[int, str]:
    return (e.timestamp, e.event_id)


class _Compiled:
    """Flattened pattern: leaf terms in order plus span constraints per SEQ."""

    def __init__(self, ast, ontology: Ontology, pattern_text: str | None):
        self.ast = ast
        self.text = pattern_text if pattern_text is not None else format_pattern(ast)
        self.leaves: list[Term] = []
        self.spans: list[tuple[int, int, int, bool]] = []  # (lo, hi, within, same)
        self._walk(ast)
        self.n = len(self.leaves)
        self.root_within = ast.within if isinstance(ast, Seq) else ROOT_WITHIN_NONE
        self.accepts = [frozenset(ontology.descendants(t.concept)) for t in self.leaves]
        self.min_conf = [t.min_confidence for t in self.leaves]
        # spans grouped by the leaf whose assignment activates them, and the
        # leaves some SAME CAMERA span can pin (those get a per-camera index)
        ending: list[list[tuple[int, int, bool]] | None] = [None] * self.n
        self.pinned = [False] * self.n
        for lo, hi, within, same in self.spans:
            got = ending[hi]
            if got is None:
                got = ending[hi] = []
            got.append((lo, within, same))
            if same:
                for j in range(lo, hi):
                    self.pinned[j] = True
        self.ending = ending

    def _walk(self, node) -> tuple[int, int]:
        if isinstance(node, Term):
            self.leaves.append(node)
            i = len(self.leaves) - 1
            return i, i
        lo = hi = -1
        for child in node.children:
            clo, chi = self._walk(child)
            if lo < 0:
                lo = clo
            hi = chi
        self.spans.append((lo, hi, node.within, node.same_camera))
        return lo, hi

    def term_ok(self, i: int, e: SensorEvent) -> bool:
        return e.concept in self.accepts[i] and e.confidence >= self.min_conf[i]

    def final_ok(self, e: SensorEvent) -> bool:
        return self.term_ok(self.n - 1, e)


class _LeafPool:
    """Events matching one leaf, ascending by (timestamp, event_id).

    Keys live in a parallel list so bisect never needs a key callable.
    Expired entries are skipped via ``off`` and physically dropped only in
    batches, keeping per-event upkeep O(1) amortized.  Leaves a SAME CAMERA
    span can pin also carry a per-camera index, so a camera-constrained
    search touches just that camera's events instead of filtering the lot.
    """

    __slots__ = ("keys", "evs", "off", "by_cam")

    def __init__(self, indexed: bool):
        self.keys: list[tuple[int, str]] = []
        self.evs: list[SensorEvent] = []
        self.off = 0
        self.by_cam: dict[str, tuple[list, list]] | None = {} if indexed else None

    def insert(self, e: SensorEvent, key: tuple[int, str]) -> None:
        keys = self.keys
        if not keys or key >= keys[-1]:
            keys.append(key)
            self.evs.append(e)
        else:
            at = bisect_left(keys, key, self.off)
            keys.insert(at, key)
            self.evs.insert(at, e)
        if self.by_cam is not None:
            got = self.by_cam.get(e.camera_id)
            if got is None:
                self.by_cam[e.camera_id] = ([key], [e])
            else:
                ckeys, cevs = got
                if not ckeys or key >= ckeys[-1]:
                    ckeys.append(key)
                    cevs.append(e)
                else:
                    at = bisect_left(ckeys, key)
                    ckeys.insert(at, key)
                    cevs.insert(at, e)

    def expire(self, cutoff: int) -> None:
        keys = self.keys
        off = self.off
        n = len(keys)
        while off < n and keys[off][0] < cutoff:
            off += 1
        if off == self.off:
            return
        self.off = off
        if off < 512 or off * 2 < n:
            return
        del keys[:off]
        del self.evs[:off]
        self.off = 0
        if self.by_cam:
            gone = []
            for cam, (ckeys, cevs) in self.by_cam.items():
                drop = bisect_left(ckeys, (cutoff,))
                if drop:
                    del ckeys[:drop]
                    del cevs[:drop]
                if not ckeys:
                    gone.append(cam)
            for cam in gone:
                del self.by_cam[cam]

    def live_events(self) -> list[SensorEvent]:
        return self.evs[self.off:]


def _latest_assignment(cp: _Compiled, pools: list[_LeafPool],
                       final: SensorEvent) -> list[SensorEvent] | None:
    """Latest-start assignment ending at ``final``, or None.

    Depth-first from the second-to-last leaf down, trying later events
    first, so the first complete assignment maximizes (timestamp, event_id)
    leafwise from the end — the minimal match.  Stale pool entries below a
    leaf's window floor are cut off by the floor check, so lazy expiry never
    leaks an out-of-window event into a match.
    """
    n = cp.n
    assign: list[SensorEvent | None] = [None] * n
    assign[n - 1] = final
    min_ts = [0] * n
    cam_req: list[str | None] = [None] * n
    ending = cp.ending

    def activate(i: int, undo: list) -> None:
        e = assign[i]
        for lo, within, same in ending[i]:
            bound = e.timestamp - within
            for j in range(lo, i):
                if bound > min_ts[j]:
                    undo.append((0, j, min_ts[j]))
                    min_ts[j] = bound
                if same and cam_req[j] != e.camera_id:
                    undo.append((1, j, cam_req[j]))
                    cam_req[j] = e.camera_id

    def dfs(i: int) -> bool:
        if i < 0:
            return True
        upper = (assign[i + 1].timestamp,)
        floor = min_ts[i]
        need_cam = cam_req[i]
        pool = pools[i]
        if need_cam is None:
            keys = pool.keys
            evs = pool.evs
        else:
            got = pool.by_cam.get(need_cam)
            if got is None:
                assign[i] = None
                return False
            keys, evs = got
        ending_i = ending[i]
        for k in range(bisect_left(keys, upper) - 1, -1, -1):
            e = evs[k]
            if e.timestamp < floor:
                break
            assign[i] = e
            if ending_i is None:
                if dfs(i - 1):
                    return True
                continue
            undo: list = []
            activate(i, undo)
            if dfs(i - 1):
                return True
            for kind, j, old in reversed(undo):
                if kind == 0:
                    min_ts[j] = old
                else:
                    cam_req[j] = old
        assign[i] = None
        return False

    top: list = []
    activate(n - 1, top)
    if dfs(n - 2):
        return assign  # type: ignore[return-value]
    return None


def _as_match(cp: _Compiled, assign: list[SensorEvent]) -> Match:
    return Match(
        event_ids=tuple(e.event_id for e in assign),
        start=assign[0].timestamp,
        end=assign[-1].timestamp,
        pattern_text=cp.text,
    )


def match_events(events: list[SensorEvent], ast, ontology: Ontology,
                 pattern_text: str | None = None) -> list[Match]:
    """All minimal matches of the pattern over the events, ordered by end time."""
    cp = _Compiled(ast, ontology, pattern_text)
    ordered = sorted(events, key=_event_key)
    if cp.n == 1:
        return [_as_match(cp, [e]) for e in ordered if cp.term_ok(0, e)]
    pools = [_LeafPool(cp.pinned[i]) for i in range(cp.n)]
    for e in ordered:
        key = (e.timestamp, e.event_id)
        for i in range(cp.n):
            if cp.term_ok(i, e):
                pools[i].insert(e, key)
    out = []
    for final in pools[-1].evs:
        assign = _latest_assignment(cp, pools, final)
        if assign is not None:
            out.append(_as_match(cp, assign))
    return out


class IncrementalMatcher:
    """Streaming form of match_events: feed events in timestamp order.

    Retains only events that match some leaf term and lie inside the root
    window of the newest timestamp, so state stays bounded regardless of
    stream length.
    """

    def __init__(self, ast, ontology: Ontology, pattern_text: str | None = None):
        self._cp = _Compiled(ast, ontology, pattern_text)
        self._pools = [_LeafPool(self._cp.pinned[i]) for i in range(self._cp.n)]
        self._last_ts: int | None = None

    @property
    def pattern_text(self) -> str:
        return self._cp.text

    def retained_count(self) -> int:
        seen = {e.event_id for pool in self._pools for e in pool.live_events()}
        return len(seen)

    def feed(self, e: SensorEvent) -> list[Match]:
        last = self._last_ts
        if last is not None and e.timestamp < last:
            raise OutOfOrderEvent(e.event_id, e.timestamp, last)
        self._last_ts = e.timestamp
        cp = self._cp
        if cp.n == 1:
            return [_as_match(cp, [e])] if cp.term_ok(0, e) else []
        accepts = cp.accepts
        min_conf = cp.min_conf
        concept = e.concept
        conf = e.confidence
        pools = self._pools
        key = (e.timestamp, e.event_id)
        for i in range(cp.n):
            if concept in accepts[i] and conf >= min_conf[i]:
                pools[i].insert(e, key)
        cutoff = e.timestamp - cp.root_within
        for pool in pools:
            off = pool.off
            if off < len(pool.keys) and pool.keys[off][0] < cutoff:
                pool.expire(cutoff)
        if concept not in accepts[-1] or conf < min_conf[-1]:
            return []
        assign = _latest_assignment(cp, pools, e)
        if assign is None:
            return []
        return [_as_match(cp, assign)]
