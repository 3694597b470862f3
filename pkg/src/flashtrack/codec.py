"""Identifier encoding, streaming decode with lock-on, and ID utilities.

Encoding is trivial: a beacon repeats its canonical word forever. The
decoder is a per-stream state machine fed one sampled bit at a time.
It keeps a rolling window of the last n+1 bits as an integer and looks
up the last n bits (and, for robust tables, also the last n+1 bits) in
the decode table. The two lookups are merged into a single per-step
vote: a lone nonzero lookup votes, two agreeing nonzero lookups vote
once, two different nonzero lookups cancel to unknown.

Lock-on requires a run of consecutive identical nonzero votes. Initial
tables lock on the first vote. Robust tables need a run of 3: windows
that straddle a duplication or deletion are two edits away from any
clean rotation, and such a window can land on a slot legitimately
claimed by a different word. Exhaustive sweeps over every word, phase,
and single error for n <= 12 show those alias votes never persist for
more than 2 consecutive steps, so a run of 3 is the smallest threshold
that never locks onto the wrong identifier; a clean stream still locks
within n+2 bits. Once locked the state is sticky until reset.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
import math

from .codebook import BitWord, Codebook, LookupTable

LOCK_RUN = {"initial": 1, "robust": 3}

STATUS_UNKNOWN = "unknown"
STATUS_LOCKED = "locked"


@dataclass(frozen=True)
class DecodeState:
    """Streaming decoder state; advance with push_bit, one bit per sample.

    identifier is only meaningful when status is locked. vote is this
    step's merged table vote (0 = unknown), kept visible for analysis.
    """

    status: str = STATUS_UNKNOWN
    identifier: int = 0
    bits_consumed: int = 0
    agreement_run: int = 0
    vote: int = 0
    window: int = 0

    @property
    def locked(self) -> bool:
        return self.status == STATUS_LOCKED


def encode(cb: Codebook, identifier: int) -> BitWord:
    """Canonical word for an identifier; transmission repeats it cyclically."""
    return cb.word(identifier)


def decode_window(lut: LookupTable, window: BitWord) -> int:
    """Table lookup for one sampled window of n or n+1 bits; 0 = unknown."""
    if window.n not in (lut.n, lut.n + 1):
        raise ValueError(
            f"window length {window.n} not in {{{lut.n}, {lut.n + 1}}}"
        )
    return lut[window.value]


def push_bit(state: DecodeState, lut: LookupTable, bit: int) -> DecodeState:
    """Feed one bit; returns the successor state."""
    n = lut.n
    window = ((state.window << 1) | (bit & 1)) & ((1 << (n + 1)) - 1)
    consumed = state.bits_consumed + 1

    votes = []
    if consumed >= n:
        votes.append(lut[window & ((1 << n) - 1)])
    if lut.mode == "robust" and consumed >= n + 1:
        votes.append(lut[window])
    nonzero = {v for v in votes if v}
    vote = nonzero.pop() if len(nonzero) == 1 else 0

    if vote and vote == state.vote:
        run = state.agreement_run + 1
    elif vote:
        run = 1
    else:
        run = 0

    if state.locked:
        return replace(
            state, bits_consumed=consumed, agreement_run=run, vote=vote, window=window
        )
    if vote and consumed >= n and run >= LOCK_RUN[lut.mode]:
        return DecodeState(STATUS_LOCKED, vote, consumed, run, vote, window)
    return DecodeState(STATUS_UNKNOWN, 0, consumed, run, vote, window)


class StreamDecoder:
    """Mutable wrapper around DecodeState for one tracked flash point."""

    def __init__(self, lut: LookupTable):
        self.lut = lut
        self.state = DecodeState()

    def push(self, bit: int) -> DecodeState:
        self.state = push_bit(self.state, self.lut, bit)
        return self.state

    def reset(self) -> None:
        """Drop all window history; used when a track association breaks."""
        self.state = DecodeState()

    @property
    def identifier(self) -> int:
        return self.state.identifier


def lock_on_time(n: int, fps: float) -> float:
    """Seconds from first sample to a full clean code cycle: n / fps."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if fps <= 0:
        raise ValueError("fps must be positive")
    return n / fps


def lock_on_display(n: int, fps: float) -> str:
    """Lock-on time truncated (not rounded) to 2 decimals for table output."""
    if isinstance(fps, int) or float(fps).is_integer():
        hundredths = (100 * n) // int(fps)
    else:
        hundredths = math.floor(Fraction(100 * n) / Fraction(fps))
    return f"{hundredths // 100}.{hundredths % 100:02d}"


LOCKON_TABLE_BITS = range(7, 22)
LOCKON_TABLE_FPS = (30, 45, 60, 75, 90, 120, 180, 240)


def render_lockon_table(sizes: dict[int, int] | None = None) -> dict:
    """Lock-on grid for n = 7..21 across the standard frame rates.

    sizes maps n to robust code-book size; when omitted the books are
    generated, which takes a few seconds for the larger n.
    """
    from .codebook import generate_robust_codebook

    rows = {}
    for n in LOCKON_TABLE_BITS:
        size = sizes[n] if sizes else len(generate_robust_codebook(n)[0])
        rows[n] = {
            "size": size,
            "lockon_s": {fps: lock_on_display(n, fps) for fps in LOCKON_TABLE_FPS},
        }
    return rows


def _as_bits(w) -> tuple[int, ...]:
    if isinstance(w, BitWord):
        return w.bits
    if isinstance(w, str):
        return BitWord.from_string(w).bits
    return tuple(int(b) for b in w)


def indel_distance(a, b) -> int:
    """Minimum single-symbol insertions plus deletions turning a into b.

    Computed as len(a) + len(b) - 2 * LCS(a, b); a substitution costs 2
    because it decomposes into one deletion plus one insertion.
    """
    xa, xb = _as_bits(a), _as_bits(b)
    prev = [0] * (len(xb) + 1)
    for x in xa:
        cur = [0] * (len(xb) + 1)
        for j, y in enumerate(xb, start=1):
            cur[j] = prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1])
        prev = cur
    return len(xa) + len(xb) - 2 * prev[-1]


def assign_ids(positions, visibility_radius: float, cb: Codebook) -> dict[int, int]:
    """Greedy identifier assignment spreading edit distance locally.

    Flashers are processed in order; each takes the unused identifier
    maximizing the minimum indel distance to identifiers already held
    by flashers within visibility_radius. Distant flashers impose no
    constraint, so close code pairs may be reused across rooms. Ties
    break toward the lowest identifier, so the first flasher gets 1.
    """
    import numpy as np

    pts = [np.asarray(p, dtype=float) for p in positions]
    if len(pts) > len(cb):
        raise ValueError(f"{len(pts)} flashers but only {len(cb)} code-words")

    assigned: dict[int, int] = {}
    free = list(range(1, len(cb) + 1))
    for i, p in enumerate(pts):
        neighbours = [
            assigned[j]
            for j in assigned
            if float(np.linalg.norm(pts[j] - p)) <= visibility_radius
        ]
        if neighbours:
            best = max(
                free,
                key=lambda ident: (
                    min(indel_distance(cb.word(ident), cb.word(o)) for o in neighbours),
                    -ident,
                ),
            )
        else:
            best = free[0]
        assigned[i] = best
        free.remove(best)
    return assigned
