"""Seeded Monte Carlo execution of the four-stage adaptive attack.

One renewal cycle: (i) a vacuum search consumes and blocks signals until a bit
signal passes the search draw (control signals have no vacuum slot and always
fail, consuming no draw); the opening signal is delivered and an independent
fair coin decides whether it leaks one full bit; (ii) exactly t_sf1 stage-one
filtering trials follow, any failure blocks the whole tuple; (iii) stage-two
trials run left to right until the first failure or t_sf2 successes, then a
closing vacuum search walks right to left over the successes (controls always
fail, consuming no draw); the first success is delivered as vacuum, successes
to its right are blocked, successes to its left stay delivered; (iv) if no
closing vacuum is found the whole tuple is blocked. Processing resumes at the
next unconsumed signal.

Randomness is consumed in a fixed, documented order so that scripted replays
and concurrent shard reductions are reproducible: search draw, boundary-info
coin, SF1 draws left to right, SF2 draws left to right, closing-vacuum draws
right to left. Deterministic outcomes consume no draw. If the input ends
mid-tuple, an unfinished SF1 phase aborts the tuple and an unfinished SF2
phase proceeds to the closing walk with the successes collected so far.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import analytic
from .photonics import (
    MeanPhotonNumber,
    ProtocolParams,
    holevo_binary,
    vacuum_search_success,
)
from .soft_filter import InfeasibilityError, sf1_probs, sf2_probs


class SignalKind(IntEnum):
    """Alice's two-slot signal: BIT0 = (vacuum, pulse), BIT1 = (pulse, vacuum),
    CONTROL = (pulse, pulse)."""

    BIT0 = 0
    BIT1 = 1
    CONTROL = 2


class Fate(IntEnum):
    BLOCKED_SEARCH = 0
    OPENING_BOUNDARY = 1
    EMITTED_SF1 = 2
    EMITTED_SF2 = 3
    CLOSING_VACUUM = 4
    BLOCKED_VACUUM_FAIL = 5
    BLOCKED_SF_FAIL = 6
    BLOCKED_TUPLE_ABORT = 7


_EMITTED_FATES = frozenset(
    {Fate.OPENING_BOUNDARY, Fate.EMITTED_SF1, Fate.EMITTED_SF2}
)

# Slot occupation per kind: True where a pulse is present.
_SLOTS = {
    SignalKind.BIT0: (False, True),
    SignalKind.BIT1: (True, False),
    SignalKind.CONTROL: (True, True),
}


class SignalFate(NamedTuple):
    fate: Fate
    eve_info: float


class ScriptExhaustedError(RuntimeError):
    """A scripted replay ran out of forced outcomes."""

    def __init__(self, draw_index: int):
        super().__init__(f"replay script exhausted at draw index {draw_index}")
        self.draw_index = draw_index


@dataclass(frozen=True)
class AttackParams:
    """Eve's five tunables: SF1 trial count, SF2 success cap, delivered
    intensity mu_b and the two Eve record intensities (math.inf allowed)."""

    t_sf1: int
    t_sf2: int
    mu_b: MeanPhotonNumber
    mu_e1: MeanPhotonNumber
    mu_e2: MeanPhotonNumber

    def __post_init__(self) -> None:
        if self.t_sf1 < 0:
            raise ValueError("t_sf1 must be >= 0")
        if self.t_sf2 < 1:
            raise ValueError("t_sf2 must be >= 1")
        if not 0 <= self.mu_b < math.inf:
            raise ValueError("mu_b must be finite and >= 0")
        for name in ("mu_e1", "mu_e2"):
            v = getattr(self, name)
            if math.isnan(v) or v < 0:
                raise ValueError(f"{name} must be >= 0 (or inf)")

    def require_feasible(self, protocol: ProtocolParams) -> None:
        """Raise InfeasibilityError unless both filtering stages are unitary
        for the given protocol."""
        for name, mu_e in (("mu_e1", self.mu_e1), ("mu_e2", self.mu_e2)):
            if self.mu_b + mu_e < protocol.mu_a:
                raise InfeasibilityError(
                    f"mu_b + {name} = {self.mu_b + mu_e} < mu_a = {protocol.mu_a}"
                )

    @classmethod
    def for_protocol(
        cls,
        protocol: ProtocolParams,
        t_sf1: int,
        t_sf2: int,
        mu_b: MeanPhotonNumber,
        mu_e1: MeanPhotonNumber,
        mu_e2: MeanPhotonNumber,
    ) -> "AttackParams":
        attack = cls(t_sf1, t_sf2, mu_b, mu_e1, mu_e2)
        attack.require_feasible(protocol)
        return attack


@dataclass
class RunStats:
    signals_consumed: int = 0
    signals_emitted: int = 0
    controls_emitted: int = 0
    bits_emitted: int = 0
    eve_info_total: float = 0.0
    tuples_completed: int = 0
    tuples_aborted: int = 0

    def __add__(self, other: "RunStats") -> "RunStats":
        return RunStats(
            self.signals_consumed + other.signals_consumed,
            self.signals_emitted + other.signals_emitted,
            self.controls_emitted + other.controls_emitted,
            self.bits_emitted + other.bits_emitted,
            self.eve_info_total + other.eve_info_total,
            self.tuples_completed + other.tuples_completed,
            self.tuples_aborted + other.tuples_aborted,
        )


def _generate_codes(n: int, f: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    u = rng.random(n)
    codes = np.full(n, SignalKind.BIT1.value, dtype=np.int8)
    codes[u < f] = SignalKind.CONTROL.value
    codes[(u >= f) & (u < f + (1.0 - f) / 2.0)] = SignalKind.BIT0.value
    return codes


def generate_sequence(n: int, f: float, seed: int) -> list[SignalKind]:
    """Draw n signal kinds with P(control) = f and P(each bit) = (1-f)/2.

    Deterministic for fixed (n, f, seed).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= f < 1.0:
        raise ValueError("f must be in [0, 1)")
    return [SignalKind(c) for c in _generate_codes(n, f, seed).tolist()]


def _mc_draw(seed: int) -> Callable[[float], bool]:
    rng = np.random.default_rng(seed)
    buf: list[float] = rng.random(8192).tolist()
    state = [0]

    def draw(p: float) -> bool:
        i = state[0]
        if i == len(buf):
            buf[:] = rng.random(8192).tolist()
            i = 0
        state[0] = i + 1
        return buf[i] < p

    return draw


def _script_draw(script: Sequence[bool]) -> Callable[[float], bool]:
    state = [0]

    def draw(_p: float) -> bool:
        i = state[0]
        if i >= len(script):
            raise ScriptExhaustedError(i)
        state[0] = i + 1
        return bool(script[i])

    return draw


def _execute(
    codes: list[int],
    attack: AttackParams,
    z: float,
    p1: float,
    q1: float,
    p2: float,
    q2: float,
    v: float,
    draw: Callable[[float], bool],
) -> tuple[list[int], list[float], RunStats]:
    n = len(codes)
    control = SignalKind.CONTROL.value
    chi1 = holevo_binary(attack.mu_e1)
    chi2 = holevo_binary(attack.mu_e2)
    t1, t2 = attack.t_sf1, attack.t_sf2

    fates = [Fate.BLOCKED_SEARCH.value] * n
    info = [0.0] * n
    completed = aborted = 0

    i = 0
    while i < n:
        kind = codes[i]
        if kind == control or not draw(z):
            i += 1
            continue

        opening = i
        fates[i] = Fate.OPENING_BOUNDARY.value
        info[i] = 1.0 if draw(0.5) else 0.0
        i += 1

        sf1_failed = False
        for _ in range(t1):
            if i >= n:
                sf1_failed = True
                break
            kind = codes[i]
            if draw(q1 if kind == control else p1):
                fates[i] = Fate.EMITTED_SF1.value
                info[i] = 0.0 if kind == control else chi1
                i += 1
            else:
                fates[i] = Fate.BLOCKED_TUPLE_ABORT.value
                i += 1
                sf1_failed = True
                break
        if sf1_failed:
            for j in range(opening, i):
                fates[j] = Fate.BLOCKED_TUPLE_ABORT.value
                info[j] = 0.0
            aborted += 1
            continue

        successes: list[int] = []
        while len(successes) < t2 and i < n:
            kind = codes[i]
            if draw(q2 if kind == control else p2):
                fates[i] = Fate.EMITTED_SF2.value
                info[i] = 0.0 if kind == control else chi2
                successes.append(i)
                i += 1
            else:
                fates[i] = Fate.BLOCKED_SF_FAIL.value
                i += 1
                break

        close_at = -1
        for jj in range(len(successes) - 1, -1, -1):
            if codes[successes[jj]] != control and draw(v):
                close_at = jj
                break
        if close_at < 0:
            for j in range(opening, i):
                fates[j] = Fate.BLOCKED_TUPLE_ABORT.value
                info[j] = 0.0
            aborted += 1
            continue

        fates[successes[close_at]] = Fate.CLOSING_VACUUM.value
        info[successes[close_at]] = 0.0
        for jj in range(close_at + 1, len(successes)):
            fates[successes[jj]] = Fate.BLOCKED_VACUUM_FAIL.value
            info[successes[jj]] = 0.0
        completed += 1

    emitted = controls_emitted = 0
    op, s1, s2 = (
        Fate.OPENING_BOUNDARY.value,
        Fate.EMITTED_SF1.value,
        Fate.EMITTED_SF2.value,
    )
    for j in range(n):
        fj = fates[j]
        if fj == op or fj == s1 or fj == s2:
            emitted += 1
            if codes[j] == control:
                controls_emitted += 1
    stats = RunStats(
        signals_consumed=n,
        signals_emitted=emitted,
        controls_emitted=controls_emitted,
        bits_emitted=emitted - controls_emitted,
        eve_info_total=math.fsum(info),
        tuples_completed=completed,
        tuples_aborted=aborted,
    )
    return fates, info, stats


def _attack_probs(
    protocol: ProtocolParams, attack: AttackParams
) -> tuple[float, float, float, float, float, float]:
    attack.require_feasible(protocol)
    z = vacuum_search_success(protocol.mu_a)
    p1, q1 = sf1_probs(protocol.mu_a, attack.mu_b, attack.mu_e1)
    p2, q2 = sf2_probs(protocol.mu_a, attack.mu_b, attack.mu_e2)
    v = vacuum_search_success(attack.mu_b + attack.mu_e2)
    return z, p1, q1, p2, q2, v


def run_attack(
    kinds: Sequence[SignalKind],
    protocol: ProtocolParams,
    attack: AttackParams,
    seed: int,
    collect_fates: bool = True,
) -> tuple[list[SignalFate], RunStats]:
    """Run the attack over an Alice sequence; deterministic for a fixed seed.

    Returns one SignalFate per input signal plus the run totals. With
    collect_fates=False the fate list is left empty (bulk-estimation fast
    path; totals are unaffected).
    """
    z, p1, q1, p2, q2, v = _attack_probs(protocol, attack)
    codes = np.asarray(kinds, dtype=np.int8).tolist()
    fates, info, stats = _execute(
        codes, attack, z, p1, q1, p2, q2, v, _mc_draw(seed)
    )
    if not collect_fates:
        return [], stats
    return [SignalFate(Fate(f), x) for f, x in zip(fates, info)], stats


def replay_with_outcomes(
    kinds: Sequence[SignalKind],
    attack: AttackParams,
    script: Sequence[bool],
) -> tuple[list[SignalFate], list[tuple[bool, bool]]]:
    """Re-execute the attack state machine with every stochastic draw replaced
    by the next scripted outcome (True = success / full-information).

    Returns the fates and the delivered two-slot pattern per signal (True
    marks a pulse of the delivered intensity, False a vacuum slot).
    """
    codes = [int(k) for k in kinds]
    # Probabilities are irrelevant under a script; pass placeholders.
    fates, info, _stats = _execute(
        codes, attack, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, _script_draw(script)
    )
    pattern = [
        _SLOTS[SignalKind(c)] if f in _EMITTED_FATES else (False, False)
        for c, f in zip(codes, fates)
    ]
    return [SignalFate(Fate(f), x) for f, x in zip(fates, info)], pattern


def structural_visibility_check(
    kinds: Sequence[SignalKind], fates: Sequence[SignalFate]
) -> bool:
    """True iff delivered tuples are structurally invisible to the monitoring
    line: each maximal delivered run is ordered opening, SF1 signals, SF2
    signals; it is immediately followed by its closing-vacuum signal; closing
    signals appear nowhere else; boundary signals are never controls; and on
    the delivered slot train every tuple is bounded by vacuum slots."""
    if len(kinds) != len(fates):
        return False
    n = len(kinds)
    i = 0
    while i < n:
        fate = fates[i].fate
        if fate == Fate.CLOSING_VACUUM:
            return False  # closing without a preceding delivered run
        if fate not in _EMITTED_FATES:
            i += 1
            continue
        if fate != Fate.OPENING_BOUNDARY or kinds[i] == SignalKind.CONTROL:
            return False
        i += 1
        seen_sf2 = False
        while i < n and fates[i].fate in _EMITTED_FATES:
            if fates[i].fate == Fate.OPENING_BOUNDARY:
                return False
            if fates[i].fate == Fate.EMITTED_SF2:
                seen_sf2 = True
            elif seen_sf2:  # SF1 after SF2
                return False
            i += 1
        if i >= n or fates[i].fate != Fate.CLOSING_VACUUM:
            return False
        if kinds[i] == SignalKind.CONTROL:
            return False
        # Vacuum boundedness on the slot train follows: the left neighbor of a
        # maximal run is blocked or a closing signal (delivered as double
        # vacuum), and the right neighbor is this run's closing signal.
        i += 1
    return True


def dump_trace(
    kinds: Sequence[SignalKind], fates: Sequence[SignalFate]
) -> str:
    """Line-oriented debug dump; tab-separated columns in this order:
    signal index, kind name, fate name, eve_info."""
    lines = ["index\tkind\tfate\teve_info"]
    for i, (k, sf) in enumerate(zip(kinds, fates)):
        lines.append(
            f"{i}\t{SignalKind(k).name}\t{sf.fate.name}\t{sf.eve_info:.12g}"
        )
    return "\n".join(lines) + "\n"


def stats_to_point(
    stats: RunStats, attack: AttackParams
) -> "analytic.StrategyPoint":
    """Empirical StrategyPoint from run totals."""
    consumed = stats.signals_consumed
    emit = stats.signals_emitted / consumed if consumed else 0.0
    cf = (
        stats.controls_emitted / stats.signals_emitted
        if stats.signals_emitted
        else 0.0
    )
    info = (
        stats.eve_info_total / stats.bits_emitted if stats.bits_emitted else 0.0
    )
    return analytic.StrategyPoint(
        emit_fraction=emit,
        control_fraction=cf,
        eve_info_per_emitted_bit=info,
        mu_delivered=attack.mu_b,
    )


def estimate_strategy_point(
    protocol: ProtocolParams,
    attack: AttackParams,
    n_signals: int,
    seed: int,
    replicates: int = 20,
) -> tuple["analytic.StrategyPoint", dict[str, float], RunStats]:
    """Monte Carlo estimate of the attack's StrategyPoint.

    Runs `replicates` independent shards of n_signals/replicates signals and
    returns the pooled point, per-field standard errors across shards, and the
    summed RunStats.
    """
    if replicates < 2:
        raise ValueError("need at least 2 replicates for a standard error")
    per = max(n_signals // replicates, 1)
    fields = ("emit_fraction", "control_fraction", "eve_info_per_emitted_bit")
    samples: dict[str, list[float]] = {f: [] for f in fields}
    total = RunStats()
    for r in range(replicates):
        kinds = _generate_codes(per, protocol.f, seed + 1000 + r).tolist()
        z, p1, q1, p2, q2, v = _attack_probs(protocol, attack)
        _, _, stats = _execute(
            kinds, attack, z, p1, q1, p2, q2, v, _mc_draw(seed + 2000 + r)
        )
        total = total + stats
        pt = stats_to_point(stats, attack)
        for f in fields:
            samples[f].append(getattr(pt, f))
    point = stats_to_point(total, attack)
    ses = {}
    for f in fields:
        xs = np.array(samples[f])
        ses[f] = float(xs.std(ddof=1) / math.sqrt(replicates))
    return point, ses, total
