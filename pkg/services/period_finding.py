"""
Period Finding Service
Oracle construction, periodic-state collapse, QFT sampling and classical
recovery of the period from sampled outcomes.
"""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import settings
from core.exceptions import (
    CapacityException,
    FunctionTableException,
    InvalidOffsetException,
    OracleOverflowException,
    PeriodFindingException,
)
from services.circuits import apply_qft
from services.file import read_csv_rows
from services.qstate import SeedLike, StateVector, as_generator, measure_distribution, sample
from services.utils import spawn_generators

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PeriodicFunction:
    """Function table over 0..2^n_in - 1; period is the construction period when known."""

    n_in: int
    table: Tuple[int, ...]
    period: Optional[int] = None

    def __post_init__(self) -> None:
        table = tuple(int(v) for v in self.table)
        object.__setattr__(self, "table", table)
        if not 1 <= self.n_in <= settings.MAX_QUBITS:
            raise CapacityException("Input register out of range", n_in=self.n_in, max_qubits=settings.MAX_QUBITS)
        if len(table) != 2**self.n_in:
            raise FunctionTableException("Table length must be 2^n_in", length=len(table), n_in=self.n_in)
        if min(table) < 0:
            raise FunctionTableException("Function values must be nonnegative")

    def __call__(self, x: int) -> int:
        return self.table[x]

    @property
    def size(self) -> int:
        return len(self.table)

    @property
    def n_out(self) -> int:
        """Minimal output register width, ceil(log2(max f + 1)), at least one qubit."""
        return max(1, max(self.table).bit_length())

    def has_period(self, q: int) -> bool:
        """f(x + q) == f(x) for every x with x + q < N."""
        if not 1 <= q < self.size:
            return False
        table = np.asarray(self.table)
        return bool(np.array_equal(table[q:], table[:-q]))


def periodic_function(n: int, r: int, values: Optional[Sequence[int]] = None) -> PeriodicFunction:
    """f(x) = values[x mod r]; values must be pairwise distinct (default 0..r-1)."""
    size = 2**n
    if not 1 <= r <= size:
        raise InvalidOffsetException("Period must lie in 1..N", r=r, N=size)
    values = list(range(r)) if values is None else [int(v) for v in values]
    if len(values) != r or len(set(values)) != r:
        raise FunctionTableException("Need r pairwise distinct values", r=r, values=values)
    return PeriodicFunction(n, tuple(values[x % r] for x in range(size)), period=r)


def load_function_table(path: Path) -> PeriodicFunction:
    """
    Read `x,f(x)` rows from CSV. A non-numeric first row is treated as a
    header; every x in 0..N-1 must appear exactly once with N a power of two.
    """
    rows = read_csv_rows(path)
    if rows and not rows[0][0].lstrip("-").isdigit():
        rows = rows[1:]
    if not rows:
        raise FunctionTableException("Function table is empty", path=str(path))
    entries: Dict[int, int] = {}
    for number, row in enumerate(rows, start=1):
        if len(row) < 2:
            raise FunctionTableException("Row needs x and f(x)", row=number)
        try:
            x, value = int(row[0]), int(row[1])
        except ValueError:
            raise FunctionTableException("Non-integer entry", row=number, content=",".join(row))
        if x in entries:
            raise FunctionTableException("Duplicate x", row=number, x=x)
        entries[x] = value
    size = len(entries)
    n = size.bit_length() - 1
    if 2**n != size or sorted(entries) != list(range(size)):
        raise FunctionTableException("x must cover 0..N-1 with N a power of two", entries=size)
    function = PeriodicFunction(n, tuple(entries[x] for x in range(size)))
    logger.debug("Loaded function table with N=%d from %s", size, path)
    return function


def oracle_permutation(f: PeriodicFunction, n_out: Optional[int] = None) -> np.ndarray:
    """Index map (x, y) -> (x, y xor f(x)) on the joint register, x most significant."""
    n_out = f.n_out if n_out is None else n_out
    if max(f.table) >= 2**n_out:
        raise OracleOverflowException("Function values do not fit the output register", n_out=n_out)
    width = 2**n_out
    x = np.repeat(np.arange(f.size), width)
    y = np.tile(np.arange(width), f.size)
    values = np.asarray(f.table)[x]
    return x * width + (y ^ values)


def oracle_unitary(f: PeriodicFunction, n_out: Optional[int] = None) -> np.ndarray:
    """Dense permutation matrix U|x>|y> = |x>|y xor f(x)>."""
    n_out = f.n_out if n_out is None else n_out
    if f.n_in + n_out > settings.MAX_QUBITS:
        raise CapacityException(
            "Oracle exceeds qubit capacity", n_qubits=f.n_in + n_out, max_qubits=settings.MAX_QUBITS
        )
    targets = oracle_permutation(f, n_out)
    dimension = targets.size
    unitary = np.zeros((dimension, dimension), dtype=complex)
    unitary[targets, np.arange(dimension)] = 1.0
    return unitary


def prepare_periodic_state(n: int, r: int, x0: int) -> StateVector:
    """Equal superposition of x0, x0 + r, ... below N."""
    size = 2**n
    if not 1 <= r <= size:
        raise InvalidOffsetException("Period must lie in 1..N", r=r, N=size)
    if not 0 <= x0 < r:
        raise InvalidOffsetException("Offset must lie in 0..r-1", x0=x0, r=r)
    amplitudes = np.zeros(size, dtype=complex)
    support = np.arange(x0, size, r)
    amplitudes[support] = 1.0 / math.sqrt(support.size)
    return StateVector(amplitudes)


def collapse_via_oracle(f: PeriodicFunction, rng_seed: SeedLike) -> Tuple[int, StateVector]:
    """
    Hadamards on register 1, oracle, then a measurement of register 2.
    Returns the measured value and the collapsed register-1 state.
    """
    rng = as_generator(rng_seed)
    width = 2**f.n_out
    joint = np.zeros(f.size * width, dtype=complex)
    # oracle applied to |x>|0> for every x of the uniform superposition
    joint[oracle_permutation(f)[np.arange(f.size) * width]] = 1.0 / math.sqrt(f.size)
    grid = joint.reshape(f.size, width)
    marginal = np.sum(np.abs(grid) ** 2, axis=0)
    value = int(rng.choice(width, p=marginal / marginal.sum()))
    column = grid[:, value]
    return value, StateVector(column / np.linalg.norm(column))


def qft_outcome_distribution(state: StateVector) -> np.ndarray:
    return measure_distribution(apply_qft(state))


@dataclass
class PeriodEstimate:
    r_hat: int
    samples_used: int
    outcomes: List[int]
    confidence: float
    success_fraction: Optional[float] = None
    note: str = ""
    denominators: List[int] = field(default_factory=list)
    candidates: List[List[int]] = field(default_factory=list)
    verified: Optional[bool] = None

    def to_dict(self) -> Dict[str, object]:
        record: Dict[str, object] = {
            "r_hat": self.r_hat,
            "outcomes": list(self.outcomes),
            "confidence": self.confidence,
            "samples_used": self.samples_used,
        }
        if self.success_fraction is not None:
            record["success_fraction"] = self.success_fraction
        if self.verified is not None:
            record["verified"] = self.verified
        if self.note:
            record["note"] = self.note
        return record


def convergents(numerator: int, denominator: int) -> List[Fraction]:
    """Continued-fraction convergents of numerator/denominator."""
    terms = []
    a, b = numerator, denominator
    while b:
        q = a // b
        terms.append(q)
        a, b = b, a - q * b
    result = []
    h_prev, h = 1, terms[0] if terms else 0
    k_prev, k = 0, 1
    result.append(Fraction(h, k))
    for term in terms[1:]:
        h_prev, h = h, term * h + h_prev
        k_prev, k = k, term * k + k_prev
        result.append(Fraction(h, k))
    return result


def outcome_denominator(c: int, size: int, max_denominator: Optional[int] = None) -> int:
    if max_denominator is None:
        return Fraction(c, size).denominator
    candidates = [f for f in convergents(c, size) if f.denominator <= max_denominator]
    return candidates[-1].denominator if candidates else 1


def outcome_candidates(c: int, size: int, max_denominator: Optional[int] = None) -> List[int]:
    """Distinct convergent denominators of c/N below N (and within max_denominator)."""
    bound = size - 1 if max_denominator is None else min(size - 1, max_denominator)
    result: List[int] = []
    for fraction in convergents(c, size):
        q = fraction.denominator
        if q <= bound and q not in result:
            result.append(q)
    return result or [1]


def _verified_period(
    candidates: Sequence[Sequence[int]], denominators: Sequence[int], size: int, verify: Callable[[int], bool]
) -> Optional[int]:
    """Smallest verified value among the candidates, their pairwise lcms and the lcm of all denominators."""
    pool = sorted({q for group in candidates for q in group})
    trial = set(pool)
    for i, a in enumerate(pool):
        for b in pool[i + 1 :]:
            trial.add(math.lcm(a, b))
    trial.add(math.lcm(*denominators))
    for q in sorted(t for t in trial if t < size):
        if verify(q):
            return q
    return None


def extract_period(
    outcomes: Sequence[int],
    size: int,
    max_denominator: Optional[int] = None,
    verify: Optional[Callable[[int], bool]] = None,
) -> PeriodEstimate:
    """
    Reduce every c/N and take the least common multiple of the denominators.
    With max_denominator, the last convergent within that bound replaces
    exact reduction (periods that do not divide N).

    With verify (a test of f(x + q) = f(x)), every convergent denominator of
    every outcome becomes a candidate and the estimate is the smallest
    candidate, pairwise lcm or overall lcm that passes; this covers periods
    that do not divide N without knowing r in advance.
    """
    outcomes = [int(c) for c in outcomes]
    if not outcomes:
        raise PeriodFindingException("extract_period needs at least one outcome")
    if any(not 0 <= c < size for c in outcomes):
        raise PeriodFindingException("Outcome outside 0..N-1", N=size)
    denominators = [outcome_denominator(c, size, max_denominator) for c in outcomes]
    candidates = [outcome_candidates(c, size, max_denominator) for c in outcomes]
    verified: Optional[bool] = None
    r_hat = 1
    for denominator in denominators:
        r_hat = math.lcm(r_hat, denominator)
    if max_denominator is not None and r_hat > max_denominator:
        r_hat = max(denominators)
    if verify is not None:
        found = _verified_period(candidates, denominators, size, verify)
        verified = found is not None
        if found is not None:
            r_hat = found
        else:
            logger.warning("No candidate period passed verification; reporting the lcm %d", r_hat)
    if verify is None:
        confidence = sum(1 for d in denominators if d == r_hat) / len(denominators)
    else:
        confidence = sum(1 for group in candidates if r_hat in group) / len(candidates)
    note = ""
    if all(c == 0 for c in outcomes):
        note = "all outcomes are 0; indistinguishable from r = 1"
    elif verified is False:
        note = "no candidate period passed verification"
    return PeriodEstimate(
        r_hat=r_hat,
        samples_used=len(outcomes),
        outcomes=outcomes,
        confidence=confidence,
        note=note,
        denominators=denominators,
        candidates=candidates,
        verified=verified,
    )


def run_period_finding(
    f: PeriodicFunction,
    repetitions: int,
    rng_seed: int,
    max_denominator: Optional[int] = None,
    verify: bool = True,
) -> PeriodEstimate:
    """
    Collapse, transform and sample once per repetition, each repetition on
    its own generator spawned from rng_seed. Candidates are checked against
    f itself unless verify is off.
    """
    if repetitions < 1:
        raise PeriodFindingException("repetitions must be at least 1", repetitions=repetitions)
    outcomes = []
    for generator in spawn_generators(rng_seed, repetitions):
        _, collapsed = collapse_via_oracle(f, generator)
        outcomes.extend(sample(apply_qft(collapsed), generator, 1))
    estimate = extract_period(outcomes, f.size, max_denominator, f.has_period if verify else None)
    reference = f.period if f.period is not None else estimate.r_hat
    # single-shot success: the outcome alone yields the period
    estimate.success_fraction = sum(1 for group in estimate.candidates if reference in group) / repetitions
    logger.debug(
        "Period finding on N=%d: r_hat=%d after %d repetitions", f.size, estimate.r_hat, repetitions
    )
    return estimate


def classical_period_oracle(f: PeriodicFunction) -> int:
    """Smallest r with f(x + r) = f(x) for every x with x + r < N."""
    for r in range(1, f.size):
        if f.has_period(r):
            return r
    return f.size


def totient(r: int) -> int:
    if r < 1:
        raise PeriodFindingException("totient needs a positive integer", r=r)
    result, remaining, p = r, r, 2
    while p * p <= remaining:
        if remaining % p == 0:
            while remaining % p == 0:
                remaining //= p
            result -= result // p
        p += 1
    if remaining > 1:
        result -= result // remaining
    return result


def success_probability(r: int) -> float:
    """Probability that a uniformly drawn lambda in 0..r-1 is coprime to r."""
    return totient(r) / r


def coprime_bound_report(r: int) -> Dict[str, Optional[float]]:
    """phi(r)/r next to 1/log r in base 2 and base e (undefined for r = 1)."""
    return {
        "r": r,
        "phi_ratio": success_probability(r),
        "inverse_log2": 1 / math.log2(r) if r > 1 else None,
        "inverse_ln": 1 / math.log(r) if r > 1 else None,
    }
