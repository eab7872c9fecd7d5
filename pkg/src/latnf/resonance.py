"""Small divisors, the paired-mode resonant set, and nonresonance certificates.

A monomial is indexed by a multiset of signed modes.  Its small divisor is the
signed sum of frequencies.  The structurally resonant set consists of the
multisets whose signed modes can be matched in pairs of opposite sign inside a
single frequency band; those divisors can vanish identically and are excluded
from certification.  Everything else is certified by direct enumeration (or
sampling, above a budget) of the scaled divisor

    |sum_j sigma_j omega_{a_j}| * max(1, max_j |a_j|)^tau

whose minimum is compared against the requested threshold gamma.  The floor
``max(1, .)`` keeps multisets supported entirely on a zero mode from scoring
zero by scale alone.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from .bands import BandPartition, band_map
from .clusters import ClusterPartition, block_index_map
from .frequencies import SpectralMultiplier, SpectrumTable, frequency
from .lattice import ExtIndex, Lattice, Point, extended_indexes, point_distance


def ordering_permutation(table: SpectrumTable, multiset: Sequence[ExtIndex]) -> Tuple[int, ...]:
    """Indices sorting entries by decreasing floor norm, ties by point then +/-."""
    def key(i):
        (p, s) = multiset[i]
        return (-table.floor(p), p, -s)

    return tuple(sorted(range(len(multiset)), key=key))


def small_divisor(table: SpectrumTable, multiset: Sequence[ExtIndex]):
    """Signed frequency sum; stays an exact integer on integer spectra."""
    total = 0
    for point, sign in multiset:
        total = total + sign * table.omega(point)
    return total


def is_resonant_W(multiset: Sequence[ExtIndex], table: SpectrumTable, partition: BandPartition) -> bool:
    """Whether the signed modes admit a perfect +/- pairing within bands.

    The pairing graph joins a +1 entry to a -1 entry exactly when both
    frequencies fall in the same band (the initial segment counts as a band).
    Membership is decided by augmenting-path matching.
    """
    r = len(multiset)
    if r % 2:
        return False
    bands = band_map(table, partition)
    plus = [bands[p] for p, s in multiset if s > 0]
    minus = [bands[p] for p, s in multiset if s < 0]
    if len(plus) != len(minus):
        return False

    owner = [-1] * len(minus)

    def augment(i: int, seen) -> bool:
        for j, b in enumerate(minus):
            if b == plus[i] and not seen[j]:
                seen[j] = True
                if owner[j] < 0 or augment(owner[j], seen):
                    owner[j] = i
                    return True
        return False

    for i in range(len(plus)):
        if not augment(i, [False] * len(minus)):
            return False
    return True


def validate_cutoff(table: SpectrumTable, partition: BandPartition, cutoff: float) -> None:
    """Reject cutoffs that split a band between low and high modes."""
    if cutoff <= 0:
        raise ValueError(f"cutoff must be positive, got {cutoff}")
    inv_beta = 1.0 / partition.beta
    for lo, hi in partition.intervals:
        if lo**inv_beta <= cutoff < hi**inv_beta:
            raise ValueError(
                f"cutoff {cutoff} falls inside the band [{lo}, {hi}] "
                "(floor scale): move it into a spectral gap"
            )


def is_block_nonresonant(
    multiset: Sequence[ExtIndex],
    table: SpectrumTable,
    bands: BandPartition,
    clusters: ClusterPartition,
    cutoff: float,
) -> bool:
    """Block nonresonance test for a monomial at high-mode cutoff ``cutoff``.

    High modes are those with floor norm > cutoff.  The multiset is
    nonresonant when its divisor is controlled by construction: at most two
    high modes, and in the two-mode case either equal signs inside one
    cluster block, or distinct blocks at index distance within
    ``c_delta * cutoff**delta``.  With no high modes it reduces to the
    paired-mode criterion.
    """
    validate_cutoff(table, bands, cutoff)
    return _block_nonresonant_unchecked(multiset, table, bands, clusters, cutoff)


def _block_nonresonant_unchecked(multiset, table, bands, clusters, cutoff):
    high = [(p, s) for p, s in multiset if table.floor(p) > cutoff]
    if len(high) > 2:
        return False
    if len(high) == 0:
        return not is_resonant_W(multiset, table, bands)
    if len(high) == 1:
        return True
    (a1, s1), (a2, s2) = high
    ids = block_index_map(clusters)
    if ids[a1] == ids[a2]:
        return s1 * s2 > 0
    return point_distance(a1, a2) <= clusters.c_delta * cutoff**clusters.delta


@dataclass(frozen=True)
class NonresonanceCertificate:
    """Minimum scaled divisor over multisets off the resonant set."""

    order: int
    tau: float
    gamma: float
    min_score: float
    witness: Tuple[ExtIndex, ...]
    witness_divisor: float
    min_divisor: float
    divisor_witness: Tuple[ExtIndex, ...]
    passed: bool
    exhaustive: bool
    n_checked: int

    def to_dict(self) -> dict:
        def enc(ms):
            return [[list(p), s] for p, s in ms]

        return {
            "order": self.order,
            "tau": self.tau,
            "gamma": self.gamma,
            "min_score": self.min_score,
            "witness": enc(self.witness),
            "witness_divisor": float(self.witness_divisor),
            "min_divisor": float(self.min_divisor),
            "divisor_witness": enc(self.divisor_witness),
            "passed": self.passed,
            "exhaustive": self.exhaustive,
            "n_checked": self.n_checked,
        }


def _multiset_iter(ext: Sequence[ExtIndex], order: int, budget: int, samples: int, seed):
    count = math.comb(len(ext) + order - 1, order)
    if count <= budget:
        return combinations_with_replacement(ext, order), True, count

    rng = np.random.default_rng(seed)
    draws = rng.integers(0, len(ext), size=(samples, order))

    def gen():
        for row in draws:
            yield tuple(sorted(ext[i] for i in row))

    return gen(), False, samples


def certify_nonresonance(
    table: SpectrumTable,
    order: int,
    *,
    partition: Optional[BandPartition] = None,
    gamma: Optional[float] = None,
    tau: Optional[float] = None,
    budget: int = 1_000_000,
    samples: int = 200_000,
    seed: int = 0,
) -> NonresonanceCertificate:
    """Scan order-``order`` multisets off the resonant set for small divisors.

    ``tau`` defaults to ``dim * order + 2``; ``gamma`` defaults to 0.9 times
    the measured minimum (certifying exactly what was observed).  Enumeration
    is exhaustive when the multiset count fits the budget, otherwise a seeded
    uniform sample of index draws is scanned.  A zero minimum score is an
    exact off-set resonance and can never pass, whatever the threshold.
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    if partition is None:
        from .bands import band_partition

        partition = band_partition(table)
    if tau is None:
        tau = float(table.lattice.dim * order + 2)

    ext = extended_indexes(table.lattice)
    norm_of = {p: max(1.0, table.norm(p)) for p in table.lattice.points}
    it, exhaustive, n_checked = _multiset_iter(ext, order, budget, samples, seed)

    min_score = math.inf
    min_div = math.inf
    witness = None
    div_witness = None
    witness_div = math.inf
    for ms in it:
        if is_resonant_W(ms, table, partition):
            continue
        div = abs(small_divisor(table, ms))
        if div < min_div:
            min_div, div_witness = div, ms
        score = div * max(norm_of[p] for p, _ in ms) ** tau
        if score < min_score:
            min_score, witness, witness_div = score, ms, div
    if witness is None:
        raise ValueError("no multiset off the resonant set was scanned")

    if gamma is None:
        gamma = 0.9 * min_score
    return NonresonanceCertificate(
        order=order,
        tau=tau,
        gamma=float(gamma),
        min_score=float(min_score),
        witness=witness,
        witness_divisor=witness_div,
        min_divisor=min_div,
        divisor_witness=div_witness,
        passed=bool(min_score >= gamma and min_score > 0.0),
        exhaustive=exhaustive,
        n_checked=n_checked,
    )


def certificate_to_json(cert: NonresonanceCertificate, path) -> None:
    with open(path, "w") as fh:
        json.dump(cert.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass(frozen=True, eq=False)
class MultiplierEnsemble:
    """Random spectral shifts ``V_a = <a>^(-decay) * Uniform[-1/2, 1/2]``.

    ``<a>`` is the smoothing weight sqrt(1 + |a|^2) of the effective mode.
    """

    base: object
    decay: int

    def weight(self, lattice: Lattice, point: Point) -> float:
        x = lattice.effective(point)
        return math.sqrt(1.0 + sum(v * v for v in x))

    def scale(self, lattice: Lattice, point: Point) -> float:
        return self.weight(lattice, point) ** (-self.decay)

    def sample(self, lattice: Lattice, rng: np.random.Generator) -> SpectralMultiplier:
        potential = {
            p: self.scale(lattice, p) * rng.uniform(-0.5, 0.5)
            for p in lattice.points
        }
        return SpectralMultiplier(base=self.base, potential=potential)


@dataclass(frozen=True)
class MeasureEstimate:
    fraction: float
    bound: float
    stderr: float
    passed: bool
    gamma: float
    n_samples: int


def estimate_resonant_measure(
    ensemble: MultiplierEnsemble,
    lattice: Lattice,
    coeffs: Dict[Point, int],
    gamma: float,
    *,
    n_samples: int = 10_000,
    seed: int = 0,
) -> MeasureEstimate:
    """Monte Carlo fraction of multiplier draws with a near-resonant combination.

    Estimates ``P(|sum_a k_a (lambda_a + V_a)| < gamma)`` and compares it with
    the density bound ``2 gamma K**decay`` (K the largest smoothing weight on
    the support) plus three binomial standard errors.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    supp = sorted(p for p, k in coeffs.items() if k != 0)
    if not supp:
        raise ValueError("coefficient vector is identically zero")
    for p in supp:
        if p not in lattice:
            raise ValueError(f"support point {p} outside the truncation")

    const = sum(
        coeffs[p] * frequency(ensemble.base, p, lattice.offset) for p in supp
    )
    w = np.asarray([coeffs[p] * ensemble.scale(lattice, p) for p in supp])
    rng = np.random.default_rng(seed)
    draws = rng.uniform(-0.5, 0.5, size=(n_samples, len(supp)))
    values = float(const) + draws @ w
    fraction = float(np.mean(np.abs(values) < gamma))

    big = max(ensemble.weight(lattice, p) for p in supp)
    bound = 2.0 * gamma * max(1.0, big) ** ensemble.decay
    stderr = math.sqrt(fraction * (1.0 - fraction) / n_samples)
    return MeasureEstimate(
        fraction=fraction,
        bound=bound,
        stderr=stderr,
        passed=fraction <= bound + 3.0 * stderr,
        gamma=gamma,
        n_samples=n_samples,
    )


@dataclass(frozen=True)
class DivisorScan:
    roots: Tuple[float, ...]
    degenerate: bool


def ground_state_divisor_function(
    x: Sequence[float],
    split: int,
    y_lo: float,
    y_hi: float,
    *,
    grid: int = 1024,
    tol: float = 1e-12,
) -> DivisorScan:
    """Roots of ``sum_{j<split} sqrt(x_j^2 y + x_j) - sum_{j>=split} sqrt(...)``.

    Sign changes are located on a uniform grid and refined by bisection to
    ``tol`` in y.  ``degenerate`` reports the function vanishing across the
    whole interval (perfectly cancelling terms), in which case no isolated
    roots are returned.
    """
    x = [float(v) for v in x]
    if not 0 <= split <= len(x):
        raise ValueError(f"split must lie in [0, {len(x)}], got {split}")
    if y_hi <= y_lo:
        raise ValueError("empty scan interval")
    for v in x:
        if v < 0 or v * v * y_lo + v < 0:
            raise ValueError(f"negative radicand for entry {v} at y={y_lo}")

    def f(y: float) -> float:
        total = 0.0
        for j, v in enumerate(x):
            term = math.sqrt(v * v * y + v)
            total += term if j < split else -term
        return total

    ys = np.linspace(y_lo, y_hi, grid + 1)
    fs = np.asarray([f(y) for y in ys])
    scale = float(np.max(np.abs(fs)))
    if scale <= 1e-14 * (1.0 + sum(abs(v) for v in x)):
        return DivisorScan(roots=(), degenerate=True)

    roots = []
    for i in range(grid):
        a, b = float(ys[i]), float(ys[i + 1])
        fa, fb = float(fs[i]), float(fs[i + 1])
        if fa == 0.0:
            roots.append(a)
            continue
        if fa * fb < 0.0:
            while b - a > tol:
                m = 0.5 * (a + b)
                fm = f(m)
                if fm == 0.0:
                    a = b = m
                    break
                if fa * fm < 0.0:
                    b = m
                else:
                    a, fa = m, fm
            roots.append(0.5 * (a + b))
    if float(fs[-1]) == 0.0:
        roots.append(float(ys[-1]))

    merged = []
    for r in sorted(roots):
        if not merged or r - merged[-1] > 10 * tol:
            merged.append(r)
    return DivisorScan(roots=tuple(merged), degenerate=False)
