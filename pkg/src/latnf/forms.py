"""Symmetric polynomial forms on signed mode variables.

A homogeneous form of degree N is stored sparsely as a map from canonical
multiset keys (entries sorted by point, + before -) to monomial coefficients:
``F(u) = sum_M c_M prod_{A in M} u_A``.  The associated symmetric multilinear
form divides each monomial by its multinomial multiplicity.

The localized norm weights each key by ``S^N / mu^(N+nu)`` where ``mu`` is the
third largest floor norm of the key (smallest repeated below degree 3) and
``S = mu + dist`` with ``dist`` the index distance between the two largest
modes.  Keys whose mu vanishes are rejected by default; ``zero_mode="lift"``
substitutes ``1+mu, 1+S`` for those keys only.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .bands import BandPartition
from .clusters import ClusterPartition
from .frequencies import SpectrumTable
from .lattice import (
    ExtIndex,
    Lattice,
    Point,
    conjugate,
    conjugate_key,
    point_distance,
)
from .resonance import ordering_permutation

Key = Tuple[ExtIndex, ...]

DROP_TOL = 1e-14

State = Dict[ExtIndex, complex]


def canonical_key(entries: Iterable[ExtIndex]) -> Key:
    return tuple(sorted(entries, key=lambda e: (e[0], -e[1])))


def key_multiplicity(key: Key) -> int:
    """Multinomial count of orderings of the multiset."""
    mult = math.factorial(len(key))
    for m in Counter(key).values():
        mult //= math.factorial(m)
    return mult


@dataclass(frozen=True, eq=False)
class SymmetricForm:
    """Homogeneous polynomial in the signed mode variables."""

    degree: int
    coeffs: Dict[Key, complex]

    def __len__(self) -> int:
        return len(self.coeffs)


def make_form(terms: Mapping[Key, complex] | Iterable[Tuple[Key, complex]], degree: Optional[int] = None, tol: float = DROP_TOL) -> SymmetricForm:
    """Canonicalize keys, merge duplicates, drop coefficients below ``tol``."""
    items = terms.items() if isinstance(terms, Mapping) else terms
    acc: Dict[Key, complex] = {}
    for key, c in items:
        k = canonical_key(key)
        acc[k] = acc.get(k, 0j) + complex(c)
    acc = {k: c for k, c in acc.items() if abs(c) > tol}
    degrees = {len(k) for k in acc}
    if len(degrees) > 1:
        raise ValueError(f"mixed key lengths {sorted(degrees)} in one form")
    if degree is None:
        if not degrees:
            raise ValueError("empty form needs an explicit degree")
        degree = degrees.pop()
    elif degrees and degrees != {degree}:
        raise ValueError(f"keys of length {degrees.pop()} in a degree-{degree} form")
    for key in acc:
        for point, sign in key:
            if sign not in (-1, 1):
                raise ValueError(f"sign must be +1 or -1, got {sign}")
    return SymmetricForm(degree=degree, coeffs=acc)


def zero_form(degree: int) -> SymmetricForm:
    return SymmetricForm(degree=degree, coeffs={})


def add_forms(*forms: SymmetricForm, tol: float = DROP_TOL) -> SymmetricForm:
    degs = {f.degree for f in forms}
    if len(degs) != 1:
        raise ValueError(f"cannot add forms of degrees {sorted(degs)}")
    acc: Dict[Key, complex] = {}
    for f in forms:
        for k, c in f.coeffs.items():
            acc[k] = acc.get(k, 0j) + c
    return SymmetricForm(degree=degs.pop(), coeffs={k: c for k, c in acc.items() if abs(c) > tol})


def scale_form(form: SymmetricForm, factor: complex) -> SymmetricForm:
    if factor == 0:
        return zero_form(form.degree)
    return SymmetricForm(degree=form.degree, coeffs={k: factor * c for k, c in form.coeffs.items()})


def conjugate_form(form: SymmetricForm) -> SymmetricForm:
    return SymmetricForm(
        degree=form.degree,
        coeffs={canonical_key(conjugate_key(k)): c.conjugate() for k, c in form.coeffs.items()},
    )


def is_real_coefficients(form: SymmetricForm, tol: float = 1e-12) -> bool:
    """Whether the form takes real values on conjugation-paired states."""
    for k, c in form.coeffs.items():
        kc = canonical_key(conjugate_key(k))
        if abs(form.coeffs.get(kc, 0j) - c.conjugate()) > tol * (1.0 + abs(c)):
            return False
    return True


def evaluate(form: SymmetricForm, values: State) -> complex:
    total = 0j
    for key, c in form.coeffs.items():
        prod = complex(c)
        for entry in key:
            v = values.get(entry)
            if v is None or v == 0:
                prod = 0j
                break
            prod *= v
        total += prod
    return total


def polarized_evaluate(form: SymmetricForm, states: Sequence[State]) -> complex:
    """Symmetric multilinear extension evaluated on one state per slot."""
    from itertools import permutations

    n = form.degree
    if len(states) != n:
        raise ValueError(f"need {n} states, got {len(states)}")
    total = 0j
    fact = math.factorial(n)
    for key, c in form.coeffs.items():
        acc = 0j
        for perm in permutations(range(n)):
            prod = complex(1.0)
            for slot, entry in zip(perm, key):
                v = states[slot].get(entry)
                if v is None or v == 0:
                    prod = 0j
                    break
                prod *= v
            acc += prod
        total += c * acc / fact
    return total


def mu_S(table: SpectrumTable, key: Key, zero_mode: str = "error") -> Tuple[float, float]:
    """Localization pair (mu, S) of a key under the decreasing-floor ordering."""
    if not key:
        raise ValueError("empty key has no localization")
    order = ordering_permutation(table, key)
    pts = [key[i][0] for i in order]
    floors = [table.floor(p) for p in pts]
    mu = floors[min(2, len(pts) - 1)]
    dist = point_distance(pts[0], pts[1]) if len(pts) >= 2 else 0.0
    s = mu + dist
    if mu == 0.0:
        if zero_mode == "error":
            raise ValueError(
                f"key {key} has vanishing localization scale; "
                "pass zero_mode='lift' to regularize"
            )
        if zero_mode != "lift":
            raise ValueError(f"unknown zero_mode {zero_mode!r}")
        mu, s = 1.0 + mu, 1.0 + s
    return mu, s


def localized_norm(
    form: SymmetricForm,
    table: SpectrumTable,
    *,
    nu: float,
    smoothing: float,
    zero_mode: str = "error",
) -> float:
    """Max over keys of ``(|c|/mult) S^smoothing / mu^(smoothing+nu)``."""
    if form.degree < 1:
        raise ValueError("localized norm needs degree >= 1")
    best = 0.0
    for key, c in form.coeffs.items():
        mu, s = mu_S(table, key, zero_mode)
        w = abs(c) / key_multiplicity(key) * s**smoothing / mu ** (smoothing + nu)
        if w > best:
            best = w
    return best


def scaled_norm(
    form: SymmetricForm,
    table: SpectrumTable,
    radius: float,
    *,
    nu: float,
    smoothing: float,
    zero_mode: str = "error",
) -> float:
    return localized_norm(form, table, nu=nu, smoothing=smoothing, zero_mode=zero_mode) * radius**form.degree


@lru_cache(maxsize=None)
def derivative_maps(form: SymmetricForm) -> Dict[ExtIndex, Tuple[Tuple[Key, complex], ...]]:
    """Per-variable derivative: entry -> ((reduced key, c * multiplicity), ...)."""
    out: Dict[ExtIndex, List[Tuple[Key, complex]]] = {}
    for key, c in form.coeffs.items():
        counts = Counter(key)
        for entry, m in counts.items():
            reduced = list(key)
            reduced.remove(entry)
            out.setdefault(entry, []).append((tuple(reduced), c * m))
    return {e: tuple(v) for e, v in out.items()}


def vector_field(form: SymmetricForm, values: State) -> State:
    """Hamiltonian vector field of the form at a state.

    Component at index B is ``-i sigma_B dF/du_{conj(B)}``.
    """
    out: State = {}
    for entry, rows in derivative_maps(form).items():
        target = conjugate(entry)
        acc = 0j
        for reduced, c in rows:
            prod = complex(c)
            for e in reduced:
                v = values.get(e)
                if v is None or v == 0:
                    prod = 0j
                    break
                prod *= v
            acc += prod
        if acc != 0:
            out[target] = out.get(target, 0j) + 1j * entry[1] * acc
    return out


def polarized_vector_field(form: SymmetricForm, states: Sequence[State]) -> State:
    """Multilinear extension of the vector field on degree-1 many states."""
    from itertools import permutations

    r = form.degree - 1
    if len(states) != r:
        raise ValueError(f"need {r} states, got {len(states)}")
    fact = math.factorial(r)
    out: State = {}
    for key, c in form.coeffs.items():
        for entry, m in Counter(key).items():
            reduced = list(key)
            reduced.remove(entry)
            acc = 0j
            for perm in permutations(range(r)):
                prod = complex(1.0)
                for slot, e in zip(perm, reduced):
                    v = states[slot].get(e)
                    if v is None or v == 0:
                        prod = 0j
                        break
                    prod *= v
                acc += prod
            if acc != 0:
                target = conjugate(entry)
                out[target] = out.get(target, 0j) + 1j * entry[1] * c * m * acc / fact
    return out


def vector_field_seminorm(
    form: SymmetricForm,
    table: SpectrumTable,
    *,
    nu: float,
    smoothing: float,
    zero_mode: str = "error",
) -> float:
    """Localized seminorm of the vector field, weighted by the full keys."""
    best = 0.0
    for key, c in form.coeffs.items():
        mu, s = mu_S(table, key, zero_mode)
        weight = s**smoothing / mu ** (smoothing + nu)
        for entry, m in Counter(key).items():
            reduced = list(key)
            reduced.remove(entry)
            w = abs(c) * m / key_multiplicity(tuple(reduced)) * weight
            if w > best:
                best = w
    return best


def poisson_bracket(f: SymmetricForm, g: SymmetricForm, tol: float = DROP_TOL) -> SymmetricForm:
    """Canonical bracket ``-i sum_b (d+F d-G - d-F d+G)`` as a form."""
    degree = f.degree + g.degree - 2
    if degree < 0:
        raise ValueError("bracket of two linear forms has negative degree")
    df, dg = derivative_maps(f), derivative_maps(g)
    acc: Dict[Key, complex] = {}
    for (point, sign), rows in df.items():
        cols = dg.get((point, -sign))
        if not cols:
            continue
        phase = -1j if sign > 0 else 1j
        for k1, c1 in rows:
            for k2, c2 in cols:
                key = canonical_key(k1 + k2)
                acc[key] = acc.get(key, 0j) + phase * c1 * c2
    return SymmetricForm(degree=degree, coeffs={k: c for k, c in acc.items() if abs(c) > tol})


def form_product(f: SymmetricForm, g: SymmetricForm, tol: float = DROP_TOL) -> SymmetricForm:
    acc: Dict[Key, complex] = {}
    for k1, c1 in f.coeffs.items():
        for k2, c2 in g.coeffs.items():
            key = canonical_key(k1 + k2)
            acc[key] = acc.get(key, 0j) + c1 * c2
    return SymmetricForm(
        degree=f.degree + g.degree,
        coeffs={k: c for k, c in acc.items() if abs(c) > tol},
    )


def signed_frequency_sum(table: SpectrumTable, key: Key):
    total = 0
    for point, sign in key:
        total = total + sign * table.omega(point)
    return total


def quadratic_hamiltonian(table: SpectrumTable) -> SymmetricForm:
    """``sum_a omega_a u_{a,+} u_{a,-}`` over the truncation."""
    coeffs = {
        canonical_key(((p, 1), (p, -1))): complex(table.omega(p))
        for p in table.lattice.points
    }
    return SymmetricForm(degree=2, coeffs=coeffs)


def mass_form(lattice: Lattice) -> SymmetricForm:
    coeffs = {canonical_key(((p, 1), (p, -1))): 1.0 + 0j for p in lattice.points}
    return SymmetricForm(degree=2, coeffs=coeffs)


def multiply_by_mass(form: SymmetricForm, lattice: Lattice) -> SymmetricForm:
    return form_product(form, mass_form(lattice))


def superaction_form(points: Iterable[Point]) -> SymmetricForm:
    coeffs = {canonical_key(((p, 1), (p, -1))): 1.0 + 0j for p in points}
    if not coeffs:
        raise ValueError("superaction over an empty mode set")
    return SymmetricForm(degree=2, coeffs=coeffs)


def band_superactions(table: SpectrumTable, partition: BandPartition) -> List[SymmetricForm]:
    """One superaction per band, in band order (initial segment first)."""
    from .bands import band_map

    bm = band_map(table, partition)
    groups: Dict[int, List[Point]] = {}
    for p, b in bm.items():
        groups.setdefault(b, []).append(p)
    return [superaction_form(groups[b]) for b in sorted(groups)]


def block_superactions(clusters: ClusterPartition) -> List[SymmetricForm]:
    return [superaction_form(block) for block in clusters.blocks]


def nls_quartic(lattice: Lattice, coupling: float = 1.0) -> SymmetricForm:
    """Momentum-conserving quartic ``(coupling/2) sum_{a+c=b+e} u_a u_b^- u_c u_e^-``."""
    pts = lattice.points
    acc: Dict[Key, complex] = {}
    half = 0.5 * coupling
    for a in pts:
        for c in pts:
            for b in pts:
                e = tuple(ai + ci - bi for ai, ci, bi in zip(a, c, b))
                if e in lattice:
                    key = canonical_key(((a, 1), (b, -1), (c, 1), (e, -1)))
                    acc[key] = acc.get(key, 0j) + half
    return SymmetricForm(degree=4, coeffs=acc)


def random_form(
    lattice: Lattice,
    degree: int,
    n_terms: int,
    seed: int = 0,
    real: bool = True,
) -> SymmetricForm:
    """Sparse random form; ``real=True`` symmetrizes to real values on pairs."""
    from .lattice import extended_indexes

    rng = np.random.default_rng(seed)
    ext = extended_indexes(lattice)
    acc: Dict[Key, complex] = {}
    for _ in range(n_terms):
        draw = rng.integers(0, len(ext), size=degree)
        key = canonical_key(tuple(ext[int(i)] for i in draw))
        acc[key] = acc.get(key, 0j) + complex(rng.standard_normal(), rng.standard_normal())
    f = SymmetricForm(degree=degree, coeffs=acc)
    if real:
        f = add_forms(scale_form(f, 0.5), scale_form(conjugate_form(f), 0.5), tol=0.0)
    return f


def sobolev_norm(
    values: State,
    lattice: Lattice,
    s: float,
    *,
    table: Optional[SpectrumTable] = None,
    weighting: str = "index",
) -> float:
    """Weighted l2 norm over the extended support, both signs counted.

    ``weighting="index"`` uses ``(1+|a|)^(2s)``; ``weighting="floor"`` uses
    the equivalent ``(1+floor(a))^(2s)`` and needs a spectrum table.
    """
    if weighting not in ("index", "floor"):
        raise ValueError(f"unknown weighting {weighting!r}")
    if weighting == "floor" and table is None:
        raise ValueError("floor weighting needs a spectrum table")
    total = 0.0
    for (point, _), v in values.items():
        if weighting == "index":
            x = lattice.effective(point)
            base = math.sqrt(sum(c * c for c in x))
        else:
            base = table.floor(point)
        total += (1.0 + base) ** (2.0 * s) * (v.real * v.real + v.imag * v.imag)
    return math.sqrt(total)


def split_state(values: State, table: SpectrumTable, cutoff: float) -> Tuple[State, State]:
    """Project a state onto floor norms <= cutoff and > cutoff."""
    low: State = {}
    high: State = {}
    for entry, v in values.items():
        (high if table.floor(entry[0]) > cutoff else low)[entry] = v
    return low, high


def key_high_count(key: Key, table: SpectrumTable, cutoff: float) -> int:
    return sum(1 for p, _ in key if table.floor(p) > cutoff)


def order_in_high(form: SymmetricForm, table: SpectrumTable, cutoff: float) -> int:
    """High-index count when it is uniform across the support."""
    counts = {key_high_count(k, table, cutoff) for k in form.coeffs}
    if not counts:
        raise ValueError("empty form has no high order")
    if len(counts) > 1:
        raise ValueError(f"mixed high orders {sorted(counts)}; use decompose_by_high_order")
    return counts.pop()


def decompose_by_high_order(form: SymmetricForm, table: SpectrumTable, cutoff: float) -> Dict[int, SymmetricForm]:
    """Split the support by high-index count; parts sum back to the form."""
    parts: Dict[int, Dict[Key, complex]] = {}
    for k, c in form.coeffs.items():
        parts.setdefault(key_high_count(k, table, cutoff), {})[k] = c
    return {
        n: SymmetricForm(degree=form.degree, coeffs=coeffs)
        for n, coeffs in sorted(parts.items())
    }


@dataclass(frozen=True, eq=False)
class PolyHamiltonian:
    """Sum of homogeneous forms, indexed by degree."""

    parts: Dict[int, SymmetricForm]

    @property
    def degrees(self) -> Tuple[int, ...]:
        return tuple(sorted(d for d, f in self.parts.items() if f.coeffs))

    @property
    def lowest_degree(self) -> Optional[int]:
        degs = self.degrees
        return degs[0] if degs else None

    def part(self, degree: int) -> SymmetricForm:
        return self.parts.get(degree, zero_form(degree))

    def n_terms(self) -> int:
        return sum(len(f.coeffs) for f in self.parts.values())


def poly_from_forms(forms: Iterable[SymmetricForm]) -> PolyHamiltonian:
    acc: Dict[int, List[SymmetricForm]] = {}
    for f in forms:
        acc.setdefault(f.degree, []).append(f)
    parts = {d: fs[0] if len(fs) == 1 else add_forms(*fs) for d, fs in acc.items()}
    return PolyHamiltonian(parts={d: f for d, f in parts.items() if f.coeffs})


def poly_evaluate(poly: PolyHamiltonian, values: State) -> complex:
    return sum((evaluate(f, values) for f in poly.parts.values()), 0j)


def poly_vector_field(poly: PolyHamiltonian, values: State) -> State:
    out: State = {}
    for f in poly.parts.values():
        for entry, v in vector_field(f, values).items():
            out[entry] = out.get(entry, 0j) + v
    return out


def _encode_key(key: Key) -> list:
    return [[list(p), s] for p, s in key]


def _decode_key(raw) -> Key:
    return tuple((tuple(int(c) for c in p), int(s)) for p, s in raw)


def form_to_jsonl(form: SymmetricForm, path) -> None:
    """One JSON object per key, in canonical key order."""
    with open(path, "w") as fh:
        header = {"kind": "form", "degree": form.degree, "n_terms": len(form.coeffs)}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for key in sorted(form.coeffs):
            c = form.coeffs[key]
            row = {"key": _encode_key(key), "re": c.real, "im": c.imag}
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def form_from_jsonl(path) -> SymmetricForm:
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("kind") != "form":
            raise ValueError(f"not a form file: {path}")
        coeffs: Dict[Key, complex] = {}
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            coeffs[_decode_key(row["key"])] = complex(row["re"], row["im"])
    return make_form(coeffs, degree=int(header["degree"]), tol=0.0)
