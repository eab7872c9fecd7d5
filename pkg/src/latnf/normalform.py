"""Resonant normal form engine: homological equation, Lie transforms, iteration.

The iteration removes, degree by degree, every monomial whose divisor is
controlled by the block-nonresonance test, conjugating the Hamiltonian with
time-1 flows of polynomial generators.  Polynomial arithmetic is truncated at
degree ``2r + 2``; dropped terms enter a measured remainder ledger.  The
normalized part is classified into four buckets:

    Z0    no high modes, paired within bands
    ZB    exactly two high modes, one cluster block, opposite signs
    Z2    exactly two high modes, distinct blocks, separated supports
    ZGE3  three or more high modes

which together are exactly the complement of the nonresonant set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .bands import BandPartition, band_partition
from .clusters import ClusterPartition, build_clusters, high_mode_blocks
from .forms import (
    Key,
    PolyHamiltonian,
    State,
    SymmetricForm,
    add_forms,
    band_superactions,
    block_superactions,
    localized_norm,
    poisson_bracket,
    poly_from_forms,
    quadratic_hamiltonian,
    scale_form,
    scaled_norm,
    sobolev_norm,
    vector_field,
    zero_form,
)
from .frequencies import SpectrumTable
from .lattice import point_distance
from .resonance import (
    NonresonanceCertificate,
    _block_nonresonant_unchecked,
    is_resonant_W,
    small_divisor,
    validate_cutoff,
)

BUCKETS = ("Z0", "ZB", "Z2", "ZGE3")


@dataclass(frozen=True)
class NormalFormConfig:
    """Parameters of a normalization run.

    ``gamma`` and ``tau`` default to the values certified for each degree;
    explicit values must be supported by the certificates (the engine refuses
    a gamma above a certificate's measured minimum).
    """

    r: int
    radius: float
    s: float = 4.0
    s0: float = 3.0
    cutoff: Optional[float] = None
    gamma: Optional[float] = None
    tau: Optional[float] = None
    nu: float = 2.0
    smoothing: float = 2.0
    mu_max: float = 1.0
    flow_tol: float = 1e-10

    def __post_init__(self):
        if self.r < 1:
            raise ValueError(f"r must be >= 1, got {self.r}")
        if not 0.0 < self.radius < 1.0:
            raise ValueError(f"radius must lie in (0,1), got {self.radius}")

    @property
    def r_bar(self) -> int:
        return 2 * self.r

    @property
    def degree_cap(self) -> int:
        return self.r_bar + 2


def choose_cutoff(table: SpectrumTable, partition: BandPartition, radius: float, tau: float) -> float:
    """Inter-band cutoff (floor scale) nearest to ``radius**(-1/(2 tau))``.

    Candidates are the midpoints of the spectral gaps between consecutive
    bands; the choice must land within a factor 2 of the target.
    """
    if not 0.0 < radius < 1.0:
        raise ValueError(f"radius must lie in (0,1), got {radius}")
    if partition.nbands < 2:
        raise ValueError("single-band spectrum has no admissible cutoff")
    target = radius ** (-1.0 / (2.0 * tau))
    inv_beta = 1.0 / partition.beta
    candidates = []
    for (_, hi), (lo, _) in zip(partition.intervals, partition.intervals[1:]):
        a, b = hi**inv_beta, lo**inv_beta
        if b > a:
            candidates.append(0.5 * (a + b))
    admissible = [k for k in candidates if 0.5 * target <= k <= 2.0 * target]
    if not admissible:
        raise ValueError(
            f"no inter-band cutoff within a factor 2 of target {target:.6g}; "
            "truncation too small for this radius"
        )
    return min(admissible, key=lambda k: (abs(k - target), k))


def classify_term(
    key: Key,
    table: SpectrumTable,
    bands: BandPartition,
    clusters: ClusterPartition,
    cutoff: float,
) -> str:
    """Bucket of a monomial key: Z0, ZB, Z2, ZGE3, or NONRESONANT."""
    if len(key) < 3:
        raise ValueError("classification applies to keys of degree >= 3")
    high = [(p, s) for p, s in key if table.floor(p) > cutoff]
    if len(high) >= 3:
        return "ZGE3"
    if len(high) == 0:
        return "Z0" if is_resonant_W(key, table, bands) else "NONRESONANT"
    if len(high) == 1:
        return "NONRESONANT"
    (a1, s1), (a2, s2) = high
    from .clusters import block_index_map

    ids = block_index_map(clusters)
    if ids[a1] == ids[a2]:
        return "ZB" if s1 * s2 < 0 else "NONRESONANT"
    if point_distance(a1, a2) > clusters.c_delta * cutoff**clusters.delta:
        return "Z2"
    return "NONRESONANT"


@dataclass(frozen=True)
class HomologicalSolution:
    generator: SymmetricForm
    normal: SymmetricForm
    residual: float
    f_norm: float
    g_norm: float
    z_norm: float


def solve_homological(
    form: SymmetricForm,
    table: SpectrumTable,
    bands: BandPartition,
    clusters: ClusterPartition,
    cutoff: float,
    gamma: float,
    tau: float,
    *,
    verify: bool = True,
    nu: float = 2.0,
    smoothing: float = 2.0,
) -> HomologicalSolution:
    """Split F into a generator killing nonresonant terms and a normal part.

    Nonresonant keys get ``G = i F / divisor`` and ``Z = 0``; all other keys
    pass through to Z untouched.  Divisors on nonresonant keys are guarded
    against the certified floor ``gamma / max(1, max_j |a_j|)**tau``; a
    smaller divisor means the certificate does not cover this truncation.
    """
    validate_cutoff(table, bands, cutoff)
    g_coeffs: Dict[Key, complex] = {}
    z_coeffs: Dict[Key, complex] = {}
    for key, c in form.coeffs.items():
        if _block_nonresonant_unchecked(key, table, bands, clusters, cutoff):
            delta = small_divisor(table, key)
            scale = max(1.0, max(table.norm(p) for p, _ in key)) ** tau
            if abs(delta) < gamma / scale:
                raise ValueError(
                    f"divisor {delta} below gamma/K_max^tau = {gamma / scale:.3e} "
                    f"on nonresonant key {key}: certificate breached"
                )
            g_coeffs[key] = 1j * c / delta
        else:
            z_coeffs[key] = c
    generator = SymmetricForm(degree=form.degree, coeffs=g_coeffs)
    normal = SymmetricForm(degree=form.degree, coeffs=z_coeffs)

    residual = 0.0
    f_norm = g_norm = z_norm = 0.0
    if verify:
        h0 = quadratic_hamiltonian(table)
        lhs = add_forms(poisson_bracket(h0, generator, tol=0.0), form, tol=0.0)
        diff = add_forms(lhs, scale_form(normal, -1.0), tol=0.0)
        residual = max((abs(c) for c in diff.coeffs.values()), default=0.0)
        kw = dict(nu=nu, smoothing=smoothing, zero_mode="lift")
        f_norm = localized_norm(form, table, **kw) if form.coeffs else 0.0
        g_norm = localized_norm(generator, table, **kw) if g_coeffs else 0.0
        z_norm = localized_norm(normal, table, **kw) if z_coeffs else 0.0
        k_scan = max(1.0, float(table.lattice.radius))
        if residual > 1e-12:
            raise RuntimeError(f"homological residual {residual:.3e} exceeds 1e-12")
        if g_norm > (k_scan**tau / gamma) * f_norm * (1.0 + 1e-12):
            raise RuntimeError("generator norm bound violated")
        if z_norm > f_norm * (1.0 + 1e-12):
            raise RuntimeError("normal part norm bound violated")
    return HomologicalSolution(
        generator=generator,
        normal=normal,
        residual=residual,
        f_norm=f_norm,
        g_norm=g_norm,
        z_norm=z_norm,
    )


@dataclass(frozen=True)
class LedgerEntry:
    """A term dropped by the degree cap, with its measured scaled norm."""

    step: int
    source_degree: int
    lie_index: int
    degree: int
    norm_r: float
    form: SymmetricForm


def lie_terms_order(r_bar: int, part_order: int, gen_order: int) -> int:
    """Series truncation order ``ceil((r_bar + 3 - part_order) / gen_order)``."""
    if gen_order < 1:
        raise ValueError("generator must have positive order")
    return max(1, math.ceil((r_bar + 3 - part_order) / gen_order))


def lie_transform(
    generator: SymmetricForm,
    part: SymmetricForm,
    n: int,
    *,
    cap: int,
    table: SpectrumTable,
    radius: float,
    step: int = 0,
    nu: float = 2.0,
    smoothing: float = 2.0,
) -> Tuple[List[SymmetricForm], List[LedgerEntry]]:
    """Adjoint series ``sum_{k<=n} Ad_G^k P / k!`` split at the degree cap."""
    kept: List[SymmetricForm] = []
    ledger: List[LedgerEntry] = []
    current = part
    factorial = 1.0
    for k in range(n + 1):
        if k > 0:
            current = poisson_bracket(current, generator)
            factorial *= k
            if not current.coeffs:
                break
        term = scale_form(current, 1.0 / factorial)
        if term.degree <= cap:
            kept.append(term)
        else:
            norm_r = scaled_norm(
                term, table, radius, nu=nu, smoothing=smoothing, zero_mode="lift"
            )
            ledger.append(
                LedgerEntry(
                    step=step,
                    source_degree=part.degree,
                    lie_index=k,
                    degree=term.degree,
                    norm_r=norm_r,
                    form=term,
                )
            )
    return kept, ledger


@dataclass(frozen=True)
class CommutationReport:
    max_band_residual: float
    max_block_residual: float
    z2_bracket_norm: float


def check_superaction_commutation(
    z0: SymmetricForm,
    zb: SymmetricForm,
    z2: Optional[SymmetricForm],
    table: SpectrumTable,
    bands: BandPartition,
    clusters: ClusterPartition,
    cutoff: float,
) -> CommutationReport:
    """Coefficient-level brackets of the normal part with every superaction.

    Band superactions must commute with Z0 and block superactions with ZB
    exactly (up to rounding); the Z2 bracket is reported, not asserted.
    """

    def max_coeff(f: SymmetricForm) -> float:
        return max((abs(c) for c in f.coeffs.values()), default=0.0)

    band_res = 0.0
    for j in band_superactions(table, bands):
        band_res = max(band_res, max_coeff(poisson_bracket(z0, j, tol=0.0)))
    block_res = 0.0
    z2_norm = 0.0
    high = high_mode_blocks(clusters, table, cutoff)
    for j in block_superactions(high):
        block_res = max(block_res, max_coeff(poisson_bracket(zb, j, tol=0.0)))
        if z2 is not None and z2.coeffs:
            z2_norm = max(z2_norm, max_coeff(poisson_bracket(z2, j, tol=0.0)))
    return CommutationReport(
        max_band_residual=band_res,
        max_block_residual=block_res,
        z2_bracket_norm=z2_norm,
    )


@dataclass(frozen=True, eq=False)
class NormalFormResult:
    config: NormalFormConfig
    cutoff: float
    gamma: Dict[int, float]
    tau: Dict[int, float]
    z0: PolyHamiltonian
    zb: PolyHamiltonian
    z2: PolyHamiltonian
    zge3: PolyHamiltonian
    generators: Tuple[SymmetricForm, ...]
    step_norms: Tuple[float, ...]
    mu: float
    max_residual: float
    ledger: Tuple[LedgerEntry, ...]
    commutation: CommutationReport
    remainder_bound: float

    @property
    def ledger_bound(self) -> float:
        return sum(e.norm_r for e in self.ledger)

    def bucket(self, name: str) -> PolyHamiltonian:
        return {"Z0": self.z0, "ZB": self.zb, "Z2": self.z2, "ZGE3": self.zge3}[name]

    def normal_parts(self) -> List[SymmetricForm]:
        out = []
        for poly in (self.z0, self.zb, self.z2, self.zge3):
            out.extend(poly.parts[d] for d in poly.degrees)
        return out


def _constants_for(
    degree: int,
    config: NormalFormConfig,
    by_order: Dict[int, NonresonanceCertificate],
) -> Tuple[float, float]:
    cert = by_order.get(degree)
    if cert is None:
        raise ValueError(
            f"no nonresonance certificate of order {degree}; "
            "the engine refuses to run without one"
        )
    if not cert.passed:
        raise ValueError(
            f"order-{degree} certificate failed (min score {cert.min_score:.3e} "
            f"< gamma {cert.gamma:.3e}); witness {cert.witness}"
        )
    gamma = config.gamma if config.gamma is not None else cert.gamma
    if gamma > cert.min_score:
        raise ValueError(
            f"requested gamma {gamma} exceeds the certified minimum "
            f"{cert.min_score:.3e} at order {degree}"
        )
    if gamma <= 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    tau = config.tau if config.tau is not None else cert.tau
    return float(gamma), float(tau)


def normalize(
    table: SpectrumTable,
    perturbation: PolyHamiltonian,
    config: NormalFormConfig,
    certificates: Sequence[NonresonanceCertificate],
    *,
    bands: Optional[BandPartition] = None,
    clusters: Optional[ClusterPartition] = None,
    remainder_samples: int = 4,
    seed: int = 0,
) -> NormalFormResult:
    """Iteratively normalize ``H0 + perturbation`` up to the degree cap.

    Each step solves the homological equation for the entire lowest-degree
    non-normalized part, conjugates every current term by the generator's
    time-1 flow (adjoint series, degree-capped), and re-sorts.  Per-step
    norms must contract: ``mu = (|P|_R / R^2) K^tau`` is required below
    ``mu_max`` and each step below ``2 mu`` times the previous.
    """
    if bands is None:
        bands = band_partition(table)
    if clusters is None:
        clusters = build_clusters(table)
    cap = config.degree_cap
    for degree in perturbation.degrees:
        if degree < 3:
            raise ValueError(f"perturbation has a degree-{degree} part; need >= 3")
        if degree > cap:
            raise ValueError(
                f"perturbation degree {degree} above the cap {cap}; "
                "truncate the input Hamiltonian first"
            )
    by_order = {c.order: c for c in certificates}
    gammas: Dict[int, float] = {}
    taus: Dict[int, float] = {}
    for degree in perturbation.degrees:
        gammas[degree], taus[degree] = _constants_for(degree, config, by_order)

    if config.cutoff is not None:
        cutoff = float(config.cutoff)
        validate_cutoff(table, bands, cutoff)
    else:
        cutoff = choose_cutoff(table, bands, config.radius, max(taus.values()))

    norm_kw = dict(nu=config.nu, smoothing=config.smoothing, zero_mode="lift")
    radius = config.radius

    def poly_norm_r(poly: PolyHamiltonian) -> float:
        return sum(
            scaled_norm(poly.parts[d], table, radius, **norm_kw) for d in poly.degrees
        )

    h0 = quadratic_hamiltonian(table)
    current = perturbation
    normal_parts: Dict[int, SymmetricForm] = {}
    generators: List[SymmetricForm] = []
    ledger: List[LedgerEntry] = []
    step_norms: List[float] = [poly_norm_r(current)]

    tau_max = max(taus.values())
    mu = (step_norms[0] / radius**2) * cutoff**tau_max
    if mu > config.mu_max:
        raise ValueError(
            f"smallness violated before step 0: mu = {mu:.3e} > {config.mu_max}; "
            "radius too large for this truncation"
        )

    max_residual = 0.0
    for step in range(config.r_bar):
        low = current.lowest_degree
        if low is None:
            break
        if low not in gammas:
            gammas[low], taus[low] = _constants_for(low, config, by_order)
        f_part = current.part(low)
        sol = solve_homological(
            f_part, table, bands, clusters, cutoff, gammas[low], taus[low],
            nu=config.nu, smoothing=config.smoothing,
        )
        max_residual = max(max_residual, sol.residual)
        generator = sol.generator
        generators.append(generator)
        gen_order = generator.degree - 2

        pieces: List[SymmetricForm] = []
        sources = [h0] + [normal_parts[d] for d in sorted(normal_parts)]
        sources += [current.part(d) for d in current.degrees]
        for src in sources:
            if not src.coeffs:
                continue
            n = lie_terms_order(config.r_bar, src.degree - 2, gen_order)
            kept, dropped = lie_transform(
                generator, src, n, cap=cap, table=table, radius=radius,
                step=step, nu=config.nu, smoothing=config.smoothing,
            )
            pieces.extend(kept)
            ledger.extend(dropped)

        acc = poly_from_forms(pieces)
        new_normal: Dict[int, SymmetricForm] = {}
        new_p_parts: List[SymmetricForm] = []
        for degree in acc.degrees:
            if degree == 2:
                continue
            part = acc.parts[degree]
            if degree <= low:
                new_normal[degree] = part
            else:
                new_p_parts.append(part)
        check = add_forms(new_normal.get(low, zero_form(low)), scale_form(sol.normal, -1.0), tol=0.0)
        step_residual = max((abs(c) for c in check.coeffs.values()), default=0.0)
        if step_residual > 1e-10:
            raise RuntimeError(
                f"step {step}: accumulated degree-{low} part differs from the "
                f"homological solution by {step_residual:.3e}"
            )
        max_residual = max(max_residual, step_residual)

        normal_parts = new_normal
        current = poly_from_forms(new_p_parts)
        p_norm = poly_norm_r(current)
        step_norms.append(p_norm)
        prev = step_norms[-2]
        if prev > 1e-13 * step_norms[0] and p_norm > 2.0 * mu * prev * (1.0 + 1e-9):
            raise ValueError(
                f"smallness violated at step {step}: |P({step + 1})|_R = {p_norm:.3e} "
                f"> 2 mu |P({step})|_R with mu = {mu:.3e}"
            )
    if current.degrees:
        raise RuntimeError(f"iteration left unnormalized degrees {current.degrees}")

    buckets: Dict[str, List[SymmetricForm]] = {name: [] for name in BUCKETS}
    for degree, part in sorted(normal_parts.items()):
        split: Dict[str, Dict[Key, complex]] = {name: {} for name in BUCKETS}
        for key, c in part.coeffs.items():
            bucket = classify_term(key, table, bands, clusters, cutoff)
            if bucket == "NONRESONANT":
                raise RuntimeError(f"nonresonant key {key} survived in the normal part")
            split[bucket][key] = c
        for name in BUCKETS:
            if split[name]:
                buckets[name].append(SymmetricForm(degree=degree, coeffs=split[name]))

    polys = {
        name: poly_from_forms(buckets[name]) if buckets[name] else PolyHamiltonian(parts={})
        for name in BUCKETS
    }

    z0_all = _merged(polys["Z0"])
    zb_all = _merged(polys["ZB"])
    z2_all = _merged(polys["Z2"])
    commutation = check_superaction_commutation(
        z0_all, zb_all, z2_all, table, bands, clusters, cutoff
    )

    rng = np.random.default_rng(seed)
    remainder_forms = (
        [polys["Z2"].parts[d] for d in polys["Z2"].degrees]
        + [polys["ZGE3"].parts[d] for d in polys["ZGE3"].degrees]
        + [e.form for e in ledger]
    )
    remainder_bound = 0.0
    lattice = table.lattice
    for _ in range(remainder_samples):
        raw: State = {}
        for p in lattice.points:
            z = complex(rng.standard_normal(), rng.standard_normal())
            raw[(p, 1)] = z * (1.0 + table.norm(p)) ** (-config.s)
            raw[(p, -1)] = raw[(p, 1)].conjugate()
        scale = radius / sobolev_norm(raw, lattice, config.s)
        u = {k: v * scale for k, v in raw.items()}
        total: State = {}
        for f in remainder_forms:
            for entry, v in vector_field(f, u).items():
                total[entry] = total.get(entry, 0j) + v
        remainder_bound = max(remainder_bound, sobolev_norm(total, lattice, config.s))

    return NormalFormResult(
        config=config,
        cutoff=cutoff,
        gamma=gammas,
        tau=taus,
        z0=polys["Z0"],
        zb=polys["ZB"],
        z2=polys["Z2"],
        zge3=polys["ZGE3"],
        generators=tuple(generators),
        step_norms=tuple(step_norms),
        mu=mu,
        max_residual=max_residual,
        ledger=tuple(ledger),
        commutation=commutation,
        remainder_bound=remainder_bound,
    )


def _merged(poly: PolyHamiltonian) -> SymmetricForm:
    """All keys of a (possibly empty) polynomial as one mixed-degree bag.

    Only valid for coefficient-level bracket checks, where the degree label
    does not matter; returns an empty degree-0 form when there are none.
    """
    parts = [poly.parts[d] for d in poly.degrees]
    if not parts:
        return SymmetricForm(degree=0, coeffs={})
    if len(parts) == 1:
        return parts[0]
    coeffs: Dict[Key, complex] = {}
    for f in parts:
        coeffs.update(f.coeffs)
    return SymmetricForm(degree=parts[-1].degree, coeffs=coeffs)


def transform_state(
    generators: Sequence[SymmetricForm],
    values: State,
    *,
    inverse: bool = False,
    tol: float = 1e-10,
    lattice=None,
    s: Optional[float] = None,
    ball: Optional[float] = None,
    max_steps: int = 4096,
) -> State:
    """Compose the time-1 generator flows (forward: last generator first).

    Each flow integrates ``du/dt = X_G(u)`` with a fixed-step fourth-order
    scheme, doubling the step count until two resolutions agree within
    ``tol``.  With ``s`` and ``ball`` given, exiting the ball mid-flow raises.
    """
    seq = list(generators)
    if not inverse:
        seq = seq[::-1]
    state = dict(values)
    for gen in seq:
        g = scale_form(gen, -1.0) if inverse else gen
        state = _flow_time_one(g, state, tol=tol, lattice=lattice, s=s, ball=ball, max_steps=max_steps)
    return state


def _rk4_run(form: SymmetricForm, start: State, n_steps: int, lattice, s, ball) -> State:
    u = dict(start)
    dt = 1.0 / n_steps
    for _ in range(n_steps):
        k1 = vector_field(form, u)
        u2 = _axpy(u, k1, 0.5 * dt)
        k2 = vector_field(form, u2)
        u3 = _axpy(u, k2, 0.5 * dt)
        k3 = vector_field(form, u3)
        u4 = _axpy(u, k3, dt)
        k4 = vector_field(form, u4)
        for entry in set(u) | set(k1) | set(k2) | set(k3) | set(k4):
            u[entry] = u.get(entry, 0j) + (dt / 6.0) * (
                k1.get(entry, 0j)
                + 2.0 * k2.get(entry, 0j)
                + 2.0 * k3.get(entry, 0j)
                + k4.get(entry, 0j)
            )
        if ball is not None and lattice is not None and s is not None:
            if sobolev_norm(u, lattice, s) > ball:
                raise ValueError("flow exited the configured ball: smallness breach")
    return u


def _axpy(u: State, v: State, a: float) -> State:
    out = dict(u)
    for entry, val in v.items():
        out[entry] = out.get(entry, 0j) + a * val
    return out


def _state_distance(a: State, b: State) -> float:
    keys = set(a) | set(b)
    return math.sqrt(sum(abs(a.get(k, 0j) - b.get(k, 0j)) ** 2 for k in keys))


def _flow_time_one(form, start, *, tol, lattice, s, ball, max_steps):
    if not form.coeffs:
        return dict(start)
    n = 8
    prev = _rk4_run(form, start, n, lattice, s, ball)
    while n < max_steps:
        n *= 2
        cur = _rk4_run(form, start, n, lattice, s, ball)
        if _state_distance(cur, prev) <= tol:
            return cur
        prev = cur
    return prev


def normalform_manifest(result: NormalFormResult) -> dict:
    """JSON-ready summary: config echo, norms, bucket sizes, residuals."""
    cfg = result.config
    return {
        "config": {
            "r": cfg.r,
            "radius": cfg.radius,
            "s": cfg.s,
            "s0": cfg.s0,
            "cutoff": result.cutoff,
            "nu": cfg.nu,
            "smoothing": cfg.smoothing,
            "mu_max": cfg.mu_max,
        },
        "gamma": {str(k): v for k, v in sorted(result.gamma.items())},
        "tau": {str(k): v for k, v in sorted(result.tau.items())},
        "mu": result.mu,
        "step_norms": list(result.step_norms),
        "max_residual": result.max_residual,
        "bucket_terms": {
            name: result.bucket(name).n_terms() for name in BUCKETS
        },
        "commutation": {
            "max_band_residual": result.commutation.max_band_residual,
            "max_block_residual": result.commutation.max_block_residual,
            "z2_bracket_norm": result.commutation.z2_bracket_norm,
        },
        "ledger": [
            {
                "step": e.step,
                "source_degree": e.source_degree,
                "lie_index": e.lie_index,
                "degree": e.degree,
                "norm_r": e.norm_r,
            }
            for e in result.ledger
        ],
        "ledger_bound": result.ledger_bound,
        "remainder_bound": result.remainder_bound,
        "n_generators": len(result.generators),
    }
