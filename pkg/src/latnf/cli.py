"""Command-line driver.

Subcommands cover the pipeline end to end: ``spectrum`` tabulates and bands
frequencies, ``clusters`` builds and certifies the separation partition,
``resonances`` scans small divisors, ``measure`` estimates the resonant
parameter measure, ``normalform`` runs the full normalization, ``simulate``
integrates a trajectory, and ``verify`` replays the fast invariant suite.

Exit codes: 0 on success, 1 when a check that ran produced a certified
failure (the witness is printed), 2 on usage or configuration errors.  All
artifacts are deterministic given the config and seed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Dict, List

from .bands import band_partition, check_band_invariants
from .clusters import (
    build_clusters,
    certify_dyadic,
    cluster_summary,
    clusters_to_csv,
    clusters_to_json,
    separation_margin,
)
from .config import ConfigError, apply_overrides, config_to_jsonable, load_config
from .dynamics import SimulationConfig, integrate_beam, integrate_nls, trajectory_to_csv
from .forms import form_to_jsonl, nls_quartic, poly_from_forms
from .frequencies import (
    Beam,
    GroundState,
    SpectralMultiplier,
    TorusLaplacian,
    build_spectrum,
    fit_asymptotics,
    spectrum_to_csv,
)
from .lattice import enumerate_lattice
from .manifest import build_manifest, inventory, spawn_seed, write_manifest
from .normalform import NormalFormConfig, normalform_manifest, normalize
from .resonance import (
    MultiplierEnsemble,
    certificate_to_json,
    certify_nonresonance,
    estimate_resonant_measure,
)


def _build_lattice(cfg):
    sec = cfg["lattice"]
    offset = sec["offset"] or None
    return enumerate_lattice(sec["dim"], sec["radius"], offset)


def _build_model(cfg, lattice):
    sec = cfg["model"]
    kind = sec["kind"]
    torus = TorusLaplacian(gram=sec["gram"])
    if kind == "torus":
        return torus
    if kind == "multiplier":
        return SpectralMultiplier(base=torus, potential=dict(sec["potential"]))
    if kind == "ground_state":
        from .frequencies import frequency

        eig = {p: float(frequency(torus, p, lattice.offset)) for p in lattice.points}
        f_value = sec["f_value"]
        return GroundState(eigenvalues=eig, p0=sec["p0"], f=lambda _p: f_value)
    if kind == "beam":
        from .frequencies import frequency

        eig = {p: float(frequency(torus, p, lattice.offset)) for p in lattice.points}
        return Beam(eigenvalues=eig, mass=sec["mass"])
    raise ConfigError(f"unknown model kind {kind!r}")


def _out_dir(cfg) -> Path:
    out = Path(cfg["run"]["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(cfg, command: str, results: Dict, artifacts: List[Path], out: Path) -> None:
    if not cfg["output"]["manifest"]:
        return
    manifest = build_manifest(
        command=command,
        config_echo=config_to_jsonable(cfg),
        results=results,
        artifacts=inventory(artifacts, root=out),
        seed=cfg["run"]["seed"],
    )
    write_manifest(manifest, out / f"{command}_manifest.json")


def cmd_spectrum(cfg, args) -> int:
    lattice = _build_lattice(cfg)
    model = _build_model(cfg, lattice)
    table = build_spectrum(lattice, model)
    bands = band_partition(table)
    diag = check_band_invariants(bands)
    fit = fit_asymptotics(model, table)

    out = _out_dir(cfg)
    csv_path = out / "spectrum.csv"
    spectrum_to_csv(table, csv_path)
    results = {
        "n_modes": len(table),
        "beta": table.beta,
        "exact": table.exact,
        "n_bands": bands.nbands,
        "band_violations": list(bands.violations) + list(diag.violations),
        "fit": {"c1": fit.c1, "c2": fit.c2, "passed": fit.passed},
    }
    _finish(cfg, "spectrum", results, [csv_path], out)
    print(
        f"spectrum: {len(table)} modes, beta={table.beta:g}, "
        f"{bands.nbands} bands, fit c1={fit.c1:.6g} c2={fit.c2:.3g}"
    )
    if diag.violations or bands.violations:
        witness = (list(diag.violations) + list(bands.violations))[0]
        print(f"FAIL band invariants: {witness}")
        return 1
    if not fit.passed:
        print(
            f"FAIL asymptotic fit: outer residual {fit.outer_max:.3g} "
            f"exceeds twice inner {fit.inner_max:.3g}"
        )
        return 1
    return 0


def cmd_clusters(cfg, args) -> int:
    lattice = _build_lattice(cfg)
    model = _build_model(cfg, lattice)
    table = build_spectrum(lattice, model)
    part = build_clusters(table, cfg["clusters"]["delta"], cfg["clusters"]["c_delta"])
    dyadic = certify_dyadic(part, table)
    margin, margin_pair = separation_margin(part, table)

    out = _out_dir(cfg)
    csv_path = out / "clusters.csv"
    json_path = out / "clusters.json"
    clusters_to_csv(part, table, csv_path)
    clusters_to_json(part, table, json_path)
    results = dict(cluster_summary(part, table))
    results["dyadic_passed"] = dyadic.passed
    results["separation_margin"] = margin
    _finish(cfg, "clusters", results, [csv_path, json_path], out)
    print(
        f"clusters: {part.nblocks} blocks, dyadic C={dyadic.constant:.4g}, "
        f"margin={margin:.4g}"
    )
    if not dyadic.passed:
        print(f"FAIL dyadic bound: {dyadic.witness}")
        return 1
    return 0


def cmd_resonances(cfg, args) -> int:
    lattice = _build_lattice(cfg)
    model = _build_model(cfg, lattice)
    table = build_spectrum(lattice, model)
    bands = band_partition(table)
    sec = cfg["resonance"]
    cert = certify_nonresonance(
        table,
        sec["order"],
        partition=bands,
        gamma=sec["gamma"],
        tau=sec["tau"],
        budget=sec["budget"],
        seed=cfg["run"]["seed"],
    )
    out = _out_dir(cfg)
    cert_path = out / "certificate.json"
    certificate_to_json(cert, cert_path)
    _finish(cfg, "resonances", cert.to_dict(), [cert_path], out)
    print(
        f"resonances: order {cert.order}, min score {cert.min_score:.6g} "
        f"(gamma {cert.gamma:.6g}, tau {cert.tau:g}, "
        f"{'exhaustive' if cert.exhaustive else 'sampled'} over {cert.n_checked})"
    )
    if not cert.passed:
        print(
            f"FAIL nonresonance: witness {cert.witness} has divisor "
            f"{cert.witness_divisor:.6g}"
        )
        return 1
    return 0


def cmd_measure(cfg, args) -> int:
    lattice = _build_lattice(cfg)
    sec = cfg["measure"]
    ensemble = MultiplierEnsemble(
        base=TorusLaplacian(gram=cfg["model"]["gram"]), decay=int(sec["decay"])
    )
    support = [tuple(p) for p in sec["support"]]
    k = sec["k"]
    if len(k) != len(support):
        raise ConfigError("measure.k and measure.support must have equal length")
    coeffs = dict(zip(support, k))
    rows = []
    failed = None
    for i, gamma in enumerate(sec["gamma"]):
        est = estimate_resonant_measure(
            ensemble,
            lattice,
            coeffs,
            float(gamma),
            n_samples=sec["n_samples"],
            seed=spawn_seed(cfg["run"]["seed"], f"measure-{i}"),
        )
        rows.append(
            {
                "gamma": est.gamma,
                "fraction": est.fraction,
                "bound": est.bound,
                "stderr": est.stderr,
                "passed": est.passed,
            }
        )
        print(
            f"measure: gamma={est.gamma:g} fraction={est.fraction:.6g} "
            f"bound={est.bound:.6g} (+3se {3 * est.stderr:.2g}) "
            f"{'ok' if est.passed else 'EXCEEDED'}"
        )
        if not est.passed and failed is None:
            failed = est
    out = _out_dir(cfg)
    _finish(cfg, "measure", {"rows": rows}, [], out)
    if failed is not None:
        print(
            f"FAIL measure bound: fraction {failed.fraction:.6g} > "
            f"{failed.bound:.6g} + 3 x {failed.stderr:.3g} at gamma {failed.gamma:g}"
        )
        return 1
    return 0


def cmd_normalform(cfg, args) -> int:
    lattice = _build_lattice(cfg)
    model = _build_model(cfg, lattice)
    table = build_spectrum(lattice, model)
    bands = band_partition(table)
    clusters = build_clusters(table, cfg["clusters"]["delta"], cfg["clusters"]["c_delta"])
    sec = cfg["normalform"]

    if sec["perturbation"] != "nls_quartic":
        raise ConfigError(f"unknown perturbation {sec['perturbation']!r}")
    perturbation = poly_from_forms([nls_quartic(lattice, sec["coupling"])])

    nf_config = NormalFormConfig(
        r=sec["r"],
        radius=sec["radius"],
        s=sec["s"],
        s0=sec["s0"],
        cutoff=sec["cutoff"],
        gamma=sec["gamma"],
        tau=sec["tau"],
        nu=sec["nu"],
        smoothing=sec["smoothing"],
        mu_max=sec["mu_max"],
    )
    certificates = []
    for order in range(3, nf_config.degree_cap + 1):
        certificates.append(
            certify_nonresonance(
                table,
                order,
                partition=bands,
                tau=sec["tau"],
                budget=sec["cert_budget"],
                seed=spawn_seed(cfg["run"]["seed"], f"cert-{order}"),
            )
        )
    try:
        result = normalize(
            table,
            perturbation,
            nf_config,
            certificates,
            bands=bands,
            clusters=clusters,
            remainder_samples=sec["remainder_samples"],
            seed=spawn_seed(cfg["run"]["seed"], "remainder"),
        )
    except ValueError as exc:
        msg = str(exc)
        if "certificate" in msg or "smallness" in msg or "gamma" in msg:
            print(f"FAIL normal form: {msg}")
            return 1
        raise

    out = _out_dir(cfg)
    artifacts = []
    for i, gen in enumerate(result.generators):
        path = out / f"generator_{i}.jsonl"
        form_to_jsonl(gen, path)
        artifacts.append(path)
    for name in ("Z0", "ZB", "Z2", "ZGE3"):
        poly = result.bucket(name)
        for degree in poly.degrees:
            path = out / f"{name.lower()}_deg{degree}.jsonl"
            form_to_jsonl(poly.parts[degree], path)
            artifacts.append(path)
    results = normalform_manifest(result)
    _finish(cfg, "normalform", results, artifacts, out)
    print(
        f"normalform: {len(result.generators)} steps, cutoff {result.cutoff:g}, "
        f"mu {result.mu:.3g}, residual {result.max_residual:.3g}, "
        f"remainder bound {result.remainder_bound:.3g}"
    )
    bucket_terms = results["bucket_terms"]
    print(
        "normalform: terms Z0={Z0} ZB={ZB} Z2={Z2} ZGE3={ZGE3}".format(**bucket_terms)
    )
    return 0


def cmd_simulate(cfg, args) -> int:
    sec = cfg["simulate"]
    sim = SimulationConfig(
        model=sec["model"],
        dim=cfg["lattice"]["dim"],
        radius=cfg["lattice"]["radius"],
        gram=cfg["model"]["gram"],
        potential=dict(cfg["model"]["potential"]) or None,
        nonlinearity={int(k): v for k, v in sec["nonlinearity"].items()},
        force={int(k): v for k, v in sec["force"].items()} or None,
        mass_term=sec["mass_term"],
        epsilon=sec["epsilon"],
        s=sec["s"],
        dt=sec["dt"],
        horizon=sec["horizon"],
        stride=sec["stride"],
        seed=cfg["run"]["seed"],
        integrator=sec["integrator"],
        dt_bound=sec["dt_bound"],
        track_orbital=sec["track_orbital"],
    )
    try:
        record = integrate_nls(sim) if sim.model == "nls" else integrate_beam(sim)
    except FloatingPointError as exc:
        print(f"FAIL simulate: {exc}")
        return 1
    out = _out_dir(cfg)
    csv_path = out / "trajectory.csv"
    trajectory_to_csv(record, csv_path)
    growth = float(record.sobolev.max() / record.sobolev[0])
    mass_drift = float(abs(record.mass[-1] - record.mass[0]))
    energy_scale = max(1.0, float(abs(record.energy[0])))
    energy_drift = float(abs(record.energy[-1] - record.energy[0])) / energy_scale
    results = {
        "n_samples": len(record.times),
        "final_time": float(record.times[-1]),
        "initial_sobolev": float(record.sobolev[0]),
        "max_sobolev": float(record.sobolev.max()),
        "growth": growth,
        "mass_drift": mass_drift,
        "relative_energy_drift": energy_drift,
        "meta": {
            k: v
            for k, v in record.meta.items()
            if k not in ("band_floors", "final_modes")
        },
    }
    _finish(cfg, "simulate", results, [csv_path], out)
    print(
        f"simulate: {record.meta['n_steps']} steps to t={record.times[-1]:g}, "
        f"max |u|_s / initial = {growth:.4g}, mass drift {mass_drift:.3g}"
    )
    return 0


def cmd_verify(cfg, args) -> int:
    import numpy as np

    from .forms import poisson_bracket, random_form, vector_field
    from .normalform import solve_homological

    checks: List[tuple] = []
    seed = cfg["run"]["seed"]

    lattice = _build_lattice(cfg)
    model = _build_model(cfg, lattice)
    table = build_spectrum(lattice, model)
    bands = band_partition(table)
    diag = check_band_invariants(bands)
    checks.append(
        (
            "band invariants",
            diag.widths_ok and diag.gaps_ok and not bands.violations,
            "; ".join(list(diag.violations) + list(bands.violations)) or "ok",
        )
    )

    part = build_clusters(table, cfg["clusters"]["delta"], cfg["clusters"]["c_delta"])
    edges = {}
    pts = list(table.points)
    for i, a in enumerate(pts):
        for j in range(i + 1, len(pts)):
            b = pts[j]
            from .lattice import point_distance

            gap = point_distance(a, b) + abs(float(table.omega(a)) - float(table.omega(b)))
            thr = part.c_delta * (table.norm(a) ** part.delta + table.norm(b) ** part.delta)
            if gap < thr:
                edges.setdefault(a, set()).add(b)
                edges.setdefault(b, set()).add(a)
    seen, blocks = set(), []
    for p in pts:
        if p in seen:
            continue
        stack, comp = [p], []
        while stack:
            q = stack.pop()
            if q in seen:
                continue
            seen.add(q)
            comp.append(q)
            stack.extend(edges.get(q, ()))
        blocks.append(tuple(sorted(comp)))
    oracle = tuple(sorted(blocks))
    checks.append(("cluster closure", oracle == part.blocks, f"{part.nblocks} blocks"))

    from .lattice import extended_indexes
    from .resonance import is_resonant_W

    rng = np.random.default_rng(seed)
    ext = extended_indexes(lattice)
    from .bands import band_map

    bm = band_map(table, bands)
    ok_w = True
    for _ in range(200):
        ms = tuple(ext[i] for i in rng.integers(0, len(ext), size=4))
        counts: Dict[int, int] = {}
        for p, sgn in ms:
            counts[bm[p]] = counts.get(bm[p], 0) + sgn
        expected = all(v == 0 for v in counts.values())
        if is_resonant_W(ms, table, bands) != expected:
            ok_w = False
            break
    checks.append(("resonant-set membership", ok_w, "200 random multisets"))

    cert = certify_nonresonance(
        table, 3, partition=bands, budget=200_000, seed=spawn_seed(seed, "verify-cert")
    )
    checks.append(
        (
            "order-3 certificate",
            cert.passed,
            f"min score {cert.min_score:.3g} over {cert.n_checked}",
        )
    )

    if cert.passed:
        clusters = build_clusters(table)
        cutoff_ok = True
        try:
            f = random_form(lattice, degree=3, n_terms=8, seed=seed + 1)
            from .normalform import choose_cutoff

            cutoff = choose_cutoff(table, bands, 0.01, cert.tau)
            sol = solve_homological(
                f, table, bands, clusters, cutoff, cert.gamma, cert.tau
            )
            checks.append(
                ("homological residual", sol.residual <= 1e-12, f"{sol.residual:.3g}")
            )
        except ValueError as exc:
            checks.append(("homological residual", False, str(exc)))

    fa = random_form(lattice, degree=3, n_terms=5, seed=seed + 2)
    fb = random_form(lattice, degree=3, n_terms=5, seed=seed + 3)
    fc = random_form(lattice, degree=4, n_terms=5, seed=seed + 4)
    acc = poisson_bracket(fa, poisson_bracket(fb, fc, tol=0.0), tol=0.0)
    from .forms import add_forms

    acc = add_forms(acc, poisson_bracket(fb, poisson_bracket(fc, fa, tol=0.0), tol=0.0), tol=0.0)
    acc = add_forms(acc, poisson_bracket(fc, poisson_bracket(fa, fb, tol=0.0), tol=0.0), tol=0.0)
    scale = max(
        (abs(c) for f in (fa, fb, fc) for c in f.coeffs.values()), default=1.0
    )
    jac = max((abs(c) for c in acc.coeffs.values()), default=0.0) / scale**3
    checks.append(("Jacobi identity", jac <= 1e-10, f"relative residual {jac:.3g}"))

    sim = SimulationConfig(
        model="nls",
        dim=lattice.dim,
        radius=min(lattice.radius, 6.0),
        gram=cfg["model"]["gram"],
        potential=dict(cfg["model"]["potential"]) or None,
        epsilon=0.05,
        s=cfg["simulate"]["s"],
        horizon=2.0,
        stride=20,
        seed=seed,
    )
    record = integrate_nls(sim)
    mass_drift = float(abs(record.mass[-1] - record.mass[0]) / record.mass[0])
    checks.append(("mass conservation", mass_drift <= 1e-10, f"drift {mass_drift:.3g}"))
    e_scale = max(1e-30, abs(float(record.energy[0])))
    e_drift = float(abs(record.energy[-1] - record.energy[0])) / e_scale
    checks.append(("energy drift", e_drift <= 1e-4, f"relative drift {e_drift:.3g}"))

    failed = [c for c in checks if not c[1]]
    for name, ok, detail in checks:
        print(f"verify: {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    out = _out_dir(cfg)
    _finish(
        cfg,
        "verify",
        {"checks": [{"name": n, "passed": ok, "detail": d} for n, ok, d in checks]},
        [],
        out,
    )
    if failed:
        print(f"FAIL verify: {failed[0][0]}: {failed[0][2]}")
        return 1
    print(f"verify: all {len(checks)} checks passed")
    return 0


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "clusters": cmd_clusters,
    "resonances": cmd_resonances,
    "measure": cmd_measure,
    "normalform": cmd_normalform,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latnf",
        description="Spectral truncations, resonance certificates, normal forms, "
        "and trajectory experiments for lattice Hamiltonians.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="INI or JSON config file")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="override one config value (repeatable)",
        )
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--out-dir", default=None, help="override run.out_dir")
        p.add_argument("--jobs", type=int, default=None, help="override run.jobs")
    return parser


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        cfg = load_config(args.config)
        apply_overrides(cfg, args.set)
        if args.seed is not None:
            cfg["run"]["seed"] = args.seed
        if args.out_dir is not None:
            cfg["run"]["out_dir"] = args.out_dir
        if args.jobs is not None:
            cfg["run"]["jobs"] = args.jobs
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"FAIL invariant: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
