"""Command-line driver: dataset generation, flatness scans, cube trees,
graph extraction, verification, and norm calibration.

Exit codes: 0 ok, 1 invariant failure, 2 config error, 3 resolution-floor
violation.
"""

from __future__ import annotations

import os
import sys

import click
import numpy as np

from . import cubes as CB
from . import datasets as D
from . import flatness as F
from . import groups as G
from . import io as IO
from . import measures as M
from . import planes as P
from . import rectify as R
from . import verify as VF

EXIT_INVARIANT = 1
EXIT_CONFIG = 2
EXIT_RESOLUTION = 3


def _load_group(name: str) -> G.GroupSpec:
    try:
        return G.load_group(name)
    except (G.GroupError, OSError, ValueError) as exc:
        click.echo(f"config error: group: {exc}", err=True)
        sys.exit(EXIT_CONFIG)


def _parse_vec(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        click.echo(f"config error: vector literal {text!r}", err=True)
        sys.exit(EXIT_CONFIG)


@click.group()
def main():
    """Numerical 1-codimensional geometric measure theory in Carnot groups."""


@main.command()
@click.option("--kind", required=True,
              type=click.Choice(["plane", "intrinsic_graph", "two_planes",
                                 "noisy_graph", "ball_noise"]))
@click.option("--group", default="h1", show_default=True)
@click.option("--count", default=4000, show_default=True)
@click.option("--extent", default=1.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--normal", default="1,0", show_default=True)
@click.option("--second-normal", default=None)
@click.option("--amplitude", default=0.25, show_default=True)
@click.option("--aperture", default=1.0, show_default=True)
@click.option("--noise-fraction", default=0.02, show_default=True)
@click.option("--out", required=True, type=click.Path())
def gen(kind, group, count, extent, seed, normal, second_normal, amplitude,
        aperture, noise_fraction, out):
    """Generate a synthetic cloud: CSV + labels + manifest."""
    spec = _load_group(group)
    ds = D.DatasetSpec(kind=kind, group=group, count=count, extent=extent,
                       seed=seed, normal=_parse_vec(normal),
                       second_normal=_parse_vec(second_normal) if second_normal else None,
                       amplitude=amplitude, aperture=aperture,
                       noise_fraction=noise_fraction)
    try:
        mu = D.generate(ds, spec)
    except ValueError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    os.makedirs(out, exist_ok=True)
    M.write_cloud_csv(os.path.join(out, "cloud.csv"), mu)
    if mu.labels is not None:
        np.savetxt(os.path.join(out, "labels.csv"), mu.labels, fmt="%d")
    IO.write_json(os.path.join(out, "manifest.json"),
                  IO.manifest(spec, seed, "gen", ds.__dict__))
    click.echo(f"wrote {len(mu)} points to {out}/cloud.csv")


@main.command()
@click.option("--cloud", required=True, type=click.Path(exists=True))
@click.option("--group", default="h1", show_default=True)
@click.option("--scales", default="0.5,0.25", show_default=True)
@click.option("--points", default=4, show_default=True,
              help="number of query points sampled from the support")
@click.option("--seed", default=0, show_default=True)
@click.option("--fast/--precise", default=True, show_default=True)
@click.option("--out", required=True, type=click.Path())
def flatness(cloud, group, scales, points, seed, fast, out):
    """Flatness scan over (point, scale) pairs; CSV output."""
    spec = _load_group(group)
    mu = M.read_cloud_csv(cloud, spec)
    scale_list = _parse_vec(scales)
    floor = 4 * M.median_spacing(mu)
    if min(scale_list) < floor:
        click.echo(f"resolution-floor violation: min scale {min(scale_list)} "
                   f"< {floor:.4g}", err=True)
        sys.exit(EXIT_RESOLUTION)
    rng = np.random.default_rng(seed)
    qi = rng.choice(len(mu), size=min(points, len(mu)), replace=False)
    cfg = F.SearchConfig(seed=seed)
    if fast:
        cfg = cfg.fast_profile()
    rows = F.flatness_scan(mu, mu.points[np.sort(qi)], scale_list, cfg)
    os.makedirs(out, exist_ok=True)
    IO.write_text(os.path.join(out, "scan.csv"),
                  F.scan_rows_to_csv(rows, spec.layer_dims[0]))
    IO.write_json(os.path.join(out, "manifest.json"),
                  IO.manifest(spec, seed, "flatness",
                              {"scales": list(scale_list), "points": int(points)}))
    click.echo(f"wrote {len(rows)} scan rows to {out}/scan.csv")


@main.command()
@click.option("--cloud", required=True, type=click.Path(exists=True))
@click.option("--group", default="h1", show_default=True)
@click.option("--depth", default=3, show_default=True)
@click.option("--tau", default=1 / 8, show_default=True)
@click.option("--xi", default=4.0, show_default=True)
@click.option("--mode", default="practical", type=click.Choice(["paper", "practical"]),
              show_default=True)
@click.option("--bigN", "big_n", default=2, show_default=True,
              help="practical layer refinement exponent")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def cubes(cloud, group, depth, tau, xi, mode, big_n, seed, out):
    """Dyadic cube tree + axiom report."""
    spec = _load_group(group)
    mu = M.read_cloud_csv(cloud, spec)
    try:
        overrides = {"N": big_n, "k": 8.0} if mode == "practical" else None
        ledger = CB.constants(max(xi, 1.0), spec.Q, mode, n1=spec.layer_dims[0],
                              overrides=overrides)
    except ValueError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    tree = CB.build_cube_tree(mu, xi=xi, tau=tau, depth=depth, ledger=ledger,
                              seed=seed)
    report = CB.verify_cube_axioms(tree)
    if ledger.mode == "paper":
        report["note"] = "paper-constant checks are vacuous at this scale"
    os.makedirs(out, exist_ok=True)
    IO.write_text(os.path.join(out, "tree.json"), tree.to_json())
    IO.write_json(os.path.join(out, "axioms.json"), report)
    IO.write_json(os.path.join(out, "manifest.json"),
                  IO.manifest(spec, seed, "cubes",
                              {"depth": depth, "tau": tau, "xi": xi},
                              ledger.as_dict()))
    click.echo(f"tree with {sum(len(l) for l in tree.layers)} cubes -> {out}")
    if tree.warnings:
        click.echo("; ".join(tree.warnings), err=True)
        sys.exit(EXIT_RESOLUTION)
    if not report["all_pass"]:
        sys.exit(EXIT_INVARIANT)


@main.command()
@click.option("--cloud", required=True, type=click.Path(exists=True))
@click.option("--group", default="h1", show_default=True)
@click.option("--alpha", default=1.0, show_default=True)
@click.option("--coverage", default=0.9, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def graphs(cloud, group, alpha, coverage, seed, out):
    """Cone-criterion graph cover of a cloud."""
    spec = _load_group(group)
    mu = M.read_cloud_csv(cloud, spec)
    ledger = CB.constants(2.0, spec.Q, "practical", n1=spec.layer_dims[0],
                          overrides={"N": 2, "k": 8.0})
    tree = CB.build_cube_tree(mu, xi=4.0, tau=1 / 8, depth=2, ledger=ledger,
                              seed=seed)
    result = R.graph_cover(mu, tree, alpha=alpha, coverage_target=coverage)
    os.makedirs(out, exist_ok=True)
    for i, g in enumerate(result["extracts"]):
        IO.write_json(os.path.join(out, f"graph_{i}.json"), g.as_dict())
    IO.write_json(os.path.join(out, "coverage.json"),
                  {"covered_fraction": result["covered_fraction"],
                   "log": result["log"]})
    IO.write_json(os.path.join(out, "manifest.json"),
                  IO.manifest(spec, seed, "graphs", {"alpha": alpha}))
    click.echo(f"{len(result['extracts'])} graphs cover "
               f"{result['covered_fraction']:.1%} of the mass -> {out}")


@main.command()
def verify():
    """Run the invariant suite; exit 0 iff every check passes."""
    ok = VF.run_suite(echo=click.echo)
    sys.exit(0 if ok else EXIT_INVARIANT)


@main.command()
@click.option("--group", default="h1", show_default=True)
@click.option("--samples", default=100_000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", default=None, type=click.Path())
def calibrate(group, samples, seed, out):
    """Norm calibration and per-group constants report."""
    spec = _load_group(group)
    try:
        eps = G.calibrate_norm_eps(spec, samples, seed)
    except G.GroupError as exc:
        click.echo(f"calibration failure: {exc}", err=True)
        sys.exit(EXIT_INVARIANT)
    spec2 = spec.with_norm_eps(eps)
    c0 = P.projection_lipschitz_bound(spec2, seed=seed)
    beta = P.plane_unit_ball_area(spec2)
    lam = {str(a): P.off_cone_factor(spec2, a) for a in (0.25, 1.0, 4.0)}
    report = {
        "group": spec.name,
        "norm_eps": list(eps),
        "projection_bound_c0": c0,
        "plane_unit_ball_area": beta,
        "off_cone_factor": lam,
    }
    click.echo(f"eps = {list(eps)}  c0 = {c0:.4f}  beta = {beta:.6f}")
    if out:
        IO.write_json(out, IO.manifest(spec2, seed, "calibrate", report))


if __name__ == "__main__":
    main()
