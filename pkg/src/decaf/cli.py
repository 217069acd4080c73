"""Command-line entry point: ``decaf <command> ...``.

Exit codes: 0 success, 2 bad input (file, config, arguments), 3 input
outside an operation's domain, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from decaf import __version__
from decaf.errors import DecafError, DomainError, InputError, NumericalError, OracleFailure
from decaf.fingerprint import Featurizer, fingerprint_distance, minisum_problem, neighborhood_frames
from decaf.frame import co_global, solve_minisum_global
from decaf.io.config import RunConfig, load_config
from decaf.io.containers import fingerprints_csv, read_model, write_fingerprints, write_model
from decaf.io.xyz import read_xyz
from decaf.oracles import dimer, make_oracle
from decaf.quadrature import composite_grid

log = logging.getLogger("decaf")

EXIT_OK, EXIT_INPUT, EXIT_DOMAIN, EXIT_NUMERICAL = 0, 2, 3, 4
CONFIG_ENV = "DECAF_CONFIG"


# shared helpers ---------------------------------------------------------------


def _config(args) -> RunConfig:
    path = args.config or os.environ.get(CONFIG_ENV)
    cfg = load_config(Path(path).read_text(encoding="utf-8")) if path else load_config("")
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _center(spec: str):
    """``origin``, ``com``, an atom index, or ``x,y,z``."""
    if spec == "origin":
        return np.zeros(3)
    if spec == "com":
        return "com"
    if "," in spec:
        parts = spec.split(",")
        if len(parts) != 3:
            raise InputError(f"center point needs three coordinates, got {spec!r}")
        try:
            return np.array([float(p) for p in parts])
        except ValueError:
            raise InputError(f"bad center point {spec!r}") from None
    try:
        return int(spec)
    except ValueError:
        raise InputError(f"bad center selector {spec!r}") from None


def _check_center(center, structure):
    if isinstance(center, int) and not 0 <= center < len(structure):
        raise DomainError(f"atom index {center} out of range for a {len(structure)}-atom structure")


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InputError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from None


def _emit(args, text: str):
    if getattr(args, "output", None):
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _pmap(fn, items, workers):
    items = list(items)
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, items))


def _g(x) -> str:
    return format(float(x), ".10g")


# commands ---------------------------------------------------------------------


def cmd_frame(args) -> int:
    cfg = _config(args)
    feat = Featurizer.from_config(cfg)
    center = _center(args.center)
    out = []
    for k, s in enumerate(read_xyz(args.input)):
        _check_center(center, s)
        neigh = feat.neighborhood(s, center)
        src = feat.frame_source
        problem = minisum_problem(neigh, feat.scaling, src.kernel, src.weighting)
        minima = solve_minisum_global(problem.pruned(), src.settings)
        tied = co_global(minima)
        frames = neighborhood_frames(neigh, feat.scaling, src)
        out.append(
            f"# structure {k} ({s.source}): {len(neigh)} neighbors, {len(minima)} distinct minima, "
            f"{len(tied)} co-global, {len(frames)} frames"
        )
        for j, f in enumerate(frames):
            rows = " ".join(_g(v) for v in f.matrix.T.ravel())
            out.append(f"{k} {j} {rows} det={_g(round(f.determinant))} "
                       f"obj_alpha={_g(f.objectives[0])} obj_beta={_g(f.objectives[1])}")
    _emit(args, "\n".join(out) + "\n")
    return EXIT_OK


def _all_fingerprints(feat, structures, center, workers):
    def one(item):
        k, s = item
        _check_center(center, s)
        return k, feat.fingerprints(s, center, provenance=s.source)

    return _pmap(one, enumerate(structures), workers)


def cmd_fingerprint(args) -> int:
    cfg = _config(args)
    feat = Featurizer.from_config(cfg)
    center = _center(args.center)
    structures = read_xyz(args.input)
    records = [(k, f) for k, fps in _all_fingerprints(feat, structures, center, args.workers) for f in fps]
    if args.format == "binary":
        if not args.output:
            raise InputError("binary output needs --output")
        write_fingerprints(args.output, records)
    else:
        _emit(args, fingerprints_csv(records))
    return EXIT_OK


def cmd_distmat(args) -> int:
    """Distance between two structures is the closest pair across their fingerprint sets."""
    cfg = _config(args)
    feat = Featurizer.from_config(cfg)
    center = _center(args.center)
    sets = [fps for _, fps in _all_fingerprints(feat, read_xyz(args.input), center, args.workers)]
    n = len(sets)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = min(fingerprint_distance(a, b) for a in sets[i] for b in sets[j])
    lines = [",".join(format(v, ".10g") for v in row) for row in D]
    _emit(args, "\n".join(lines) + "\n")
    return EXIT_OK


_MODES = {"energy": "scalar", "dipole": "molecular-vector", "forces": "per-atom-vector"}


def _targets(structures, target):
    out = []
    for s in structures:
        value = {"energy": s.energy, "dipole": s.dipole, "forces": s.forces}[target]
        if value is None:
            raise InputError(f"structure {s.source!r} has no {target} label")
        out.append(value)
    return out


def _search(cfg):
    from decaf.regress import HyperSearch

    return HyperSearch.from_config(cfg.gp, cfg.seed)


def cmd_fit(args) -> int:
    from decaf.regress import fit_property

    cfg = _config(args)
    feat = Featurizer.from_config(cfg)
    structures = read_xyz(args.input)
    model = fit_property(feat, structures, _targets(structures, args.target), _MODES[args.target], _search(cfg))
    write_model(args.model, model)
    for k, m in enumerate(model.components):
        print(f"component {k}: sigma={_g(m.hyper.output_scale)} l={_g(m.hyper.length_scale)} "
              f"jitter={_g(m.hyper.jitter)} lml={_g(m.log_likelihood)} n={len(m)}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = read_model(args.model)
    structures = read_xyz(args.input)

    def one(s):
        return model.predict_with_uncertainty(s)

    rows = ["structure,value,std" if model.mode == "scalar" else "structure,atom,v0,v1,v2,std"]
    for k, (mean, std) in enumerate(_pmap(one, structures, args.workers)):
        if model.mode == "scalar":
            rows.append(f"{k},{_g(mean)},{_g(std)}")
        elif model.mode == "molecular-vector":
            rows.append(f"{k},," + ",".join(_g(v) for v in mean) + f",{_g(std)}")
        else:
            for a, v in enumerate(mean):
                rows.append(f"{k},{a}," + ",".join(_g(x) for x in v) + f",{_g(std)}")
    _emit(args, "\n".join(rows) + "\n")
    return EXIT_OK


def _pool(args):
    if args.dimer:
        parts = args.dimer.split(",")
        if len(parts) != 4:
            raise InputError("--dimer needs SYMBOL,RMIN,RMAX,COUNT")
        sym = parts[0]
        lo, hi = float(parts[1]), float(parts[2])
        rs = np.linspace(lo, hi, int(parts[3]))
        if args.seed_r:
            rs = np.unique(np.concatenate([rs, _float_list(args.seed_r)]))
        structures = [dimer(sym, r) for r in rs]
        seeds = [int(np.argmin(np.abs(rs - r))) for r in _float_list(args.seed_r)] if args.seed_r else []
        return structures, seeds
    if not args.input:
        raise InputError("active-learn needs an input pool or --dimer")
    return read_xyz(args.input), []


def cmd_active_learn(args) -> int:
    from decaf.regress import PropertyModel, StopCriterion, active_learn

    cfg = _config(args)
    feat = Featurizer.from_config(cfg)
    oracle = make_oracle(args.oracle)
    structures, seeds = _pool(args)
    if args.seeds:
        seeds = _int_list(args.seeds)
    if not seeds:
        seeds = [0, len(structures) - 1]

    cache = {}

    def labels_of(k):
        if k not in cache:
            cache[k] = oracle(structures[k])
        return cache[k]

    if args.target == "forces":
        centers = _int_list(args.centers) if args.centers != "all" else None
        cands = [(k, a) for k, s in enumerate(structures) for a in (centers or range(len(s)))]
        seed_idx = [i for i, (k, _) in enumerate(cands) if k in set(seeds)]

        def oracle_fn(c):
            return np.asarray(labels_of(c[0])["forces"])[c[1]]

        def featurize(c):
            return feat.fingerprints(structures[c[0]], c[1])

        vector, ids = True, [f"{k}:{a}" for k, a in cands]
    else:
        cands = list(range(len(structures)))
        seed_idx = list(seeds)

        def oracle_fn(c):
            value = labels_of(c).get(args.target)
            if value is None:
                raise OracleFailure(structures[c].source, f"oracle returned no {args.target}")
            return value

        def featurize(c):
            return feat.fingerprints(structures[c], "com")

        vector, ids = args.target == "dipole", [str(k) for k in cands]

    for i in seed_idx:
        if not 0 <= i < len(cands):
            raise DomainError(f"seed index {i} out of range")
    stop = StopCriterion(cfg.gp.max_uncertainty, cfg.gp.max_samples)
    res = active_learn(oracle_fn, cands, featurize, seed_idx, stop, _search(cfg), cfg.gp.acquisition,
                       reference=oracle_fn, vector_labels=vector)
    lines = ["iteration,n_train,acquired,max_uncertainty"]
    for t in res.trace:
        acq = "" if t.acquired is None else ids[t.acquired]
        lines.append(f"{t.iteration},{t.n_train},{acq},{_g(t.max_uncertainty)}")
    _emit(args, "\n".join(lines) + "\n")
    if args.model:
        write_model(args.model, PropertyModel(feat, res.components, _MODES[args.target]))
    return EXIT_OK


def cmd_quadrature(args) -> int:
    cfg = _config(args)
    feat = Featurizer.from_config(cfg)
    grid = feat.grid
    if args.radial is not None or args.angular is not None or args.outer_radius is not None:
        from decaf.fingerprint import build_weight

        radial = args.radial if args.radial is not None else cfg.grid.radial_order
        angular = _int_list(args.angular) if args.angular else cfg.grid.angular_counts
        outer = args.outer_radius if args.outer_radius is not None else cfg.outer_radius
        w = cfg.weight
        weight = build_weight(w.kind, cfg.cutoff, w.a, w.b, w.t, w.length)
        grid = composite_grid(radial, angular, outer, weight, cfg.grid.keep_scale_factor, weight.spec)
    head = [
        f"# radial_order={grid.radial_order} layers={' '.join(map(str, grid.angular_counts))} "
        f"outer_radius={_g(grid.outer_radius)} scale={_g(grid.scale)} keep_scale_factor={grid.keep_scale_factor}",
        f"# weight={grid.weight_spec} hash={grid.identity}",
        "x,y,z,weight,layer",
    ]
    rows = [
        ",".join(format(float(v), ".17g") for v in (*p, w)) + f",{layer}"
        for p, w, layer in zip(grid.nodes, grid.weights, grid.layer_index)
    ]
    _emit(args, "\n".join(head + rows) + "\n")
    return EXIT_OK


def cmd_graphspec(args) -> int:
    from decaf.graphspec import GaussianKernel, incidence, laplacian_spectrum

    cfg = _config(args)
    feat = Featurizer.from_config(cfg)
    kernel = GaussianKernel(args.amplitude, args.sigma)
    center = _center(args.center)
    lines = []
    for k, s in enumerate(read_xyz(args.input)):
        _check_center(center, s)
        if isinstance(center, str):
            origin = s.center_of_mass()
        elif isinstance(center, int):
            origin = s.positions[center]
        else:
            origin = center
        spec = laplacian_spectrum(incidence(s.positions, feat.grid.nodes + origin, kernel), args.count)
        lines.append(f"{k},{len(spec.dropped)}," + ",".join(format(v, ".12g") for v in spec.values))
    _emit(args, "structure,dropped_nodes,eigenvalues...\n" + "\n".join(lines) + "\n")
    return EXIT_OK


# parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="decaf",
        description="Density-field fingerprints in canonical frames, with GP regression.",
        epilog=f"Config path may also come from ${CONFIG_ENV}. Exit codes: 0 ok, 2 input, 3 domain, 4 numerical.",
    )
    p.add_argument("--version", action="version", version=f"decaf {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help=f"JSON run config (default: ${CONFIG_ENV}, else built-in defaults)")
    common.add_argument("--seed", type=int, metavar="N", help="override the config seed")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    def add(name, fn, help_, *, output=True, workers=False, center=None):
        sp = sub.add_parser(name, parents=[common], help=help_, description=help_)
        sp.set_defaults(func=fn)
        if output:
            sp.add_argument("-o", "--output", metavar="PATH", help="write here instead of stdout")
        if workers:
            sp.add_argument("--workers", type=int, default=1, metavar="N", help="threads for per-structure work (default 1)")
        if center:
            sp.add_argument("--center", default=center, metavar="SEL",
                            help=f"origin, com, an atom index, or x,y,z (default {center})")
        return sp

    sp = add("frame", cmd_frame, "print canonical frames and minisum diagnostics", center="origin")
    sp.add_argument("input", help="XYZ file")

    sp = add("fingerprint", cmd_fingerprint, "extract fingerprints", workers=True, center="com")
    sp.add_argument("input", help="XYZ file")
    sp.add_argument("--format", choices=["csv", "binary"], default="csv", help="output format (default csv)")

    sp = add("distmat", cmd_distmat, "symmetric CSV matrix of fingerprint distances", workers=True, center="com")
    sp.add_argument("input", help="XYZ file")

    sp = add("fit", cmd_fit, "fit a GP model to labeled structures", output=False)
    sp.add_argument("input", help="extended XYZ file with labels")
    sp.add_argument("--target", choices=sorted(_MODES), default="energy", help="label to learn (default energy)")
    sp.add_argument("--model", required=True, metavar="PATH", help="model file to write")

    sp = add("predict", cmd_predict, "predict labels with a saved model", workers=True)
    sp.add_argument("input", help="XYZ file")
    sp.add_argument("--model", required=True, metavar="PATH", help="model file from fit or active-learn")

    sp = add("active-learn", cmd_active_learn, "greedy max-variance active learning against an oracle")
    sp.add_argument("input", nargs="?", help="candidate pool (XYZ); omit with --dimer")
    sp.add_argument("--oracle", required=True, metavar="SPEC",
                    help="lj[:eps,sigma], morse[:D,a,r0], dimer, or external:COMMAND")
    sp.add_argument("--target", choices=sorted(_MODES), default="energy", help="label to learn (default energy)")
    sp.add_argument("--dimer", metavar="EL,RMIN,RMAX,N", help="generate a homonuclear dimer pool instead of reading one")
    sp.add_argument("--seed-r", metavar="R,...", help="seed the dimer pool at these separations")
    sp.add_argument("--seeds", metavar="I,...", help="seed structure indices (default first and last)")
    sp.add_argument("--centers", default="all", metavar="I,...", help="atoms used as force centers (default all)")
    sp.add_argument("--model", metavar="PATH", help="write the final model here")

    sp = add("quadrature", cmd_quadrature, "dump the composite quadrature grid as CSV")
    sp.add_argument("--radial", type=int, metavar="N", help="radial order (default from config)")
    sp.add_argument("--angular", metavar="N,...", help="Lebedev point counts per layer")
    sp.add_argument("--outer-radius", type=float, metavar="R", help="radius of the outer layer")

    sp = add("graphspec", cmd_graphspec, "normalized Laplacian spectra of the atom-node graph (experimental)",
             center="com")
    sp.add_argument("input", help="XYZ file")
    sp.add_argument("--count", type=int, default=10, metavar="N", help="eigenvalues per structure (default 10)")
    sp.add_argument("--sigma", type=float, default=1.0, help="Gaussian width (default 1.0)")
    sp.add_argument("--amplitude", type=float, default=1.0, help="Gaussian amplitude (default 1.0)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, OSError, UnicodeDecodeError) as exc:
        code, err = EXIT_INPUT, exc
    except DomainError as exc:
        code, err = EXIT_DOMAIN, exc
    except (NumericalError, OracleFailure) as exc:
        code, err = EXIT_NUMERICAL, exc
    except DecafError as exc:
        code, err = EXIT_DOMAIN, exc
    print(f"decaf {args.command}: error: {err}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
