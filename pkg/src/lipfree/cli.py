"""Command-line pipelines: cover building, extension bundles, gluing, BAP
tables, metric perturbation, and certificate re-verification.

Every run is driven by a JSON config, every randomized step takes its seed
from the config, and reports are written with sorted keys so that re-running
with the same config produces byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import bap as bapmod
from . import certs as certsmod
from . import covers as coversmod
from . import extension as extmod
from . import gluing as gluemod
from .spaces import (DEFAULT_TOL, perturb_metric, space_from_json,
                     space_to_json, sup_distance)


class ConfigError(ValueError):
    pass


def _load_config(args) -> dict:
    with open(args.config) as fh:
        cfg = json.load(fh)
    if getattr(args, "seed_override", None) is not None:
        cfg["seed"] = args.seed_override
    return cfg


def _space_from_config(cfg: dict):
    if "space" not in cfg:
        raise ConfigError("config needs a 'space' entry")
    return space_from_json(cfg["space"])


def _require_seed(cfg: dict) -> int:
    if "seed" not in cfg:
        raise ConfigError("config performs a randomized step and must carry a seed")
    return int(cfg["seed"])


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _cert_list(certs) -> list[dict]:
    return [certsmod.certificate_to_json(c) for c in certs]


def _matrix(m) -> list:
    return [list(map(float, row)) for row in np.asarray(m)]


def _eps_schedule(cfg: dict) -> list[tuple[str, float]]:
    """Either an explicit eps list, or (nu, n_schedule) mapped through
    eps = min(nu/4, 1/(10 n))."""
    if "eps_schedule" in cfg:
        return [(str(e), float(e)) for e in cfg["eps_schedule"]]
    if "nu" in cfg and "n_schedule" in cfg:
        nu = float(cfg["nu"])
        return [(str(n), min(nu / 4.0, 1.0 / (10.0 * int(n)))) for n in cfg["n_schedule"]]
    raise ConfigError("config needs eps_schedule or (nu, n_schedule)")


# ---------------------------------------------------------------------------
# subcommands


def cmd_build_cover(args) -> int:
    cfg = _load_config(args)
    space = _space_from_config(cfg)
    eps = float(cfg["eps"])
    nc = coversmod.build_net_cover(space, eps)
    cert = coversmod.verify_net_cover(nc)
    out = Path(args.out_dir) / f"cover-{cfg.get('seed', 0)}-{eps}.json"
    _write_json(out, {
        "space": space_to_json(space),
        "cover": coversmod.net_cover_to_json(nc),
        "certificates": _cert_list([cert]),
    })
    print(f"wrote {out}")
    print(cert)
    return 0 if cert.passed else 1


def cmd_extend(args) -> int:
    cfg = _load_config(args)
    space = _space_from_config(cfg)
    schedule = _eps_schedule(cfg)
    perturb_cfg = cfg.get("perturbations", {})
    count = int(perturb_cfg.get("count", 0))
    seed = _require_seed(cfg) if count else int(cfg.get("seed", 0))
    tol = float(cfg.get("tol", args.tol))
    ok = True
    for label, eps in schedule:
        nc = coversmod.build_net_cover(space, eps)
        bundle = extmod.build_extension_bundle(space, eps, nc, tol=tol)
        certs = list(bundle.certificates)
        perturbed = []
        rng = np.random.default_rng(seed)
        radius = extmod.admission_radius(eps, bundle.order_bound)
        for i in range(count):
            e = perturb_metric(bundle.adapted, 0.9 * radius, rng)
            pb = extmod.build_perturbed_operator(bundle, e, tol=tol)
            perturbed.append({
                "index": i,
                "norm": pb.gnorm,
                "bound": pb.bound,
                "certificates": _cert_list(pb.certificates),
            })
            certs.extend(pb.certificates)
        payload = {
            "pipeline": "extend",
            "eps": eps,
            "seed": seed,
            "tol": tol,
            "net": list(bundle.net),
            "bundle": extmod.bundle_to_json(bundle),
            "perturbed": perturbed,
            "certificates": _cert_list(bundle.certificates),
        }
        out = Path(args.out_dir) / f"extend-{seed}-{label}.json"
        _write_json(out, payload)
        stage_ok = certsmod.all_passed(certs)
        ok = ok and stage_ok
        print(f"wrote {out} ({'pass' if stage_ok else 'FAIL'}, "
              f"|A|={len(bundle.net)}, sup distance {sup_distance(space.dist, bundle.adapted):.4g})")
    return 0 if ok else 1


def cmd_glue(args) -> int:
    cfg = _load_config(args)
    space = _space_from_config(cfg)
    gcfg = gluemod.GluingConfig(space, tuple(cfg["k"]), int(cfg["dim_k"]),
                                tuple(cfg["thresholds"]))
    n = int(cfg.get("n", 1))
    if "eps" in cfg:
        eps = float(cfg["eps"])
    else:
        nu = float(cfg["nu"])
        exh = gluemod.build_exhaustion(gcfg)
        from .spaces import set_distance
        eps = min(nu / 5.0, set_distance(space.dist, gcfg.k, exh[n - 1]))
    tol = float(cfg.get("tol", args.tol))
    bundle = gluemod.build_gluing_bundle(gcfg, n, eps, tol=tol)
    probes = cfg.get("probes", {})
    count = int(probes.get("count", 1))
    seed = _require_seed(cfg) if count else int(cfg.get("seed", 0))
    rng = np.random.default_rng(seed)
    radius = gluemod.probe_radius(eps, gcfg.dim_k)
    ok = bundle.passed
    results = []
    for i in range(count):
        amp = float(probes.get("amplitude", 0.9)) * radius
        e = bundle.metric if i == 0 else perturb_metric(bundle.metric, amp, rng)
        cert = gluemod.certify_gluing(bundle, e, rng=rng, tol=tol)
        ok = ok and cert.passed
        record = gluemod.gluing_certificate_to_json(cert)
        record["index"] = i
        record["norm"] = cert.measured_norm
        results.append(record)
        print(f"probe {i}: norm {cert.measured_norm:.4g} vs bound {cert.bound:.6g} "
              f"-> {'pass' if cert.passed else 'FAIL'}")
    payload = {
        "pipeline": "glue",
        "seed": seed,
        "n": bundle.n,
        "m": bundle.m,
        "eps": eps,
        "admission_radius": radius,
        "net": list(bundle.net),
        "collar": list(bundle.v_indices),
        "glue_metric": _matrix(bundle.metric),
        "certificates": _cert_list(bundle.certificates),
        "probes": results,
    }
    out = Path(args.out_dir) / f"glue-{seed}-{n}.json"
    _write_json(out, payload)
    print(f"wrote {out}")
    return 0 if ok else 1


def cmd_bap(args) -> int:
    cfg = _load_config(args)
    space = _space_from_config(cfg)
    nu = float(cfg.get("nu", 1.0))
    envelope = float(cfg.get("envelope", 4.0))
    seed = int(cfg.get("seed", 0))
    tol = float(cfg.get("tol", args.tol))
    stages = []
    bound = None
    for n in cfg["n_schedule"]:
        n = int(n)
        eps = min(nu / 4.0, 1.0 / (10.0 * n))
        nc = coversmod.build_net_cover(space, eps)
        bundle = extmod.build_extension_bundle(space, eps, nc, tol=tol)
        bound = extmod.perturbed_norm_bound(bundle.order_bound)
        stages.append(bapmod.BapStage(
            label=n, net=bundle.net, op=bundle.extend_op,
            metric=bundle.adapted, eps=1.0 / n))
    report = bapmod.bap_certificate(stages, space.dist, bound, envelope=envelope, tol=tol)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.format == "csv":
        path = out / f"bap-{seed}.csv"
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerows(report.table())
    else:
        path = out / f"bap-{seed}.json"
        _write_json(path, {
            "pipeline": "bap",
            "seed": seed,
            "rows": list(report.rows),
            "certificates": _cert_list(report.certificates),
        })
    for row in report.rows:
        print(f"n={row['n']}: |net|={row['net_size']} norm={row['norm']:.4g} "
              f"defect={row['defect']:.4g}")
    print(f"wrote {path}")
    return 0 if report.passed else 1


def cmd_perturb(args) -> int:
    cfg = _load_config(args)
    space = _space_from_config(cfg)
    seed = _require_seed(cfg)
    amplitude = float(cfg["amplitude"])
    count = int(cfg.get("count", 1))
    rng = np.random.default_rng(seed)
    for i in range(count):
        e = perturb_metric(space.dist, amplitude, rng)
        out = Path(args.out_dir) / f"perturb-{seed}-{i}.json"
        _write_json(out, {
            "points": list(space.points),
            "metric": _matrix(e),
            "base_point": space.base_index,
            "sup_distance": sup_distance(e, space.dist),
        })
        print(f"wrote {out}")
    return 0


def _iter_cert_dicts(obj):
    if isinstance(obj, dict):
        if {"kind", "claimed", "measured", "comparator"} <= set(obj):
            yield obj
        for v in obj.values():
            yield from _iter_cert_dicts(v)
    elif isinstance(obj, list):
        for v in obj:
            yield from _iter_cert_dicts(v)


def cmd_verify(args) -> int:
    with open(args.path) as fh:
        payload = json.load(fh)
    found = 0
    bad = 0
    for cert_dict in _iter_cert_dicts(payload):
        found += 1
        cert = certsmod.certificate_from_json(cert_dict)
        consistent = certsmod.verify_certificate(cert)
        status = "ok" if (consistent and cert.passed) else "FAIL"
        if status == "FAIL":
            bad += 1
        print(f"{cert.kind}: recorded {'pass' if cert.passed else 'fail'}, "
              f"re-evaluated {'consistent' if consistent else 'INCONSISTENT'}")
    if found == 0:
        print("no certificates found in file")
        return 1
    print(f"{found - bad}/{found} certificates pass")
    return 0 if bad == 0 else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lipfree",
        description="Certified extension-operator pipelines on finite metric spaces")
    parser.add_argument("--tol", type=float, default=DEFAULT_TOL,
                        help="global comparison slack")
    parser.add_argument("--seed", dest="seed_override", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--out-dir", default="out", help="report directory")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, needs_config in (
        ("build-cover", cmd_build_cover, True),
        ("extend", cmd_extend, True),
        ("glue", cmd_glue, True),
        ("bap", cmd_bap, True),
        ("perturb", cmd_perturb, True),
    ):
        p = sub.add_parser(name)
        p.add_argument("config")
        p.set_defaults(func=fn)
    pv = sub.add_parser("verify")
    pv.add_argument("path")
    pv.set_defaults(func=cmd_verify)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, gluemod.GluingError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
