"""Command-line front end: ``geoquant {synth,fit,encode,reconstruct,metric,eval}``.

Exit status is 0 on success, 2 on usage errors and 1 on computation errors.
Settings come from an optional ``--config`` file of ``section.key = value``
lines; command-line flags override it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import diagnostics, io, synth
from .kernels import kernel_from_dict
from .lloyd import FitConfig, encode_step, fit
from .manifold import DEFAULT_DELTA_RATIO, build_atlas, metric_matrix
from .nldr import (ReducedPoint, build_projector, default_distortion_bound,
                   pinsker_mismatch_bound, reconstruct, reduce)

DEFAULTS = {
    "fit.mu": 1.0,
    "fit.epsilon": 1e-4,
    "fit.max_iter": 200,
    "fit.seed": 0,
    "fit.cov_floor_ratio": 1e-6,
    "fit.init_scheme": "farthest_point",
    "atlas.delta_ratio": DEFAULT_DELTA_RATIO,
    "eval.mc_n": 20000,
    "eval.seed": 0,
    "eval.delta": 0.05,
}


class CommandError(Exception):
    pass


def _threads_default() -> int:
    try:
        return max(1, int(os.environ.get("GEOQUANT_THREADS", "1")))
    except ValueError:
        return 1


def _settings(args, flag_map: dict) -> dict:
    s = dict(DEFAULTS)
    if getattr(args, "config", None):
        s.update(io.read_config(args.config))
    for key, attr in flag_map.items():
        val = getattr(args, attr, None)
        if val is not None:
            s[key] = val
    return s


def _fit_config(s: dict, threads: int) -> FitConfig:
    kernel = None
    if "kernel.variant" in s:
        kd = {"variant": s["kernel.variant"]}
        kd.update({k.split(".", 1)[1]: v for k, v in s.items()
                   if k.startswith("kernel.") and k != "kernel.variant"})
        kernel = kernel_from_dict(kd)
    return FitConfig(
        m_init=s.get("fit.m_init"),
        mu=s["fit.mu"],
        kernel=kernel,
        epsilon=s["fit.epsilon"],
        max_iter=s["fit.max_iter"],
        seed=s["fit.seed"],
        cov_floor_ratio=s["fit.cov_floor_ratio"],
        init_scheme=s["fit.init_scheme"],
        threads=threads,
    )


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n",
                          encoding="utf-8", newline="\n")


def _model_k(model_k, requested) -> int:
    if requested is not None and model_k is not None and requested != model_k:
        raise CommandError(f"k mismatch: model was fitted with k={model_k}, requested k={requested}")
    k = requested if requested is not None else model_k
    if k is None:
        raise CommandError("model file has no k; pass --k")
    return int(k)


def cmd_synth(args) -> int:
    if args.fixture:
        spec = synth.builtin_fixture(args.fixture, args.fixture_seed)
    else:
        spec = io.load_embedding(args.spec)
    ds = synth.sample_embedding(spec, args.n_samples, args.seed)
    if args.latents:
        io.write_points(args.out, ds.points, ds.labels, ds.latents)
    else:
        io.write_points(args.out, ds.points)
    spec_out = args.spec_out or str(Path(args.out).with_suffix(".spec.json"))
    io.save_embedding(spec_out, spec)
    print(f"N={args.n_samples} n={spec.n} k={spec.k}")
    return 0


def cmd_fit(args) -> int:
    s = _settings(args, {
        "fit.m_init": "m_init", "fit.mu": "mu", "fit.epsilon": "epsilon",
        "fit.max_iter": "max_iter", "fit.seed": "seed", "fit.init_scheme": "init_scheme",
        "fit.k": "k", "kernel.variant": "kernel", "kernel.sigma": "sigma",
        "kernel.r1": "r1", "kernel.r2": "r2",
    })
    X = io.read_points(args.data)
    rep = fit(X, _fit_config(s, args.threads))
    cb = rep.final_codebook
    meta = {
        "iterations": rep.iterations,
        "final_distortion": rep.distortion_trace[-1],
        "seed": rep.config.seed,
        "n_samples": int(X.shape[0]),
    }
    io.save_model(args.out, cb, s.get("fit.k"), meta)
    if args.report:
        cfg = asdict(rep.config)
        cfg["kernel"] = io.kernel_to_dict(rep.config.kernel)
        _write_json(args.report, {
            "config": cfg,
            "initial_distortion": rep.initial_distortion,
            "distortion_trace": rep.distortion_trace,
            "iterations": rep.iterations,
            "converged": rep.converged,
            "counts": [int(c) for c in rep.counts],
            "removed_cells": rep.removed_cells,
            "n_components": len(cb),
        })
    print(f"components={len(cb)} iterations={rep.iterations} distortion={rep.distortion_trace[-1]!r}")
    return 0


def cmd_encode(args) -> int:
    cb, model_k, _ = io.load_model(args.model)
    k = _model_k(model_k, args.k)
    X = io.read_points(args.data)
    proj = build_projector(cb, k)
    red = reduce(cb, proj, X, threads=args.threads)
    io.write_reduced(args.out, red.chart, red.coords)
    return 0


def cmd_reconstruct(args) -> int:
    cb, model_k, _ = io.load_model(args.model)
    charts, coords = io.read_reduced(args.reduced)
    k = _model_k(model_k, coords.shape[1])
    if np.any(charts < 0) or np.any(charts >= len(cb)):
        raise CommandError("chart index out of range for this model")
    proj = build_projector(cb, k)
    rec = reconstruct(proj, ReducedPoint(charts, coords))
    io.write_points(args.out, rec)
    if args.data:
        X = io.read_points(args.data)
        if X.shape != rec.shape:
            raise CommandError("original data does not match the reduced data")
        dbar = float(np.mean(np.sum((X - rec) ** 2, axis=1)))
        print(f"dbar={dbar!r}")
    return 0


def cmd_metric(args) -> int:
    s = _settings(args, {"atlas.delta_ratio": "delta_ratio"})
    cb, model_k, _ = io.load_model(args.model)
    charts, coords = io.read_reduced(args.reduced)
    k = _model_k(model_k, coords.shape[1])
    atlas = build_atlas(cb, k, s["atlas.delta_ratio"])
    forms, flags = [], []
    for m, y in zip(charts, coords):
        if not 0 <= m < len(cb):
            raise CommandError(f"chart index {m} out of range for this model")
        mv = metric_matrix(atlas, y, ref=int(m))
        forms.append(mv.form.reshape(-1))
        flags.append(int(mv.defined))
    forms = np.array(forms).reshape(len(flags), k * k)
    header = ["chart"] + [f"g{i + 1}_{j + 1}" for i in range(k) for j in range(k)] + ["defined"]
    io.write_csv(args.out, header, [charts] + [forms[:, c] for c in range(k * k)] + [np.array(flags)])
    return 0


def _fstar(path):
    kind = io.file_kind(path)
    if kind == "embedding":
        spec = io.load_embedding(path)
        return spec.log_density, spec.sample
    if kind == "codebook":
        cb, _, _ = io.load_model(path)
        return cb.mixture_log_density, diagnostics.mixture_sampler(cb)
    raise CommandError(f"{path}: not an embedding or codebook file")


def cmd_eval(args) -> int:
    s = _settings(args, {
        "eval.mc_n": "mc_n", "eval.seed": "seed", "eval.h": "h", "eval.M": "M",
        "eval.delta": "delta", "eval.A": "A", "eval.n_train": "n_train",
    })
    cb, model_k, meta = io.load_model(args.model)
    logf, draw = _fstar(args.fstar)
    N = s.get("eval.n_train") or meta.get("n_samples")
    if not N:
        raise CommandError("training-set size unknown; pass --n-train")
    mc_n, seed = s["eval.mc_n"], s["eval.seed"]
    res = diagnostics.resolvability(cb, logf, draw, int(N), mc_n, seed)
    mix = diagnostics.mc_kl(logf, draw, cb.mixture_log_density, mc_n, seed)
    out = {
        "n_components": len(cb),
        "N": int(N),
        "mu": cb.mu,
        "components": [
            {"kl": float(d), "kl_se": float(e), "L": float(L), "phi": float(p), "term": float(t)}
            for d, e, L, p, t in zip(res.divergences, res.std_errors, res.complexities,
                                     cb.cache.phi, res.terms)
        ],
        "r_index": res.r_index,
        "argmin": res.argmin,
        "mixture_kl": {"value": mix.value, "std_error": mix.std_error, "n_samples": mix.n_samples},
    }
    if s.get("eval.h") is not None and s.get("eval.M") is not None:
        try:
            pb, eb = diagnostics.theorem1_bound(res.r_index, len(cb), cb.mu, s["eval.h"],
                                                s["eval.M"], int(N), s["eval.delta"])
            out["bounds"] = {"prob_bound": pb, "exp_bound": eb, "delta": s["eval.delta"]}
        except ValueError as exc:
            out["bounds"] = {"error": str(exc)}
    out["moment_advisory"] = {
        k: (v.tolist() if isinstance(v, np.ndarray) else v)
        for k, v in diagnostics.moment_advisory(cb, logf, draw, mc_n, seed).items()
    }
    if args.data:
        X = io.read_points(args.data)
        a, _ = encode_step(cb, X)
        ib = diagnostics.ibar_estimate(cb, a, logf, X)
        out["ibar"] = {"value": ib.value, "std_error": ib.std_error}
        phi_avg = float(np.sum(np.bincount(a, minlength=len(cb)) / len(X) * cb.cache.phi))
        A = s.get("eval.A") or default_distortion_bound(X)
        try:
            out["pinsker_bound"] = pinsker_mismatch_bound(ib.value, phi_avg, cb.mu, A)
        except ValueError as exc:
            out["pinsker_bound"] = {"error": str(exc)}
    if args.sweep:
        if io.file_kind(args.fstar) != "embedding":
            raise CommandError("--sweep needs an embedding spec as --fstar")
        grid = [int(v) for v in args.sweep.split(",")]
        sweep_cfg = FitConfig(mu=cb.mu, kernel=cb.kernel)
        rows = diagnostics.consistency_sweep(sweep_cfg, io.load_embedding(args.fstar), grid,
                                             range(args.sweep_seeds), mc_n, seed)
        out["sweep"] = [
            {"N": r.N, "m_init": r.m_init, "median_kl": r.median_kl, "kl": r.kl,
             "sizes": r.sizes, "r_index": r.r_index, "max_L": r.max_L,
             "m_init_over_N": r.m_init_ratio, "max_L_over_N": r.max_L_ratio}
            for r in rows
        ]
    _write_json(args.out, out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geoquant", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, threads=False):
        sp.add_argument("--config", help="key = value settings file")
        if threads:
            sp.add_argument("--threads", type=int, default=_threads_default(),
                            help="worker threads (default: $GEOQUANT_THREADS or 1)")

    sp = sub.add_parser("synth", help="sample a synthetic chart-embedding dataset")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--fixture", choices=sorted(synth.FIXTURES))
    src.add_argument("--spec", help="embedding spec JSON file")
    sp.add_argument("--fixture-seed", type=int, default=0)
    sp.add_argument("--n-samples", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--spec-out", help="where to write the spec (default: OUT with .spec.json)")
    sp.add_argument("--latents", action="store_true", help="append chart label and latent columns")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("fit", help="fit a codebook by Lloyd descent")
    common(sp, threads=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True, help="model file")
    sp.add_argument("--report", help="fit report JSON")
    sp.add_argument("--k", type=int, help="intrinsic dimension stored with the model")
    sp.add_argument("--m-init", type=int)
    sp.add_argument("--mu", type=float)
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--max-iter", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--init-scheme", choices=["farthest_point", "random_subset"])
    sp.add_argument("--kernel", choices=["gaussian", "inverse_distance", "bump"])
    sp.add_argument("--sigma", type=float)
    sp.add_argument("--r1", type=float)
    sp.add_argument("--r2", type=float)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("encode", help="reduce data to (chart, coordinates)")
    common(sp, threads=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--k", type=int)
    sp.set_defaults(func=cmd_encode)

    sp = sub.add_parser("reconstruct", help="map reduced data back to n dimensions")
    common(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--reduced", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--data", help="original data; prints the mean squared reconstruction error")
    sp.set_defaults(func=cmd_reconstruct)

    sp = sub.add_parser("metric", help="evaluate the Riemannian metric at reduced points")
    common(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--reduced", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--delta-ratio", type=float)
    sp.set_defaults(func=cmd_metric)

    sp = sub.add_parser("eval", help="known-density diagnostics report")
    common(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--fstar", required=True, help="true density: embedding spec or model file")
    sp.add_argument("--out", required=True)
    sp.add_argument("--data", help="training data for the partition objective estimate")
    sp.add_argument("--n-train", type=int)
    sp.add_argument("--mc-n", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--h", type=float)
    sp.add_argument("--M", type=float)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--A", type=float, help="squared-error bound (default: squared data diameter)")
    sp.add_argument("--sweep", help="comma-separated N grid for a consistency sweep")
    sp.add_argument("--sweep-seeds", type=int, default=5)
    sp.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CommandError, ValueError, OSError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"geoquant {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
