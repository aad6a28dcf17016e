"""Command-line front end: every experiment as a subcommand writing CSV,
JSON, PGM, and FWSQ artifacts plus a manifest into one run directory.

Config precedence (highest wins): command-line flags, then the --config
JSON file, then the profile defaults (--profile paper|desk).  Failures
print a one-line machine-readable error JSON and exit nonzero.  No
subcommand writes outside --out.

Frozen CSV column orders:
    loss.csv        step,loss,grad_norm,lr
    rollout.csv     sequence,step,ssim,mse
    phase.csv       D,dt,growth_rate,regime
    energy.csv      step,energy
    symmetry.csv    step,symmetry_index,entropy,cluster_count
    resilience.csv  mode,ratio,residual_mse,recovery_steps
    scaling.csv     tokens,attention_ops,diffusion_ops,ratio
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import pathlib
import sys
import time

import numpy as np

from . import belief, config, datagen, dynamics, model as model_mod, parallel, training
from .analysis import experiments, rollout as rollout_fn, recovery_stats, fit_exp_null


class _JsonArgParser(argparse.ArgumentParser):
    """argparse that reports usage errors as machine-readable JSON."""

    def error(self, message):
        print(json.dumps({"error": "UsageError", "message": message}))
        raise SystemExit(2)


# ---------------------------------------------------------------------------
# shared plumbing


def _out_dir(args) -> pathlib.Path:
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sha256(path: pathlib.Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_csv(path: pathlib.Path, columns, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(columns)
        w.writerows(rows)


def _write_manifest(out: pathlib.Path, command: str, seed, cfg, names) -> None:
    manifest = {
        "command": command,
        "seed": seed,
        "config": cfg,
        "artifacts": {name: _sha256(out / name) for name in sorted(names)},
        "created_unix": time.time(),
    }
    with open(out / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _load_cfg(args, flag_overrides=None) -> dict:
    return config.load_config(
        getattr(args, "config", None),
        profile=getattr(args, "profile", "desk"),
        overrides=flag_overrides,
    )


def _normalized_pgm(out: pathlib.Path, name: str, image: np.ndarray) -> None:
    """Min-max normalize one 2-D image into [0,1] and write it as PGM."""
    img = np.asarray(image, dtype=np.float64)
    finite = img[np.isfinite(img)]
    lo = finite.min() if finite.size else 0.0
    hi = finite.max() if finite.size else 1.0
    span = hi - lo if hi > lo else 1.0
    img = np.clip((img - lo) / span, 0.0, 1.0)
    img[~np.isfinite(image)] = np.where(np.asarray(image)[~np.isfinite(image)] > 0, 1.0, 0.0)
    datagen.write_pgm(out / name, img)


def _scene_from(cfg: dict, n_frames: int, seed: int) -> datagen.SceneConfig:
    d = cfg["data"]
    return datagen.SceneConfig(
        width=d["width"],
        height=d["height"],
        n_objects=d["n_objects"],
        object_radius=d["object_radius"],
        speed=d["speed"],
        n_frames=n_frames,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> None:
    overrides = {}
    if args.steps is not None:
        overrides["training"] = {"steps": args.steps}
    cfg = _load_cfg(args, overrides)
    out = _out_dir(args)

    rng = np.random.default_rng(args.seed)
    mdl = config.model_from_config(cfg, rng)
    vec, _ = model_mod.flatten(mdl)
    optim = config.optim_from_config(cfg, vec.size)
    weights = config.weights_from_config(cfg)
    bio_cfg = config.bio_from_config(cfg)
    batch = cfg["training"]["batch_size"]
    t_window = cfg["training"]["bptt_window"]

    rows = []
    for k in range(cfg["training"]["steps"]):
        frames = np.stack(
            [
                datagen.generate_sequence(
                    _scene_from(cfg, t_window + 1, args.seed + k * batch + b)
                )
                for b in range(batch)
            ]
        )
        states = [
            config.fresh_state_from_config(cfg, mdl, frames.shape[2:])
            for _ in range(batch)
        ]
        mdl, optim, _, mets = training.train_batch(
            mdl, frames, optim, states=states, weights=weights, bio_cfg=bio_cfg
        )
        rows.append((mets["step"], mets["loss"], mets["grad_norm"], mets["lr"]))

    training.save_checkpoint(
        out / "model.fwck", mdl, optim, metadata={"config": cfg, "seed": args.seed}
    )
    _write_csv(out / "loss.csv", ("step", "loss", "grad_norm", "lr"), rows)
    _write_manifest(out, "train", args.seed, cfg, ["model.fwck", "loss.csv"])


def _load_checkpoint_with_config(path):
    meta = training.peek_metadata(path)
    cfg = config.validate_config(meta.get("config", {}))
    template = config.model_from_config(cfg, np.random.default_rng(0))
    mdl, optim, _ = training.load_checkpoint(path, template)
    return mdl, optim, cfg


def cmd_rollout(args) -> None:
    mdl, _, cfg = _load_checkpoint_with_config(args.checkpoint)
    out = _out_dir(args)
    bio_cfg = config.bio_from_config(cfg)

    def cell_fn(_s, scene_seed):
        seq = datagen.generate_sequence(_scene_from(cfg, args.horizon + 1, scene_seed))
        state = config.fresh_state_from_config(cfg, mdl, seq[0].shape)
        return rollout_fn(
            mdl, seq[0], args.horizon, truth=seq[1:], bio_cfg=bio_cfg, state=state
        )

    traces = parallel.run_cells(cell_fn, range(args.n_sequences), base_seed=args.seed)

    rows = []
    names = []
    for s, trace in enumerate(traces):
        for t, frame in enumerate(trace.frames):
            name = "pred_s%02d_t%02d.pgm" % (s, t)
            datagen.write_pgm(out / name, frame)
            names.append(name)
            rows.append(
                (s, t, trace.ssim_per_step[t], trace.mse_per_step[t])
            )
    _write_csv(out / "rollout.csv", ("sequence", "step", "ssim", "mse"), rows)
    names.append("rollout.csv")
    _write_manifest(out, "rollout", args.seed, cfg, names)


def cmd_recovery(args) -> None:
    out = _out_dir(args)
    curves = {}
    with open(args.rollout_csv, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or "ssim" not in reader.fieldnames:
            raise ValueError("rollout CSV lacks an ssim column")
        for row in reader:
            curves.setdefault(int(row["sequence"]), []).append(float(row["ssim"]))
    if not curves:
        raise ValueError("rollout CSV holds no rows")

    ordered = [curves[k] for k in sorted(curves)]
    report = recovery_stats(ordered)
    mean_curve = np.mean(np.asarray(ordered, dtype=np.float64), axis=0)
    try:
        a, b, null_curve = fit_exp_null(mean_curve)
        report["null_model"] = {"a": a, "b": b, "curve": [float(v) for v in null_curve]}
    except ValueError as e:
        report["null_model"] = {"error": str(e)}
    with open(out / "recovery.json", "w") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    _write_manifest(out, "recovery", args.seed, {}, ["recovery.json"])


def cmd_phase(args) -> None:
    out = _out_dir(args)
    d_values = np.linspace(args.d_min, args.d_max, args.grid)
    dt_values = np.linspace(args.dt_min, args.dt_max, args.grid)
    points = experiments.phase_sweep(d_values, dt_values, steps=args.steps, seed=args.seed)
    rows = [(p.D, p.dt, p.growth_rate, p.regime) for p in points]
    _write_csv(out / "phase.csv", ("D", "dt", "growth_rate", "regime"), rows)
    heat = np.array([p.growth_rate for p in points]).reshape(args.grid, args.grid)
    _normalized_pgm(out, "phase.pgm", heat)
    cfg = {
        "d_min": args.d_min, "d_max": args.d_max,
        "dt_min": args.dt_min, "dt_max": args.dt_max,
        "grid": args.grid, "steps": args.steps,
    }
    _write_manifest(out, "phase", args.seed, cfg, ["phase.csv", "phase.pgm"])


def cmd_energy(args) -> None:
    out = _out_dir(args)
    params = experiments.random_reaction_params(
        8, args.seed, diffusion=0.1, dt=0.35, gain=1.0
    )
    traj = experiments.energy_experiment(
        args.init, params, args.steps, norm_enabled=(args.norm == "on")
    )
    _write_csv(out / "energy.csv", ("step", "energy"), list(enumerate(traj)))
    cfg = {"init": args.init, "norm": args.norm, "steps": args.steps}
    _write_manifest(out, "energy", args.seed, cfg, ["energy.csv"])


def cmd_symmetry(args) -> None:
    out = _out_dir(args)
    records, fields = experiments.symmetry_experiment(
        epsilon=args.epsilon, steps=args.steps, seed=args.seed, return_fields=True
    )
    rows = [
        (r.step, r.symmetry_index, r.entropy, r.cluster_count) for r in records
    ]
    _write_csv(
        out / "symmetry.csv",
        ("step", "symmetry_index", "entropy", "cluster_count"),
        rows,
    )
    names = ["symmetry.csv"]
    for t, u in enumerate(fields):
        name = "field_t%02d.pgm" % t
        _normalized_pgm(out, name, u.mean(axis=0))
        names.append(name)
    cfg = {"epsilon": args.epsilon, "steps": args.steps}
    _write_manifest(out, "symmetry", args.seed, cfg, names)


def _testbed_belief_params(d: int = 8) -> belief.BeliefParams:
    """Pure-diffusion belief evolve: the self-repair reference dynamics."""
    return belief.BeliefParams(
        write_gate=np.zeros((d, d)),
        write_val=np.zeros((d, d)),
        gamma_logit=np.asarray(np.log(0.95)),
        evolve_params=dynamics.pure_diffusion_params(d, diffusion=0.2, dt=0.2),
        n_evolve=3,
        norm_every=0,
    )


def cmd_resilience(args) -> None:
    out = _out_dir(args)
    modes = tuple(m.strip() for m in args.modes.split(",") if m.strip())
    for m in modes:
        if m not in belief.CORRUPT_MODES:
            raise ValueError(
                "unknown corruption mode %r (choose from %s)"
                % (m, ", ".join(belief.CORRUPT_MODES))
            )
    ratios = tuple(float(r) for r in args.ratios.split(","))
    rows = experiments.resilience_sweep(
        _testbed_belief_params(), modes=modes, ratios=ratios,
        steps=args.steps, seed=args.seed,
    )
    _write_csv(
        out / "resilience.csv",
        ("mode", "ratio", "residual_mse", "recovery_steps"),
        [(r["mode"], r["ratio"], r["residual_mse"], r["recovery_steps"]) for r in rows],
    )
    cfg = {"modes": list(modes), "ratios": list(ratios), "steps": args.steps}
    _write_manifest(out, "resilience", args.seed, cfg, ["resilience.csv"])


def cmd_scaling(args) -> None:
    out = _out_dir(args)
    tokens = [int(t) for t in args.tokens.split(",")]
    rows = experiments.op_count_scaling(tokens)
    _write_csv(
        out / "scaling.csv",
        ("tokens", "attention_ops", "diffusion_ops", "ratio"),
        [(r["tokens"], r["attention_ops"], r["diffusion_ops"], r["ratio"]) for r in rows],
    )
    _write_manifest(out, "scaling", args.seed, {"tokens": tokens}, ["scaling.csv"])


def cmd_gradcheck(args) -> None:
    cfg = _load_cfg(args)
    out = _out_dir(args)
    rng = np.random.default_rng(args.seed)
    mdl = config.model_from_config(cfg, rng)
    frames = rng.random(
        (3, cfg["model"]["in_channels"], cfg["data"]["height"], cfg["data"]["width"])
    )
    report = training.check_gradients(
        mdl,
        frames,
        n_random=args.samples,
        seed=args.seed,
        weights=config.weights_from_config(cfg),
        bio_cfg=config.bio_from_config(cfg),
    )
    doc = {
        "status": "pass" if report["passed"] else "fail",
        "max_rel_err": float(report["max_rel_err"]),
        "samples": int(args.samples),
        "rows": [
            {
                "index": int(r["index"]),
                "path": r["path"],
                "analytic": float(r["analytic"]),
                "numeric": float(r["numeric"]),
                "rel_err": float(r["rel_err"]),
            }
            for r in report["rows"]
        ],
    }
    with open(out / "gradcheck.json", "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
    _write_manifest(out, "gradcheck", args.seed, cfg, ["gradcheck.json"])


def cmd_gen_data(args) -> None:
    out = _out_dir(args)
    allowed = {f.name for f in datagen.SceneConfig.__dataclass_fields__.values()}
    doc = {}
    if args.scene is not None:
        with open(args.scene) as f:
            doc = json.load(f)
        for key in doc:
            if key not in allowed:
                raise config.ConfigError("unknown scene key: %s" % key)
    doc.setdefault("seed", args.seed)
    scene = datagen.SceneConfig(**doc)
    seq = datagen.generate_sequence(scene)
    datagen.write_sequence(out / "sequence.fwsq", seq)
    _write_manifest(
        out, "gen-data", args.seed, dict(doc), ["sequence.fwsq"]
    )


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _JsonArgParser(prog="fluidlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_flags=True):
        p.add_argument("--out", required=True, help="run directory")
        p.add_argument("--seed", type=int, default=0)
        if config_flags:
            p.add_argument("--config", default=None, help="JSON config file")
            p.add_argument("--profile", default="desk", choices=("paper", "desk"))

    p = sub.add_parser("train", help="train on bouncing-disc sequences")
    common(p)
    p.add_argument("--steps", type=int, default=None, help="override optimizer steps")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("rollout", help="autoregressive rollout from a checkpoint")
    common(p, config_flags=False)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--horizon", type=int, default=20)
    p.add_argument("--n-sequences", type=int, default=1)
    p.set_defaults(fn=cmd_rollout)

    p = sub.add_parser("recovery", help="recovery statistics from a rollout CSV")
    common(p, config_flags=False)
    p.add_argument("--rollout-csv", required=True)
    p.set_defaults(fn=cmd_recovery)

    p = sub.add_parser("phase", help="growth-rate phase diagram")
    common(p, config_flags=False)
    p.add_argument("--d-min", type=float, default=0.01)
    p.add_argument("--d-max", type=float, default=1.0)
    p.add_argument("--dt-min", type=float, default=0.01)
    p.add_argument("--dt-max", type=float, default=0.35)
    p.add_argument("--grid", type=int, default=15)
    p.add_argument("--steps", type=int, default=40)
    p.set_defaults(fn=cmd_phase)

    p = sub.add_parser("energy", help="energy trajectory for one init")
    common(p, config_flags=False)
    p.add_argument("--init", default="random", choices=("uniform", "random", "gradient"))
    p.add_argument("--norm", default="on", choices=("on", "off"))
    p.add_argument("--steps", type=int, default=200)
    p.set_defaults(fn=cmd_energy)

    p = sub.add_parser("symmetry", help="symmetry-breaking trajectory")
    common(p, config_flags=False)
    p.add_argument("--epsilon", type=float, default=1e-4)
    p.add_argument("--steps", type=int, default=20)
    p.set_defaults(fn=cmd_symmetry)

    p = sub.add_parser("resilience", help="corruption recovery sweep")
    common(p, config_flags=False)
    p.add_argument("--modes", default=",".join(belief.CORRUPT_MODES))
    p.add_argument(
        "--ratios", default=",".join("%.1f" % r for r in np.arange(0.1, 1.0, 0.1))
    )
    p.add_argument("--steps", type=int, default=20)
    p.set_defaults(fn=cmd_resilience)

    p = sub.add_parser("scaling", help="attention-vs-diffusion op counts")
    common(p, config_flags=False)
    p.add_argument("--tokens", default="256,1024,4096,16384")
    p.set_defaults(fn=cmd_scaling)

    p = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    common(p)
    p.add_argument("--samples", type=int, default=100)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("gen-data", help="write a disc sequence as FWSQ")
    common(p, config_flags=False)
    p.add_argument("--scene", default=None, help="JSON file with scene fields")
    p.set_defaults(fn=cmd_gen_data)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        args.fn(args)
    except Exception as e:  # noqa: BLE001 - the CLI boundary reports, not raises
        print(json.dumps({"error": type(e).__name__, "message": str(e)}))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
