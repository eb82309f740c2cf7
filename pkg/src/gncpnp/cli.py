"""Command-line entry point: solve, synth-bench, sweep, weights."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace

from .core import GncConfig
from .errors import PoseError
from .geom_weight import VoxelGridConfig, compute_weights
from .harness import MODES, ExperimentSpec, emit_sweep, run_experiment, solve
from .io import load_correspondences, pose_to_json
from .pnp import SOLVERS, RansacConfig
from .synth import ClusterSpec, SceneConfig


def _add_gnc_flags(p: argparse.ArgumentParser) -> None:
    d = GncConfig()
    g = p.add_argument_group("gnc")
    g.add_argument("--kappa", type=float, default=d.kappa)
    g.add_argument("--epsilon", type=float, default=d.epsilon)
    g.add_argument("--gamma", type=float, default=d.gamma)
    g.add_argument("--mu-final", type=float, default=d.mu_final)
    g.add_argument("--tau-gnc", type=float, default=d.tau_gnc)
    g.add_argument("--tau-geom", type=float, default=d.tau_geom)
    g.add_argument("--min-inliers", type=int, default=d.min_inliers)
    g.add_argument("--max-iterations", type=int, default=d.max_iterations, help="outer GNC iterations")

    r = RansacConfig()
    g = p.add_argument_group("ransac")
    g.add_argument("--ransac-max-iterations", type=int, default=r.max_iterations)
    g.add_argument("--inlier-threshold", type=float, default=r.inlier_threshold, help="unsquared pixels")
    g.add_argument("--solver", choices=sorted(SOLVERS), default=r.solver)
    g.add_argument("--confidence", type=float, default=r.confidence)

    v = VoxelGridConfig()
    g = p.add_argument_group("geometry weights")
    g.add_argument("--voxel-size", type=float, default=v.voxel_size)
    g.add_argument("--w-min", type=float, default=v.w_min)


def _add_scene_flags(p: argparse.ArgumentParser) -> None:
    d = SceneConfig()
    g = p.add_argument_group("synthetic scene")
    g.add_argument("--n-points", type=int, default=d.n_points)
    g.add_argument("--box-extent", type=float, default=d.box_extent)
    g.add_argument("--depth-range", type=float, nargs=2, default=list(d.depth_range), metavar=("NEAR", "FAR"))
    g.add_argument("--pixel-noise-sigma", type=float, default=d.pixel_noise_sigma)
    g.add_argument("--outlier-fraction", type=float, default=d.outlier_fraction)
    g.add_argument("--outlier-model", choices=["uniform-pixel", "wrong-association"], default=d.outlier_model)
    g.add_argument("--outlier-target", choices=["any", "background"], default=d.outlier_target)
    g.add_argument("--outlier-pairing", choices=["random", "nearest"], default=d.outlier_pairing)
    g.add_argument("--n-clusters", type=int, default=0, help="0 disables clustered structure")
    g.add_argument("--cluster-radius", type=float, default=0.01)
    g.add_argument("--background-fraction", type=float, default=0.1)
    g.add_argument(
        "--model",
        dest="model_path",
        help="ASCII PLY or CSV vertices: the point source for synthetic scenes, the ADD model for --input files",
    )


def _add_experiment_flags(p: argparse.ArgumentParser, sweep: bool = False) -> None:
    if sweep:
        p.add_argument("--modes", nargs="+", choices=MODES, default=["full"])
        p.add_argument("--outlier-fractions", type=float, nargs="+", required=True)
    else:
        p.add_argument("--mode", choices=MODES, default="full")
        p.add_argument("--input", nargs="+", dest="input_paths", default=[], help="correspondence JSON files instead of synthetic scenes")
        p.add_argument("--use-file-weights", action="store_true", help="take geometry weights from the input files")
        p.add_argument("--timing", action="store_true", help="add a wall_time_ms column (not reproducible)")
    p.add_argument("--trials", type=int, default=None, help="default: 1, or the number of --input files")
    p.add_argument("--base-seed", type=int, default=0)
    p.add_argument("--output", dest="output_path", required=True)
    p.add_argument("--strict", action="store_true", help="exit 1 if any trial fails")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gncpnp", description="Robust PnP with graduated non-convexity.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="estimate a pose from a correspondence file")
    p.add_argument("input")
    p.add_argument("--mode", choices=MODES, default="full")
    p.add_argument("--use-file-weights", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    _add_gnc_flags(p)

    p = sub.add_parser("synth-bench", help="run one ablation arm over seeded trials")
    _add_experiment_flags(p)
    _add_scene_flags(p)
    _add_gnc_flags(p)

    p = sub.add_parser("sweep", help="summary rows over an outlier-fraction grid")
    _add_experiment_flags(p, sweep=True)
    _add_scene_flags(p)
    _add_gnc_flags(p)

    p = sub.add_parser("weights", help="dump voxel geometry weights for a correspondence file")
    p.add_argument("input")
    p.add_argument("--voxel-size", type=float, default=VoxelGridConfig().voxel_size)
    p.add_argument("--w-min", type=float, default=VoxelGridConfig().w_min)
    return parser


def _configs(args):
    gnc = GncConfig(
        kappa=args.kappa,
        epsilon=args.epsilon,
        gamma=args.gamma,
        mu_final=args.mu_final,
        tau_gnc=args.tau_gnc,
        tau_geom=args.tau_geom,
        min_inliers=args.min_inliers,
        max_iterations=args.max_iterations,
    )
    ransac = RansacConfig(
        max_iterations=args.ransac_max_iterations,
        inlier_threshold=args.inlier_threshold,
        solver=args.solver,
        confidence=args.confidence,
    )
    voxel = VoxelGridConfig(voxel_size=args.voxel_size, w_min=args.w_min)
    return gnc, ransac, voxel


def _scene(args) -> SceneConfig:
    kw = {}
    if args.model_path and not getattr(args, "input_paths", None):
        from .io import load_model_points

        kw = {"point_source": "loaded-model", "model_vertices": tuple(map(tuple, load_model_points(args.model_path).vertices))}
    cluster = ClusterSpec(args.n_clusters, args.cluster_radius, args.background_fraction) if args.n_clusters > 0 else None
    return SceneConfig(
        n_points=args.n_points,
        box_extent=args.box_extent,
        depth_range=tuple(args.depth_range),
        pixel_noise_sigma=args.pixel_noise_sigma,
        outlier_fraction=args.outlier_fraction,
        outlier_model=args.outlier_model,
        outlier_target=args.outlier_target,
        outlier_pairing=args.outlier_pairing,
        cluster_spec=cluster,
        min_inliers=args.min_inliers,
        **kw,
    )


def _spec(args, **extra) -> ExperimentSpec:
    gnc, ransac, voxel = _configs(args)
    inputs = tuple(getattr(args, "input_paths", ()) or ())
    return ExperimentSpec(
        mode=getattr(args, "mode", "full"),
        scene=None if inputs else _scene(args),
        input_paths=inputs,
        model_path=args.model_path if inputs else None,
        trials=args.trials if args.trials is not None else max(len(inputs), 1),
        base_seed=args.base_seed,
        output_path=args.output_path,
        gnc=gnc,
        ransac=ransac,
        voxel=voxel,
        use_file_weights=getattr(args, "use_file_weights", False),
        timing=getattr(args, "timing", False),
        **extra,
    )


def cmd_solve(args) -> int:
    k, c = load_correspondences(args.input)
    gnc, ransac, voxel = _configs(args)
    spec = ExperimentSpec(mode=args.mode, scene=None, input_paths=(args.input,), gnc=gnc, ransac=ransac, voxel=voxel, use_file_weights=args.use_file_weights)
    est = solve(args.mode, k, c, spec, args.seed)
    print(pose_to_json(est.pose))
    return 0


def cmd_bench(args) -> int:
    results, _ = run_experiment(_spec(args))
    failures = sum(not r.ok for r in results)
    if failures:
        logging.getLogger("gncpnp").warning("%d of %d trials failed", failures, len(results))
    return 1 if args.strict and failures else 0


def cmd_sweep(args) -> int:
    spec = _spec(args)
    rows = emit_sweep(replace(spec, output_path=None), args.outlier_fractions, args.modes, output_path=args.output_path)
    failures = sum(int(r["failures"]) for r in rows)
    return 1 if args.strict and failures else 0


def cmd_weights(args) -> int:
    _, c = load_correspondences(args.input)
    w = compute_weights(c.points, VoxelGridConfig(voxel_size=args.voxel_size, w_min=args.w_min))
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["index", "support", "weight"])
    for i, (s, v) in enumerate(zip(w.support, w.weight)):
        out.writerow([i, int(s), repr(float(v))])
    return 0


COMMANDS = {"solve": cmd_solve, "synth-bench": cmd_bench, "sweep": cmd_sweep, "weights": cmd_weights}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (PoseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
