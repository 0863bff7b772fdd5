"""Command-line entry points binding the modules into reproducible runs.

Exit codes: 0 success, 2 usage error, 1 runtime error. Every source of
randomness sits behind an explicit --seed, and all structured output goes
through the canonical JSON writer, so identical invocations produce
byte-identical files. MESHTRI_THREADS caps the worker count of multi-seed
pipeline fan-out.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .body import load_model, make_toy_model, regress_joints, save_model
from .camera import load_calib, make_cuboid, save_calib
from .errors import MeshtriError
from .fitting import FitConfig, fit
from .meshops import SubsamplingOperator, TriMesh, decimate, subsample_visibility
from .metrics import ANGULAR_JOINT_NAMES, full_report, joint_rotation_set
from .objio import export_obj, import_obj
from .rotations import rot6d_to_matrix
from .scene import (
    PipelineConfig,
    SceneConfig,
    gen_scene,
    render_scene_heatmaps,
    run_pipeline,
)
from .serial import dump_json, load_json, save_volume, load_volume
from .visibility import visibility, visibility_bruteforce
from .volumetric import Heatmap3D, format_memory_report, heatmap_normalize, soft_argmax


def _add_fit_config_args(p: argparse.ArgumentParser):
    p.add_argument("--lr", type=float, default=6e-2, help="fitting learning rate")
    p.add_argument("--iterations", type=int, default=500)
    p.add_argument("--lambda-w", type=float, default=6e-2)
    p.add_argument("--lambda-z", type=float, default=2e-6)
    p.add_argument("--lambda-beta", type=float, default=5e-6)
    p.add_argument("--lambda-alpha", type=float, default=5e-5)
    p.add_argument("--data-term", choices=["vertices", "joints"], default="vertices")


def _fit_config_from_args(args) -> FitConfig:
    return FitConfig(
        learning_rate=args.lr,
        iterations=args.iterations,
        lambda_w=args.lambda_w,
        lambda_z=args.lambda_z,
        lambda_beta=args.lambda_beta,
        lambda_alpha=args.lambda_alpha,
        seed=getattr(args, "seed", 0),
        data_term=args.data_term,
    )


def _scene_config_from_args(args) -> SceneConfig:
    return SceneConfig(
        views=args.views,
        sub_vertices=args.sub,
        grid_resolution=args.res,
        pose_magnitude=args.pose_magnitude,
        shape_magnitude=args.shape_magnitude,
        camera_radius=args.camera_radius,
        model_seed=args.model_seed,
        vertex_budget=args.budget,
    )


def _add_scene_args(p: argparse.ArgumentParser):
    p.add_argument("--views", type=int, default=4)
    p.add_argument("--sub", type=int, default=108, help="number of sub-vertices")
    p.add_argument("--res", type=int, default=64, choices=[16, 32, 64], dest="res",
                   help="heatmap resolution per axis")
    p.add_argument("--pose-magnitude", type=float, default=0.35)
    p.add_argument("--shape-magnitude", type=float, default=1.0)
    p.add_argument("--camera-radius", type=float, default=4.0)
    p.add_argument("--model-seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=600, help="toy model vertex budget")


def cmd_model_make_toy(args) -> int:
    model = make_toy_model(args.seed, args.budget)
    save_model(model, args.out)
    print(f"wrote {args.out} ({model.num_vertices} vertices, {model.faces.shape[0]} faces)")
    return 0


def _scene_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen_scene(args) -> int:
    cfg = _scene_config_from_args(args)
    scene = gen_scene(args.seed, cfg)
    out = _scene_dir(args)
    save_model(scene.model, out / "model.body")
    (out / "cameras").mkdir(exist_ok=True)
    for i, cam in enumerate(scene.cameras):
        save_calib(cam, out / "cameras" / f"cam{i:02d}.json")
    dump_json(scene.grid.to_dict(), out / "grid.json")
    dump_json(scene.subop.to_dict(), out / "subop.json")
    dump_json(
        {
            "seed": scene.seed,
            "params": scene.gt_params.to_dict(),
            "pelvis": [float(x) for x in scene.pelvis],
            "sub_vertices": [[float(v) for v in row] for row in scene.gt_sub],
        },
        out / "gt.json",
    )
    print(f"wrote scene bundle to {out}")
    return 0


def _rebuild_scene(args):
    scene_dir = Path(args.scene)
    gt = load_json(scene_dir / "gt.json")
    cfg = SceneConfig(
        views=len(list((scene_dir / "cameras").glob("cam*.json"))),
        sub_vertices=len(gt["sub_vertices"]),
    )
    return gen_scene(int(gt["seed"]), cfg)


def cmd_render_heatmaps(args) -> int:
    scene = _rebuild_scene(args)
    hm = render_scene_heatmaps(scene, args.res, None)
    grid_dict = {
        "center": [float(x) for x in hm.grid.center],
        "side": hm.grid.side,
        "resolution": hm.grid.resolution,
    }
    save_volume(hm.values, grid_dict, args.out)
    print(f"wrote {args.out} ({args.res}^3 x {hm.channels})")
    return 0


def cmd_triangulate(args) -> int:
    values, grid_dict = load_volume(args.heatmaps)
    grid = make_cuboid(grid_dict["center"], grid_dict["side"], grid_dict["resolution"])
    hm = Heatmap3D(values=values, grid=grid)
    verts = soft_argmax(heatmap_normalize(hm))
    dump_json({"vertices": [[float(v) for v in row] for row in verts]}, args.out)
    print(f"wrote {args.out} ({verts.shape[0]} vertices)")
    return 0


def cmd_fit(args) -> int:
    model = load_model(args.model)
    target_data = load_json(args.target)
    target = np.asarray(target_data["vertices"], dtype=float)
    subop = SubsamplingOperator.from_dict(load_json(args.subop)) if args.subop else None
    if args.config:
        cfg = FitConfig.from_dict(load_json(args.config))
    else:
        cfg = _fit_config_from_args(args)
    result = fit(model, target, subop, cfg)
    out = Path(args.out)
    mesh_path = out.with_suffix(".obj")
    export_obj(TriMesh(vertices=result.fitted_mesh, faces=model.faces), mesh_path)
    dump_json(
        {
            "params": result.params.to_dict(),
            "term_breakdown": result.term_breakdown.to_dict(),
            "cost_trace": [float(c) for c in result.cost_trace],
            "fitted_mesh_obj": mesh_path.name,
        },
        out,
    )
    print(f"wrote {out} (final cost {result.term_breakdown.e_fit:.6e})")
    return 0


def cmd_eval(args) -> int:
    pred = load_json(args.pred)
    gt = load_json(args.gt)
    pred_rots = gt_rots = None
    if "pose" in pred and "pose" in gt:
        pred_rots = joint_rotation_set(
            np.asarray(pred["pose"], dtype=float), rot6d_to_matrix(np.asarray(pred["r6"]))
        )
        gt_rots = joint_rotation_set(
            np.asarray(gt["pose"], dtype=float), rot6d_to_matrix(np.asarray(gt["r6"]))
        )
    report = full_report(
        pred_joints=np.asarray(pred["joints"], dtype=float),
        gt_joints=np.asarray(gt["joints"], dtype=float),
        pred_mesh=np.asarray(pred["mesh"], dtype=float),
        gt_mesh=np.asarray(gt["mesh"], dtype=float),
        pred_rotations=pred_rots,
        gt_rotations=gt_rots,
        pck_threshold_mm=args.pck_threshold,
    )
    dump_json(report.to_dict(), args.out)
    if args.per_joint_csv:
        header = ",".join(ANGULAR_JOINT_NAMES)
        row = ",".join(f"{report.per_joint_angular[n]:.4f}" for n in ANGULAR_JOINT_NAMES)
        Path(args.per_joint_csv).write_text(header + "\n" + row + "\n")
    print(f"wrote {args.out} (MPJPE {report.mpjpe:.3f} mm, MPVE {report.mpve:.3f} mm)")
    return 0


def cmd_visibility(args) -> int:
    mesh = import_obj(args.mesh)
    cams = load_calib(args.camera)
    algo = visibility_bruteforce if args.brute_force else visibility
    vis = algo(mesh, cams[args.camera_index])
    if args.subop:
        vis = subsample_visibility(vis, SubsamplingOperator.from_dict(load_json(args.subop)))
    dump_json({"visible": [int(v) for v in vis.values]}, args.out)
    print(f"wrote {args.out} ({int(vis.values.sum())}/{len(vis)} visible)")
    return 0


def cmd_decimate(args) -> int:
    mesh = import_obj(args.mesh)
    small, op = decimate(mesh, args.target)
    export_obj(small, args.out)
    if args.subop_out:
        dump_json(op.to_dict(), args.subop_out)
    print(f"wrote {args.out} ({small.num_vertices} vertices)")
    return 0


def cmd_memory_report(args) -> int:
    print(format_memory_report(args.res, args.n))
    return 0


def _pipeline_one(seed: int, args, out_dir: Path) -> Path:
    scene_cfg = _scene_config_from_args(args)
    pipe_cfg = PipelineConfig(
        heatmap_resolution=args.res,
        fit=_fit_config_from_args(args),
        heatmap_logit_noise=args.heatmap_noise,
        feature_dropout=args.feature_dropout,
    )
    scene = gen_scene(seed, scene_cfg)
    output = run_pipeline(scene, pipe_cfg)
    path = out_dir / f"report_{seed}.json"
    dump_json({"seed": seed, **output.to_dict()}, path)
    return path


def cmd_pipeline(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.seeds:
        a, b = (int(x) for x in args.seeds.split(".."))
        seeds = list(range(a, b + 1))
    else:
        seeds = [args.seed]
    max_workers = int(os.environ.get("MESHTRI_THREADS", "0")) or min(4, len(seeds))
    if len(seeds) == 1:
        paths = [_pipeline_one(seeds[0], args, out_dir)]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            paths = list(pool.map(lambda s: _pipeline_one(s, args, out_dir), seeds))
    for p in paths:
        print(f"wrote {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meshtri",
        description="Volumetric multi-view mesh triangulation and body fitting",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_model = sub.add_parser("model", help="body model utilities")
    model_sub = p_model.add_subparsers(dest="model_command", required=True)
    p_toy = model_sub.add_parser("make-toy", help="write the deterministic toy humanoid")
    p_toy.add_argument("--seed", type=int, default=0)
    p_toy.add_argument("--budget", type=int, default=600)
    p_toy.add_argument("--out", required=True)
    p_toy.set_defaults(func=cmd_model_make_toy)

    p_gen = sub.add_parser("gen-scene", help="write a synthetic scene bundle")
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--out", required=True)
    _add_scene_args(p_gen)
    p_gen.set_defaults(func=cmd_gen_scene)

    p_render = sub.add_parser("render-heatmaps", help="render score volumes for a scene")
    p_render.add_argument("--scene", required=True, help="scene bundle directory")
    p_render.add_argument("--res", type=int, default=64, choices=[16, 32, 64],
                          help="heatmap resolution per axis")
    p_render.add_argument("--out", required=True)
    p_render.set_defaults(func=cmd_render_heatmaps)

    p_tri = sub.add_parser("triangulate", help="decode heatmaps to vertex coordinates")
    p_tri.add_argument("--heatmaps", required=True, help="raw volume blob (with .json sidecar)")
    p_tri.add_argument("--out", required=True)
    p_tri.set_defaults(func=cmd_triangulate)

    p_fit = sub.add_parser("fit", help="fit the body model to target vertices")
    p_fit.add_argument("--model", required=True)
    p_fit.add_argument("--target", required=True, help="JSON with a 'vertices' array")
    p_fit.add_argument("--subop", help="subsampling operator JSON")
    p_fit.add_argument("--config", help="fit config JSON (overrides flag values)")
    p_fit.add_argument("--out", required=True)
    p_fit.add_argument("--seed", type=int, default=0)
    _add_fit_config_args(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_eval = sub.add_parser("eval", help="metric report for prediction vs ground truth")
    p_eval.add_argument("--pred", required=True)
    p_eval.add_argument("--gt", required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--pck-threshold", type=float, default=150.0)
    p_eval.add_argument("--per-joint-csv", help="also write per-joint angular errors as CSV")
    p_eval.set_defaults(func=cmd_eval)

    p_vis = sub.add_parser("visibility", help="per-vertex visibility from one camera")
    p_vis.add_argument("--mesh", required=True, help="OBJ mesh")
    p_vis.add_argument("--camera", required=True, help="camera calibration JSON")
    p_vis.add_argument("--camera-index", type=int, default=0)
    p_vis.add_argument("--subop", help="subsample the visibility map with this operator")
    p_vis.add_argument("--brute-force", action="store_true")
    p_vis.add_argument("--out", required=True)
    p_vis.set_defaults(func=cmd_visibility)

    p_dec = sub.add_parser("decimate", help="quadric edge-collapse subsampling")
    p_dec.add_argument("--mesh", required=True)
    p_dec.add_argument("--target", type=int, required=True)
    p_dec.add_argument("--out", required=True)
    p_dec.add_argument("--subop-out")
    p_dec.set_defaults(func=cmd_decimate)

    p_mem = sub.add_parser("memory-report", help="heatmap memory accounting (L^3 * N * 4 bytes)")
    p_mem.add_argument("--res", type=int, required=True)
    p_mem.add_argument("--n", type=int, required=True)
    p_mem.set_defaults(func=cmd_memory_report)

    p_pipe = sub.add_parser("pipeline", help="full synthetic pipeline run")
    p_pipe.add_argument("--seed", type=int, default=0)
    p_pipe.add_argument("--seeds", help="inclusive seed range a..b for fan-out")
    p_pipe.add_argument("--out", required=True)
    p_pipe.add_argument("--heatmap-noise", type=float, default=0.0)
    p_pipe.add_argument("--feature-dropout", type=float, default=0.0)
    _add_scene_args(p_pipe)
    _add_fit_config_args(p_pipe)
    p_pipe.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MeshtriError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
