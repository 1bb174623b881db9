"""Command-line surface tying the library together.

Subcommands: synth, reconstruct, eval, metrics, filter, sweep, stats,
coarsen, losses, export-obj. All structured inputs/outputs are JSON, tables
are CSV, meshes are OBJ. Runs are deterministic given identical inputs and
seeds.
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import io
from .body import PoseParams, facet_geometry, joint_positions, pose_mesh
from .contact import (ContactSignature, ContactState, ImageSupport,
                      contact_stats, coarsen_signature,
                      segmentation_from_signature)
from .contact_geometry import contact_distance_error
from .errors import CodecError, ContactFitError
from .evaluation import (SCENARIO_CLASSES, EvalRecord, aggregate, mpjpe,
                         translation_error, vertex_error)
from .inference_filter import filter_signature, sweep_thresholds
from .reconstruct import (ObjectiveWeights, OptimizerSettings,
                          ReconstructionProblem, optimize)
from .synthetic import SCENARIO_NAMES, generate_scenario
from .train_losses import (LandmarkSet, LossWeights, loss_landmark,
                           loss_separation, loss_segmentation_ce,
                           signature_similarity_loss, softargmax,
                           total_train_loss, DEFAULT_SIGMA_SQ_SEP)


def _cmd_synth(args):
    bundle = generate_scenario(args.scenario, seed=args.seed, noise_px=args.noise_px)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    body = bundle.body
    io.save_body_model(body.model, out / "body.json")
    io.save_region_map(body.region_map, out / "regions_75.json")
    for (fine, coarse), cmap in sorted(body.coarsen_maps.items()):
        io.save_coarsen_map(cmap, out / f"coarsen_{fine}_to_{coarse}.json")
    io.save_annotation(bundle.signature, bundle.support, out / "annotation.json")
    io.save_camera(bundle.camera, out / "camera.json")
    io.save_keypoints(bundle.keypoints, bundle.keypoint_joints, out / "keypoints.json")
    io.save_pose_params(bundle.gt_params, out / "gt_params.json")
    io.save_pose_params(bundle.initial_params, out / "init_params.json")
    io.save_config(bundle.config, out / "reconstruct.cfg")
    io.save_obj(pose_mesh(body.model, bundle.gt_params), body.model.faces,
                out / "gt_mesh.obj")
    io._dump({"scenario": bundle.name, "class": bundle.scenario_class,
              "seed": bundle.seed, "noise_px": bundle.noise_px,
              "rng": "numpy-PCG64"}, out / "metadata.json")
    print(f"wrote scenario '{bundle.name}' (seed {bundle.seed}) to {out}")
    return 0


def _weights_from_config(cfg):
    kw = {}
    for key in ("lambda_s", "lambda_psr", "lambda_col", "lambda_d", "lambda_n",
                "lambda_pose", "lambda_shape"):
        if key in cfg:
            kw[key] = float(cfg[key])
    return ObjectiveWeights(**kw)


def _settings_from_config(cfg):
    kw = {}
    for key, cast in (("iterations", int), ("step_size", float),
                      ("armijo_c", float), ("max_backtracks", int)):
        if key in cfg:
            kw[key] = cast(cfg[key])
    return OptimizerSettings(**kw)


def _cmd_reconstruct(args):
    model = io.load_body_model(args.body)
    region_map = io.load_region_map(args.regions)
    signature, _ = io.load_annotation(args.annotation)
    keypoints, keypoint_joints = io.load_keypoints(args.keypoints)
    camera = io.load_camera(args.camera)
    init = (io.load_pose_params(args.init) if args.init
            else PoseParams.identity(model.num_joints))
    cfg = io.load_config(args.config) if args.config else {}
    problem = ReconstructionProblem(
        model=model, region_map=region_map, camera=camera,
        keypoints=keypoints, keypoint_joints=keypoint_joints,
        signature=signature, initial_params=init,
        weights=_weights_from_config(cfg), settings=_settings_from_config(cfg),
        selection_mode=str(cfg.get("selection_mode", "all")),
        selection_k=int(cfg.get("selection_k", 2)))
    final, trace = optimize(problem)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.save_pose_params(final, out / "params.json")
    io.save_trace_csv(trace, out / "trace.csv")
    io.save_obj(pose_mesh(model, final), model.faces, out / "final.obj")
    print(f"optimized {len(trace) - 1} accepted steps; "
          f"total {trace[0].total:.6g} -> {trace[-1].total:.6g}")
    return 0


def _cmd_eval(args):
    model = io.load_body_model(args.body)
    region_map = io.load_region_map(args.regions)
    signature, _ = io.load_annotation(args.annotation)
    pred = io.load_pose_params(args.pred_params)
    gt = io.load_pose_params(args.gt_params)
    pred_joints = joint_positions(model, pred)
    gt_joints = joint_positions(model, gt)
    pred_verts = pose_mesh(model, pred)
    gt_verts = pose_mesh(model, gt)
    centers = facet_geometry(pred_verts, model.faces).centers
    record = EvalRecord(
        instance_id=args.id, scenario_class=args.scenario_class,
        pose_error=mpjpe(pred_joints, gt_joints),
        translation_error=translation_error(pred_joints[0], gt_joints[0]),
        vertex_error=vertex_error(pred_verts, gt_verts),
        contact_distance=contact_distance_error(centers, signature, region_map))
    io.save_eval_record(record, args.out)
    if args.table:
        io.save_metrics_csv(aggregate([record]), args.table)
    print(f"P={record.pose_error:.2f} T={record.translation_error:.2f} "
          f"V={record.vertex_error:.2f} C={record.contact_distance}")
    return 0


def _cmd_metrics(args):
    paths = [Path(p) for p in args.records]
    if len(paths) == 1 and paths[0].is_dir():
        paths = sorted(paths[0].glob("*.json"))
    if not paths:
        raise CodecError("no record files given")
    records = [io.load_eval_record(p) for p in paths]
    table = aggregate(records)
    io.save_metrics_csv(table, args.out)
    print(f"aggregated {len(records)} records -> {args.out}")
    return 0


def _cmd_filter(args):
    pred = io.load_prediction(args.pred)
    cfg = io.load_filter_config(args.config) if args.config else None
    if cfg is None:
        from .inference_filter import FilterConfig
        cfg = FilterConfig()
    sig = filter_signature(pred, cfg)
    io.save_annotation(sig, ImageSupport(sig.granularity, {}), args.out)
    print(f"kept {len(sig.contact_pairs())} of {len(pred.signature_probs)} pairs")
    return 0


def _cmd_sweep(args):
    manifest = io._load(args.manifest)
    base = Path(args.manifest).parent
    preds, gts = [], []
    for row in manifest:
        preds.append(io.load_prediction(
            base / io._require(row, "prediction", args.manifest)))
        gts.append(io.load_annotation(
            base / io._require(row, "ground_truth", args.manifest))[0])
    grids = [np.array([float(x) for x in g.split(",")])
             for g in (args.tau_s, args.tau_c, args.tau_dist)]
    cfg, scores = sweep_thresholds(preds, gts, *grids)
    io.save_filter_config(cfg, args.out)
    print(f"tau_s={cfg.tau_s} tau_c={cfg.tau_c} tau_dist={cfg.tau_dist} "
          f"seg_iou={scores['segmentation_iou']:.4f} "
          f"sig_iou={scores['signature_iou']:.4f}")
    return 0


def _cmd_stats(args):
    paths = sorted(Path(args.in_dir).glob("*.json"))
    sigs = []
    for p in paths:
        sig, _ = io.load_annotation(p)
        if sig.granularity == args.granularity:
            sigs.append(sig)
    if not sigs:
        raise CodecError(f"no annotations at granularity {args.granularity} "
                         f"in {args.in_dir}")
    stats = contact_stats(sigs)
    io.save_stats_csv(stats, args.out, args.pairs_out)
    print(f"tallied {len(sigs)} annotations -> {args.out}")
    return 0


def _cmd_coarsen(args):
    sig, support = io.load_annotation(args.infile)
    cmap = io.load_coarsen_map(args.map)
    coarse_sig = coarsen_signature(sig, cmap)
    # coarse support: average the fine support points landing in each
    # contacting coarse region
    seg = segmentation_from_signature(coarse_sig)
    groups = {}
    for r, xy in support.points.items():
        a = int(cmap.mapping[r])
        if seg.states[a] == ContactState.CONTACT:
            groups.setdefault(a, []).append(xy)
    points = {a: tuple(np.mean(pts, axis=0)) for a, pts in groups.items()}
    io.save_annotation(coarse_sig, ImageSupport(cmap.coarse, points), args.out)
    print(f"coarsened {sig.granularity} -> {cmap.coarse}: "
          f"{len(coarse_sig.contact_pairs())} contact pairs")
    return 0


def _cmd_losses(args):
    data = io._load(args.infile)
    n = int(io._require(data, "granularity", args.infile))
    sig, support = _signature_from_bundle(data, args.infile)
    if "heatmaps" in data:
        coords = [softargmax(np.asarray(h, dtype=float))[0] for h in data["heatmaps"]]
        landmarks = LandmarkSet(n, np.asarray(coords))
    else:
        landmarks = LandmarkSet(
            n, np.asarray(io._require(data, "landmarks", args.infile), dtype=float))
    sigma_sq = float(data.get("sigma_sq_sep", DEFAULT_SIGMA_SQ_SEP))
    l_sep, _ = loss_separation(landmarks, sig, sigma_sq)
    l_k, _ = loss_landmark(landmarks, support)
    l_s, _ = loss_segmentation_ce(
        np.asarray(io._require(data, "seg_logits", args.infile), dtype=float),
        segmentation_from_signature(sig))
    l_c, _ = signature_similarity_loss(
        np.asarray(io._require(data, "features", args.infile), dtype=float),
        sig, metric=data.get("metric", "dot"))
    wdata = data.get("weights", {})
    weights = LossWeights(w_sep=float(wdata.get("w_sep", 5.0)),
                          w_k=float(wdata.get("w_k", 5.0)),
                          w_s=float(wdata.get("w_s", 1.0)),
                          w_c=float(wdata.get("w_c", 1.0)))
    total = total_train_loss(l_sep, l_k, l_s, l_c, weights)
    rows = [("sep", l_sep), ("K", l_k), ("S", l_s), ("C", l_c), ("total", total)]
    if args.out:
        with open(args.out, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["term", "value"])
            for term, value in rows:
                writer.writerow([term, repr(float(value))])
    for term, value in rows:
        print(f"{term},{value!r}")
    return 0


def _signature_from_bundle(data, path):
    sigdata = data.get("signature")
    if sigdata is None:
        raise CodecError("missing", path=path, field="signature")
    n = int(data["granularity"])
    entries = []
    for row in sigdata.get("pairs", []):
        state = {"contact": ContactState.CONTACT,
                 "masked": ContactState.MASKED,
                 "no-contact": ContactState.NO_CONTACT}.get(row.get("state"))
        if state is None:
            raise CodecError(f"unknown state {row.get('state')!r}", path=path,
                             field="signature.pairs")
        entries.append(((int(io._require(row, "r1", path)),
                         int(io._require(row, "r2", path))), state))
    sig = ContactSignature(n, entries)
    support = ImageSupport(n, {int(r["r"]): (r["x"], r["y"])
                               for r in data.get("support", [])})
    return sig, support


def _cmd_export_obj(args):
    model = io.load_body_model(args.body)
    params = (io.load_pose_params(args.params) if args.params
              else PoseParams.identity(model.num_joints))
    io.save_obj(pose_mesh(model, params), model.faces, args.out)
    print(f"wrote {model.num_vertices} vertices, {model.num_faces} faces")
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="contactfit",
        description="Self-contact signatures and contact-consistent body fitting")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic contact scenario bundle")
    p.add_argument("--scenario", required=True, choices=SCENARIO_NAMES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-px", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("reconstruct", help="fit a body under contact constraints")
    p.add_argument("--body", required=True)
    p.add_argument("--regions", required=True)
    p.add_argument("--annotation", required=True)
    p.add_argument("--keypoints", required=True)
    p.add_argument("--camera", required=True)
    p.add_argument("--init")
    p.add_argument("--config")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("eval", help="per-instance reconstruction metrics")
    p.add_argument("--body", required=True)
    p.add_argument("--regions", required=True)
    p.add_argument("--annotation", required=True)
    p.add_argument("--pred-params", required=True)
    p.add_argument("--gt-params", required=True)
    p.add_argument("--id", required=True)
    p.add_argument("--class", dest="scenario_class", required=True,
                   choices=SCENARIO_CLASSES)
    p.add_argument("--out", required=True)
    p.add_argument("--table", help="also write a one-record metrics CSV")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("metrics", help="aggregate eval records into a table")
    p.add_argument("--records", nargs="+", required=True,
                   help="record files, or one directory of them")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("filter", help="consistency-filter a raw prediction")
    p.add_argument("--pred", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("sweep", help="pick filter thresholds on a validation set")
    p.add_argument("--manifest", required=True,
                   help="JSON list of {prediction, ground_truth} paths")
    p.add_argument("--tau-s", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")
    p.add_argument("--tau-c", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")
    p.add_argument("--tau-dist", default="0.05,0.1,0.15,0.2,0.3,0.5")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("stats", help="contact frequency tables over annotations")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--granularity", type=int, default=75)
    p.add_argument("--out", required=True)
    p.add_argument("--pairs-out")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("coarsen", help="coarsen an annotation to fewer regions")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_coarsen)

    p = sub.add_parser("losses", help="evaluate training-loss terms on a bundle")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_losses)

    p = sub.add_parser("export-obj", help="pose a body model and write an OBJ")
    p.add_argument("--body", required=True)
    p.add_argument("--params")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export_obj)

    return parser


def cli_dispatch(argv):
    """Run one CLI invocation. Returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if e.code is not None else 0
    try:
        return args.func(args)
    except CodecError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ContactFitError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
