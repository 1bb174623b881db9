import json

import numpy as np
import pytest

from contactfit import io
from contactfit.body import Camera, PoseParams, pose_mesh
from contactfit.cli import cli_dispatch
from contactfit.contact import ContactSignature, ImageSupport
from contactfit.errors import CodecError
from contactfit.evaluation import EvalRecord
from contactfit.inference_filter import FilterConfig, RawPrediction
from contactfit.synthetic import build_synthetic_body


@pytest.fixture(scope="module")
def body():
    return build_synthetic_body()


class TestRoundTrips:
    def test_body_model(self, body, tmp_path):
        path = tmp_path / "body.json"
        io.save_body_model(body.model, path)
        loaded = io.load_body_model(path)
        assert np.array_equal(loaded.template_vertices, body.model.template_vertices)
        assert np.array_equal(loaded.faces, body.model.faces)
        assert np.array_equal(loaded.skinning_weights, body.model.skinning_weights)
        assert np.array_equal(loaded.joint_regressor, body.model.joint_regressor)
        assert np.array_equal(loaded.joint_parents, body.model.joint_parents)
        assert np.array_equal(loaded.joint_offsets, body.model.joint_offsets)

    def test_pose_params(self, tmp_path):
        rng = np.random.default_rng(0)
        params = PoseParams(rng.normal(0, 1, (19, 3)), rng.normal(0, 1, 3),
                            rng.normal(0, 0.1, 3))
        path = tmp_path / "params.json"
        io.save_pose_params(params, path)
        loaded = io.load_pose_params(path)
        assert np.array_equal(loaded.to_vector(), params.to_vector())

    def test_camera(self, tmp_path):
        cam = Camera(fx=500.0, fy=480.5, cx=184.0, cy=190.25,
                     rotation=np.diag([1.0, -1.0, -1.0]),
                     translation=np.array([0.1, -0.2, 2.9]))
        path = tmp_path / "camera.json"
        io.save_camera(cam, path)
        loaded = io.load_camera(path)
        assert loaded.fx == cam.fx and loaded.cy == cam.cy
        assert np.array_equal(loaded.rotation, cam.rotation)
        assert np.array_equal(loaded.translation, cam.translation)

    def test_region_and_coarsen_maps(self, body, tmp_path):
        p1 = tmp_path / "regions.json"
        io.save_region_map(body.region_map, p1)
        assert io.load_region_map(p1) == body.region_map
        p2 = tmp_path / "cmap.json"
        cmap = body.coarsen_maps[(75, 9)]
        io.save_coarsen_map(cmap, p2)
        assert io.load_coarsen_map(p2) == cmap

    def test_annotation(self, tmp_path):
        sig = ContactSignature.from_sets(75, contact=[(3, 9), (20, 40)],
                                         masked=[(1, 2)])
        support = ImageSupport(75, {3: (0.25, 0.5), 9: (0.25, 0.5),
                                    20: (0.75, 0.125), 40: (0.75, 0.125)})
        path = tmp_path / "ann.json"
        io.save_annotation(sig, support, path)
        sig2, support2 = io.load_annotation(path)
        assert sig2 == sig
        assert support2 == support

    def test_annotation_masked_regions_field(self, tmp_path):
        path = tmp_path / "ann.json"
        with open(path, "w") as f:
            json.dump({"granularity": 5,
                       "pairs": [{"r1": 0, "r2": 1, "state": "contact"}],
                       "support": [],
                       "masked_regions": [4]}, f)
        sig, _ = io.load_annotation(path)
        assert sig.state(4, 2) == 2  # masked
        assert sig.state(0, 1) == 1

    def test_prediction(self, tmp_path):
        rng = np.random.default_rng(1)
        landmarks = rng.random((9, 2))
        landmarks[4] = np.nan
        pred = RawPrediction(9, {(0, 1): 0.5, (2, 7): 0.25},
                             rng.random(9), landmarks)
        path = tmp_path / "pred.json"
        io.save_prediction(pred, path)
        loaded = io.load_prediction(path)
        assert loaded.signature_probs == pred.signature_probs
        assert np.array_equal(loaded.segmentation_probs, pred.segmentation_probs)
        assert np.array_equal(np.isnan(loaded.landmarks), np.isnan(pred.landmarks))
        mask = ~np.isnan(pred.landmarks)
        assert np.array_equal(loaded.landmarks[mask], pred.landmarks[mask])

    def test_filter_config(self, tmp_path):
        cfg = FilterConfig(tau_s=0.35, tau_c=0.65, tau_dist=0.175)
        path = tmp_path / "cfg.json"
        io.save_filter_config(cfg, path)
        assert io.load_filter_config(path) == cfg

    def test_keypoints(self, tmp_path):
        pts = np.array([[1.5, 2.25], [3.0, 4.125]])
        joints = np.array([2, 5])
        path = tmp_path / "kp.json"
        io.save_keypoints(pts, joints, path)
        pts2, joints2 = io.load_keypoints(path)
        assert np.array_equal(pts, pts2) and np.array_equal(joints, joints2)

    def test_eval_record(self, tmp_path):
        rec = EvalRecord("x1", "standing", 12.5, 400.25, 9.75, None)
        path = tmp_path / "rec.json"
        io.save_eval_record(rec, path)
        loaded = io.load_eval_record(path)
        assert loaded == rec

    def test_obj(self, body, tmp_path):
        verts = pose_mesh(body.model, PoseParams.identity(body.model.num_joints))
        path = tmp_path / "mesh.obj"
        io.save_obj(verts, body.model.faces, path)
        v2, f2 = io.load_obj(path)
        assert np.array_equal(v2, verts)
        assert np.array_equal(f2, body.model.faces)

    def test_config(self, tmp_path):
        cfg = {"iterations": 40, "step_size": 0.5, "lambda_d": 1.0,
               "selection_mode": "all", "flag": True}
        path = tmp_path / "run.cfg"
        io.save_config(cfg, path)
        assert io.load_config(path) == cfg


class TestCodecErrors:
    def test_missing_field_names_file_and_field(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"granularity": 5}')
        with pytest.raises(CodecError) as err:
            io.load_annotation(path)
        assert "pairs" in str(err.value)
        assert "bad.json" in str(err.value)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(CodecError):
            io.load_region_map(path)

    def test_bad_state_value(self, tmp_path):
        path = tmp_path / "ann.json"
        path.write_text(json.dumps({
            "granularity": 5, "support": [],
            "pairs": [{"r1": 0, "r2": 1, "state": "sticky"}]}))
        with pytest.raises(CodecError):
            io.load_annotation(path)

    def test_support_on_noncontact_region_rejected(self, tmp_path):
        path = tmp_path / "ann.json"
        path.write_text(json.dumps({
            "granularity": 5, "pairs": [],
            "support": [{"r": 2, "x": 0.5, "y": 0.5}]}))
        with pytest.raises(CodecError):
            io.load_annotation(path)


class TestCli:
    def test_unknown_subcommand_exits_2(self, capsys):
        assert cli_dispatch(["frobnicate"]) == 2

    def test_unknown_flag_exits_2(self):
        assert cli_dispatch(["synth", "--scenario", "hand-chin", "--bogus"]) == 2

    def test_malformed_file_exits_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{oops")
        code = cli_dispatch(["export-obj", "--body", str(bad),
                             "--out", str(tmp_path / "out.obj")])
        assert code == 1
        assert "bad.json" in capsys.readouterr().err

    def test_synth_writes_bundle(self, tmp_path, capsys):
        out = tmp_path / "bundle"
        assert cli_dispatch(["synth", "--scenario", "hand-chin", "--seed", "4",
                             "--out", str(out)]) == 0
        for name in ("body.json", "regions_75.json", "annotation.json",
                     "camera.json", "keypoints.json", "gt_params.json",
                     "init_params.json", "reconstruct.cfg", "gt_mesh.obj",
                     "metadata.json", "coarsen_75_to_9.json"):
            assert (out / name).exists(), name

    def test_synth_regeneration_is_byte_identical(self, tmp_path):
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        cli_dispatch(["synth", "--scenario", "arms-crossed", "--seed", "11",
                      "--out", str(out1)])
        cli_dispatch(["synth", "--scenario", "arms-crossed", "--seed", "11",
                      "--out", str(out2)])
        for p1 in sorted(out1.iterdir()):
            p2 = out2 / p1.name
            assert p1.read_bytes() == p2.read_bytes(), p1.name

    def test_coarsen_command(self, tmp_path):
        bundle = tmp_path / "bundle"
        cli_dispatch(["synth", "--scenario", "hand-chin", "--seed", "0",
                      "--out", str(bundle)])
        out = tmp_path / "ann9.json"
        code = cli_dispatch(["coarsen", "--in", str(bundle / "annotation.json"),
                             "--map", str(bundle / "coarsen_75_to_9.json"),
                             "--out", str(out)])
        assert code == 0
        sig, support = io.load_annotation(out)
        assert sig.granularity == 9
        assert len(sig.contact_pairs()) == 1

    def test_stats_command(self, tmp_path):
        anns = tmp_path / "anns"
        anns.mkdir()
        sig = ContactSignature.from_sets(9, contact=[(1, 2)])
        io.save_annotation(sig, ImageSupport(9, {}), anns / "a.json")
        io.save_annotation(sig, ImageSupport(9, {}), anns / "b.json")
        out = tmp_path / "freq.csv"
        pairs = tmp_path / "pairs.csv"
        code = cli_dispatch(["stats", "--in", str(anns), "--granularity", "9",
                             "--out", str(out), "--pairs-out", str(pairs)])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "region,count"
        assert lines[2] == "1,2"
        assert pairs.read_text().strip().splitlines()[1] == "1,2,2"

    def test_filter_command(self, tmp_path):
        rng = np.random.default_rng(2)
        landmarks = np.tile([0.5, 0.5], (9, 1))
        pred = RawPrediction(9, {(0, 1): 0.9, (2, 3): 0.2},
                             np.array([0.9, 0.9, 0.9, 0.9, 0, 0, 0, 0, 0]),
                             landmarks)
        pred_path = tmp_path / "pred.json"
        io.save_prediction(pred, pred_path)
        out = tmp_path / "filtered.json"
        assert cli_dispatch(["filter", "--pred", str(pred_path),
                             "--out", str(out)]) == 0
        sig, _ = io.load_annotation(out)
        assert sig.contact_pairs() == [(0, 1)]

    def test_sweep_command(self, tmp_path):
        rng = np.random.default_rng(3)
        landmarks = np.tile([0.5, 0.5], (6, 1))
        pred = RawPrediction(6, {(0, 1): 0.9}, np.array([0.9, 0.9, 0, 0, 0, 0]),
                             landmarks)
        gt = ContactSignature.from_sets(6, contact=[(0, 1)])
        io.save_prediction(pred, tmp_path / "pred.json")
        io.save_annotation(gt, ImageSupport(6, {}), tmp_path / "gt.json")
        manifest = tmp_path / "manifest.json"
        manifest.write_text(json.dumps(
            [{"prediction": "pred.json", "ground_truth": "gt.json"}]))
        out = tmp_path / "cfg.json"
        assert cli_dispatch(["sweep", "--manifest", str(manifest),
                             "--tau-s", "0.3,0.5", "--tau-c", "0.4",
                             "--tau-dist", "0.1", "--out", str(out)]) == 0
        cfg = io.load_filter_config(out)
        assert cfg.tau_c == 0.4

    def test_losses_command(self, tmp_path, capsys):
        bundle = {
            "granularity": 3,
            "landmarks": [[0.2, 0.2], [0.2, 0.2], [0.8, 0.8]],
            "features": [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            "seg_logits": [2.0, 2.0, -2.0],
            "signature": {"pairs": [{"r1": 0, "r2": 1, "state": "contact"}]},
            "support": [{"r": 0, "x": 0.2, "y": 0.2},
                        {"r": 1, "x": 0.2, "y": 0.2}],
        }
        path = tmp_path / "bundle.json"
        path.write_text(json.dumps(bundle))
        out = tmp_path / "losses.csv"
        assert cli_dispatch(["losses", "--in", str(path), "--out", str(out)]) == 0
        rows = out.read_text().strip().splitlines()
        assert rows[0] == "term,value"
        values = {r.split(",")[0]: float(r.split(",")[1]) for r in rows[1:]}
        assert values["K"] == 0.0
        assert values["total"] == pytest.approx(
            5 * values["sep"] + 5 * values["K"] + values["S"] + values["C"])

    def test_losses_with_heatmaps(self, tmp_path):
        bundle = {
            "granularity": 2,
            "heatmaps": [np.zeros((4, 4)).tolist(), np.zeros((4, 4)).tolist()],
            "features": [[1.0], [1.0]],
            "seg_logits": [0.0, 0.0],
            "signature": {"pairs": []},
            "support": [],
        }
        path = tmp_path / "bundle.json"
        path.write_text(json.dumps(bundle))
        assert cli_dispatch(["losses", "--in", str(path)]) == 0

    def test_export_obj_roundtrip(self, tmp_path):
        bundle = tmp_path / "bundle"
        cli_dispatch(["synth", "--scenario", "hand-chin", "--seed", "0",
                      "--out", str(bundle)])
        out = tmp_path / "posed.obj"
        assert cli_dispatch(["export-obj", "--body", str(bundle / "body.json"),
                             "--params", str(bundle / "gt_params.json"),
                             "--out", str(out)]) == 0
        verts, faces = io.load_obj(out)
        gt = io.load_obj(bundle / "gt_mesh.obj")
        assert np.array_equal(verts, gt[0])

    def test_eval_and_metrics_commands(self, tmp_path):
        bundle = tmp_path / "bundle"
        cli_dispatch(["synth", "--scenario", "hand-chin", "--seed", "0",
                      "--out", str(bundle)])
        rec_path = tmp_path / "rec.json"
        code = cli_dispatch([
            "eval", "--body", str(bundle / "body.json"),
            "--regions", str(bundle / "regions_75.json"),
            "--annotation", str(bundle / "annotation.json"),
            "--pred-params", str(bundle / "init_params.json"),
            "--gt-params", str(bundle / "gt_params.json"),
            "--id", "demo", "--class", "standing", "--out", str(rec_path)])
        assert code == 0
        record = io.load_eval_record(rec_path)
        assert record.pose_error > 0
        table_path = tmp_path / "table.csv"
        assert cli_dispatch(["metrics", "--records", str(rec_path),
                             "--out", str(table_path)]) == 0
        text = table_path.read_text()
        assert "standing" in text and "overall" in text
