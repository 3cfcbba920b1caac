import json

import numpy as np
import pytest
from click.testing import CliRunner

from decomesh import bufio, fixtures
from decomesh import mesh as meshmod
from decomesh.cli import main


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def cli_bundle(tmp_path_factory):
    """One small bundle shared across CLI tests, built through the CLI itself."""
    out = tmp_path_factory.mktemp("clibundle")
    spec = fixtures.two_sphere_spec(resolution=32).to_dict()
    spec_path = out / "spec.json"
    spec_path.write_text(json.dumps(spec))
    result = CliRunner().invoke(
        main, ["synth", "--spec", str(spec_path), "--out", str(out / "bundle")])
    assert result.exit_code == 0, result.output + str(result.exception)
    return out / "bundle" / "manifest.json"


def test_synth_pinned_fixture(runner, tmp_path):
    result = runner.invoke(main, ["synth", "--fixture", "two-spheres",
                                  "--out", str(tmp_path / "b")])
    assert result.exit_code == 0
    manifest = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert manifest["fg_mesh"] == "fg.ply"
    assert (tmp_path / "b" / "fg.ply").exists()
    assert (tmp_path / "b" / "fg.nmf").exists()


def test_synth_requires_exactly_one_source(runner, tmp_path):
    result = runner.invoke(main, ["synth", "--out", str(tmp_path / "x")])
    assert result.exit_code == 1
    err = json.loads(result.stderr)
    assert err["error"] == "fixture-error"


def test_render_buffers(runner, cli_bundle, tmp_path):
    out = tmp_path / "view0"
    result = runner.invoke(main, ["render", "--manifest", str(cli_bundle),
                                  "--view", "0", "--out", str(out)])
    assert result.exit_code == 0, result.output
    depth = bufio.load_buffer(out / "depth.bin")
    color = bufio.load_buffer(out / "color.bin")
    feature = bufio.load_buffer(out / "feature.bin")
    assert depth.shape[:2] == color.shape[:2] == feature.shape[:2]
    assert feature.shape[2] == 32
    assert (depth > 0).any()
    assert (out / "color.png").exists()
    assert (out / "vertex_id.nml").exists()


def test_render_bad_view(runner, cli_bundle, tmp_path):
    result = runner.invoke(main, ["render", "--manifest", str(cli_bundle),
                                  "--view", "99", "--out", str(tmp_path / "x")])
    assert result.exit_code == 1
    assert json.loads(result.stderr)["error"] == "camera-error"


def test_mask_oracle_and_rle(runner, cli_bundle, tmp_path):
    out = tmp_path / "m.png"
    result = runner.invoke(main, ["mask", "--manifest", str(cli_bundle),
                                  "--view", "0", "--oracle-object", "1",
                                  "--out", str(out)])
    assert result.exit_code == 0, result.output
    mask = bufio.load_mask_png(out)
    assert mask.any()
    rle = json.loads((tmp_path / "m.rle.json").read_text())
    from decomesh.interact import rle_to_mask
    np.testing.assert_array_equal(rle_to_mask(rle), mask)


def test_mask_from_clicks(runner, cli_bundle, tmp_path):
    bundle = fixtures.load_bundle(cli_bundle)
    gt = bundle.masks[0][2]
    ys, xs = np.nonzero(gt)
    k = len(ys) // 2
    clicks = tmp_path / "clicks.json"
    clicks.write_text(json.dumps([{"x": int(xs[k]), "y": int(ys[k])}]))
    out = tmp_path / "m2.png"
    result = runner.invoke(main, ["mask", "--manifest", str(cli_bundle),
                                  "--clicks", str(clicks), "--out", str(out)])
    assert result.exit_code == 0, result.output
    mask = bufio.load_mask_png(out)
    inter = (mask & gt).sum()
    assert inter / (mask | gt).sum() > 0.99


def test_mask_requires_one_source(runner, cli_bundle, tmp_path):
    result = runner.invoke(main, ["mask", "--manifest", str(cli_bundle),
                                  "--out", str(tmp_path / "m.png")])
    assert result.exit_code == 1
    assert json.loads(result.stderr)["error"] == "interaction-error"


def test_grow_from_oracle_mask(runner, cli_bundle, tmp_path):
    out = tmp_path / "obj1.ply"
    result = runner.invoke(main, ["grow", "--manifest", str(cli_bundle),
                                  "--oracle-object", "1", "--epsilon", "1.0",
                                  "--out", str(out)])
    assert result.exit_code == 0, result.output
    info = json.loads(result.output)
    assert info["stop_reason"] in ("fixed-point", "boundary-fence")
    sub = meshmod.load_mesh(out)
    bundle = fixtures.load_bundle(cli_bundle)
    expect = int((bundle.fg_mesh.labels == 1).sum())
    assert sub.n_vertices == expect == info["vertices"]
    trace = json.loads((tmp_path / "obj1.trace.json").read_text())
    assert len(trace["vertices"]) == expect


def test_grow_from_mask_png(runner, cli_bundle, tmp_path):
    mask_png = tmp_path / "m.png"
    assert runner.invoke(main, ["mask", "--manifest", str(cli_bundle),
                                "--oracle-object", "2",
                                "--out", str(mask_png)]).exit_code == 0
    out = tmp_path / "obj2.ply"
    result = runner.invoke(main, ["grow", "--manifest", str(cli_bundle),
                                  "--mask", str(mask_png), "--epsilon", "1.0",
                                  "--out", str(out)])
    assert result.exit_code == 0, result.output
    bundle = fixtures.load_bundle(cli_bundle)
    assert meshmod.load_mesh(out).n_vertices == int((bundle.fg_mesh.labels == 2).sum())


def test_grow_bad_config(runner, cli_bundle, tmp_path):
    result = runner.invoke(main, ["grow", "--manifest", str(cli_bundle),
                                  "--oracle-object", "1", "--theta", "-1",
                                  "--out", str(tmp_path / "x.ply")])
    assert result.exit_code == 1
    assert json.loads(result.stderr)["error"] == "grow-error"


def test_decompose_full_pipeline(runner, cli_bundle, tmp_path):
    entries = [{"name": "ball-a", "view": 0, "oracle_object": 1,
                "grow": {"epsilon": 1.0}},
               {"name": "ball-b", "view": 0, "oracle_object": 2,
                "grow": {"epsilon": 1.0}}]
    cm = tmp_path / "clicks.json"
    cm.write_text(json.dumps(entries))
    out = tmp_path / "dec"
    result = runner.invoke(main, ["decompose", "--manifest", str(cli_bundle),
                                  "--clicks-manifest", str(cm), "--out-dir", str(out)])
    assert result.exit_code == 0, result.output
    report = json.loads((out / "report.json").read_text())
    assert [o["name"] for o in report["objects"]] == ["ball-a", "ball-b"]
    assert report["residual_vertices"] == 0
    assert not (out / "residual.ply").exists()
    bundle = fixtures.load_bundle(cli_bundle)
    a = meshmod.load_mesh(out / "ball-a.ply")
    b = meshmod.load_mesh(out / "ball-b.ply")
    assert a.n_vertices + b.n_vertices == bundle.fg_mesh.n_vertices


def test_decompose_leaves_residual(runner, cli_bundle, tmp_path):
    cm = tmp_path / "one.json"
    cm.write_text(json.dumps([{"name": "only-a", "view": 0, "oracle_object": 1,
                               "grow": {"epsilon": 1.0}}]))
    out = tmp_path / "dec1"
    result = runner.invoke(main, ["decompose", "--manifest", str(cli_bundle),
                                  "--clicks-manifest", str(cm), "--out-dir", str(out)])
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    assert report["residual_vertices"] > 0
    assert (out / "residual.ply").exists()


def test_eval_self_is_zero(runner, cli_bundle, tmp_path):
    out = tmp_path / "obj1.ply"
    assert runner.invoke(main, ["grow", "--manifest", str(cli_bundle),
                                "--oracle-object", "1", "--epsilon", "1.0",
                                "--out", str(out)]).exit_code == 0
    result = runner.invoke(main, ["eval", str(out), str(out),
                                  "--samples", "2000", "--csv"])
    assert result.exit_code == 0, result.output
    row = result.output.strip().split(",")
    assert float(row[2]) == 0.0           # Chamfer-L1
    assert float(row[5]) == 100.0         # F-score


def test_eval_json_fields(runner, cli_bundle, tmp_path):
    out = tmp_path / "o.ply"
    assert runner.invoke(main, ["grow", "--manifest", str(cli_bundle),
                                "--oracle-object", "1", "--epsilon", "1.0",
                                "--out", str(out)]).exit_code == 0
    result = runner.invoke(main, ["eval", str(out), str(out), "--samples", "1000"])
    doc = json.loads(result.output)
    assert doc["tau_d"] == 0.05
    assert doc["n_pred"] == doc["n_gt"] == 1000


def test_losses_command(runner, cli_bundle):
    bundle_dir = cli_bundle.parent
    result = runner.invoke(main, ["losses", "--scene", str(bundle_dir / "scene.json"),
                                  "--rays", "8", "--samples-per-ray", "32",
                                  "--points", "64"])
    assert result.exit_code == 0, result.output + str(result.exception)
    doc = json.loads(result.output)
    assert set(doc) >= {"terms", "weighted", "total"}
    assert doc["terms"]["distinction"] == 0.0
    assert doc["terms"]["eikonal"] < 1e-6
    assert doc["total"] == pytest.approx(sum(doc["weighted"].values()), abs=1e-9)


def test_config_file_and_flag_precedence(runner, cli_bundle, tmp_path):
    # config lowers epsilon to 0 so growing from the oracle mask fences
    # immediately; a flag must override the file
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("epsilon = 0.0\n")
    out = tmp_path / "fenced.ply"
    result = runner.invoke(main, ["--config", str(cfg), "grow",
                                  "--manifest", str(cli_bundle),
                                  "--oracle-object", "1", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["stop_reason"] == "boundary-fence"
    result = runner.invoke(main, ["--config", str(cfg), "grow",
                                  "--manifest", str(cli_bundle),
                                  "--oracle-object", "1", "--epsilon", "1.0",
                                  "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["stop_reason"] == "fixed-point"


def test_env_var_overrides_file(runner, cli_bundle, tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("epsilon = 1.0\n")
    monkeypatch.setenv("DECOMESH_EPSILON", "0.0")
    out = tmp_path / "env.ply"
    result = runner.invoke(main, ["--config", str(cfg), "grow",
                                  "--manifest", str(cli_bundle),
                                  "--oracle-object", "1", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["stop_reason"] == "boundary-fence"


def test_missing_manifest_error(runner, tmp_path):
    result = runner.invoke(main, ["render", "--manifest", str(tmp_path / "no.json"),
                                  "--out", str(tmp_path / "x")])
    assert result.exit_code == 2   # click validates exists=True paths itself
