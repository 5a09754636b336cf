import json

import numpy as np
import pytest

from dopplerpose import harness
from dopplerpose.cli import main
from dopplerpose.motion import PoseSequence
from dopplerpose.caf import Spectrogram
from test_harness import tiny_config_dict


@pytest.fixture(scope="module")
def config_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "exp.json"
    path.write_text(json.dumps(tiny_config_dict()))
    return path


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory, config_file):
    """Dataset + trained (1-epoch) checkpoints shared by the CLI smoke tests."""
    root = tmp_path_factory.mktemp("pipe")
    assert main(["build-dataset", "--config", str(config_file),
                 "--out", str(root / "ds")]) == 0
    assert main(["train-vel", "--config", str(config_file),
                 "--data", str(root / "ds"), "--out", str(root / "models")]) == 0
    assert main(["train-opt", "--config", str(config_file),
                 "--data", str(root / "ds"), "--out", str(root / "models")]) == 0
    return root


def test_gen_motion(config_file, tmp_path):
    out = tmp_path / "pose.dpc"
    rc = main(["gen-motion", "--config", str(config_file), "--kind", "W+",
               "--duration", "3.0", "--out", str(out)])
    assert rc == 0
    pose = PoseSequence.load(out)
    assert len(pose) == 30


def test_gen_motion_unknown_kind(config_file, tmp_path):
    rc = main(["gen-motion", "--config", str(config_file), "--kind", "FLY",
               "--out", str(tmp_path / "x.dpc")])
    assert rc == 2


def test_simulate_and_caf(config_file, tmp_path):
    pose_file = tmp_path / "pose.dpc"
    main(["gen-motion", "--config", str(config_file), "--kind", "SU",
          "--duration", "2.0", "--out", str(pose_file)])
    sig_dir = tmp_path / "sigs"
    assert main(["simulate", "--config", str(config_file), "--pose", str(pose_file),
                 "--out", str(sig_dir)]) == 0
    assert (sig_dir / "ref.dpc").exists() and (sig_dir / "sur.dpc").exists()
    spec_file = tmp_path / "spec.dpc"
    assert main(["caf", "--config", str(config_file), "--sur", str(sig_dir / "sur.dpc"),
                 "--ref", str(sig_dir / "ref.dpc"), "--out", str(spec_file)]) == 0
    spec = Spectrogram.load(spec_file)
    assert spec.n_frames == 20
    den_file = tmp_path / "den.dpc"
    assert main(["denoise", "--config", str(config_file), "--input", str(spec_file),
                 "--out", str(den_file)]) == 0
    assert Spectrogram.load(den_file).values.shape == spec.values.shape


def test_reconstruct_writes_pose_and_drift(config_file, pipeline_dir, tmp_path):
    out = tmp_path / "rec"
    rc = main(["reconstruct", "--config", str(config_file),
               "--data", str(pipeline_dir / "ds"), "--index", "0",
               "--vel-model", str(pipeline_dir / "models" / "vel_model.dpc"),
               "--opt-model", str(pipeline_dir / "models" / "opt_model.dpc"),
               "--out", str(out)])
    assert rc == 0
    pose = PoseSequence.load(out / "reconstructed_pose.dpc")
    assert len(pose) == 30
    drift = (out / "drift.csv").read_text().strip().split("\n")
    assert drift[0] == "frame,mean_error_mm"
    assert len(drift) == 31


def test_evaluate_csv_row_count(config_file, pipeline_dir, tmp_path):
    out = tmp_path / "eval"
    rc = main(["evaluate", "--config", str(config_file),
               "--data", str(pipeline_dir / "ds"),
               "--vel-model", str(pipeline_dir / "models" / "vel_model.dpc"),
               "--opt-model", str(pipeline_dir / "models" / "opt_model.dpc"),
               "--velocity-only", "--out", str(out)])
    assert rc == 0
    rows = (out / "metrics.csv").read_text().strip().split("\n")
    manifest = harness.load_manifest(pipeline_dir / "ds")
    n_kinds = len({manifest["entries"][i]["kind"] for i in manifest["split"]["test"]})
    assert len(rows) == 1 + 17 * n_kinds + 17 + 1


def test_profile_runs(config_file, pipeline_dir, tmp_path):
    out = tmp_path / "prof"
    rc = main(["profile", "--config", str(config_file),
               "--data", str(pipeline_dir / "ds"),
               "--vel-model", str(pipeline_dir / "models" / "vel_model.dpc"),
               "--opt-model", str(pipeline_dir / "models" / "opt_model.dpc"),
               "--repeats", "2", "--out", str(out)])
    assert rc == 0
    rows = (out / "runtime.csv").read_text().strip().split("\n")
    assert len(rows) == 3


def test_malformed_config_exits_2_and_names_field(config_file, tmp_path, capsys):
    data = tiny_config_dict()
    data["processing"]["delay_bins"] = "lots"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    rc = main(["build-dataset", "--config", str(bad), "--out", str(tmp_path / "ds")])
    assert rc == 2
    assert "processing.delay_bins" in capsys.readouterr().err


def test_unknown_subcommand_nonzero():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate", "--config", "x"])
    assert exc.value.code != 0


def test_seed_override_changes_artifacts(config_file, tmp_path):
    outs = []
    for seed in (1, 2):
        out = tmp_path / f"pose_{seed}.dpc"
        main(["gen-motion", "--config", str(config_file), "--kind", "W+",
              "--seed", str(seed), "--out", str(out)])
        outs.append(PoseSequence.load(out).positions)
    assert not np.array_equal(outs[0], outs[1])
