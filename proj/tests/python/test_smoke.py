import numpy as np
import pytest

import posestar


def test_parse_instruction():
    info = posestar.parse_instruction("belly-length blouse")
    assert info["garment_class"] == "blouse_shirt"
    assert info["length_anchor"] == "Belly"
    assert "Neck" in info["tokens"]["star"]


def test_unknown_garment_raises():
    with pytest.raises(posestar.InputError):
        posestar.parse_instruction("a hat")


def test_astd_round_trip(tmp_path):
    arr = np.random.default_rng(0).random((3, 2, 16, 16), dtype=np.float32)
    path = tmp_path / "a.astd"
    posestar.write_astd(path, arr, ["Neck", "blouse"], ["star", "clothes"])
    back, names, kinds = posestar.read_astd(path)
    assert back.shape == (3, 2, 16, 16)
    np.testing.assert_array_equal(back, arr)
    assert names == ["Neck", "blouse"]
    assert kinds == ["star", "clothes"]


def test_synth_and_run(tmp_path):
    posestar.synth(tmp_path, pose="standing", seed=7, instruction="belly-length blouse")
    for name in ["image.png", "attn.astd", "self.astd", "keypoints.json", "fixture.json"]:
        assert (tmp_path / name).exists()
    results = posestar.run_fixture(tmp_path, {"window": 3, "r_mode": "average"})
    assert len(results) == 1
    instruction, mask, report = results[0]
    assert instruction == "belly-length blouse"
    assert mask.shape == (256, 256)
    assert mask.dtype == np.uint8
    assert report["iou"] > 0.5


def test_bad_config_raises(tmp_path):
    posestar.synth(tmp_path, seed=3)
    with pytest.raises(posestar.ParamError):
        posestar.run_fixture(tmp_path, {"beta": 2.0})


def test_iou():
    a = np.zeros((4, 4), np.uint8)
    b = np.zeros((4, 4), np.uint8)
    a[:2] = 1
    b[1:3] = 1
    assert posestar.iou(a, b) == pytest.approx(1 / 3)
