import json
import math

import numpy as np
import pytest

from gncpnp.core import Pose
from gncpnp.errors import EmptyModel, InvalidIntrinsics, ParseError
from gncpnp.io import (
    load_correspondences,
    load_model_points,
    load_truth,
    pose_from_dict,
    pose_to_json,
    save_correspondences,
)
from gncpnp.synth import SceneConfig, generate

INTRINSICS = {"fx": 600, "fy": 600, "cx": 320, "cy": 240, "width": 640, "height": 480}


def write(tmp_path, doc, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return p


def minimal(n=4, **extra):
    items = [{"pixel": [300.0 + i, 200.0], "point": [0.01 * i, 0.0, 0.0]} for i in range(n)]
    for key, value in extra.items():
        items[0][key] = value
    return {"intrinsics": dict(INTRINSICS), "correspondences": items}


def test_minimal_file(tmp_path):
    k, c = load_correspondences(write(tmp_path, minimal()))
    assert len(c) == 4
    assert k.image_width == 640
    np.testing.assert_array_equal(c.geom_weights, 1.0)


def test_weight_out_of_range(tmp_path):
    with pytest.raises(ParseError) as info:
        load_correspondences(write(tmp_path, minimal(geom_weight=1.5)))
    assert info.value.field == "correspondences[0].geom_weight"


def test_syntax_error_reports_line(tmp_path):
    with pytest.raises(ParseError) as info:
        load_correspondences(write(tmp_path, '{\n  "intrinsics": {,\n}'))
    assert info.value.line == 2


@pytest.mark.parametrize(
    "mutate, field",
    [
        (lambda d: d["correspondences"][1].update(pixel=[1.0]), "correspondences[1].pixel"),
        (lambda d: d["correspondences"][2].update(point="x"), "correspondences[2].point"),
        (lambda d: d["intrinsics"].pop("cy"), "intrinsics"),
        (lambda d: d.pop("correspondences"), "correspondences"),
    ],
)
def test_field_diagnostics(tmp_path, mutate, field):
    doc = minimal()
    mutate(doc)
    with pytest.raises(ParseError) as info:
        load_correspondences(write(tmp_path, doc))
    assert info.value.field == field


def test_bad_intrinsics(tmp_path):
    doc = minimal()
    doc["intrinsics"] = dict(INTRINSICS, fx=0)
    with pytest.raises(InvalidIntrinsics):
        load_correspondences(write(tmp_path, doc))


def test_round_trip(tmp_path):
    s = generate(SceneConfig(outlier_fraction=0.2, rng_seed=1))
    c = s.correspondences.with_weights(np.linspace(0, 1, 100))
    p = tmp_path / "scene.json"
    save_correspondences(p, s.intrinsics, c, s.truth, s.outlier_truth_mask)
    k, back = load_correspondences(p)
    assert k == s.intrinsics
    np.testing.assert_array_equal(back.pixels, c.pixels)
    np.testing.assert_array_equal(back.points, c.points)
    np.testing.assert_array_equal(back.geom_weights, c.geom_weights)
    truth, mask = load_truth(p)
    assert truth == s.truth
    np.testing.assert_array_equal(mask, s.outlier_truth_mask)
    assert load_truth(write(tmp_path, minimal(), "plain.json")) is None


def test_pose_json_round_trip():
    s = generate(SceneConfig(rng_seed=2))
    doc = json.loads(pose_to_json(s.truth))
    assert len(doc["rotation"]) == 9 and len(doc["translation"]) == 3
    assert pose_from_dict(doc) == s.truth


def test_csv_model(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("x,y,z\n0,0,0\n1,0,0\n# comment\n0,1,0\n")
    m = load_model_points(p)
    assert len(m) == 3
    assert m.diameter == pytest.approx(math.sqrt(2))


def test_csv_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("0,0,0\n1,0\n")
    with pytest.raises(ParseError) as info:
        load_model_points(p)
    assert info.value.line == 2
    p.write_text("x,y,z\n")
    with pytest.raises(EmptyModel):
        load_model_points(p)


CUBE_PLY = """ply
format ascii 1.0
comment unit cube
element vertex 8
property float x
property float y
property float z
element face 0
property list uchar int vertex_indices
end_header
""" + "".join(f"{x} {y} {z}\n" for x in (0, 1) for y in (0, 1) for z in (0, 1))


def test_ascii_ply_cube(tmp_path):
    p = tmp_path / "cube.ply"
    p.write_text(CUBE_PLY)
    m = load_model_points(p)
    assert len(m) == 8
    assert m.diameter == pytest.approx(math.sqrt(3), abs=1e-12)


def test_binary_ply_rejected(tmp_path):
    p = tmp_path / "cube.ply"
    header = CUBE_PLY.split("end_header")[0].replace("ascii", "binary_little_endian") + "end_header\n"
    p.write_bytes(header.encode() + np.zeros(24, dtype="<f4").tobytes())
    with pytest.raises(ParseError):
        load_model_points(p)
