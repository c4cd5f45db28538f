import json

import numpy as np
import torch

from conftest import tiny_model
from depsem.deptree import Sentence
from depsem.heatmap import (attention_maps, export_heatmaps, pearson, read_pgm, row_normalize, write_matrix_json,
                            write_pgm)
from depsem.layers import sinusoidal_positions


def test_pearson_and_row_normalize():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert abs(pearson(a, 2 * a + 1) - 1.0) < 1e-12
    assert abs(pearson(a, -a) + 1.0) < 1e-12
    assert pearson(a, np.ones_like(a)) == 0.0
    assert np.allclose(row_normalize(a).sum(axis=1), 1.0)


def test_pgm_round_trip_scales_to_full_range(tmp_path):
    m = np.array([[0.0, 0.5], [1.0, 0.25]])
    write_pgm(tmp_path / "m.pgm", m, cell=2)
    img = read_pgm(tmp_path / "m.pgm")
    assert img.shape == (4, 4)
    assert img[0, 0] == 0 and img[2, 0] == 255 and img[0, 2] == 128


def test_matrix_json_layout(tmp_path):
    write_matrix_json(tmp_path / "m.json", "D", np.eye(2), ["a", "b"])
    data = json.loads((tmp_path / "m.json").read_text())
    assert data == {"name": "D", "rows": ["a", "b"], "cols": ["a", "b"], "shape": [2, 2],
                    "values": [[1.0, 0.0], [0.0, 1.0]]}


def test_maps_for_combined_model(tmp_path):
    model = tiny_model(pascal=True, ca=True)
    s = Sentence(["a", "b", "c"], [1, 1, 1])
    maps = attention_maps(model, s)
    assert {"layer0_head0", "layer0_head1", "layer0_mean", "layer1_mean", "C_layer0", "C_layer1",
            "D", "D_sym"} <= set(maps)
    assert np.allclose(maps["D_sym"], maps["D_sym"].T)
    assert np.allclose(maps["layer0_mean"], (maps["layer0_head0"] + maps["layer0_head1"]) / 2)
    written = export_heatmaps(maps, s.tokens, tmp_path)
    assert len(written) == 2 * len(maps)


def test_baseline_maps_have_no_prior():
    maps = attention_maps(tiny_model(), Sentence(["a", "b"]))
    assert not any(k.startswith("C_") for k in maps) and "D" not in maps


def test_sinusoidal_positions():
    pe = sinusoidal_positions(4, 6)
    assert pe.shape == (4, 6)
    assert torch.equal(pe[0, 0::2], torch.zeros(3, dtype=pe.dtype))
    assert torch.equal(pe[0, 1::2], torch.ones(3, dtype=pe.dtype))
    assert abs(float(pe[1, 0]) - np.sin(1.0)) < 1e-12
