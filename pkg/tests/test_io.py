import json
import math
import re

import numpy as np
import pytest

from restproj.analysis import make_profile
from restproj.construct import (
    GridSet, generate_cantor_product, generate_percolation_set, segment_set, uniform_family,
)
from restproj.io import (
    FormatError, read_family_csv, read_gridset_binary, read_gridset_text, read_profile,
    write_family_csv, write_gridset_binary, write_gridset_text, write_mmp_report, write_profile,
)
from restproj.plots import emit_plots
from restproj.projection import mmp_experiment


@pytest.mark.parametrize("E", [
    generate_percolation_set(2, 4, 8, 3, seed=0),
    generate_cantor_product(3, 3, [0, 2], 2),
    segment_set(1, 2, 4, axis=0),
    GridSet(2, 2, 3, [[1, 2]]),
])
def test_gridset_round_trips(tmp_path, E):
    t = read_gridset_text(write_gridset_text(E, tmp_path / "e.txt"))
    b = read_gridset_binary(write_gridset_binary(E, tmp_path / "e.bin"))
    for F in (t, b):
        assert F == E
        assert F.reference_dim == pytest.approx(E.reference_dim) if E.reference_dim is not None \
            else F.reference_dim is None


def test_gridset_text_header(tmp_path):
    path = write_gridset_text(generate_cantor_product(1, 3, [0, 2], 2), tmp_path / "c.txt")
    lines = path.read_text().splitlines()
    assert lines[0].startswith("gridset d=1 M=3 depth=2 count=4")
    assert lines[1:] == ["0", "2", "6", "8"]


@pytest.mark.parametrize("text,line", [
    ("gridset d=2 M=2 depth=1 count=2\n0 0\n1\n", 3),
    ("gridset d=2 M=2 depth=1 count=1\nx 0\n", 2),
    ("grid d=2\n", 1),
    ("gridset d=2 M=2\n", 1),
])
def test_gridset_text_errors_name_the_line(tmp_path, text, line):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(FormatError, match=rf"bad\.txt:{line}:"):
        read_gridset_text(path)


def test_gridset_text_count_mismatch(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("gridset d=1 M=2 depth=2 count=3\n0\n1\n")
    with pytest.raises(FormatError, match="count"):
        read_gridset_text(path)


def test_gridset_binary_errors(tmp_path):
    path = write_gridset_binary(GridSet(2, 2, 3, [[1, 2], [3, 4]]), tmp_path / "e.bin")
    data = path.read_bytes()
    (tmp_path / "magic.bin").write_bytes(b"XXXX" + data[4:])
    (tmp_path / "short.bin").write_bytes(data[:-3])
    with pytest.raises(FormatError, match="magic"):
        read_gridset_binary(tmp_path / "magic.bin")
    with pytest.raises(FormatError):
        read_gridset_binary(tmp_path / "short.bin")


def test_family_round_trip(tmp_path):
    G = uniform_family(37)
    H = read_family_csv(write_family_csv(G, tmp_path / "f.csv"))
    # directions are renormalised on load
    assert np.allclose(G.directions, H.directions, rtol=0, atol=1e-15)
    assert np.array_equal(G.weights, H.weights)


def test_profile_round_trip_and_sidecar(tmp_path):
    prof = make_profile([1, 0.5, 0.25, 0.125], [1, 0.6, 0.3, 0.2], seed=4)
    path = write_profile(prof, tmp_path / "p", note="x")
    meta = json.loads(path.with_suffix(".json").read_text())
    assert meta["slope"] == pytest.approx(prof.slope)
    assert meta["r2"] == pytest.approx(prof.r2)
    assert meta["params"] == {"seed": 4} and meta["note"] == "x"
    back = read_profile(path)
    assert np.array_equal(back.scales, prof.scales)
    assert np.array_equal(back.values, prof.values)
    assert back.slope == prof.slope


def test_unfitted_profile_sidecar_uses_null(tmp_path):
    path = write_profile(make_profile([1, 0.5, 0.25], [1, 0, 0]), tmp_path / "p")
    assert json.loads(path.with_suffix(".json").read_text())["slope"] is None


@pytest.mark.parametrize("text,line", [
    ("scale,value\n1,2\n0.5,abc\n", 3),
    ("scale,value\n1,2,3\n", 2),
    ("s,v\n1,2\n", 1),
])
def test_profile_errors_name_the_line(tmp_path, text, line):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(FormatError, match=rf"bad\.csv:{line}:"):
        read_profile(path)


def test_mmp_report_files(tmp_path):
    E = segment_set(3, 2, 6, axis=2)
    rep = mmp_experiment(uniform_family(100), E, "dimension", 10, seed=0)
    json_path, csv_path = write_mmp_report(rep, tmp_path / "r")
    doc = json.loads(json_path.read_text())
    assert doc["pass_fraction"] == rep.pass_fraction
    assert len(doc["records"]) == 10
    assert len(csv_path.read_text().splitlines()) == 11


# --- plots ----------------------------------------------------------------------

def test_plot_slope_annotation_matches_sidecar(tmp_path):
    prof = make_profile([1, 0.5, 0.25, 0.125, 0.0625], [1.0, 0.55, 0.24, 0.13, 0.06])
    path = write_profile(prof, tmp_path / "p")
    (svg,) = emit_plots([path])
    assert svg == tmp_path / "p.svg"
    meta = json.loads(path.with_suffix(".json").read_text())
    assert f"slope = {meta['slope']:.3f}" in svg.read_text()


def test_plot_markers_count_exact(tmp_path):
    prof = make_profile([1, 0.5, 0.25, 0.125, 0.0625], [1.0, 0.55, 0.24, 0.13, 0.06])
    (svg,) = emit_plots([write_profile(prof, tmp_path / "p")], tmp_path / "figs")
    text = svg.read_text()
    groups = re.findall(r'<g id="(line2d_\d+)">(.*?)</g>', text, flags=re.S)
    data = [body for _, body in groups if "clip-path" in body]
    marker_groups = [b for b in data if "<use" in b]
    line_groups = [b for b in data if "<path" in b and "<use" not in b]
    assert len(marker_groups) == 1 and marker_groups[0].count("<use") == 5
    assert len(line_groups) == 1


def test_plot_refuses_empty_profile(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("scale,value\n")
    with pytest.raises(FormatError, match="empty profile"):
        emit_plots([path])


def test_plot_output_is_deterministic(tmp_path):
    prof = make_profile([1, 0.5, 0.25], [1.0, 0.5, 0.25])
    path = write_profile(prof, tmp_path / "p")
    a = emit_plots([path], tmp_path / "a")[0].read_bytes()
    b = emit_plots([path], tmp_path / "b")[0].read_bytes()
    assert a == b
    assert not math.isnan(prof.slope)
