import os
import shutil

import numpy as np
import pytest

from settling_plots import KINDS, FigureSpec, SchemaError, render
from settling_plots.cli import main as cli_main

DATA = os.path.join(os.path.dirname(__file__), "data", "records.csv")

HEADER = ("schema_version,generator,N,r,lambda,seed,E_freespace,E_torus,"
          "E_defect,E_vstar,Vsed_est,VSt,norm_rho_sigma,norm_sigma_n,"
          "wall_s,status")


def write_csv(path, rows):
    with open(path, "w") as fh:
        fh.write(HEADER + "\n")
        for row in rows:
            fh.write(row + "\n")


def synthetic_row(N, value):
    return (f"1,lattice,{N},0.05,,,nan,nan,nan,nan,{value},1.0,"
            f"{value},{value},0,ok")


def test_empty_csv_renders_no_data(tmp_path):
    csv_path = tmp_path / "empty.csv"
    write_csv(csv_path, [])
    out = tmp_path / "fig.png"
    path, series = render(FigureSpec(str(csv_path), "scaling", str(out)))
    assert os.path.getsize(path) > 0
    assert series == {}


def test_missing_column_named_in_error(tmp_path):
    csv_path = tmp_path / "bad.csv"
    csv_path.write_text("N,foo\n1,2\n")
    with pytest.raises(SchemaError, match="Vsed_est"):
        render(FigureSpec(str(csv_path), "scaling", str(tmp_path / "f.png")))


def test_synthetic_slope_guide_overlaps(tmp_path):
    # value = N^{-1/3}: the -1/3 norms guide anchored at the first point
    # must coincide with the data everywhere
    csv_path = tmp_path / "syn.csv"
    rows = [synthetic_row(n, n ** (-1 / 3)) for n in (10, 100, 1000, 10000)]
    write_csv(csv_path, rows)
    _, series = render(FigureSpec(str(csv_path), "norms",
                                  str(tmp_path / "syn.png")))
    Ns, vals = series["norm_rho_sigma"]
    guide = vals[0] * (Ns / Ns[0]) ** (-1 / 3)
    np.testing.assert_allclose(vals, guide, rtol=1e-12)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("ext", ["png", "svg"])
def test_demo_sweep_four_kinds(tmp_path, kind, ext):
    out = tmp_path / f"{kind}.{ext}"
    path, series = render(FigureSpec(DATA, kind, str(out)))
    assert os.path.getsize(path) > 1000
    assert series, f"demo sweep should produce data for {kind}"


@pytest.mark.parametrize("ext", ["png", "svg"])
def test_pixel_identical_rerenders(tmp_path, ext):
    a = tmp_path / f"a.{ext}"
    b = tmp_path / f"b.{ext}"
    for kind in KINDS:
        render(FigureSpec(DATA, kind, str(a)))
        render(FigureSpec(DATA, kind, str(b)))
        assert a.read_bytes() == b.read_bytes(), kind


def test_inputs_read_only(tmp_path):
    src = tmp_path / "records.csv"
    shutil.copy(DATA, src)
    before = src.read_bytes()
    render(FigureSpec(str(src), "scaling", str(tmp_path / "f.png")))
    assert src.read_bytes() == before


class TestCli:
    def test_render_ok(self, tmp_path, capsys):
        out = tmp_path / "fig.png"
        code = cli_main(["render", "--csv", DATA, "--kind", "gap",
                         "--out", str(out)])
        assert code == 0
        assert out.exists()

    def test_schema_error_exit(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,2\n")
        code = cli_main(["render", "--csv", str(bad), "--kind", "scaling",
                         "--out", str(tmp_path / "f.png")])
        assert code == 2

    def test_hasimoto_values(self, tmp_path):
        _, series = render(FigureSpec(DATA, "hasimoto",
                                      str(tmp_path / "h.png")))
        # a(r) near the simple-cubic coefficient for the fixture's r ladder
        assert np.all((series["a"] > 2.7) & (series["a"] < 2.9))
