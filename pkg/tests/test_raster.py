"""Tests for graymap and pixmap export."""

import numpy as np
import pytest

from intentforge.engine.builder import FigureBuilder, FigureDocument
from intentforge.engine.config import RenderConfig
from intentforge.engine.models import Scene
from intentforge.engine.raster import (
    array_to_pgm,
    mask_to_pgm,
    pdf_to_ppm,
    to_gray,
    upscale,
)


def _pnm_header(path) -> list[bytes]:
    return path.read_bytes().split(maxsplit=4)[:4]


class TestGray:
    def test_linear_range(self):
        gray = to_gray(np.array([[0.0, 0.5, 1.0]]))
        assert gray.tolist() == [[0, 128, 255]]

    def test_non_finite_black(self):
        gray = to_gray(np.array([[np.inf, 1.0, 3.0]]))
        assert gray[0, 0] == 0
        assert gray[0, 2] == 255

    def test_vmax_clips(self):
        assert to_gray(np.array([[0.0, 4.0]]), vmax=2.0).tolist() == [[0, 255]]

    def test_constant_array(self):
        assert to_gray(np.full((2, 2), 7.0)).tolist() == [[0, 0], [0, 0]]

    def test_upscale(self):
        out = upscale(np.array([[1, 2]], dtype=np.uint8), 3)
        assert out.shape == (3, 6)
        assert (out[:, :3] == 1).all() and (out[:, 3:] == 2).all()


class TestFiles:
    def test_array_to_pgm_size(self, tmp_path):
        path = tmp_path / "heat.pgm"
        size = array_to_pgm(np.random.default_rng(0).random((5, 7)), path, cell_size=4)
        assert size == (28, 20)
        assert _pnm_header(path) == [b"P5", b"28", b"20", b"255"]

    def test_mask_to_pgm(self, tmp_path):
        cmap = np.array([[1, -1], [-1, 1]])
        path = tmp_path / "mask.pgm"
        assert mask_to_pgm(cmap, path, cell_size=2) == (4, 4)
        pixels = path.read_bytes()[-16:]
        assert pixels[0] == 255 and pixels[2] == 0

    def test_single_page_raster(self, tmp_path):
        pdf = FigureBuilder(RenderConfig(cell_size=5)).build(FigureDocument().add("mask", scene=Scene.open(6, 4)))
        written = pdf_to_ppm(pdf, tmp_path / "fig")
        assert [p.name for p in written] == ["fig.ppm"]
        assert _pnm_header(written[0])[:3] == [b"P6", b"30", b"20"]

    def test_multi_page_raster(self, tmp_path):
        scene = Scene.open(3, 3)
        pdf = FigureBuilder(RenderConfig(cell_size=2)).build(
            FigureDocument().add("mask", scene=scene).add("mask", scene=scene),
        )
        written = pdf_to_ppm(pdf, tmp_path / "fig")
        assert [p.name for p in written] == ["fig-01.ppm", "fig-02.ppm"]


@pytest.mark.parametrize("cell_size", [1, 3])
def test_raster_matches_lattice(tmp_path, cell_size):
    size = array_to_pgm(np.zeros((4, 9)), tmp_path / "z.pgm", cell_size=cell_size)
    assert size == (9 * cell_size, 4 * cell_size)
