import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from overseec.errors import (
    CoverageError,
    InvalidTilingError,
    RasterFormatError,
    ShapeMismatchError,
)
from overseec.raster import (
    AREAL_THRESHOLD,
    LINEAR_THRESHOLD,
    BinaryMask,
    ClassSpec,
    Costmap,
    Geometry,
    GridShape,
    ProbabilityMap,
    binarize,
    gate,
    mask_from_png,
    mask_png_bytes,
    plan_tiles,
    read_rf32,
    rf32_bytes,
    stitch,
)


class TestGridShape:
    def test_rejects_zero_dims(self):
        with pytest.raises(ValueError):
            GridShape(0, 4)
        with pytest.raises(ValueError):
            GridShape(4, 0)

    def test_contains(self):
        shape = GridShape(3, 5)
        assert shape.contains(0, 0)
        assert shape.contains(4, 2)
        assert not shape.contains(5, 2)
        assert not shape.contains(4, 3)
        assert not shape.contains(-1, 0)

    def test_diagonal(self):
        assert GridShape(3, 4).diagonal == 5.0


class TestRasterTypes:
    def test_probability_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            ProbabilityMap(np.array([[0.5, 1.2]]))
        with pytest.raises(ValueError):
            ProbabilityMap(np.array([[-0.1, 0.2]]))

    def test_values_are_immutable(self):
        p = ProbabilityMap(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            p.values[0, 0] = 1.0

    def test_costmap_rejects_non_2d(self):
        with pytest.raises(ValueError):
            Costmap(np.zeros(4))

    def test_class_spec_coerces_geometry(self):
        spec = ClassSpec("road", "linear")
        assert spec.geometry is Geometry.LINEAR
        with pytest.raises(ValueError):
            ClassSpec("", Geometry.AREAL)


class TestPlanTiles:
    def test_single_tile_exact_fit(self):
        tiles = plan_tiles(GridShape(512, 512), 512, 0)
        assert len(tiles) == 1
        assert (tiles[0].row0, tiles[0].col0) == (0, 0)
        assert (tiles[0].height, tiles[0].width) == (512, 512)

    def test_final_origin_clamps_to_border(self):
        tiles = plan_tiles(GridShape(512, 896), 512, 128)
        assert [(t.row0, t.col0) for t in tiles] == [(0, 0), (0, 384)]

    def test_small_image_single_clamped_tile(self):
        tiles = plan_tiles(GridShape(300, 300), 512, 64)
        assert len(tiles) == 1
        assert (tiles[0].height, tiles[0].width) == (300, 300)

    def test_row_major_order_and_indices(self):
        tiles = plan_tiles(GridShape(100, 100), 60, 20)
        assert [t.index for t in tiles] == list(range(len(tiles)))
        origins = [(t.row0, t.col0) for t in tiles]
        assert origins == sorted(origins)

    def test_overlap_bounds(self):
        with pytest.raises(InvalidTilingError):
            plan_tiles(GridShape(64, 64), 32, 32)
        with pytest.raises(InvalidTilingError):
            plan_tiles(GridShape(64, 64), 32, -1)
        with pytest.raises(InvalidTilingError):
            plan_tiles(GridShape(64, 64), 0, 0)

    @given(
        height=st.integers(1, 300),
        width=st.integers(1, 300),
        tile=st.integers(1, 128),
        overlap_frac=st.floats(0, 0.99),
    )
    @settings(max_examples=200, deadline=None)
    def test_every_pixel_covered(self, height, width, tile, overlap_frac):
        overlap = int(tile * overlap_frac)
        count = np.zeros((height, width), dtype=int)
        for spec in plan_tiles(GridShape(height, width), tile, overlap):
            assert 0 <= spec.row0 and spec.row0 + spec.height <= height
            assert 0 <= spec.col0 and spec.col0 + spec.width <= width
            count[spec.slices] += 1
        assert (count >= 1).all()


class TestStitch:
    def test_identity_single_tile(self, rng):
        values = rng.random((20, 30))
        [spec] = plan_tiles(GridShape(20, 30), 64, 0)
        out = stitch([(spec, ProbabilityMap(values))], GridShape(20, 30))
        np.testing.assert_array_equal(out.values, values)

    def test_two_constant_tiles_average_in_overlap(self):
        shape = GridShape(4, 10)
        tiles = plan_tiles(shape, 6, 2)
        assert len(tiles) == 2
        maps = [ProbabilityMap(np.full((t.height, t.width), v)) for t, v in zip(tiles, (0.2, 0.6))]
        out = stitch(list(zip(tiles, maps)), shape).values
        assert np.allclose(out[:, :4], 0.2)
        assert np.allclose(out[:, 4:6], 0.4)
        assert np.allclose(out[:, 6:], 0.6)

    def test_three_tiles_match_per_pixel_mean_oracle(self, rng):
        # 1-D strip, overlapping constant tiles vs a hand accumulation loop
        shape = GridShape(1, 12)
        specs = plan_tiles(shape, 6, 3)
        consts = [0.1, 0.5, 0.9][: len(specs)]
        tiles = [
            (s, ProbabilityMap(np.full((s.height, s.width), c)))
            for s, c in zip(specs, consts)
        ]
        oracle_sum = np.zeros(12)
        oracle_n = np.zeros(12)
        for spec, pmap in tiles:
            for local_col in range(spec.width):
                oracle_sum[spec.col0 + local_col] += pmap.values[0, local_col]
                oracle_n[spec.col0 + local_col] += 1
        out = stitch(tiles, shape).values[0]
        np.testing.assert_allclose(out, oracle_sum / oracle_n, atol=0)

    def test_duplicate_tile_set_idempotent(self, rng):
        shape = GridShape(9, 9)
        specs = plan_tiles(shape, 5, 2)
        tiles = [(s, ProbabilityMap(rng.random((s.height, s.width)))) for s in specs]
        once = stitch(tiles, shape)
        twice = stitch(tiles + tiles, shape)
        np.testing.assert_allclose(twice.values, once.values, atol=1e-15)

    def test_non_overlapping_mosaic_bit_exact(self, rng):
        shape = GridShape(8, 8)
        specs = plan_tiles(shape, 4, 0)
        tiles = [(s, ProbabilityMap(rng.random((4, 4)))) for s in specs]
        out = stitch(tiles, shape)
        for spec, pmap in tiles:
            assert (out.values[spec.slices] == pmap.values).all()

    def test_uncovered_pixel_raises(self):
        spec = plan_tiles(GridShape(4, 4), 4, 0)[0]
        with pytest.raises(CoverageError):
            stitch([(spec, ProbabilityMap(np.zeros((4, 4))))], GridShape(4, 8))

    def test_tile_shape_mismatch_raises(self):
        spec = plan_tiles(GridShape(4, 4), 4, 0)[0]
        with pytest.raises(ShapeMismatchError):
            stitch([(spec, ProbabilityMap(np.zeros((3, 4))))], GridShape(4, 4))

    def test_empty_tile_set_raises(self):
        with pytest.raises(CoverageError):
            stitch([], GridShape(2, 2))


class TestBinarize:
    def test_uniform_half_linear_all_ones(self):
        p = ProbabilityMap(np.full((5, 5), 0.5))
        assert binarize(p, Geometry.LINEAR).values.all()

    def test_uniform_half_areal_all_zeros(self):
        p = ProbabilityMap(np.full((5, 5), 0.5))
        assert not binarize(p, Geometry.AREAL).values.any()

    def test_thresholds_inclusive(self):
        p = ProbabilityMap(np.array([[LINEAR_THRESHOLD, AREAL_THRESHOLD]]))
        assert binarize(p, Geometry.LINEAR).values.all()
        assert binarize(p, Geometry.AREAL).values.tolist() == [[False, True]]

    def test_zero_map_empty_for_both(self):
        p = ProbabilityMap(np.zeros((3, 3)))
        assert not binarize(p, Geometry.LINEAR).values.any()
        assert not binarize(p, Geometry.AREAL).values.any()

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_monotone(self, a, b):
        lo, hi = min(a, b), max(a, b)
        for geometry in Geometry:
            low = binarize(ProbabilityMap(np.array([[lo]])), geometry).values[0, 0]
            high = binarize(ProbabilityMap(np.array([[hi]])), geometry).values[0, 0]
            assert high or not low


class TestGate:
    def test_all_ones_identity(self, rng):
        p = ProbabilityMap(rng.random((4, 4)))
        out = gate(p, BinaryMask(np.ones((4, 4), dtype=bool)))
        np.testing.assert_array_equal(out.values, p.values)

    def test_all_zeros(self, rng):
        p = ProbabilityMap(rng.random((4, 4)))
        assert not gate(p, BinaryMask(np.zeros((4, 4), dtype=bool))).values.any()

    def test_single_pixel(self):
        p = np.zeros((4, 5))
        p[2, 3] = 0.7
        mask = np.zeros((4, 5), dtype=bool)
        mask[2, 3] = True
        out = gate(ProbabilityMap(p), BinaryMask(mask)).values
        assert out[2, 3] == 0.7
        assert out.sum() == 0.7

    def test_gate_below_p_and_idempotent(self, rng):
        p = ProbabilityMap(rng.random((6, 6)))
        m = BinaryMask(rng.random((6, 6)) < 0.5)
        once = gate(p, m)
        assert (once.values <= p.values).all()
        np.testing.assert_array_equal(gate(once, m).values, once.values)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            gate(ProbabilityMap(np.zeros((2, 2))), BinaryMask(np.zeros((2, 3), dtype=bool)))


class TestRf32:
    def test_round_trip(self, rng):
        values = rng.random((7, 11)).astype(np.float32)
        data = rf32_bytes(values)
        back = read_rf32(data)
        assert back.shape == (7, 11)
        np.testing.assert_array_equal(back, values)

    def test_header_layout(self):
        data = rf32_bytes(np.zeros((2, 3), dtype=np.float32))
        assert data[:4] == b"RF32"
        assert int.from_bytes(data[4:8], "little") == 2
        assert int.from_bytes(data[8:12], "little") == 3
        assert len(data) == 12 + 4 * 6

    def test_bad_magic(self):
        with pytest.raises(RasterFormatError):
            read_rf32(b"NOPE" + bytes(20))

    def test_truncated_payload(self):
        data = rf32_bytes(np.zeros((2, 2), dtype=np.float32))
        with pytest.raises(RasterFormatError):
            read_rf32(data[:-1])

    def test_zero_dimension_rejected(self):
        import struct

        data = b"RF32" + struct.pack("<II", 0, 4)
        with pytest.raises(RasterFormatError):
            read_rf32(data)

    def test_file_object_source(self, rng):
        values = rng.random((3, 3)).astype(np.float32)
        back = read_rf32(io.BytesIO(rf32_bytes(values)))
        np.testing.assert_array_equal(back, values)


class TestMaskPng:
    def test_round_trip(self, rng):
        mask = BinaryMask(rng.random((9, 13)) < 0.4)
        back = mask_from_png(mask_png_bytes(mask))
        np.testing.assert_array_equal(back.values, mask.values)

    def test_garbage_rejected(self):
        with pytest.raises(RasterFormatError):
            mask_from_png(b"not a png")
