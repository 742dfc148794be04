import io

import numpy as np
import pytest

from tcsde.brownian import BrownianPath, gaussian_increments, generate_path, write_knots_csv


class TestGeneration:
    def test_knot_count(self):
        p = generate_path(4, 1.0, 0.0, 1, 0)
        assert p.knot_count == 5
        assert p.horizon == 1.0

    def test_initial_value_exact(self):
        p = generate_path(8, 1.0, 3.5, 42, 0)
        assert p.values[0] == 3.5
        assert p.x0 == 3.5

    def test_determinism_same_key(self):
        a = generate_path(16, 2.0, 0.0, 7, 3)
        b = generate_path(16, 2.0, 0.0, 7, 3)
        np.testing.assert_array_equal(a.values, b.values)

    def test_distinct_samples_differ(self):
        a = generate_path(16, 1.0, 0.0, 7, 0)
        b = generate_path(16, 1.0, 0.0, 7, 1)
        assert not np.array_equal(a.values, b.values)

    def test_distinct_seeds_differ(self):
        a = generate_path(16, 1.0, 0.0, 7, 0)
        b = generate_path(16, 1.0, 0.0, 8, 0)
        assert not np.array_equal(a.values, b.values)

    def test_purpose_separates_streams(self):
        a = generate_path(16, 1.0, 0.0, 7, 0, purpose=0)
        b = generate_path(16, 1.0, 0.0, 7, 0, purpose=1)
        assert not np.array_equal(a.values, b.values)

    def test_extension_preserves_prefix(self):
        short = generate_path(32, 1.0, 0.5, 99, 4)
        long = short.extended(3.0)
        assert long.knot_count > short.knot_count
        np.testing.assert_array_equal(long.values[: short.knot_count], short.values)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            generate_path(0, 1.0, 0.0, 1, 0)
        with pytest.raises(ValueError):
            generate_path(4, 0.0, 0.0, 1, 0)
        with pytest.raises(ValueError):
            generate_path(4, 1.0, 0.0, -1, 0)

    def test_values_immutable(self):
        p = generate_path(4, 1.0, 0.0, 1, 0)
        with pytest.raises(ValueError):
            p.values[0] = 7.0

    def test_increment_variance_quarter(self):
        # increments of an n=4 path are N(0, 1/4); check the sample variance
        # pooled over many regenerated paths to within 1%
        n, paths = 4, 200_000
        draws = np.empty((paths, 4))
        for i in range(paths):
            draws[i] = gaussian_increments(123, i, 4, n)
        var = draws.var(ddof=1)
        assert abs(var - 0.25) < 0.0025
        assert abs(draws.mean()) < 0.002


class TestInterpolation:
    def test_knot_identity_zero_error(self):
        p = generate_path(7, 1.0, 0.0, 5, 0)
        for k in range(p.knot_count):
            assert p.interpolate(k / 7) == p.values[k]

    def test_midpoint(self):
        p = generate_path(4, 1.0, 0.0, 5, 1)
        for k in range(4):
            t = (k / 4 + (k + 1) / 4) / 2
            expected = (p.values[k] + p.values[k + 1]) / 2
            assert p.interpolate(t) == pytest.approx(expected, rel=1e-14, abs=1e-15)

    def test_linearity_unit_path(self):
        p = BrownianPath(n=1, values=np.array([0.0, 1.0]), master_seed=0, sample_index=0)
        assert p.interpolate(0.25) == 0.25
        assert p.interpolate(0.5) == 0.5
        assert p.interpolate(1.0) == 1.0

    def test_out_of_range(self):
        p = generate_path(4, 1.0, 0.0, 5, 0)
        with pytest.raises(ValueError):
            p.interpolate(-0.01)
        with pytest.raises(ValueError):
            p.interpolate(1.01)

    def test_random_points_between_knots(self):
        p = generate_path(16, 1.0, 0.0, 5, 2)
        rng = np.random.default_rng(0)
        for t in rng.uniform(0, 1, 100):
            k = min(int(t * 16), 15)
            lo, hi = sorted((p.values[k], p.values[k + 1]))
            assert lo - 1e-12 <= p.interpolate(t) <= hi + 1e-12


class TestSubsampling:
    def test_identity_factor(self):
        p = generate_path(8, 1.0, 0.0, 3, 0)
        assert p.subsample(1) is p

    def test_every_other_knot_bit_exact(self):
        p = generate_path(8, 1.0, 0.0, 3, 0)
        q = p.subsample(2)
        assert q.n == 4
        np.testing.assert_array_equal(q.values, p.values[::2])

    def test_composition(self):
        p = generate_path(16, 1.0, 0.0, 3, 1)
        a = p.subsample(2).subsample(2)
        b = p.subsample(4)
        assert a.n == b.n == 4
        np.testing.assert_array_equal(a.values, b.values)

    def test_non_divisor_rejected(self):
        p = generate_path(8, 1.0, 0.0, 3, 0)
        with pytest.raises(ValueError):
            p.subsample(3)

    def test_coupling_interpolation_agrees_at_coarse_knots(self):
        n, m = 16, 4
        p = generate_path(n, 1.0, 0.0, 9, 0)
        q = p.subsample(m)
        for k in range(q.knot_count):
            assert q.interpolate(k / (n // m)) == p.interpolate(k * m / n)

    def test_subsampled_path_cannot_extend(self):
        p = generate_path(8, 1.0, 0.0, 3, 0)
        with pytest.raises(ValueError):
            p.subsample(2).extended(2.0)


class TestStatisticalSanity:
    def test_terminal_moments(self):
        # terminal value of x0=0, horizon-1 paths is N(0, 1): seeded check
        # over 1e5 paths, mean within 0.02 and variance within [0.97, 1.03]
        n, paths = 16, 100_000
        terminals = np.empty(paths)
        for i in range(paths):
            terminals[i] = gaussian_increments(2024, i, n, n).sum()
        assert abs(terminals.mean()) < 0.02
        assert 0.97 <= terminals.var(ddof=1) <= 1.03


class TestCsvDump:
    def test_columns_and_roundtrip(self):
        p = generate_path(4, 1.0, 0.25, 1, 0)
        buf = io.StringIO()
        write_knots_csv(p, buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "knot_index,time,value"
        assert len(lines) == 1 + p.knot_count
        k, t, v = lines[2].split(",")
        assert int(k) == 1
        assert float(t) == 0.25
        assert float(v) == p.values[1]
