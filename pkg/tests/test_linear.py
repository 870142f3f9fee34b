import math

import numpy as np
import pytest

import ellipticmc as emc
from ellipticmc import linear, sampling
from ellipticmc.errors import InputError, NumericalError
from oracles import (
    ball_mean_exit_time,
    newtonian_potential_unit_ball,
    poisson_upper_cap,
    radial_schrodinger,
)

# frozen from the Poisson-kernel quadrature oracle (tests/oracles.py)
POISSON_STEP_AT_HALF = 0.8291796067500632


def step3(pts):
    return (pts[:, 2] > 0).astype(float)


def ones(pts):
    return np.ones(len(pts))


class TestGreenKernel:
    def test_branches(self):
        assert emc.green_kernel(3, [2.0, 0, 0]) == 2.0
        assert emc.green_kernel(2, [1.0, 0]) == 0.0
        assert emc.green_kernel(5, [0, 2.0, 0, 0, 0]) == 8.0
        assert emc.green_kernel(1, [-0.5]) == 0.5

    def test_singularity(self):
        with pytest.raises(NumericalError):
            emc.green_kernel(3, np.zeros(3))

    def test_constant(self):
        assert emc.GreenConstants(3).c == pytest.approx(1 / (2 * math.pi), rel=1e-15)
        assert emc.GreenConstants(4).c == pytest.approx(
            math.gamma(1.0) / (2 * math.pi**2), rel=1e-15
        )


class TestHarmonicExtension:
    def test_linear_datum(self, unit_ball, rng):
        x = np.array([0.3, 0.1, 0.0])
        est = emc.harmonic_extension(
            unit_ball, lambda p: p[:, 0], x, 10_000, "wos", rng.keyed("lin")
        )
        assert abs(est.value - 0.3) <= 3 * est.stderr
        assert est.n_samples == 10_000

    def test_step_at_origin(self, unit_ball, rng):
        est = emc.harmonic_extension(
            unit_ball, step3, np.zeros(3), 10_000, "wos", rng.keyed("step0")
        )
        assert abs(est.value - 0.5) <= 3 * est.stderr

    def test_step_against_poisson_oracle(self, unit_ball, rng):
        x = np.array([0.0, 0.0, 0.5])
        est = emc.harmonic_extension(
            unit_ball, step3, x, 20_000, "wos", rng.keyed("stepz")
        )
        want = poisson_upper_cap(0.5)
        assert want == pytest.approx(POISSON_STEP_AT_HALF, abs=1e-12)
        assert abs(est.value - want) <= 3 * est.stderr

    def test_value_within_data_range(self, unit_ball, rng):
        f = lambda p: 2.0 + p[:, 0]  # range [1, 3]
        est = emc.harmonic_extension(
            unit_ball, f, np.array([0.2, -0.4, 0.1]), 5000, "wos", rng.keyed("rng")
        )
        assert 1.0 - 3 * est.stderr <= est.value <= 3.0 + 3 * est.stderr

    def test_mean_value_property_shared_seed(self, unit_ball, rng):
        # from the center, WoS terminates in one jump: its exit points must
        # be the direct uniform-sphere sample of the same stream
        stream = rng.keyed("mvp")
        pts, steps = sampling.wos_exit_batch(unit_ball, np.zeros(3), 1e-4, stream, 4000)
        direct = sampling.uniform_sphere(stream.generator(), 4000, 3)
        assert np.all(steps == 1)
        assert np.allclose(pts, direct, atol=1e-12)
        f = lambda p: p[:, 0] ** 2 + 0.5 * p[:, 2]
        assert np.mean(f(pts)) == pytest.approx(np.mean(f(direct)), abs=1e-13)


class TestGreenPotential:
    def test_constant_one_center(self, unit_ball, rng):
        dt = 1e-3
        est = emc.green_potential(
            unit_ball, ones, np.zeros(3), 20_000, dt, rng.keyed("g1"), bridge=True
        )
        assert abs(est.value - ball_mean_exit_time(0.0)) <= 3 * est.stderr + 0.5 * dt

    def test_constant_one_off_center(self, unit_ball, rng):
        dt = 1e-3
        x = np.array([0.8, 0.0, 0.0])
        est = emc.green_potential(
            unit_ball, ones, x, 20_000, dt, rng.keyed("g08"), bridge=True
        )
        assert abs(est.value - 0.12) <= 3 * est.stderr + 0.5 * dt

    def test_zero_exact(self, unit_ball, rng):
        zero = lambda p: np.zeros(len(p))
        est = emc.green_potential(unit_ball, zero, np.zeros(3), 500, 1e-2, rng.keyed("g0"))
        assert est.value == 0.0

    def test_boundary_decay(self, unit_ball, rng):
        # Gq -> 0 at the boundary: at |x| = 0.99 the value is below 0.01
        x = np.array([0.0, 0.0, 0.99])
        est = emc.green_potential(
            unit_ball, ones, x, 10_000, 1e-4, rng.keyed("gdecay"), bridge=True
        )
        want = ball_mean_exit_time(0.99)
        assert abs(est.value - want) <= 3 * est.stderr + 2e-4
        assert est.value <= 0.01 + 3 * est.stderr


class TestSchrodingerSolution:
    def test_zero_weight_reduces_to_harmonic(self, unit_ball, rng):
        # identical stream keys couple the paths exactly
        stream = rng.keyed("sch0")
        zero = lambda p: np.zeros(len(p))
        f = lambda p: 2.0 + p[:, 0]
        a = emc.schrodinger_solution(unit_ball, zero, f, np.zeros(3), 2000, 1e-3, stream)
        b = emc.harmonic_extension(unit_ball, f, np.zeros(3), 2000, "em", stream, dt=1e-3)
        assert a.value == b.value

    def test_radial_oracle_center(self, unit_ball, rng):
        dt = 5e-4
        q = lambda p: -0.5 * ones(p)
        est = emc.schrodinger_solution(
            unit_ball, q, ones, np.zeros(3), 20_000, dt, rng.keyed("schc"),
            bridge=True,
        )
        assert abs(est.value - radial_schrodinger(0.0, 0.5)) <= 3 * est.stderr + math.sqrt(dt) / 10

    @pytest.mark.parametrize("r", [0.3, 0.6])
    def test_radial_oracle_off_center(self, unit_ball, rng, r):
        dt = 5e-4
        q = lambda p: -0.5 * ones(p)
        est = emc.schrodinger_solution(
            unit_ball, q, ones, np.array([r, 0, 0]), 20_000, dt,
            rng.keyed("schr", point=int(10 * r)), bridge=True,
        )
        assert abs(est.value - radial_schrodinger(r, 0.5)) <= 3 * est.stderr + math.sqrt(dt) / 10

    def test_positive_weight_rejected(self, unit_ball, rng):
        q = lambda p: 0.1 * ones(p)
        with pytest.raises(InputError):
            emc.schrodinger_solution(
                unit_ball, q, ones, np.zeros(3), 100, 1e-2, rng.keyed("qpos")
            )

    def test_negative_boundary_data_rejected(self, unit_ball, rng):
        zero = lambda p: np.zeros(len(p))
        f = lambda p: p[:, 0]  # takes negative values on the sphere
        with pytest.raises(InputError):
            emc.schrodinger_solution(
                unit_ball, zero, f, np.zeros(3), 500, 1e-2, rng.keyed("fneg")
            )


class TestFieldHarmonicExtension:
    def test_linear_datum_on_grid(self, unit_ball, rng):
        grid = unit_ball.interior_grid(0.5)
        fld = emc.field_harmonic_extension(
            unit_ball, lambda p: p[:, 0], grid, 4000, "wos", rng
        )
        assert len(fld.points) == 19
        assert np.all(np.abs(fld.values - grid[:, 0]) <= 3 * fld.stderrs + 1e-12)

    def test_constant_exact_with_wos(self, unit_ball, rng):
        grid = unit_ball.interior_grid(0.5)
        fld = emc.field_harmonic_extension(unit_ball, ones, grid, 100, "wos", rng)
        assert np.all(fld.values == 1.0)

    def test_step_monotone_on_axis(self, unit_ball, rng):
        zs = np.array([-0.5, -0.25, 0.0, 0.25, 0.5])
        pts = np.column_stack([np.zeros(5), np.zeros(5), zs])
        fld = emc.field_harmonic_extension(unit_ball, step3, pts, 20_000, "wos", rng)
        want = np.array([
            1 - poisson_upper_cap(0.5), 1 - poisson_upper_cap(0.25), 0.5,
            poisson_upper_cap(0.25), poisson_upper_cap(0.5),
        ])
        assert np.all(np.abs(fld.values - want) <= 3 * fld.stderrs)
        assert np.all(np.diff(fld.values) > 0)

    def test_threads_do_not_change_output(self, unit_ball, rng):
        grid = unit_ball.interior_grid(0.5)
        a = emc.field_harmonic_extension(
            unit_ball, step3, grid, 500, "wos", rng, threads=1
        )
        b = emc.field_harmonic_extension(
            unit_ball, step3, grid, 500, "wos", rng, threads=4
        )
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.stderrs, b.stderrs)
