import itertools

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from pair_upsampler import losses
from pair_upsampler.autodiff import Tape, finite_difference_gradient, relative_error
from pair_upsampler.common import exceptions
from pair_upsampler.common.enums import ShapeKinds
from pair_upsampler.geometry import sample_analytic_surface
from pair_upsampler.types import AnalyticShape


def brute_force_emd(a, b):
    cost = np.linalg.norm(a[:, None] - b[None], axis=-1)
    rows = np.arange(len(a))
    return min(cost[rows, list(perm)].sum() for perm in itertools.permutations(range(len(b)))) / len(a)


def brute_force_nearest(a, b):
    return np.array([min(np.linalg.norm(p - q) for q in b) for p in a])


class TestEmd:
    def test_identical(self, rng):
        a = rng.normal(size=(10, 3))
        assert losses.emd_exact(a, a) == 0.0
        assert losses.emd_approx(a, a[::-1]) == 0.0

    def test_single_pair(self):
        assert losses.emd_exact([[0.0, 0, 0]], [[3.0, 4, 0]]) == pytest.approx(5.0)

    @pytest.mark.parametrize("m", [2, 3, 4, 5, 6, 7])
    def test_matches_permutation_oracle(self, m):
        rng = np.random.default_rng(m)
        for _ in range(100 if m <= 6 else 5):
            a, b = rng.normal(size=(m, 3)), rng.normal(size=(m, 3))
            assert abs(losses.emd_exact(a, b) - brute_force_emd(a, b)) < 1e-9

    def test_symmetric_and_rigid_invariant(self, rng):
        a, b = rng.normal(size=(20, 3)), rng.normal(size=(20, 3))
        rotation = Rotation.from_euler("zyx", [0.4, 1.2, -0.7]).as_matrix()
        assert losses.emd_exact(a, b) == pytest.approx(losses.emd_exact(b, a), abs=1e-12)
        moved = losses.emd_exact(a @ rotation.T + 5.0, b @ rotation.T + 5.0)
        assert moved == pytest.approx(losses.emd_exact(a, b), abs=1e-9)

    def test_unnormalized(self, rng):
        a, b = rng.normal(size=(8, 3)), rng.normal(size=(8, 3))
        assert losses.emd_exact(a, b, normalized=False) == pytest.approx(8 * losses.emd_exact(a, b))

    def test_unequal_sizes(self, rng):
        with pytest.raises(exceptions.ShapeMismatchError):
            losses.emd_exact(rng.normal(size=(3, 3)), rng.normal(size=(4, 3)))
        with pytest.raises(exceptions.ShapeMismatchError):
            losses.emd_approx(rng.normal(size=(3, 3)), rng.normal(size=(4, 3)))

    @pytest.mark.parametrize("m", [1, 7, 16, 33, 64])
    def test_approx_within_five_percent(self, m):
        rng = np.random.default_rng(100 + m)
        for _ in range(5):
            a, b = rng.normal(size=(m, 3)), rng.normal(size=(m, 3)) + 0.1
            exact, approx = losses.emd_exact(a, b), losses.emd_approx(a, b)
            assert exact - 1e-12 <= approx <= exact * 1.05

    def test_approx_deterministic(self, rng):
        a, b = rng.normal(size=(32, 3)), rng.normal(size=(32, 3))
        assert losses.emd_approx(a, b, 4) == losses.emd_approx(a, b, 4)


class TestReconstructionLoss:
    def test_perfect_reconstruction(self, rng):
        q = rng.normal(size=(12, 3))
        assert float(losses.reconstruction_loss(q, q, q, 0.5).values) == 0.0

    def test_lambda_zero(self, rng):
        coarse, refined, target = (rng.normal(size=(12, 3)) for _ in range(3))
        loss = float(losses.reconstruction_loss(coarse, refined, target, 0.0).values)
        assert loss == pytest.approx(losses.emd_exact(coarse, target), abs=1e-12)

    def test_monotone_in_lambda(self, rng):
        coarse, refined, target = (rng.normal(size=(12, 3)) for _ in range(3))
        values = [float(losses.reconstruction_loss(coarse, refined, target, lam).values) for lam in (0.0, 0.01, 0.5, 1.0)]
        assert values == sorted(values)
        assert values[0] >= 0

    def test_refined_gradient(self, rng):
        coarse, refined, target = (rng.normal(size=(10, 3)) for _ in range(3))
        lam = 0.3
        tape = Tape()
        grads = tape.backward(losses.reconstruction_loss(coarse, tape.watch("q", refined), target, lam))
        match = losses.optimal_matching(refined, target)
        direction = refined - target[match]
        expected = lam * direction / np.linalg.norm(direction, axis=1, keepdims=True) / len(refined)
        np.testing.assert_allclose(grads["q"], expected, atol=1e-12)

        numeric = finite_difference_gradient(
            lambda p: losses.reconstruction_loss(coarse, p["q"], target, lam), {"q": refined})
        assert relative_error(grads, numeric) < 1e-5

    def test_size_mismatch(self, rng):
        with pytest.raises(exceptions.ShapeMismatchError):
            losses.reconstruction_loss(rng.normal(size=(4, 3)), rng.normal(size=(4, 3)), rng.normal(size=(5, 3)), 1.0)


class TestLambdaSchedule:
    def test_endpoints_and_midpoint(self):
        assert losses.lambda_schedule(0, 400) == pytest.approx(0.01)
        assert losses.lambda_schedule(400, 400) == pytest.approx(1.0)
        assert losses.lambda_schedule(200, 400) == pytest.approx(0.505)

    def test_monotone(self):
        values = [losses.lambda_schedule(e, 50) for e in range(51)]
        assert values == sorted(values)

    def test_out_of_range(self):
        with pytest.raises(exceptions.InvalidArgumentError):
            losses.lambda_schedule(11, 10)


class TestChamferHausdorff:
    def test_chamfer_examples(self, rng):
        a = rng.normal(size=(9, 3))
        assert losses.chamfer(a, a) == 0.0
        assert losses.chamfer([[0.0, 0, 0]], [[1.0, 0, 0]]) == pytest.approx(2.0)

    def test_chamfer_brute_force(self, rng):
        a, b = rng.normal(size=(17, 3)), rng.normal(size=(11, 3))
        expected = brute_force_nearest(a, b).mean() + brute_force_nearest(b, a).mean()
        assert losses.chamfer(a, b) == pytest.approx(expected, abs=1e-12)

    def test_kd_tree_path_agrees(self, rng):
        size = losses.BRUTE_FORCE_LIMIT + 10
        a, b = rng.normal(size=(size, 3)), rng.normal(size=(size, 3))
        tree = losses.nearest_distances(a, b)
        chunked = np.concatenate([losses.nearest_distances(a[i:i + 500], b) for i in range(0, size, 500)])
        np.testing.assert_allclose(tree, chunked, atol=1e-12)

    def test_hausdorff_example(self):
        assert losses.hausdorff([[0.0, 0, 0]], [[0.0, 0, 0], [0.0, 0, 9]]) == pytest.approx(9.0)

    def test_hausdorff_dominates_directed_terms(self, rng):
        a, b = rng.normal(size=(20, 3)), rng.normal(size=(15, 3))
        hd = losses.hausdorff(a, b)
        assert hd >= losses.nearest_distances(a, b).max()
        assert hd >= losses.nearest_distances(b, a).max()

    def test_empty(self):
        with pytest.raises(exceptions.InvalidArgumentError):
            losses.chamfer(np.zeros((0, 3)), [[0.0, 0, 0]])
        with pytest.raises(exceptions.InvalidArgumentError):
            losses.hausdorff([[0.0, 0, 0]], np.zeros((0, 3)))


class TestP2F:
    def test_on_surface(self):
        shape = AnalyticShape(ShapeKinds.TORUS, R=1.0, r=0.3)
        mean, std = losses.p2f_analytic(sample_analytic_surface(shape, 500, 4).points, shape)
        assert mean == pytest.approx(0.0, abs=1e-12) and std == pytest.approx(0.0, abs=1e-12)

    def test_sphere_radial(self):
        assert losses.p2f_analytic([[0.0, 0, 2]], AnalyticShape(ShapeKinds.SPHERE)) == pytest.approx((1.0, 0.0))

    def test_torus_outer_equator(self):
        shape = AnalyticShape(ShapeKinds.TORUS, R=1.0, r=0.3)
        assert losses.p2f_analytic([[1.6, 0, 0]], shape)[0] == pytest.approx(0.3)
