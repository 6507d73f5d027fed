import numpy as np
import pytest

from splatkit.errors import ParameterError, ShapeError
from splatkit.geometry import FlowField
from splatkit.splatting import SplatResult, softmax_splat, splat_ones_mask
from splatkit.trainpair import (
    SesParams,
    compose_sparse,
    degrade_texture,
    edge_mask_from_flow,
    gen_error_mask,
    ses_inject,
    ses_pair,
    splat_edges,
    tpa_pair,
)


def zero_flow(h, w):
    return FlowField(du=np.zeros((h, w)), dv=np.zeros((h, w)), valid=np.ones((h, w), bool))


def shift_flow(h, w, k):
    return FlowField(du=np.full((h, w), float(k)), dv=np.zeros((h, w)),
                     valid=np.ones((h, w), bool))


def random_pair_inputs(seed, h=16, w=16):
    rng = np.random.default_rng(seed)
    x_src = rng.random((h, w, 3)).astype(np.float32)
    x_tgt = rng.random((h, w, 3)).astype(np.float32)
    du = rng.integers(-4, 5, (h, w)) + rng.uniform(-0.45, 0.45, (h, w))
    dv = rng.integers(-4, 5, (h, w)) + rng.uniform(-0.45, 0.45, (h, w))
    flow = FlowField(du=du, dv=dv, valid=rng.random((h, w)) > 0.05)
    imp = rng.uniform(0.0, 8.0, (h, w))
    return x_src, x_tgt, flow, imp


class TestTpaPair:
    def test_identity_flow_full_coverage(self):
        rng = np.random.default_rng(0)
        x_src = rng.random((8, 8, 3)).astype(np.float32)
        x_tgt = rng.random((8, 8, 3)).astype(np.float32)
        pair = tpa_pair(x_src, x_tgt, zero_flow(8, 8), np.zeros((8, 8)))
        assert np.array_equal(pair.conditioned, x_tgt)
        assert np.all(pair.splat_mask == 1.0)
        assert np.all(pair.error_mask == 0.0)

    def test_integer_shift_coverage(self):
        k = 3
        rng = np.random.default_rng(1)
        x_src = rng.random((6, 10, 3)).astype(np.float32)
        x_tgt = rng.random((6, 10, 3)).astype(np.float32)
        pair = tpa_pair(x_src, x_tgt, shift_flow(6, 10, k), np.zeros((6, 10)))
        assert np.array_equal(pair.conditioned[:, k:], x_tgt[:, k:])
        assert np.all(pair.conditioned[:, :k] == 0.0)

    def test_masking_idempotent(self):
        x_src, x_tgt, flow, imp = random_pair_inputs(2)
        pair = tpa_pair(x_src, x_tgt, flow, imp)
        remasked = pair.conditioned * pair.splat_mask[:, :, None]
        assert np.array_equal(remasked, pair.conditioned)

    def test_alignment_exact_on_valid(self):
        x_src, x_tgt, flow, imp = random_pair_inputs(3)
        pair = tpa_pair(x_src, x_tgt, flow, imp)
        on = pair.splat_mask == 1.0
        off = ~on
        assert np.array_equal(pair.conditioned[on], x_tgt[on])
        assert np.all(pair.conditioned[off] == 0.0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            tpa_pair(
                np.zeros((4, 4, 3), np.float32),
                np.zeros((4, 5, 3), np.float32),
                zero_flow(4, 4),
                np.zeros((4, 4)),
            )


class TestEdgeMaskFromFlow:
    def test_constant_flow_empty(self):
        mask = edge_mask_from_flow(shift_flow(8, 8, 4), theta=1.0)
        assert np.all(mask == 0.0)

    def test_step_response_thresholds(self):
        # 10 px step in du: Sobel magnitude 40 on the adjacent columns;
        # fires below 40, stays silent above 40*sqrt(2)
        du = np.zeros((8, 12))
        du[:, 6:] = 10.0
        flow = FlowField(du=du, dv=np.zeros((8, 12)), valid=np.ones((8, 12), bool))
        firing = edge_mask_from_flow(flow, theta=39.0)
        assert np.all(firing[:, 5:7] == 1.0)
        silent = edge_mask_from_flow(flow, theta=40.0 * np.sqrt(2.0) + 1e-9)
        assert np.all(silent == 0.0)

    def test_binary_output(self):
        _, _, flow, _ = random_pair_inputs(4)
        mask = edge_mask_from_flow(flow, theta=1.0)
        assert set(np.unique(mask)) <= {0.0, 1.0}

    def test_negative_theta_rejected(self):
        with pytest.raises(ParameterError):
            edge_mask_from_flow(zero_flow(4, 4), theta=-1.0)


class TestSplatEdges:
    def test_empty_edge_mask(self):
        x_src, _, flow, imp = random_pair_inputs(5)
        e_tgt, support = splat_edges(x_src, np.zeros((16, 16)), flow, imp)
        assert np.all(e_tgt == 0.0)
        assert np.all(support == 0.0)

    def test_identity_flow_passthrough(self):
        rng = np.random.default_rng(6)
        x_src = rng.random((8, 8, 3)).astype(np.float32)
        edge = (rng.random((8, 8)) > 0.5).astype(np.float32)
        e_tgt, support = splat_edges(x_src, edge, zero_flow(8, 8), np.zeros((8, 8)))
        assert np.array_equal(support, edge)
        assert np.array_equal(e_tgt, x_src * edge[:, :, None])

    def test_support_subset_of_full_coverage(self):
        x_src, _, flow, imp = random_pair_inputs(7)
        edge = (np.random.default_rng(8).random((16, 16)) > 0.6).astype(np.float32)
        _, support = splat_edges(x_src, edge, flow, imp)
        full = splat_ones_mask(flow, imp)
        assert np.all(support <= full)


class TestGenErrorMask:
    def test_empty_support(self):
        params = SesParams(coverage=0.4, blob_count=10, seed=0)
        assert np.all(gen_error_mask(np.zeros((16, 16)), params) == 0.0)

    def test_deterministic_under_seed(self):
        support = np.ones((32, 32))
        params = SesParams(coverage=0.4, blob_count=10, seed=123)
        a = gen_error_mask(support, params)
        b = gen_error_mask(support, params)
        assert np.array_equal(a, b)

    def test_zero_blobs_empty(self):
        params = SesParams(coverage=0.4, blob_count=0, seed=1)
        assert np.all(gen_error_mask(np.ones((16, 16)), params) == 0.0)

    def test_coverage_target_over_seeds(self):
        # half-covered support, K=50, rho=0.4: every seed must land with
        # coverage (of the support) inside [rho/2, 2*rho] = [0.2, 0.8]
        support = np.zeros((64, 64), dtype=np.float32)
        support[:, :32] = 1.0
        n_support = support.sum()
        for seed in range(100):
            params = SesParams(coverage=0.4, blob_count=50, seed=seed)
            mask = gen_error_mask(support, params)
            frac = (mask * support).sum() / n_support
            assert 0.2 <= frac <= 0.8, f"seed {seed} coverage {frac}"

    def test_mask_confined_to_support(self):
        rng = np.random.default_rng(9)
        support = (rng.random((32, 32)) > 0.5).astype(np.float32)
        mask = gen_error_mask(support, SesParams(coverage=0.3, blob_count=20, seed=5))
        assert np.all(mask <= support)

    def test_bad_params_rejected(self):
        with pytest.raises(ParameterError):
            SesParams(coverage=1.5)
        with pytest.raises(ParameterError):
            SesParams(blob_count=-1)
        with pytest.raises(ParameterError):
            SesParams(edge_threshold=-0.5)


class TestSesInject:
    def make_pair(self, seed=10):
        x_src, x_tgt, flow, imp = random_pair_inputs(seed)
        return tpa_pair(x_src, x_tgt, flow, imp), x_src

    def test_empty_error_mask_no_change(self):
        pair, x_src = self.make_pair()
        out = ses_inject(pair, x_src, np.zeros((16, 16)))
        assert np.array_equal(out.conditioned, pair.conditioned)
        assert np.all(out.error_mask == 0.0)

    def test_full_error_mask_replaces(self):
        pair, x_src = self.make_pair()
        out = ses_inject(pair, x_src, np.ones((16, 16)))
        assert np.array_equal(out.conditioned, x_src)

    def test_bitwise_outside_error_mask(self):
        pair, x_src = self.make_pair()
        m = (np.random.default_rng(11).random((16, 16)) > 0.5).astype(np.float32)
        out = ses_inject(pair, x_src, m)
        outside = m == 0.0
        assert np.array_equal(out.conditioned[outside], pair.conditioned[outside])

    def test_target_and_splat_mask_untouched(self):
        pair, x_src = self.make_pair()
        out = ses_inject(pair, x_src, np.ones((16, 16)))
        assert np.array_equal(out.target, pair.target)
        assert np.array_equal(out.splat_mask, pair.splat_mask)


class TestSesPair:
    def test_zero_blobs_equals_tpa(self):
        x_src, x_tgt, flow, imp = random_pair_inputs(12)
        params = SesParams(coverage=0.4, blob_count=0, seed=0)
        ses = ses_pair(x_src, x_tgt, flow, imp, params)
        tpa = tpa_pair(x_src, x_tgt, flow, imp)
        assert np.array_equal(ses.conditioned, tpa.conditioned)

    def test_reproducible_under_seed(self):
        x_src, x_tgt, flow, imp = random_pair_inputs(13)
        params = SesParams(coverage=0.4, blob_count=15, seed=99)
        a = ses_pair(x_src, x_tgt, flow, imp, params)
        b = ses_pair(x_src, x_tgt, flow, imp, params)
        assert np.array_equal(a.conditioned, b.conditioned)
        assert np.array_equal(a.error_mask, b.error_mask)

    def test_difference_confined_to_error_mask(self):
        for seed in range(10):
            x_src, x_tgt, flow, imp = random_pair_inputs(seed + 100)
            params = SesParams(coverage=0.4, blob_count=15, seed=seed)
            ses = ses_pair(x_src, x_tgt, flow, imp, params)
            tpa = tpa_pair(x_src, x_tgt, flow, imp)
            differs = np.any(ses.conditioned != tpa.conditioned, axis=2)
            assert np.all(ses.error_mask[differs] == 1.0)

    def test_provenance_records_params(self):
        x_src, x_tgt, flow, imp = random_pair_inputs(14)
        params = SesParams(coverage=0.25, blob_count=7, seed=42)
        pair = ses_pair(x_src, x_tgt, flow, imp, params)
        assert pair.provenance["seed"] == 42
        assert pair.provenance["coverage"] == 0.25
        assert pair.provenance["mode"] == "ses"


class TestDegradeTexture:
    def textured(self, seed=15):
        return np.random.default_rng(seed).random((48, 48, 3)).astype(np.float32)

    def test_zero_strength_identity(self):
        img = self.textured()
        assert np.array_equal(degrade_texture(img, 0.0, seed=3), img)

    def test_deterministic(self):
        img = self.textured()
        a = degrade_texture(img, 0.7, seed=21)
        b = degrade_texture(img, 0.7, seed=21)
        assert np.array_equal(a, b)

    def test_mad_monotone_in_strength(self):
        img = self.textured()
        for seed in range(10):
            mads = [
                np.abs(degrade_texture(img, s, seed=seed).astype(np.float64) - img).mean()
                for s in (0.0, 0.5, 1.0)
            ]
            assert mads[0] == 0.0
            assert mads[0] < mads[1] < mads[2], f"seed {seed}: {mads}"

    def test_output_in_range(self):
        out = degrade_texture(self.textured(), 1.0, seed=7)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_bad_strength_rejected(self):
        with pytest.raises(ParameterError):
            degrade_texture(self.textured(), 1.5, seed=0)


def splat_result_from(image, mask):
    image = image.astype(np.float32) * mask[:, :, None].astype(np.float32)
    return SplatResult(image=image, weight=mask.astype(np.float32),
                       mask=mask.astype(np.float32), tau=1e-4)


class TestComposeSparse:
    def test_fully_valid_primary_passthrough(self):
        rng = np.random.default_rng(16)
        a = splat_result_from(rng.random((12, 12, 3)), np.ones((12, 12)))
        b = splat_result_from(rng.random((12, 12, 3)), (rng.random((12, 12)) > 0.5).astype(np.float32))
        image, mask = compose_sparse(a, b, sigma=2.0)
        assert np.array_equal(image, a.image)
        assert np.all(mask == 1.0)

    def test_complementary_masks_union(self):
        rng = np.random.default_rng(17)
        m = np.zeros((10, 10), dtype=np.float32)
        m[:, :5] = 1.0
        a = splat_result_from(rng.random((10, 10, 3)), m)
        b = splat_result_from(rng.random((10, 10, 3)), 1.0 - m)
        image, mask = compose_sparse(a, b, sigma=0.0)
        assert np.all(mask == 1.0)
        assert np.array_equal(image[:, :5], a.image[:, :5])
        assert np.array_equal(image[:, 5:], b.image[:, 5:])

    def test_primary_selected_by_coverage(self):
        rng = np.random.default_rng(18)
        ma = np.zeros((20, 20), dtype=np.float32)
        ma[:18] = 1.0  # 90%
        mb = np.zeros((20, 20), dtype=np.float32)
        mb[:19] = 1.0  # 95%
        a = splat_result_from(rng.random((20, 20, 3)), ma)
        b = splat_result_from(rng.random((20, 20, 3)), mb)
        image, _ = compose_sparse(a, b, sigma=0.0)
        # row 18 is valid only in b; with sigma 0 the area valid in both
        # takes b (the primary) verbatim
        assert np.array_equal(image[18], b.image[18])
        assert np.array_equal(image[5], b.image[5])

    def test_tie_prefers_first(self):
        rng = np.random.default_rng(19)
        m = np.ones((8, 8), dtype=np.float32)
        a = splat_result_from(rng.random((8, 8, 3)), m)
        b = splat_result_from(rng.random((8, 8, 3)), m)
        image, _ = compose_sparse(a, b, sigma=1.0)
        assert np.array_equal(image, a.image)

    def test_mask_is_union(self):
        rng = np.random.default_rng(20)
        ma = (rng.random((15, 15)) > 0.5).astype(np.float32)
        mb = (rng.random((15, 15)) > 0.5).astype(np.float32)
        a = splat_result_from(rng.random((15, 15, 3)), ma)
        b = splat_result_from(rng.random((15, 15, 3)), mb)
        _, mask = compose_sparse(a, b, sigma=1.5)
        assert np.array_equal(mask, np.maximum(ma, mb))

    def test_invalid_everywhere_is_zero(self):
        rng = np.random.default_rng(21)
        ma = np.zeros((10, 10), dtype=np.float32)
        ma[2, 2] = 1.0
        mb = np.zeros((10, 10), dtype=np.float32)
        a = splat_result_from(rng.random((10, 10, 3)), ma)
        b = splat_result_from(rng.random((10, 10, 3)), mb)
        image, mask = compose_sparse(a, b, sigma=1.0)
        neither = (ma == 0) & (mb == 0)
        assert np.all(image[neither] == 0.0)
        assert np.all(mask[neither] == 0.0)

    def test_shape_mismatch(self):
        a = splat_result_from(np.zeros((4, 4, 3)), np.ones((4, 4)))
        b = splat_result_from(np.zeros((4, 5, 3)), np.ones((4, 5)))
        with pytest.raises(ShapeError):
            compose_sparse(a, b, sigma=1.0)
