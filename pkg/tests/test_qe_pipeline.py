import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from paqe.coding_meta import BlockRecord, BlockType, FrameMeta, InterMode
from paqe.errors import ContractError
from paqe.frame_io import Frame420
from paqe.models import ModelTriple
from paqe.nn import NetConfig, QENetwork
from paqe.qe_pipeline import (EnhanceRequest, assemble_input, enhance_frame420, enhance_inter_frame,
                              enhance_intra_frame, enhance_plane, run_model, to_pixels)


def nets(seed=0, ch=6, n=1):
    def mk(cin, s):
        net = QENetwork(NetConfig(cin, ch, n), seed=s)
        # keep outputs inside (0, 1) so neither clamp hides differences
        net.out.weight *= 0.2
        net.out.bias[:] = 0.5
        return net
    return ModelTriple(mk(3, seed), mk(3, seed + 1), mk(2, seed + 2))


def random_meta(rng, w, h, bs=16, poc=1):
    blocks = []
    for y in range(0, h, bs):
        for x in range(0, w, bs):
            t = BlockType(int(rng.integers(0, 3)))
            mode = 0 if t == BlockType.INTRA else InterMode((0, 0), 0)
            blocks.append(BlockRecord(x, y, min(bs, w - x), min(bs, h - y), t, int(rng.integers(20, 45)), mode))
    return FrameMeta(poc, "B", 2, 32, blocks)


def planes(rng, h, w):
    return rng.integers(0, 1024, (h, w)).astype(np.uint16), rng.integers(0, 1024, (h, w)).astype(np.uint16)


def test_assemble_input_shapes_and_order():
    c = np.full((4, 6), 1023, np.uint16)
    p = np.zeros((4, 6), np.uint16)
    p[1, 2] = 1023
    q = np.full((4, 6), 37 / 63)
    x = assemble_input(c, p, q)
    assert x.shape == (1, 3, 4, 6)
    assert x[0, 0, 1, 2] == 1.0 and x[0, 0].sum() == 1.0  # marker only in channel 0
    assert (x[0, 1] == 1.0).all()
    assert np.allclose(x[0, 2], 37 / 63)
    assert assemble_input(c, None, q).shape == (1, 2, 4, 6)
    with pytest.raises(ContractError):
        assemble_input(c, p[:, :5], q)


def test_to_pixels_clamps_and_rounds_half_up():
    out = to_pixels(np.array([-0.1, 0.0, 0.5 / 1023, 1.5 / 1023, 1.2]))
    assert out.tolist() == [0, 0, 1, 2, 1023]


def test_zero_model_gives_zero_frame(rng):
    zero = QENetwork(NetConfig(3, 4, 1), seed=None)
    models = ModelTriple(zero, zero.copy(), QENetwork(NetConfig(2, 4, 1), seed=None))
    meta = FrameMeta(0, "I", 0, 32, [BlockRecord(0, 0, 16, 16, BlockType.INTRA, 32, 0)])
    c, p = planes(rng, 16, 16)
    out = enhance_intra_frame(EnhanceRequest(c, p, meta, "Y", models))
    assert out.shape == (16, 16) and not out.any()


def test_intra_model_arity_checked(rng):
    m = nets()
    bad = ModelTriple.__new__(ModelTriple)
    bad.intra, bad.inter, bad.unaware = m.unaware, m.inter, m.unaware
    meta = FrameMeta(0, "I", 0, 32, [BlockRecord(0, 0, 16, 16, BlockType.INTRA, 32, 0)])
    c, p = planes(rng, 16, 16)
    with pytest.raises(ContractError):
        enhance_intra_frame(EnhanceRequest(c, p, meta, "Y", bad))
    with pytest.raises(ContractError):
        ModelTriple(m.unaware, m.inter, m.unaware)


def test_all_skip_frame_equals_unaware_pass(rng):
    models = nets(3)
    blocks = [BlockRecord(x, y, 16, 16, BlockType.SKIP, 30 + x // 16, InterMode((0, 0), 0))
              for y in range(0, 32, 16) for x in range(0, 48, 16)]
    meta = FrameMeta(1, "B", 1, 30, blocks)
    c, p = planes(rng, 32, 48)
    req = EnhanceRequest(c, p, meta, "Y", models)
    assert np.array_equal(enhance_inter_frame(req), run_model(models.unaware, c, None, req.qp_map()))


def test_single_intra_block_only_changes_its_rectangle(rng):
    models = nets(4)
    w = h = 48
    inter = [BlockRecord(x, y, 16, 16, BlockType.INTER, 33, InterMode((1, 0), 0))
             for y in range(0, h, 16) for x in range(0, w, 16)]
    mixed = list(inter)
    mixed[4] = BlockRecord(16, 16, 16, 16, BlockType.INTRA, 33, 2)
    c, p = planes(rng, h, w)
    a = enhance_inter_frame(EnhanceRequest(c, p, FrameMeta(1, "B", 1, 33, inter), "Y", models))
    b = enhance_inter_frame(EnhanceRequest(c, p, FrameMeta(1, "B", 1, 33, mixed), "Y", models))
    diff = a != b
    assert diff[16:32, 16:32].any()
    diff[16:32, 16:32] = False
    assert not diff.any()


@settings(max_examples=10)
@given(seed=st.integers(0, 10_000), plane=st.sampled_from(["Y", "U"]), bs=st.sampled_from([8, 16]))
def test_block_dispatch_equals_frame_composition(seed, plane, bs):
    rng = np.random.default_rng(seed)
    models = nets(seed % 7)
    meta = random_meta(rng, 48, 32, bs)
    shape = (32, 48) if plane == "Y" else (16, 24)
    c, p = planes(rng, *shape)
    req = EnhanceRequest(c, p, meta, plane, models)
    assert np.array_equal(enhance_inter_frame(req, "block"), enhance_inter_frame(req, "frame"))


def test_skip_blocks_never_see_prediction(rng):
    models = nets(5)
    meta = random_meta(rng, 32, 32)
    c, p = planes(rng, 32, 32)
    trace = []
    enhance_inter_frame(EnhanceRequest(c, p, meta, "Y", models), trace=trace)
    for _, label, model, arity in trace:
        assert (arity == 2) == (label == "skip")
        assert model is {"intra": models.intra, "inter": models.inter, "skip": models.unaware}[label]


def test_chroma_at_native_resolution_and_shared_models(rng):
    models = nets(6)
    meta = random_meta(rng, 32, 32)
    y, py = planes(rng, 32, 32)
    u, pu = planes(rng, 16, 16)
    recon = Frame420(y, u, u.copy(), poc=1)
    pred = Frame420(py, pu, pu.copy(), poc=1)
    trace = []
    out = enhance_frame420(recon, pred, meta, models, trace=trace)
    assert out.u.shape == (16, 16) and out.y.shape == (32, 32)
    assert np.array_equal(out.u, out.v)
    used = {id(m) for _, _, m, _ in trace}
    assert used <= {id(m) for m in models}
    assert {t[0] for t in trace} == {"Y", "U", "V"}


def test_identical_content_same_output_for_y_and_u(rng):
    models = nets(7)
    luma_meta = FrameMeta(0, "I", 0, 30, [BlockRecord(0, 0, 32, 32, BlockType.INTRA, 30, 0)])
    c, p = planes(rng, 16, 16)
    # a 32x32 luma block covers the whole 16x16 chroma plane with the same qp
    y_meta = FrameMeta(0, "I", 0, 30, [BlockRecord(0, 0, 16, 16, BlockType.INTRA, 30, 0)])
    a = enhance_plane(EnhanceRequest(c, p, y_meta, "Y", models))
    b = enhance_plane(EnhanceRequest(c, p, luma_meta, "U", models))
    assert np.array_equal(a, b)


def test_enhancement_is_pure(rng):
    models = nets(8)
    meta = random_meta(rng, 32, 32)
    c, p = planes(rng, 32, 32)
    req = EnhanceRequest(c, p, meta, "Y", models)
    a = enhance_inter_frame(req)
    b = enhance_inter_frame(req)
    assert np.array_equal(a, b) and a.dtype == np.uint16 and a.max() <= 1023
