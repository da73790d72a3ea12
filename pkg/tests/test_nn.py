import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tabularnet.nn import autograd as ag
from tabularnet.nn.autograd import Parameter, Tape, Tensor, backward
from tabularnet.nn.layers import BiGRU, GRUCell, bigru_run, gru_sequence, gru_step, mlp_forward, xavier_normal_init
from tabularnet.nn.optim import AdamW, adamw_step
from tabularnet.nn.serialize import load_archive, save_archive

import gradient_cases as gc


def sig(v):
    return 1.0 / (1.0 + math.exp(-v))


# ---------------------------------------------------------------------------
# initialization


def test_xavier_monte_carlo():
    w = xavier_normal_init((1000, 1000), 2, 2, 0)
    assert abs(w.std() / math.sqrt(0.5) - 1) < 0.01
    assert abs(w.mean()) < 0.005
    w1 = xavier_normal_init((1000, 1000), 1, 1, 1)
    assert abs(w1.std() - 1.0) < 0.01


def test_xavier_deterministic_and_validated():
    assert np.array_equal(xavier_normal_init((3, 4), 3, 4, 5), xavier_normal_init((3, 4), 3, 4, 5))
    with pytest.raises(ValueError):
        xavier_normal_init((2, 2), 0, 2, 0)


# ---------------------------------------------------------------------------
# MLP


def test_mlp_relu_identity():
    w, b = Parameter("w", np.eye(2)), Parameter("b", np.zeros(2))
    assert mlp_forward([(w, b)], np.array([1.0, -1.0])).data.tolist() == [1.0, 0.0]


def test_mlp_affine_identity_activation():
    w, b = Parameter("w", [[2.0]]), Parameter("b", [3.0])
    assert mlp_forward([(w, b)], np.array([1.0]), final_relu=False).data.tolist() == [5.0]


def test_mlp_two_layer_by_hand():
    w1 = Parameter("w1", [[1.0, -2.0], [0.5, 1.0], [-1.0, 0.0]])
    b1 = Parameter("b1", [0.1, 0.2])
    w2 = Parameter("w2", [[3.0], [-1.0]])
    b2 = Parameter("b2", [0.5])
    x = np.array([1.0, 2.0, 3.0])
    # hidden: [1+1-3+0.1, -2+2+0+0.2] = [-0.9, 0.2] -> relu [0, 0.2]; out 0*3 - 0.2 + 0.5 = 0.3
    out = mlp_forward([(w1, b1), (w2, b2)], x, final_relu=False).data
    assert abs(out[0] - 0.3) < 1e-12


def test_mlp_shape_error_names_layer():
    w1, b1 = Parameter("first.weight", np.ones((3, 2))), Parameter("first.bias", np.zeros(2))
    w2, b2 = Parameter("second.weight", np.ones((4, 1))), Parameter("second.bias", np.zeros(1))
    with pytest.raises(ValueError, match="layer 1 .second.weight"):
        mlp_forward([(w1, b1), (w2, b2)], np.ones(3))


# ---------------------------------------------------------------------------
# GRU


def test_gru_zero_params():
    cell = GRUCell("g", 2, 3, np.random.default_rng(0))
    for p in cell.parameters():
        p.data[...] = 0
    h = np.array([[0.4, -1.0, 2.0]])
    assert np.allclose(gru_step(cell, np.ones((1, 2)), h).data, 0.5 * h, atol=0, rtol=0)
    assert not np.any(gru_step(cell, np.ones((1, 2)), np.zeros((1, 3))).data)


def scalar_gru(cell, x, h):
    """Loop over every unit with Python floats only."""
    H, n_in = cell.hidden, len(x)
    W, U, b = cell.W.data, cell.U.data, cell.b.data
    out = []
    for k in range(H):
        z = sig(sum(W[i, k] * x[i] for i in range(n_in)) + sum(U[j, k] * h[j] for j in range(H)) + b[k])
        out.append(z)
    rs = []
    for k in range(H):
        c = H + k
        rs.append(sig(sum(W[i, c] * x[i] for i in range(n_in)) + sum(U[j, c] * h[j] for j in range(H)) + b[c]))
    new = []
    for k in range(H):
        c = 2 * H + k
        a = sum(W[i, c] * x[i] for i in range(n_in)) + sum(U[j, c] * rs[j] * h[j] for j in range(H)) + b[c]
        new.append((1 - out[k]) * h[k] + out[k] * math.tanh(a))
    return np.array(new)


def test_gru_step_scalar_oracle():
    rng = np.random.default_rng(3)
    cell = GRUCell("g", 3, 3, rng)
    cell.b.data[:] = rng.normal(size=9)
    x, h = rng.normal(size=3), rng.normal(size=3)
    got = gru_step(cell, x[None], h[None]).data[0]
    assert np.max(np.abs(got - scalar_gru(cell, x, h))) < 1e-12


def test_gru_shape_error():
    cell = GRUCell("g", 3, 2, np.random.default_rng(0))
    with pytest.raises(ValueError):
        gru_step(cell, np.ones((1, 4)), np.zeros((1, 2)))


def test_gru_sequence_matches_steps():
    rng = np.random.default_rng(4)
    cell = GRUCell("g", 3, 4, rng)
    cell.b.data[:] = rng.normal(size=12)
    x = rng.normal(size=(2, 5, 3))
    h = np.zeros((2, 4))
    for t in range(5):
        h = gru_step(cell, x[:, t], h).data
        assert np.max(np.abs(gru_sequence(cell, x).data[:, t] - h)) < 1e-12
    h = np.zeros((2, 4))
    rev = gru_sequence(cell, x, reverse=True).data
    for t in reversed(range(5)):
        h = gru_step(cell, x[:, t], h).data
        assert np.max(np.abs(rev[:, t] - h)) < 1e-12


def _bigru(n_in=3, hidden=4, layers=3, seed=0):
    gru = BiGRU("bi", n_in, hidden, layers, np.random.default_rng(seed))
    gc.nonzero_biases(gru.parameters(), seed)
    return gru


def test_bigru_single_step():
    gru = _bigru(layers=1)
    x = np.random.default_rng(1).normal(size=(1, 1, 3))
    fwd, bwd = gru(x)
    zero = np.zeros((1, 4))
    assert np.array_equal(fwd.data[:, 0], gru_step(gru.forward_cells[0], x[:, 0], zero).data)
    assert np.array_equal(bwd.data[:, 0], gru_step(gru.backward_cells[0], x[:, 0], zero).data)


def test_bigru_reversal_symmetry():
    # one layer: deeper layers read (fwd, bwd) concatenated, whose order flips under reversal
    gru = _bigru(layers=1)
    gru.backward_cells = gru.forward_cells
    x = np.random.default_rng(2).normal(size=(2, 4, 3))
    fwd, bwd = gru(x)
    rfwd, rbwd = gru(x[:, ::-1].copy())
    assert np.allclose(rfwd.data, bwd.data[:, ::-1], atol=1e-14, rtol=0)
    assert np.allclose(rbwd.data, fwd.data[:, ::-1], atol=1e-14, rtol=0)


def test_bigru_manual_unroll():
    gru = _bigru(layers=3)
    x = np.random.default_rng(5).normal(size=(1, 3, 3))
    inp = x[0]
    for fc, bc in zip(gru.forward_cells, gru.backward_cells):
        hf, hb = np.zeros(4), np.zeros(4)
        fs, bs = [None] * 3, [None] * 3
        for t in range(3):
            hf = scalar_gru(fc, inp[t], hf)
            fs[t] = hf
        for t in (2, 1, 0):
            hb = scalar_gru(bc, inp[t], hb)
            bs[t] = hb
        inp = np.concatenate([np.array(fs), np.array(bs)], axis=1)
    fwd, bwd = bigru_run(gru.forward_cells, gru.backward_cells, x)
    assert np.max(np.abs(fwd.data[0] - inp[:, :4])) < 1e-10
    assert np.max(np.abs(bwd.data[0] - inp[:, 4:])) < 1e-10


def test_bigru_empty_sequence():
    gru = _bigru(layers=1)
    with pytest.raises(ValueError, match="empty"):
        gru(np.zeros((1, 0, 3)))
    with pytest.raises(ValueError):
        bigru_run([], [], np.zeros((1, 2, 3)))


# ---------------------------------------------------------------------------
# loss, backward


def test_nll_values():
    uniform = ag.log_softmax(Tensor(np.zeros((1, 5))))
    assert ag.nll_loss(uniform, [2]).data == pytest.approx(math.log(5), abs=1e-15)
    assert ag.nll_loss(Tensor(np.log([[1.0, 1e-300]])), [0]).data == 0.0
    assert ag.nll_loss(Tensor(np.log([[0.25, 0.75]])), [0]).data == pytest.approx(1.38629436, abs=1e-8)
    with pytest.raises(ValueError):
        ag.nll_loss(uniform, [5])


def test_nll_mean_reduction():
    lp = Tensor(np.log([[0.5, 0.5], [0.25, 0.75]]))
    assert ag.nll_loss(lp, [0, 0]).data == pytest.approx((math.log(2) + math.log(4)) / 2)


def test_backward_linear_case():
    w = Parameter("w", np.ones((2, 3)))
    unused = Parameter("u", np.ones(4))
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    with Tape() as tape:
        loss = ag.sum_(ag.matmul(x, w))
    g = backward(tape, loss, [w, unused])
    assert g[w].tolist() == [[4.0] * 3, [6.0] * 3]
    assert not np.any(g[unused])
    g2 = backward(tape, loss, [w, unused])
    assert np.array_equal(g[w], g2[w])


def test_backward_requires_scalar():
    w = Parameter("w", np.ones(3))
    with Tape() as tape:
        out = ag.mul(w, 2.0)
    with pytest.raises(ValueError, match="scalar"):
        backward(tape, out, [w])


def test_no_recording_outside_tape():
    w = Parameter("w", np.ones(3))
    out = ag.mul(w, 2.0)
    assert not out.requires_grad
    with Tape() as tape:
        ag.mul(w, 2.0)
    assert len(tape) == 1


def test_primitive_gradients():
    errors = gc.case_primitives()
    assert max(errors.values()) < 1e-6, errors


@pytest.mark.parametrize("case", [gc.case_mlp, gc.case_gru_step, gc.case_gru_sequence, gc.case_bigru])
def test_layer_gradients(case):
    assert case() < 1e-6


# ---------------------------------------------------------------------------
# AdamW


def test_adamw_first_step():
    p = Parameter("p", [1.0])
    adamw_step([p], {p: np.array([1.0])}, weight_decay=0.0, t=1)
    assert p.data[0] == pytest.approx(1.0 - 5e-4 / (1 + 1e-8), abs=1e-15)
    assert p.data[0] == pytest.approx(0.9995, abs=1e-9)


def test_adamw_pure_decay():
    p = Parameter("p", [2.0, -4.0])
    adamw_step([p], {p: np.zeros(2)}, lr=0.1, weight_decay=0.5, t=1)
    assert p.data.tolist() == [2.0 * 0.95, -4.0 * 0.95]


def test_adamw_identity_without_gradient_or_decay():
    p = Parameter("p", [1.5, -2.0])
    opt = AdamW([p], weight_decay=0.0)
    for _ in range(3):
        opt.step({p: np.zeros(2)})
    assert p.data.tolist() == [1.5, -2.0]
    assert opt.t == 3


def test_adamw_matches_reference_loop():
    rng = np.random.default_rng(0)
    p = Parameter("p", rng.normal(size=4))
    ref = p.data.copy()
    m = v = np.zeros(4)
    opt = AdamW([p], lr=0.01, weight_decay=0.1)
    for t in range(1, 6):
        g = rng.normal(size=4)
        opt.step({p: g})
        ref = ref * (1 - 0.01 * 0.1)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref = ref - 0.01 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
    assert np.allclose(p.data, ref, rtol=0, atol=1e-15)


def test_adamw_rejects_step_zero():
    p = Parameter("p", [1.0])
    with pytest.raises(ValueError):
        adamw_step([p], {p: np.ones(1)}, t=0)


# ---------------------------------------------------------------------------
# dropout


def test_dropout_identity_cases():
    x = Tensor(np.arange(5.0))
    assert ag.dropout(x, 0.0, True, np.random.default_rng(0)) is x
    assert ag.dropout(x, 0.9, False, None) is x
    with pytest.raises(ValueError):
        ag.dropout(x, 1.0, True, np.random.default_rng(0))


def test_dropout_monte_carlo():
    x = Tensor(np.ones(10**6))
    out = ag.dropout(x, 0.3, True, np.random.default_rng(0)).data
    assert abs((out == 0).mean() - 0.3) < 0.01
    assert abs(out.mean() - 1.0) < 0.01
    assert set(np.unique(out)) == {0.0, 1.0 / 0.7}


# ---------------------------------------------------------------------------
# archives


def test_archive_roundtrip_is_byte_stable(tmp_path):
    arrays = {"b": np.arange(3.0), "a.weight": np.eye(2)}
    save_archive(tmp_path / "x.zip", arrays, {"k": 1})
    save_archive(tmp_path / "y.zip", dict(reversed(list(arrays.items()))), {"k": 1})
    assert (tmp_path / "x.zip").read_bytes() == (tmp_path / "y.zip").read_bytes()
    back, meta = load_archive(tmp_path / "x.zip")
    assert meta["k"] == 1
    assert all(np.array_equal(back[k], arrays[k]) for k in arrays)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20))
def test_log_softmax_normalized(values):
    lp = ag.log_softmax(Tensor(np.array(values)[None])).data
    assert abs(np.exp(lp).sum() - 1) < 1e-9
