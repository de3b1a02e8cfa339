"""Smoke test of the `tncs` extension module.

Build the module first, either with `maturin develop` from `crates/py`, or
with `cargo build --release -p tncs-py` followed by copying
`target/release/libtncs_py.so` to `tncs.so` somewhere on `PYTHONPATH`.
"""

import math
import os
import random
import tempfile

import tncs


def four_qubit_example():
    mps = tncs.Mps.four_qubit_example()
    assert len(mps) == 4 and mps.max_bond == 2
    assert abs(mps.see(0) - math.log(2)) < 1e-12

    # measuring the two most entangled sites pins down the other two
    msg = tncs.encode(mps, [0.0, 1.0, 1.0, 0.0], 4, 1, nf=2)
    assert msg.order == [0, 2], msg.order
    assert msg.decode("postselect") == [0.0, 1.0, 1.0, 0.0]
    assert tncs.psnr(msg.decode(), [0.0, 1.0, 1.0, 0.0]) == math.inf


def ghz_sparsity():
    log2, profile = tncs.Mps.ghz(6).qsparsity()
    # one measurement collapses GHZ to a product state
    assert abs(log2 + 5) < 1e-9, log2
    assert abs(profile[0] - math.log(2)) < 1e-9
    assert all(abs(s) < 1e-9 for s in profile[1:])


def train_encode_decode():
    rng = random.Random(0)
    # noisy copies of two stripes on a 3x3 grid
    stripes = [[1, 1, 1, 0, 0, 0, 0, 0, 0], [0, 0, 0, 0, 0, 0, 1, 1, 1]]
    data = [
        [min(1.0, max(0.0, p + rng.uniform(-0.05, 0.05))) for p in rng.choice(stripes)]
        for _ in range(40)
    ]
    model, nll = tncs.train(data, chi=4, tau=0.1, sweeps=10, seed=1)
    assert math.isfinite(nll) and model.max_bond <= 4
    assert abs(model.nll(data) - nll) < 1e-9

    img = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
    msg = tncs.encode(model, img, 3, 3, nf=3, strategy="eo")
    assert len(msg.sent) == 3
    plain = msg.decode("postselect")
    assert len(plain) == 9
    assert msg.decode("oneshot", seed=5) == msg.decode("oneshot", seed=5)

    vo = tncs.encode(model, img, 3, 3, nf=3, strategy="vo", train=data)
    assert len(vo.order) == 3

    with tempfile.TemporaryDirectory() as d:
        model.save(os.path.join(d, "m.mps"))
        again = tncs.Mps.load(os.path.join(d, "m.mps"))
        assert abs(again.nll(data) - nll) < 1e-12
        msg.save(os.path.join(d, "msg"))
        assert tncs.Message.load(os.path.join(d, "msg")).decode() == plain

    out = tncs.protocol(model, img, 3, 3, nf=3, salt=b"\x01\x02")
    assert out["cipher"].startswith("salt=0102\n")
    assert out["reconstructed"] == out["plain"]
    assert out["psnr_encrypted"] == out["psnr_plain"]


def errors():
    mps = tncs.Mps.four_qubit_example()
    for bad in (
        lambda: tncs.encode(mps, [0.0, 1.0, 1.0], 3, 1, nf=1),
        lambda: tncs.encode(mps, [0.0, 1.0, 1.0, 0.0], 4, 1, nf=1, strategy="xx"),
        lambda: tncs.protocol(mps, [0.0, 0.5, 1.0, 0.0], 4, 1, nf=2),
    ):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")
    try:
        tncs.Mps.load("/nonexistent/model.mps")
    except OSError:
        pass
    else:
        raise AssertionError("expected OSError")


if __name__ == "__main__":
    four_qubit_example()
    ghz_sparsity()
    train_encode_decode()
    errors()
    print("smoke test passed")
