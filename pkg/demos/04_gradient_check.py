"""Central-difference check of the LSTM backward pass.

The analytic gradient is computed twice, once in float32 (the training path)
and once in float64; both are compared with finite differences taken on a
float64 copy of the parameters.

    python demos/04_gradient_check.py
"""

import numpy as np

from acoustext import nn

rng = nn.make_rng(0)
p = nn.LstmParams.init(rng, 8, 6)
x = rng.normal(size=(10, 3, 8))
w = rng.normal(size=(10, 3, 6))


def loss(ps):
    q = nn.LstmParams(ps["Wx"], ps["Wh"], ps["b"])
    hs, _, cache = nn.lstm_forward(q, ps["x"])
    g, dx, _ = nn.lstm_backward(q, cache, w.astype(hs.dtype))
    d = g.arrays()
    d["x"] = dx
    return float(np.sum(w * hs)), d


params = {**p.arrays(), "x": x}
for dtype, kw in ((np.float32, {"scale_floor": 1e-2}), (np.float64, {})):
    rep = nn.grad_check(loss, params, eps=1e-4, analytic_dtype=dtype, **kw)
    print(f"{np.dtype(dtype).name}: worst relative error {rep.max_rel_error:.2e} "
          f"at {rep.name}{rep.index} over {rep.checked} entries")
