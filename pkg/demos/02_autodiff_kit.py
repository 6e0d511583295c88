"""The numpy autodiff kit: tape, gradients, Adam, and a finite-difference check.

Run:  python3 demos/02_autodiff_kit.py
"""

import numpy as np

from splatgen.nn import MLP, ParamStore, Tensor, tanh, tmean


def main():
    rng = np.random.default_rng(0)

    # 1. gradients flow through a tiny expression
    x = Tensor(np.array([[0.5, -1.0, 2.0]]), requires_grad=True)
    y = tmean(tanh(x) * x)
    y.backward()
    print(f"d mean(tanh(x)*x) / dx = {np.round(x.grad, 4)}")

    # 2. fit sin(x) with a 2-layer MLP and Adam
    store = ParamStore()
    net = MLP(store, "net", 1, 64, 1, rng)
    xs = np.linspace(-np.pi, np.pi, 256).reshape(-1, 1)
    ys = np.sin(xs)
    for it in range(400):
        pred = net.forward(Tensor(xs))
        loss = tmean((pred - Tensor(ys)) ** 2)
        loss.backward()
        store.adam_step(lr=2e-3)
        store.zero_grad()
        if it % 100 == 0 or it == 399:
            print(f"  iter {it:3d}: mse {loss.data.item():.5f}")
    assert loss.data.item() < 0.01

    # 3. finite differences agree with the tape
    w = store["net.fc1.w"]
    probe = (0, 0)
    pred = net.forward(Tensor(xs))
    loss = tmean((pred - Tensor(ys)) ** 2)
    loss.backward()
    analytic = w.grad[probe]
    store.zero_grad()

    eps = 1e-6
    keep = w.data[probe]
    w.data[probe] = keep + eps
    hi = tmean((net.forward(Tensor(xs)) - Tensor(ys)) ** 2).data.item()
    w.data[probe] = keep - eps
    lo = tmean((net.forward(Tensor(xs)) - Tensor(ys)) ** 2).data.item()
    w.data[probe] = keep
    fd = (hi - lo) / (2 * eps)
    rel = abs(analytic - fd) / max(abs(fd), 1e-12)
    print(f"analytic {analytic:.6e} vs finite-difference {fd:.6e} "
          f"(rel err {rel:.2e})")
    assert rel < 1e-4


if __name__ == "__main__":
    main()
