"""Show that the hand-rolled differentiation machinery is trustworthy.

Three quick numeric exhibits, no training involved:

1. the strided convolution and its input-gradient operator are exact
   adjoints (the <conv(x), y> == <x, conv_adj(y)> identity),
2. analytic gradients of a small generator -> critic stack agree with
   central finite differences,
3. the gradient-penalty term matches its closed form on a linear critic.

Run:  python3 demos/01_gradients_and_ops.py
"""

import numpy as np

from lexigan.gradcheck import grad_check
from lexigan.latent import LatentSpec
from lexigan.layers import Dense, Flatten, Network
from lexigan.models import ModelConfig, build_critic, build_generator
from lexigan.ops import conv1d, conv1d_input_grad
from lexigan.train import gradient_penalty


def adjoint_identity(rng: np.random.Generator) -> None:
    print("== adjoint identity ==")
    for trial in range(5):
        b, cin, cout = (int(v) for v in rng.integers(1, 4, size=3))
        s = int(rng.integers(1, 4))
        k = int(rng.integers(s, 9))
        length = int(rng.integers(k + 2, 40))
        pad = (int(rng.integers(0, k)), int(rng.integers(0, k)))
        x = rng.normal(size=(b, cin, length))
        w = rng.normal(size=(cout, cin, k))
        fwd = conv1d(x, w, stride=s, padding=pad)
        y = rng.normal(size=fwd.shape)
        lhs = float((fwd * y).sum())
        rhs = float((conv1d_input_grad(y, w, s, pad, length) * x).sum())
        print(f"  geometry {trial}: <conv x, y> = {lhs:+10.6f}   "
              f"<x, adj y> = {rhs:+10.6f}   |diff| = {abs(lhs - rhs):.2e}")


def stack_gradcheck(rng: np.random.Generator) -> None:
    print("== generator -> critic gradient vs finite differences ==")
    model = ModelConfig(slice_len=64, model_dim=4, n_layers=2, seed_len=4,
                        kernel=9, stride=4)
    spec = LatentSpec(kind="one_hot", size=4, noise_dim=6)
    G = build_generator(model, spec, rng).astype(np.float64)
    D = build_critic(model, rng).astype(np.float64)

    def mean_score(lat):
        audio, g_caches = G.forward(lat, keep=True)
        scores, d_caches = D.forward(audio, keep=True)
        value = float(scores.mean())
        grad_audio = D.backward(np.full(scores.shape, 1.0 / scores.size),
                                d_caches, accumulate=False)
        grad_lat = G.backward(grad_audio, g_caches, accumulate=False)
        return value, grad_lat

    lat = rng.normal(size=(2, spec.total_dim))
    err = grad_check(mean_score, lat)
    print(f"  max relative error over {lat.size} latent entries: {err:.2e}")


def penalty_closed_form(rng: np.random.Generator) -> None:
    print("== gradient penalty closed form ==")
    n_in = 32
    for g in (0.25, 1.0, 2.5):
        w = rng.normal(size=n_in)
        w *= g / np.linalg.norm(w)
        layer = Dense(n_in, 1, np.random.default_rng(0), "lin")
        critic = Network([Flatten(), layer], "critic").astype(np.float64)
        critic.layers[1].w.data = w.reshape(n_in, 1)
        critic.layers[1].b.data = np.zeros(1)
        real = rng.normal(size=(4, 1, n_in))
        fake = rng.normal(size=(4, 1, n_in))
        gp = gradient_penalty(critic, real, fake, rng=np.random.default_rng(0))
        print(f"  critic weight norm {g:4.2f}: penalty {gp:.10f}   "
              f"closed form {(g - 1) ** 2:.10f}")


if __name__ == "__main__":
    rng = np.random.default_rng(7)
    adjoint_identity(rng)
    stack_gradcheck(rng)
    penalty_closed_form(rng)
