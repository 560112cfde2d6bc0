"""Central finite-difference oracles for verifying analytic gradients.

These helpers stay independent of the library's backward passes: they only
call forward evaluations with perturbed values.
"""

import numpy as np

from seqtrans.nn import bce_loss


def numerical_grad(loss_fn, array, eps=1e-5):
    """Central-difference gradient of ``loss_fn()`` w.r.t. ``array`` (mutated in place)."""
    grad = np.zeros_like(array)
    flat = array.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = loss_fn()
        flat[i] = orig - eps
        down = loss_fn()
        flat[i] = orig
        out[i] = (up - down) / (2.0 * eps)
    return grad


def max_rel_err(analytic, numeric, atol=1e-8):
    """Worst elementwise relative error with an absolute floor for near-zeros."""
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), atol)
    return float((np.abs(analytic - numeric) / denom).max())


def assert_grads_close(analytic, numeric, rtol=1e-4, atol=1e-8, context=""):
    err = max_rel_err(analytic, numeric, atol=atol)
    assert err <= rtol, f"{context}: relative gradient error {err:.3e} > {rtol:.0e}"


def jitter_model(model, seed=7, scale=0.05):
    """Perturb all parameters so no gradient path is degenerately zero.

    The transform-net head bias is pinned to generic values that keep the
    resampler's fractional indices away from integer kinks.
    """
    rng = np.random.default_rng(seed)
    for name, p in model.parameters():
        p.weights += rng.normal(0.0, scale, size=p.weights.shape)
        p.bias += rng.normal(0.0, scale, size=p.bias.shape)
        if name.endswith("transform_net.head"):
            p.bias[...] = [1.1731, 0.0837, 0.9139, -0.1121]


def model_loss_fn(model, x, y, rng_seed=123):
    """Deterministic loss closure: dropout redraws the same mask every call."""
    def loss_fn():
        probs = model.forward(x, training=True,
                              rng=np.random.default_rng(rng_seed))
        return bce_loss(probs, y)[0]
    return loss_fn


def check_model_grads(model, x, y, rtol=1e-4, eps=1e-5, rng_seed=123, atol=1e-6,
                      only_prefix=""):
    """Compare parameter gradients of a model against finite differences.

    ``only_prefix`` restricts the check to matching parameter names (the
    loss still runs through the whole model). Returns the worst relative
    error observed across the checked tensors.
    """
    loss_fn = model_loss_fn(model, x, y, rng_seed)
    model.zero_grads()
    probs = model.forward(x, training=True, rng=np.random.default_rng(rng_seed))
    _, grad = bce_loss(probs, y)
    model.backward(grad)
    worst = 0.0
    for name, p in model.parameters():
        if only_prefix and not name.startswith(only_prefix):
            continue
        for label, arr, analytic in (("weights", p.weights, p.grad_weights),
                                     ("bias", p.bias, p.grad_bias)):
            numeric = numerical_grad(loss_fn, arr, eps=eps)
            err = max_rel_err(analytic, numeric, atol=atol)
            assert err <= rtol, (f"{name}.{label}: relative gradient error "
                                 f"{err:.3e} > {rtol:.0e}")
            worst = max(worst, err)
    return worst
