"""Central finite-difference gradient checking used across the test suite."""

import numpy as np

from scref.autodiff import Tape


def finite_diff_check(loss_builder, params, rng, n_samples=64, h=1e-5, rtol=1e-4):
    """Compare tape gradients against central differences on random entries.

    loss_builder must rebuild the loss from the live parameter tensors each
    call; it is invoked once under a tape and twice per probed entry without
    one. Returns the worst relative error seen.
    """
    with Tape() as tape:
        loss = loss_builder()
    grads = tape.gradients(loss, params)

    flat_sizes = [p.data.size for p in params]
    total = sum(flat_sizes)
    worst = 0.0
    for _ in range(n_samples):
        idx = int(rng.integers(total))
        pi = 0
        while idx >= flat_sizes[pi]:
            idx -= flat_sizes[pi]
            pi += 1
        p = params[pi]
        flat = p.data.reshape(-1)
        old = flat[idx]
        flat[idx] = old + h
        up = float(loss_builder().data)
        flat[idx] = old - h
        down = float(loss_builder().data)
        flat[idx] = old
        fd = (up - down) / (2 * h)
        an = float(grads[pi].reshape(-1)[idx])
        err = abs(an - fd) / max(abs(an), abs(fd), 1e-6)
        worst = max(worst, err)
        assert err < rtol, f"param {pi} entry {idx}: analytic {an} vs fd {fd} (rel {err:.2e})"
    return worst
