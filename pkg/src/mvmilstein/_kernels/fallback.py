"""Pure-numpy implementation of the one-step update.

Reference semantics for the compiled kernel: given the coefficient arrays
evaluated at the frozen pre-step measure, apply the taming slot to each
coefficient vector (over the last axis) and contract with the step noise.
"""

import numpy as np

# kind codes: 0 identity, 1 tanh, 2 sine, 3 tamed (norm over last axis)


def _apply(arr, h, code):
    if code == 0:
        return arr
    if code == 1:
        return np.tanh(h * arr) / h
    if code == 2:
        return np.sin(h * arr) / h
    if code == 3:
        norms = np.sqrt(np.sum(arr * arr, axis=-1, keepdims=True))
        return arr / (1.0 + h * norms)
    raise ValueError(f"unknown taming kind code {code}")


def milstein_step(states, F, G, LY, LR, dW, own_I, cross_I, h, kinds,
                  use_correction, use_measure):
    """One update of all particles.

    states (N, d); F (N, d); G (N, m, d); LY (N, m, m, d) indexed
    [i, j2, j1, :]; LR (N, N, m, m, d) indexed [i, k1, j2, j1, :];
    dW (N, m); own_I (N, m, m) indexed [i, j2, j1]; cross_I (N*m, N*m)
    indexed [(k1, j2), (i, j1)].
    """
    N, d = states.shape
    m = dW.shape[1]
    out = states + _apply(F, h, kinds[0]) * h
    out += np.einsum("ijd,ij->id", _apply(G, h, kinds[1]), dW)
    if use_correction:
        out += np.einsum("iabd,iab->id", _apply(LY, h, kinds[2]), own_I)
        if use_measure:
            crossI4 = cross_I.reshape(N, m, N, m)  # [k1, j2, i, j1]
            out += np.einsum("ikabd,kaib->id",
                             _apply(LR, h, kinds[3]), crossI4) / N
    return out
