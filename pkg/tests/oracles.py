"""Independent reference implementations used to check the engine.

Everything here is deliberately naive: pure-python sweeps, nested loops,
finite differences. None of it shares code with the package under test.
"""

import numpy as np


def brute_force_eer(labels, scores):
    """O(n^2) sweep over every observed score plus +inf.

    Same convention as the engine: FPR counts bonafide >= t, FNR counts
    spoof < t, pick the threshold minimizing |FPR - FNR| with ties going
    to the smaller FPR and then the smaller threshold.
    """
    labels = list(labels)
    scores = list(scores)
    bona = [s for s, y in zip(scores, labels) if y == 0]
    spoof = [s for s, y in zip(scores, labels) if y == 1]
    assert bona and spoof
    candidates = sorted(set(scores)) + [float("inf")]
    best = None
    for t in candidates:
        fpr = sum(1 for s in bona if s >= t) / len(bona)
        fnr = sum(1 for s in spoof if s < t) / len(spoof)
        key = (abs(fpr - fnr), fpr, t)
        if best is None or key < best[0]:
            best = (key, (fpr + fnr) / 2.0, t, fpr, fnr)
    _, eer, threshold, fpr, fnr = best
    return eer, threshold, fpr, fnr


def loss_only(model, inputs, labels):
    loss, _ = model.loss_and_grads(*inputs, labels)
    return loss


def finite_difference_max_rel_error(model, inputs, labels, h=1e-3):
    """Central finite differences on a float64 copy of the model.

    Returns the worst relative disagreement between the analytic gradient
    and the finite-difference estimate over every parameter entry.
    """
    m64 = model.astype(np.float64)
    inputs64 = tuple(np.atleast_2d(np.asarray(x, dtype=np.float64)) for x in inputs)
    labels = np.asarray(labels)
    _, grads = m64.loss_and_grads(*inputs64, labels)
    worst = 0.0
    for param, grad in zip(m64.parameters(), grads):
        flat_p = param.ravel()
        flat_g = np.asarray(grad).ravel()
        for i in range(flat_p.size):
            keep = flat_p[i]
            flat_p[i] = keep + h
            up = loss_only(m64, inputs64, labels)
            flat_p[i] = keep - h
            down = loss_only(m64, inputs64, labels)
            flat_p[i] = keep
            estimate = (up - down) / (2.0 * h)
            rel = abs(flat_g[i] - estimate) / max(abs(flat_g[i]) + abs(estimate), 1e-3)
            worst = max(worst, rel)
    return worst


def nearest_mean_errors(train_x, train_y, test_x, test_y):
    """Error count of the classifier assigning each point to the closer class mean."""
    mean0 = train_x[train_y == 0].mean(axis=0)
    mean1 = train_x[train_y == 1].mean(axis=0)
    errors = 0
    for x, y in zip(test_x, test_y):
        predicted = 0 if np.sum((x - mean0) ** 2) <= np.sum((x - mean1) ** 2) else 1
        errors += predicted != y
    return errors


def integer_corpus_values(rng, shape, low=-4, high=5):
    """Small integer-valued floats: exact under any summation order."""
    return rng.integers(low, high, size=shape).astype(np.float32)
