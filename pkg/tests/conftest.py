import numpy as np
import torch


def max_fd_error(loss_fn, tensors, step):
    """Worst |analytic - central fd| / max(1, |analytic|, |fd|) over all coords.

    loss_fn must be a pure scalar function of the current tensor values;
    every tensor in `tensors` is perturbed elementwise.
    """
    for t in tensors:
        t.requires_grad_(True)
        if t.grad is not None:
            t.grad = None
    loss = loss_fn()
    loss.backward()
    grads = [t.grad.detach().clone() for t in tensors]
    worst = 0.0
    with torch.no_grad():
        for t, g in zip(tensors, grads):
            flat = t.view(-1)
            gflat = g.view(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + step
                f_plus = float(loss_fn())
                flat[i] = orig - step
                f_minus = float(loss_fn())
                flat[i] = orig
                fd = (f_plus - f_minus) / (2.0 * step)
                an = float(gflat[i])
                worst = max(worst, abs(an - fd) / max(1.0, abs(an), abs(fd)))
    return worst


def bilinear_scalar(src, out_h, out_w):
    """Reference bilinear interpolator, half-pixel centers, scalar loops."""
    src = np.asarray(src, dtype=np.float64)
    in_h, in_w = src.shape
    out = np.empty((out_h, out_w), dtype=np.float64)
    sy = in_h / out_h
    sx = in_w / out_w
    for oy in range(out_h):
        fy = (oy + 0.5) * sy - 0.5
        y0 = int(np.floor(fy))
        wy = fy - y0
        y0c = min(max(y0, 0), in_h - 1)
        y1c = min(max(y0 + 1, 0), in_h - 1)
        for ox in range(out_w):
            fx = (ox + 0.5) * sx - 0.5
            x0 = int(np.floor(fx))
            wx = fx - x0
            x0c = min(max(x0, 0), in_w - 1)
            x1c = min(max(x0 + 1, 0), in_w - 1)
            top = src[y0c, x0c] * (1 - wx) + src[y0c, x1c] * wx
            bot = src[y1c, x0c] * (1 - wx) + src[y1c, x1c] * wx
            out[oy, ox] = top * (1 - wy) + bot * wy
    return out


def auc_bruteforce(probs, gt):
    """All-pairs Mann-Whitney AUC with ties counted one half."""
    p = np.asarray(probs, dtype=np.float64).ravel()
    g = np.asarray(gt).astype(bool).ravel()
    pos = p[g]
    neg = p[~g]
    wins = 0.0
    for a in pos:
        for b in neg:
            if a > b:
                wins += 1.0
            elif a == b:
                wins += 0.5
    return wins / (len(pos) * len(neg))
