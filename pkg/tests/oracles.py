"""Independent reference implementations used as test oracles.

Everything here is written with explicit loops in float64 and never calls the
library code it is checking (beyond reading parameter values out of modules).
"""
import math

import numpy as np

SLOPE = 0.2


def lrelu(x):
    return np.where(x >= 0, x, SLOPE * x)


def conv1d(x, w, b, stride=1, padding=0, dilation=1, groups=1, vectorize_time=True):
    """Direct-summation 1-D convolution. x (Cin, T), w (Cout, Cin/groups, K)."""
    cin, t_in = x.shape
    cout, cin_g, k = w.shape
    xp = np.zeros((cin, t_in + 2 * padding))
    xp[:, padding:padding + t_in] = x
    t_out = (t_in + 2 * padding - dilation * (k - 1) - 1) // stride + 1
    out_per_group = cout // groups
    y = np.zeros((cout, t_out))
    for o in range(cout):
        g = o // out_per_group
        y[o] += b[o] if b is not None else 0.0
        for i in range(cin_g):
            ch = g * cin_g + i
            for j in range(k):
                if vectorize_time:
                    start = j * dilation
                    y[o] += w[o, i, j] * xp[ch, start:start + stride * (t_out - 1) + 1:stride]
                else:
                    for t in range(t_out):
                        y[o, t] += w[o, i, j] * xp[ch, t * stride + j * dilation]
    return y


def conv_transpose1d(x, w, b, stride, padding, output_padding=0):
    """Scatter-add transposed convolution. x (Cin, T), w (Cin, Cout, K)."""
    cin, t_in = x.shape
    _, cout, k = w.shape
    full = np.zeros((cout, (t_in - 1) * stride + k + output_padding))
    for i in range(cin):
        for t in range(t_in):
            for o in range(cout):
                for j in range(k):
                    full[o, t * stride + j] += x[i, t] * w[i, o, j]
    t_out = (t_in - 1) * stride - 2 * padding + k + output_padding
    y = full[:, padding:padding + t_out]
    if b is not None:
        y = y + np.asarray(b)[:, None]
    return y


def _np(p):
    return None if p is None else p.detach().double().numpy()


def conv_module(mod, x, **kw):
    return conv1d(x, _np(mod.weight), _np(mod.bias), mod.stride[0], mod.padding[0],
                  mod.dilation[0], mod.groups, **kw)


def up_block(block, h, sine_gamma, sine_xi, loud_gamma, loud_xi, mu):
    up = block.upconv
    x = conv_transpose1d(lrelu(h), _np(up.weight), _np(up.bias), up.stride[0], up.padding[0],
                         up.output_padding[0])
    for layer in block.res:
        y = (sine_gamma + loud_gamma) * x + sine_xi + loud_xi
        x = x + conv_module(layer.conv, lrelu(y))
    return x - x.mean(axis=1, keepdims=True) + np.asarray(mu)[:, None]


def down_block(block, h):
    x = conv_module(block.conv, h)
    for layer in block.res:
        x = x + conv_module(layer.conv, lrelu(x))
    return x


def condition_stream(stream, signal):
    out = []
    x = signal
    for block, head in zip(stream.down, stream.heads):
        x = down_block(block, x)
        gx = conv_module(head, x)
        c = gx.shape[0] // 2
        out.append((gx[:c], gx[c:]))
    return out[::-1]


def speaker_stream(stream, audio):
    means = []
    x = audio
    for block in stream.down:
        x = down_block(block, x)
        mu = x.mean(axis=1)
        x = x - mu[:, None]
        means.append(mu)
    return means, conv_module(stream.ling_head, x)


def generator(gen, ling, sine, loud, means):
    films_s = condition_stream(gen.sine_stream, sine)
    films_l = condition_stream(gen.loud_stream, loud)
    x = conv_module(gen.pre_conv, ling)
    for k, block in enumerate(gen.up):
        (gs, xs), (gl, xl) = films_s[k], films_l[k]
        x = up_block(block, x, gs, xs, gl, xl, means[::-1][k])
    return np.tanh(conv_module(gen.post_conv, lrelu(x)))


def avg_pool(x, kernel=4, stride=2, padding=1):
    """Average pooling that ignores padded positions."""
    t_in = x.shape[-1]
    t_out = (t_in + 2 * padding - kernel) // stride + 1
    y = np.zeros(x.shape[:-1] + (t_out,))
    for t in range(t_out):
        lo, hi = t * stride - padding, t * stride - padding + kernel
        lo, hi = max(lo, 0), min(hi, t_in)
        y[..., t] = x[..., lo:hi].sum(axis=-1) / (hi - lo)
    return y


def discriminator(disc, audio):
    scores = []
    x = audio
    for k, sub in enumerate(disc.subs):
        if k:
            x = avg_pool(x)
        h = x
        for layer in sub.layers[:-1]:
            h = lrelu(conv_module(layer, h))
        scores.append(conv_module(sub.layers[-1], h))
    return scores


# --- spectral ---------------------------------------------------------------

def hann(n):
    return np.array([0.5 - 0.5 * math.cos(2 * math.pi * i / n) for i in range(n)])


def naive_stft_mag(x, n_fft):
    """Reflect-padded, centered frames, hop n_fft/4, explicit DFT sums."""
    pad = n_fft // 2
    xp = np.concatenate([x[1:pad + 1][::-1], x, x[-pad - 1:-1][::-1]])
    hop = n_fft // 4
    n_frames = 1 + (len(xp) - n_fft) // hop
    w = hann(n_fft)
    n = np.arange(n_fft)
    mags = np.zeros((n_fft // 2 + 1, n_frames))
    for f in range(n_fft // 2 + 1):
        c, s = np.cos(2 * np.pi * f * n / n_fft), np.sin(2 * np.pi * f * n / n_fft)
        for t in range(n_frames):
            seg = xp[t * hop:t * hop + n_fft] * w
            mags[f, t] = max(math.hypot(seg @ c, seg @ s), 1e-7)
    return mags


def naive_stft_loss(x, x_hat, sizes):
    total = 0.0
    for m in sizes:
        s, sh = naive_stft_mag(x, m), naive_stft_mag(x_hat, m)
        sc = math.sqrt(((s - sh) ** 2).sum()) / math.sqrt((s ** 2).sum())
        total += sc + np.abs(np.log(s) - np.log(sh)).sum() / s.size
    return total / len(sizes)


def central_difference(f, x, eps=1e-6):
    """Gradient of scalar f at x (float64 array) by central differences."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        fp = f(x)
        flat[i] = old - eps
        fm = f(x)
        flat[i] = old
        gf[i] = (fp - fm) / (2 * eps)
    return g


def a_weight_db(f):
    """A-weighting from the analogue pole frequencies (20.6, 107.7, 737.9, 12194 Hz)."""
    ra = (12194 ** 2 * f ** 4) / ((f ** 2 + 20.6 ** 2)
                                  * math.sqrt((f ** 2 + 107.7 ** 2) * (f ** 2 + 737.9 ** 2))
                                  * (f ** 2 + 12194 ** 2))
    return 20 * math.log10(ra) + 2.0
