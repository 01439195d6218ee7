"""Reference MS-SSIM values for tests/metrics.rs, computed with the
pytorch_msssim package in float64 with a float64 window (TensorFlow's
float32 ssim_multiscale printed alongside as a cross-check)."""
import numpy as np
import tensorflow as tf
import torch
from pytorch_msssim import ms_ssim

N = 192
y, x = np.mgrid[0:N, 0:N].astype(np.float64)
gt = 10 + 5 * np.sin(x / 9) * np.cos(y / 13) + 3 * np.exp(-((x - 96) ** 2 + (y - 80) ** 2) / 400)
c = np.arange(11) - 5.0
g = np.exp(-(c**2) / (2 * 1.5**2))
win = torch.from_numpy(g / g.sum())[None, None, None]
checker = np.where(((x // 4) + (y // 4)) % 2 == 0, 2.0, -2.0)

for name, pred in [("checkerboard", 3.0 * (gt + checker)), ("ramped_checkerboard", 0.5 * gt + checker * (x / N))]:
    alpha = np.sum(gt * pred) / np.sum(pred * pred)
    rng = gt.max() - gt.min()
    t = lambda a: torch.from_numpy(np.ascontiguousarray(a))[None, None]
    ref = ms_ssim(t(gt), t(alpha * pred), data_range=rng, size_average=True, win=win).item()
    tf_val = tf.image.ssim_multiscale(
        tf.constant(gt[None, :, :, None]), tf.constant(alpha * pred[None, :, :, None]), max_val=rng
    )
    print(name, repr(ref), float(tf_val.numpy()[0]))
