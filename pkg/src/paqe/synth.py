"""Synthetic 10-bit 4:2:0 test clips: textured backgrounds with global and object motion."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .frame_io import MAX_SAMPLE, Frame420


def _texture(rng: np.random.Generator, h: int, w: int, detail: float) -> np.ndarray:
    coarse = gaussian_filter(rng.standard_normal((h, w)), 6.0, mode="wrap")
    fine = gaussian_filter(rng.standard_normal((h, w)), 1.2, mode="wrap")
    tex = coarse / (coarse.std() + 1e-9) + detail * fine / (fine.std() + 1e-9)
    # a few hard edges so blocks see structure, not only noise
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(3):
        a, b = rng.uniform(-1, 1, 2)
        c = rng.uniform(-0.3, 0.3) * (h + w)
        tex += 0.8 * np.sign(a * (xx - w / 2) + b * (yy - h / 2) + c)
    return tex


def synth_clip(width: int = 64, height: int = 64, n_frames: int = 17, seed: int = 0,
               motion: tuple[int, int] | None = None, noise: float = 0.0,
               detail: float = 0.6, static: bool = False) -> list[Frame420]:
    """Deterministic synthetic clip.

    The background pans by ``motion`` pixels per frame (random when None),
    a bright rectangle moves independently, and ``noise`` adds temporally
    independent Gaussian noise (in 10-bit code values).
    """
    rng = np.random.default_rng(seed)
    if motion is None:
        motion = (int(rng.integers(-2, 3)), int(rng.integers(-2, 3)))
    if static:
        motion = (0, 0)
    span = max(abs(motion[0]), abs(motion[1])) * n_frames + 8
    ch, cw = height + 2 * span, width + 2 * span
    luma_tex = _texture(rng, ch, cw, detail)
    u_tex = gaussian_filter(rng.standard_normal((ch, cw)), 4.0, mode="wrap")
    v_tex = gaussian_filter(rng.standard_normal((ch, cw)), 4.0, mode="wrap")
    mean = rng.uniform(380, 640)
    amp = rng.uniform(70, 140)
    obj_w, obj_h = int(rng.integers(8, 20)), int(rng.integers(8, 20))
    obj_w, obj_h = min(obj_w, width // 2), min(obj_h, height // 2)
    obj_pos = np.array([rng.uniform(0, width - obj_w), rng.uniform(0, height - obj_h)])
    obj_vel = np.zeros(2) if static else rng.uniform(-1.5, 1.5, 2)
    obj_val = rng.uniform(100, 250)

    frames = []
    for t in range(n_frames):
        ox, oy = span + motion[0] * t, span + motion[1] * t
        y = mean + amp * luma_tex[oy:oy + height, ox:ox + width]
        u = 512 + 60 * u_tex[oy:oy + height:2, ox:ox + width:2] / (u_tex.std() + 1e-9)
        v = 512 + 60 * v_tex[oy:oy + height:2, ox:ox + width:2] / (v_tex.std() + 1e-9)
        px, py = np.clip(obj_pos + obj_vel * t, 0, [width - obj_w, height - obj_h]).astype(int)
        y[py:py + obj_h, px:px + obj_w] += obj_val
        u[py // 2:(py + obj_h) // 2, px // 2:(px + obj_w) // 2] -= obj_val / 3
        if noise:
            y = y + rng.normal(0, noise, y.shape)
            u = u + rng.normal(0, noise / 2, u.shape)
            v = v + rng.normal(0, noise / 2, v.shape)
        planes = [np.clip(np.rint(p), 0, MAX_SAMPLE).astype(np.uint16) for p in (y, u, v)]
        frames.append(Frame420(*planes, poc=t))
    return frames


def gray_clip(width: int, height: int, n_frames: int, value: int = 500) -> list[Frame420]:
    return [Frame420(np.full((height, width), value, np.uint16),
                     np.full((height // 2, width // 2), value, np.uint16),
                     np.full((height // 2, width // 2), value, np.uint16), poc=t)
            for t in range(n_frames)]
