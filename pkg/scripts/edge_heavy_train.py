"""Train on edge-heavy scenes, evaluate on the standard test scenes."""
import sys
import time

import numpy as np
from scipy import ndimage

from phasekit import geninsar, metrics
from phasekit.filters import BoxcarConfig, boxcar_filter
from phasekit.grid import CoherenceMap, phase_to_phasor, wrap
from phasekit.simulate import NoiseSpec, add_noise, generate_truth, random_scene

GAMMA = 0.7
LR = float(sys.argv[1]) if len(sys.argv) > 1 else 5e-4
ROADS = (int(sys.argv[2]), int(sys.argv[3])) if len(sys.argv) > 3 else (3, 6)
BUILDINGS = (int(sys.argv[4]), int(sys.argv[5])) if len(sys.argv) > 5 else (3, 7)


def make_scene(seed, noise_seed, **kw):
    spec = random_scene(256, 256, seed=seed, **kw)
    _, wrapped, _ = generate_truth(spec)
    noisy = add_noise(wrapped, NoiseSpec(mode="uniform", gamma=GAMMA, seed=noise_seed))
    return wrapped, noisy


def edge_mask(truth, width=4):
    g = np.abs(np.diff(truth.data.astype(np.float64), axis=0, prepend=truth.data[:1]))
    g2 = np.abs(np.diff(truth.data.astype(np.float64), axis=1, prepend=truth.data[:, :1]))
    return ndimage.binary_dilation(np.maximum(g, g2) > 0.5, iterations=width)


def pce_split(truth, filt, mask):
    d = wrap(truth.data.astype(np.float64) - filt.data.astype(np.float64))
    err = 0.5 * (1 - np.cos(d))
    return err[mask].mean(), err[~mask].mean()


train_fields = [phase_to_phasor(make_scene(1000 + s, 2000 + s,
                                           n_roads=ROADS, n_buildings=BUILDINGS)[1])
                for s in range(20)]
tests = [make_scene(5000 + s, 6000 + s) for s in range(10)]
truth_coh = CoherenceMap(np.full((256, 256), GAMMA, dtype=np.float32))

cfg = geninsar.TrainConfig(epochs=2, patches_per_epoch=100_000, batch=64, lr=LR,
                           seed=0, arch="desk")
t0 = time.perf_counter()
weights = geninsar.train(train_fields, cfg).weights
print(f"lr={LR} roads={ROADS} buildings={BUILDINGS}: {(time.perf_counter()-t0)/60:.1f} min",
      flush=True)

gp, bp, gr, br, gc, ge, gi, be, bi = [], [], [], [], [], [], [], [], []
for truth, noisy in tests:
    field = phase_to_phasor(noisy)
    gfield = geninsar.predict_full(weights, field)
    gphase = geninsar.filtered_phase(gfield)
    bphase, _ = boxcar_filter(field, BoxcarConfig(window=7))
    m = edge_mask(truth)
    e, i = pce_split(truth, gphase, m); ge.append(e); gi.append(i)
    e, i = pce_split(truth, bphase, m); be.append(e); bi.append(i)
    gp.append(metrics.phase_cosine_error(truth, gphase))
    bp.append(metrics.phase_cosine_error(truth, bphase))
    gr.append(metrics.rrp(noisy, gphase))
    br.append(metrics.rrp(noisy, bphase))
    gc.append(metrics.coherence_rmse(truth_coh, geninsar.coherence_from_sigma(gfield)))
print(f"  gen PCE {np.mean(gp):.5f} (edge {np.mean(ge):.5f} int {np.mean(gi):.5f}) | "
      f"box PCE {np.mean(bp):.5f} (edge {np.mean(be):.5f} int {np.mean(bi):.5f})")
print(f"  gen RRP {np.mean(gr):.2f} box RRP {np.mean(br):.2f} cohRMSE {np.mean(gc):.4f} "
      f"| PCE gate: {np.mean(gp) < np.mean(bp)}", flush=True)
