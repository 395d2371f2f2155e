"""Sweep training lr; report gate metrics and edge/interior PCE split."""
import sys
import time

import numpy as np
from scipy import ndimage

from phasekit import geninsar, metrics
from phasekit.filters import BoxcarConfig, boxcar_filter
from phasekit.grid import CoherenceMap, phase_to_phasor, wrap
from phasekit.simulate import NoiseSpec, add_noise, generate_truth, random_scene

GAMMA = 0.7


def make_scene(seed, noise_seed):
    spec = random_scene(256, 256, seed=seed)
    _, wrapped, _ = generate_truth(spec)
    noisy = add_noise(wrapped, NoiseSpec(mode="uniform", gamma=GAMMA, seed=noise_seed))
    return wrapped, noisy


def edge_mask(truth, width=4):
    g = np.abs(np.diff(truth.data.astype(np.float64), axis=0, prepend=truth.data[:1]))
    g2 = np.abs(np.diff(truth.data.astype(np.float64), axis=1, prepend=truth.data[:, :1]))
    steps = (np.maximum(g, g2) > 0.5)
    return ndimage.binary_dilation(steps, iterations=width)


def pce_split(truth, filt, mask):
    d = wrap(truth.data.astype(np.float64) - filt.data.astype(np.float64))
    err = 0.5 * (1 - np.cos(d))
    return err[mask].mean(), err[~mask].mean()


train_fields = []
for s in range(20):
    _, noisy = make_scene(1000 + s, 2000 + s)
    train_fields.append(phase_to_phasor(noisy))

tests = [make_scene(5000 + s, 6000 + s) for s in range(10)]
truth_coh = CoherenceMap(np.full((256, 256), GAMMA, dtype=np.float32))

for lr in [float(a) for a in sys.argv[1:]] or (2e-3,):
    cfg = geninsar.TrainConfig(epochs=2, patches_per_epoch=100_000, batch=64, lr=lr,
                               seed=0, arch="desk")
    t0 = time.perf_counter()
    result = geninsar.train(train_fields, cfg)
    weights = result.weights
    print(f"\nlr={lr}: trained in {(time.perf_counter()-t0)/60:.1f} min, "
          f"final ema {result.history[-1][2]:.4f}", flush=True)

    gp, bp, gr, br, gc = [], [], [], [], []
    ge_edge, ge_int, be_edge, be_int = [], [], [], []
    for truth, noisy in tests:
        field = phase_to_phasor(noisy)
        gfield = geninsar.predict_full(weights, field)
        gphase = geninsar.filtered_phase(gfield)
        gcoh = geninsar.coherence_from_sigma(gfield)
        bphase, bcoh = boxcar_filter(field, BoxcarConfig(window=7))
        m = edge_mask(truth)
        e, i = pce_split(truth, gphase, m); ge_edge.append(e); ge_int.append(i)
        e, i = pce_split(truth, bphase, m); be_edge.append(e); be_int.append(i)
        gp.append(metrics.phase_cosine_error(truth, gphase))
        bp.append(metrics.phase_cosine_error(truth, bphase))
        gr.append(metrics.rrp(noisy, gphase))
        br.append(metrics.rrp(noisy, bphase))
        gc.append(metrics.coherence_rmse(truth_coh, gcoh))
    print(f"  gen PCE {np.mean(gp):.5f} (edge {np.mean(ge_edge):.5f} int {np.mean(ge_int):.5f}) | "
          f"box PCE {np.mean(bp):.5f} (edge {np.mean(be_edge):.5f} int {np.mean(be_int):.5f})")
    print(f"  gen RRP {np.mean(gr):.2f} box RRP {np.mean(br):.2f} gen cohRMSE {np.mean(gc):.4f} "
          f"| PCE gate: {np.mean(gp) < np.mean(bp)}", flush=True)
