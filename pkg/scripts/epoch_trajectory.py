"""Track gate metrics per epoch to see where the desk net saturates."""
import sys
import time

import numpy as np

from phasekit import geninsar, metrics
from phasekit.filters import BoxcarConfig, boxcar_filter
from phasekit.grid import CoherenceMap, phase_to_phasor
from phasekit.simulate import NoiseSpec, add_noise, generate_truth, random_scene

GAMMA = 0.7
LR = float(sys.argv[1]) if len(sys.argv) > 1 else 1e-3
EPOCHS = int(sys.argv[2]) if len(sys.argv) > 2 else 6
SEED = int(sys.argv[3]) if len(sys.argv) > 3 else 0


def make_scene(seed, noise_seed):
    spec = random_scene(256, 256, seed=seed)
    _, wrapped, _ = generate_truth(spec)
    noisy = add_noise(wrapped, NoiseSpec(mode="uniform", gamma=GAMMA, seed=noise_seed))
    return wrapped, noisy


train_fields = [phase_to_phasor(make_scene(1000 + s, 2000 + s)[1]) for s in range(20)]
tests = [make_scene(5000 + s, 6000 + s) for s in range(4)]
truth_coh = CoherenceMap(np.full((256, 256), GAMMA, dtype=np.float32))

box_pce = []
for truth, noisy in tests:
    bphase, _ = boxcar_filter(phase_to_phasor(noisy), BoxcarConfig(window=7))
    box_pce.append(metrics.phase_cosine_error(truth, bphase))
print(f"boxcar PCE over 4 scenes: {np.mean(box_pce):.5f}", flush=True)


def eval_weights(weights):
    pces, rmses, cohs = [], [], []
    for truth, noisy in tests:
        gfield = geninsar.predict_full(weights, phase_to_phasor(noisy))
        gphase = geninsar.filtered_phase(gfield)
        pces.append(metrics.phase_cosine_error(truth, gphase))
        rmses.append(metrics.phase_rmse(truth, gphase))
        cohs.append(metrics.coherence_rmse(truth_coh, geninsar.coherence_from_sigma(gfield)))
    return np.mean(pces), np.mean(rmses), np.mean(cohs)


t0 = time.perf_counter()


def hook(epoch, weights, state):
    pce, rmse, coh = eval_weights(weights)
    print(f"epoch {epoch}: ema {state.ema:.4f} PCE {pce:.5f} RMSE {rmse:.4f} "
          f"cohRMSE {coh:.4f} ({(time.perf_counter()-t0)/60:.1f} min)", flush=True)


cfg = geninsar.TrainConfig(epochs=EPOCHS, patches_per_epoch=100_000, batch=64,
                           lr=LR, seed=SEED, arch="desk")
geninsar.train(train_fields, cfg, epoch_hook=hook)
