import pytest

from cardiomix.io_formats import SynthParams, corrupt_labels, synth_ecg
from cardiomix.rng import Stream


def make_corpus(n: int, seed: int, *, bpm_range=(50, 110), noise=(0.1, 0.25),
                duration_s: float = 10.0):
    """Mixed-rate noisy synthetic records: list of (signal, labels) pairs."""
    out = []
    master = Stream(seed)
    for i in range(n):
        st = master.child(i)
        bpm = st.randint(*bpm_range)
        phase = st.uniform()
        noise_std = noise[0] + (noise[1] - noise[0]) * st.uniform()
        amp = 0.7 + 0.6 * st.uniform()
        params = SynthParams(heart_rate_bpm=bpm, duration_s=duration_s,
                             noise_std=noise_std, phase_frac=phase,
                             qrs_amp=amp, p_amp=0.15 * amp, t_amp=0.3 * amp)
        rec, labels = synth_ecg(params, st, record_id=f"c{i:03d}")
        out.append((rec.samples, labels))
    return out


def onehot_maps(pairs, sharpness: float = 1.0, seed: int = 11):
    """(signal, probs) pairs whose maps put `sharpness` on the true labels."""
    master = Stream(seed)
    return [(sig, corrupt_labels(lab, 0, 0.0, sharpness, master.child(i)))
            for i, (sig, lab) in enumerate(pairs)]


@pytest.fixture(scope="session")
def small_corpus():
    return make_corpus(8, seed=424242, duration_s=4.0)
