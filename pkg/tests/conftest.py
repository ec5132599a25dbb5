import numpy as np
import pytest

from vowelseg.dsp import Waveform
from vowelseg.features import FEATURE_NAMES, AcousticFrameSequence

SR = 16000

# filled by test_acceptance; printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def tone(freq, seconds, amp=0.5, sr=SR, phase=0.0):
    t = np.arange(int(round(seconds * sr))) / sr
    return amp * np.sin(2 * np.pi * freq * t + phase)


def harmonic(f0, seconds, n_harm=10, amp=0.6, sr=SR):
    t = np.arange(int(round(seconds * sr))) / sr
    x = sum(np.sin(2 * np.pi * k * f0 * t) / k for k in range(1, n_harm + 1))
    return amp * x / np.max(np.abs(x))


def wave(x, sr=SR):
    return Waveform(np.asarray(x, dtype=np.float64), sr)


def random_sequence(rng, T):
    """Uniform [0, 1) features: satisfies every column's range invariant."""
    return AcousticFrameSequence(rng.random((T, len(FEATURE_NAMES))))


def planted_examples(rng, m, T=100):
    """Noise frames with a raised block over the target interval, so the
    boundaries are learnable from energy and voicing."""
    from vowelseg.train import TrainingExample
    out = []
    for i in range(m):
        frames = 0.1 * rng.random((T, len(FEATURE_NAMES)))
        t_b = int(rng.integers(20, 40))
        t_e = t_b + int(rng.integers(15, 40))
        frames[t_b - 1:t_e, [0, 1, 2, 7]] += 0.8
        out.append(TrainingExample(AcousticFrameSequence(frames), (t_b, t_e), f"tok{i:03d}"))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
