"""WAV decoding and resampling to the 16 kHz mono float32 the models expect."""

from __future__ import annotations

from math import gcd

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

TARGET_RATE = 16000

_PCM_SCALE = {
    np.dtype(np.int16): 32768.0,
    np.dtype(np.int32): 2147483648.0,
}


def decode_wav(path) -> tuple[int, np.ndarray]:
    """Return (sample_rate, mono float32 waveform in [-1, 1])."""
    rate, data = wavfile.read(path)
    if data.size == 0:
        raise ValueError("empty audio stream")
    if data.dtype in _PCM_SCALE:
        waveform = data.astype(np.float32) / _PCM_SCALE[data.dtype]
    elif data.dtype == np.uint8:
        waveform = (data.astype(np.float32) - 128.0) / 128.0
    else:
        waveform = data.astype(np.float32)
    if waveform.ndim == 2:
        waveform = waveform.mean(axis=1)
    return int(rate), waveform


def resample_to_16k(waveform: np.ndarray, rate: int) -> np.ndarray:
    if rate == TARGET_RATE:
        return waveform.astype(np.float32)
    if rate < 1:
        raise ValueError(f"invalid sample rate {rate}")
    divisor = gcd(TARGET_RATE, rate)
    out = resample_poly(waveform, TARGET_RATE // divisor, rate // divisor)
    return np.asarray(out, dtype=np.float32)


def load_clip_16k(path) -> np.ndarray:
    rate, waveform = decode_wav(path)
    return resample_to_16k(waveform, rate)
