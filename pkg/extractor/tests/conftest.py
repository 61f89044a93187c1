import math
import shutil
import struct
import subprocess
import sys
import wave
from pathlib import Path

import pytest


def make_wav(path, frequency=440.0, seconds=1.0, rate=16000, channels=1):
    """Small PCM16 sine-tone WAV."""
    n_frames = int(seconds * rate)
    amplitude = 0.4 * 32767
    with wave.open(str(path), "wb") as handle:
        handle.setnchannels(channels)
        handle.setsampwidth(2)
        handle.setframerate(rate)
        frames = bytearray()
        for index in range(n_frames):
            value = int(amplitude * math.sin(2 * math.pi * frequency * index / rate))
            frames += struct.pack("<h", value) * channels
        handle.writeframes(bytes(frames))
    return Path(path)


def write_manifest(path, rows):
    lines = ["clip_id,path,label"]
    lines += [f"{clip_id},{clip_path},{label}" for clip_id, clip_path, label in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return Path(path)


def run_primary_validate(mioe_path):
    """Check a corpus through the benchmark engine's own CLI."""
    command = [shutil.which("miobench") or "miobench", "validate", str(mioe_path)]
    if shutil.which("miobench") is None:
        command = [sys.executable, "-m", "miobench", "validate", str(mioe_path)]
    return subprocess.run(command, capture_output=True, text=True)


@pytest.fixture
def three_clip_manifest(tmp_path):
    clips = []
    for index, frequency in enumerate((220.0, 440.0, 880.0)):
        wav = make_wav(tmp_path / f"clip{index}.wav", frequency, seconds=0.5)
        clips.append((f"clip-{index}", wav.name, "bonafide" if index % 2 == 0
                      else "spoof"))
    return write_manifest(tmp_path / "manifest.csv", clips)
