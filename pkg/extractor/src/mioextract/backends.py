"""Embedding backends.

`huggingface` runs the real pre-trained models (heavyweight; needs
torch + transformers, and speechbrain for the x-vector spec).

`stub` is a deterministic offline stand-in that produces embeddings of
the correct dimension from spectral band energies through a projection
seeded by the PTM id. It exists so the extraction pipeline, container
writing, and downstream validation can run end to end on machines that
cannot hold the real model weights; its vectors carry real signal
content but are obviously not the models' representations.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .audio import TARGET_RATE
from .specs import PtmSpec

STUB_BANDS = 64


class StubBackend:
    """Deterministic: log-spaced band energies x a ptm-seeded projection."""

    name = "stub"

    def __init__(self, device: str = "cpu", deterministic: bool = False):
        # always deterministic; the flags exist for interface parity
        self._projections = {}

    def _projection(self, spec: PtmSpec) -> np.ndarray:
        if spec.ptm_id not in self._projections:
            digest = hashlib.sha256(spec.ptm_id.encode("utf-8")).digest()
            seed = int.from_bytes(digest[:8], "little")
            rng = np.random.default_rng(seed)
            self._projections[spec.ptm_id] = rng.standard_normal(
                (spec.dim, STUB_BANDS + 1)
            ).astype(np.float32)
        return self._projections[spec.ptm_id]

    def _band_features(self, waveform: np.ndarray) -> np.ndarray:
        spectrum = np.abs(np.fft.rfft(waveform.astype(np.float64)))
        edges = np.unique(
            np.geomspace(1, len(spectrum), STUB_BANDS + 1).astype(int)
        )
        bands = np.zeros(STUB_BANDS, dtype=np.float64)
        for index in range(len(edges) - 1):
            segment = spectrum[edges[index] : edges[index + 1]]
            if segment.size:
                bands[index] = np.log1p(segment.mean())
        features = np.concatenate([bands, [np.log1p(len(waveform) / TARGET_RATE)]])
        return features.astype(np.float32)

    def embed(self, waveform: np.ndarray, spec: PtmSpec) -> np.ndarray:
        features = self._band_features(waveform)
        projection = self._projection(spec)
        return (projection @ features) / np.float32(np.sqrt(STUB_BANDS + 1))


class HuggingFaceBackend:
    """Real model inference through transformers (and speechbrain for x-vector)."""

    name = "huggingface"

    def __init__(self, device: str = "cpu", deterministic: bool = False):
        self.device = device
        self.deterministic = deterministic
        self._models = {}

    def _load(self, spec: PtmSpec):
        if spec.ptm_id in self._models:
            return self._models[spec.ptm_id]
        import torch

        if self.deterministic:
            torch.manual_seed(0)
        if spec.pooling == "speaker_embedding":
            try:
                from speechbrain.inference.speaker import EncoderClassifier
            except ImportError as exc:
                raise RuntimeError(
                    f"PTM {spec.ptm_id!r} needs the optional speechbrain "
                    "dependency (pip install mioextract[speechbrain])"
                ) from exc
            model = EncoderClassifier.from_hparams(
                source=spec.model_ref, run_opts={"device": self.device}
            )
            bundle = ("speechbrain", model, None)
        elif spec.pooling == "encoder_mean":
            from transformers import AutoFeatureExtractor, WhisperModel

            model = WhisperModel.from_pretrained(spec.model_ref)
            model.to(self.device).eval()
            processor = AutoFeatureExtractor.from_pretrained(spec.model_ref)
            bundle = ("whisper", model, processor)
        else:
            from transformers import AutoFeatureExtractor, AutoModel

            model = AutoModel.from_pretrained(spec.model_ref)
            model.to(self.device).eval()
            processor = AutoFeatureExtractor.from_pretrained(spec.model_ref)
            bundle = ("encoder", model, processor)
        self._models[spec.ptm_id] = bundle
        return bundle

    def embed(self, waveform: np.ndarray, spec: PtmSpec) -> np.ndarray:
        import torch

        kind, model, processor = self._load(spec)
        with torch.no_grad():
            if kind == "speechbrain":
                batch = torch.from_numpy(waveform).unsqueeze(0)
                vector = model.encode_batch(batch).squeeze()
            elif kind == "whisper":
                inputs = processor(
                    waveform, sampling_rate=TARGET_RATE, return_tensors="pt"
                )
                states = model.encoder(
                    inputs.input_features.to(self.device)
                ).last_hidden_state
                vector = states.mean(dim=1).squeeze(0)
            else:
                inputs = processor(
                    waveform, sampling_rate=TARGET_RATE, return_tensors="pt"
                )
                states = model(
                    inputs.input_values.to(self.device)
                ).last_hidden_state
                vector = states.mean(dim=1).squeeze(0)
        return vector.cpu().numpy().astype(np.float32)


BACKENDS = {"stub": StubBackend, "huggingface": HuggingFaceBackend}


def make_backend(name: str, **kwargs):
    try:
        factory = BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"unknown backend {name!r}; expected one of {sorted(BACKENDS)}"
        ) from None
    return factory(**kwargs)
