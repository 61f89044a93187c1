import json
import struct

import numpy as np
import pytest

from conftest import make_wav, run_primary_validate, write_manifest
from mioextract import (
    PTM_SPECS,
    StubBackend,
    extract,
    get_spec,
    load_clip_16k,
    load_manifest,
    resample_to_16k,
    write_mioe,
)


def read_mioe_vectors(path):
    """Tiny independent reader, enough to pull dims and vectors back out."""
    data = path.read_bytes()
    assert data[:4] == b"MIOE"
    version, flags, dim, count = struct.unpack_from("<HHIQ", data, 4)
    offset = 20
    for _ in range(2):  # ptm_id, name
        (length,) = struct.unpack_from("<H", data, offset)
        offset += 2 + length
    offset += 1  # split tag
    vectors = {}
    for _ in range(count):
        (length,) = struct.unpack_from("<H", data, offset)
        offset += 2
        clip_id = data[offset : offset + length].decode()
        offset += length + 1
        vectors[clip_id] = np.frombuffer(data, "<f4", dim, offset).copy()
        offset += 4 * dim
    return dim, vectors


class TestAudio:
    def test_resample_halves_or_doubles_length(self, tmp_path):
        wav = make_wav(tmp_path / "a.wav", rate=8000, seconds=1.0)
        waveform = load_clip_16k(wav)
        assert abs(len(waveform) - 16000) <= 16

    def test_stereo_mixdown(self, tmp_path):
        wav = make_wav(tmp_path / "s.wav", channels=2, seconds=0.25)
        waveform = load_clip_16k(wav)
        assert waveform.ndim == 1 and len(waveform) == 4000

    def test_identity_rate_passthrough(self):
        x = np.ones(100, dtype=np.float32)
        assert np.array_equal(resample_to_16k(x, 16000), x)


class TestManifest:
    def test_load(self, three_clip_manifest):
        rows = load_manifest(three_clip_manifest)
        assert [r.clip_id for r in rows] == ["clip-0", "clip-1", "clip-2"]
        assert [r.label for r in rows] == [0, 1, 0]
        assert all(r.path.is_file() for r in rows)

    def test_duplicate_ids_rejected(self, tmp_path):
        wav = make_wav(tmp_path / "a.wav")
        manifest = write_manifest(
            tmp_path / "m.csv",
            [("x", wav.name, "bonafide"), ("x", wav.name, "spoof")],
        )
        with pytest.raises(ValueError, match="duplicate"):
            load_manifest(manifest)

    def test_bad_label_rejected(self, tmp_path):
        wav = make_wav(tmp_path / "a.wav")
        manifest = write_manifest(tmp_path / "m.csv", [("x", wav.name, "fake")])
        with pytest.raises(ValueError, match="label"):
            load_manifest(manifest)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ValueError, match="header"):
            load_manifest(path)


class TestStubBackend:
    def test_dims_match_every_spec(self):
        backend = StubBackend()
        waveform = np.sin(np.linspace(0, 440 * 2 * np.pi, 8000)).astype(np.float32)
        for spec in PTM_SPECS.values():
            vector = backend.embed(waveform, spec)
            assert vector.shape == (spec.dim,)
            assert np.all(np.isfinite(vector))

    def test_deterministic_across_instances(self):
        waveform = np.sin(np.linspace(0, 440 * 2 * np.pi, 8000)).astype(np.float32)
        spec = get_spec("wav2vec2")
        first = StubBackend().embed(waveform, spec)
        second = StubBackend().embed(waveform, spec)
        assert np.array_equal(first, second)

    def test_different_audio_different_embedding(self):
        spec = get_spec("wav2vec2")
        backend = StubBackend()
        tone_a = np.sin(np.linspace(0, 220 * 2 * np.pi, 8000)).astype(np.float32)
        tone_b = np.sin(np.linspace(0, 880 * 2 * np.pi, 8000)).astype(np.float32)
        assert not np.array_equal(backend.embed(tone_a, spec),
                                  backend.embed(tone_b, spec))


class TestExtract:
    def test_manifest_order_and_count(self, three_clip_manifest, tmp_path):
        rows = load_manifest(three_clip_manifest)
        spec = get_spec("whisper")
        result = extract(rows, spec, tmp_path / "out.mioe", StubBackend())
        assert result.written == 3 and not result.rejects
        dim, vectors = read_mioe_vectors(result.out_path)
        assert dim == 512
        assert list(vectors) == ["clip-0", "clip-1", "clip-2"]

    def test_sine_tone_twice_identical_vectors(self, tmp_path):
        wav = make_wav(tmp_path / "tone.wav", 440.0, seconds=1.0)
        manifest = write_manifest(
            tmp_path / "m.csv",
            [("take-1", wav.name, "bonafide"), ("take-2", wav.name, "spoof")],
        )
        rows = load_manifest(manifest)
        result = extract(rows, get_spec("wav2vec2"), tmp_path / "out.mioe",
                         StubBackend())
        _, vectors = read_mioe_vectors(result.out_path)
        assert np.array_equal(vectors["take-1"], vectors["take-2"])

    def test_corrupt_clip_skipped_with_reject(self, tmp_path):
        good = make_wav(tmp_path / "good.wav")
        (tmp_path / "broken.wav").write_bytes(b"this is not audio at all")
        manifest = write_manifest(
            tmp_path / "m.csv",
            [("ok", good.name, "bonafide"), ("broken", "broken.wav", "spoof")],
        )
        rows = load_manifest(manifest)
        result = extract(rows, get_spec("wav2vec2"), tmp_path / "out.mioe",
                         StubBackend())
        assert result.written == 1
        assert len(result.rejects) == 1
        sidecar = json.loads(result.rejects_path.read_text())
        assert sidecar[0]["clip_id"] == "broken"
        assert sidecar[0]["reason"]

    def test_dim_mismatch_is_fatal(self, three_clip_manifest, tmp_path):
        class WrongDim:
            def embed(self, waveform, spec):
                return np.zeros(spec.dim + 1, dtype=np.float32)

        rows = load_manifest(three_clip_manifest)
        with pytest.raises(RuntimeError, match="wrong model variant"):
            extract(rows, get_spec("wav2vec2"), tmp_path / "out.mioe", WrongDim())

    def test_writer_rejects_duplicates(self, tmp_path):
        with pytest.raises(ValueError, match="duplicate"):
            write_mioe(tmp_path / "x.mioe", "n", "p", 2,
                       [("a", 0, np.zeros(2)), ("a", 1, np.zeros(2))])


class TestPrimaryConformance:
    @pytest.mark.parametrize("ptm_id", sorted(PTM_SPECS))
    def test_every_spec_passes_primary_validate(self, ptm_id,
                                                three_clip_manifest, tmp_path):
        rows = load_manifest(three_clip_manifest)
        spec = get_spec(ptm_id)
        out = tmp_path / f"{ptm_id}.mioe"
        result = extract(rows, spec, out, StubBackend())
        assert result.written == 3
        dim, _ = read_mioe_vectors(out)
        assert dim == spec.dim
        completed = run_primary_validate(out)
        assert completed.returncode == 0, completed.stderr
        assert f"dim       {spec.dim}" in completed.stdout
        assert "records   3" in completed.stdout
