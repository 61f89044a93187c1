import numpy as np

from conftest import make_wav, run_primary_validate, write_manifest
from mioextract.cli import main


def run_cli(*argv):
    return main([str(a) for a in argv])


def test_specs_listing(capsys):
    assert run_cli("specs") == 0
    out = capsys.readouterr().out
    assert "xls-r" in out and "1280" in out
    assert "whisper" in out and "x-vector" in out


def test_extract_stub_end_to_end(three_clip_manifest, tmp_path, capsys):
    out = tmp_path / "corpus.mioe"
    assert run_cli("extract", "--manifest", three_clip_manifest,
                   "--ptm", "unispeech-sat", "--backend", "stub",
                   "--out", out) == 0
    assert "3 records, dim 768" in capsys.readouterr().out
    completed = run_primary_validate(out)
    assert completed.returncode == 0, completed.stderr


def test_deterministic_rerun_value_identical(three_clip_manifest, tmp_path):
    paths = [tmp_path / "one.mioe", tmp_path / "two.mioe"]
    for path in paths:
        assert run_cli("extract", "--manifest", three_clip_manifest,
                       "--ptm", "wavlm-large", "--backend", "stub",
                       "--deterministic", "--name", "same",
                       "--out", path) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_rejects_reported_on_stderr(tmp_path, capsys):
    good = make_wav(tmp_path / "good.wav")
    (tmp_path / "bad.wav").write_bytes(b"garbage")
    manifest = write_manifest(
        tmp_path / "m.csv",
        [("ok", good.name, "bonafide"), ("bad", "bad.wav", "spoof")],
    )
    assert run_cli("extract", "--manifest", manifest, "--ptm", "wav2vec2",
                   "--backend", "stub", "--out", tmp_path / "c.mioe") == 0
    assert "skipped 1 clips" in capsys.readouterr().err


def test_unknown_ptm_exit_code(tmp_path, capsys):
    manifest = tmp_path / "m.csv"
    manifest.write_text("clip_id,path,label\n")
    assert run_cli("extract", "--manifest", manifest, "--ptm", "nonsense",
                   "--backend", "stub", "--out", tmp_path / "c.mioe") == 1


def test_missing_manifest_exit_1(tmp_path):
    assert run_cli("extract", "--manifest", tmp_path / "none.csv",
                   "--ptm", "wav2vec2", "--backend", "stub",
                   "--out", tmp_path / "c.mioe") == 1
