"""Extractor conformance gate.

For every supported PTM spec: a 3-clip manifest extracts into a MIOE file
that the benchmark engine's own `validate` accepts with the exact catalog
dimension, and rerunning with --deterministic reproduces the same values.
"""

import pytest

from conftest import run_primary_validate
from mioextract import PTM_SPECS
from mioextract.cli import main


@pytest.mark.parametrize("ptm_id", sorted(PTM_SPECS))
def test_extractor_conformance(ptm_id, three_clip_manifest, tmp_path):
    spec = PTM_SPECS[ptm_id]
    outputs = [tmp_path / f"{ptm_id}-{run}.mioe" for run in (1, 2)]
    for out in outputs:
        code = main([
            "extract", "--manifest", str(three_clip_manifest),
            "--ptm", ptm_id, "--backend", "stub", "--deterministic",
            "--name", "conformance", "--out", str(out),
        ])
        assert code == 0
        completed = run_primary_validate(out)
        assert completed.returncode == 0, completed.stderr
        assert f"dim       {spec.dim}" in completed.stdout
        assert "records   3" in completed.stdout
    assert outputs[0].read_bytes() == outputs[1].read_bytes()
    print(f"\nACCEPTANCE extractor conformance {ptm_id} (dim {spec.dim}): PASS")
