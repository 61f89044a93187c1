"""Catalog of supported pre-trained models and their embedding contracts.

Each spec pins the public model identifier, the exact embedding
dimension the extractor must produce, and the pooling rule that turns
per-frame hidden states into one vector per clip:

  mean_last_hidden   arithmetic mean over time of the last hidden state
  encoder_mean       drop the decoder, average the encoder hidden states
  speaker_embedding  the model's own fixed-size speaker vector
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class PtmSpec:
    ptm_id: str
    model_ref: str
    dim: int
    pooling: str  # mean_last_hidden | encoder_mean | speaker_embedding


PTM_SPECS = {
    spec.ptm_id: spec
    for spec in (
        PtmSpec("xls-r", "facebook/wav2vec2-xls-r-1b", 1280, "mean_last_hidden"),
        PtmSpec("mms", "facebook/mms-1b", 1280, "mean_last_hidden"),
        PtmSpec("unispeech-sat", "microsoft/unispeech-sat-base", 768,
                "mean_last_hidden"),
        PtmSpec("wavlm-base", "microsoft/wavlm-base", 768, "mean_last_hidden"),
        PtmSpec("wavlm-large", "microsoft/wavlm-large", 1024, "mean_last_hidden"),
        PtmSpec("wav2vec2", "facebook/wav2vec2-base", 768, "mean_last_hidden"),
        PtmSpec("xlsr-emo", "CAiRE/SER-wav2vec2-large-xlsr-53-eng-zho-all-age",
                1024, "mean_last_hidden"),
        PtmSpec("whisper", "openai/whisper-base", 512, "encoder_mean"),
        PtmSpec("x-vector", "speechbrain/spkrec-xvect-voxceleb", 512,
                "speaker_embedding"),
    )
}


def get_spec(ptm_id: str) -> PtmSpec:
    try:
        return PTM_SPECS[ptm_id]
    except KeyError:
        known = ", ".join(sorted(PTM_SPECS))
        raise ValueError(f"unknown PTM id {ptm_id!r}; known ids: {known}") from None
