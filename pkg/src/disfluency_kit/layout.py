"""Decoder sequence layout and loss-mask construction.

The decoder stream is [textual tokens][audio tokens][transcript tokens] (the
audio block may be configured first); only the final transcript positions are
supervised. Audio tokens arrive at a fixed period derived from the encoder
framing: 10 ms mel stride x 16 encoder downsampling x 2 final downsampling
= one token per 320 ms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class NegativeDuration(ValueError):
    """Audio duration must be non-negative."""


@dataclass(frozen=True)
class FramingConfig:
    mel_window_ms: float = 25.0
    mel_stride_ms: float = 10.0
    encoder_downsample: int = 16
    final_downsample: int = 2

    def __post_init__(self):
        if self.mel_window_ms <= 0 or self.mel_stride_ms <= 0:
            raise ValueError("mel window and stride must be positive")
        if self.encoder_downsample < 1 or self.final_downsample < 1:
            raise ValueError("downsampling factors must be >= 1")

    @property
    def token_period_ms(self) -> float:
        return self.mel_stride_ms * self.encoder_downsample * self.final_downsample

    @property
    def token_period_s(self) -> float:
        return self.token_period_ms / 1000.0


DEFAULT_FRAMING = FramingConfig()


def audio_token_count(duration_s: float, cfg: FramingConfig = DEFAULT_FRAMING) -> int:
    """Number of audio tokens covering the duration: ceil(d / period).

    A partial final token is kept (ceiling), so no audio is discarded. A tiny
    tolerance absorbs float error at exact multiples of the period.
    """
    if duration_s < 0:
        raise NegativeDuration(f"duration {duration_s} is negative")
    q = duration_s / cfg.token_period_s
    return max(0, math.ceil(q - 1e-9))


@dataclass(frozen=True)
class DecoderLayout:
    textual_len: int
    audio_len: int
    transcript_len: int
    audio_first: bool = False

    @property
    def total(self) -> int:
        return self.textual_len + self.audio_len + self.transcript_len

    @property
    def supervised(self) -> range:
        """Index set of loss-contributing positions: the final transcript block."""
        return range(self.textual_len + self.audio_len, self.total)

    @property
    def loss_mask(self) -> tuple[bool, ...]:
        unsupervised = self.textual_len + self.audio_len
        return (False,) * unsupervised + (True,) * self.transcript_len

    def mask_string(self) -> str:
        return "".join("1" if b else "0" for b in self.loss_mask)

    def to_dict(self) -> dict:
        return {
            "textual_len": self.textual_len,
            "audio_len": self.audio_len,
            "transcript_len": self.transcript_len,
            "total": self.total,
            "order": ["audio", "textual", "transcript"]
            if self.audio_first
            else ["textual", "audio", "transcript"],
            "supervised_start": self.supervised.start,
            "supervised_end": self.supervised.stop,
            "loss_mask": self.mask_string(),
        }


def build_layout(
    textual_len: int,
    duration_s: float,
    transcript_len: int,
    cfg: FramingConfig = DEFAULT_FRAMING,
    audio_first: bool = False,
) -> DecoderLayout:
    """Lay out the decoder stream for M textual tokens, an audio clip, and N
    transcript tokens; the loss mask is true exactly on the last N positions."""
    if textual_len < 0 or transcript_len < 0:
        raise ValueError("token counts must be non-negative")
    audio_len = audio_token_count(duration_s, cfg)
    return DecoderLayout(textual_len, audio_len, transcript_len, audio_first)
