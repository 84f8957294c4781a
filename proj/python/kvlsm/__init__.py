# Copyright (C) 2026 The kvlsm Authors
# SPDX-License-Identifier: Apache-2.0

"""Python binding for the kvlsm KV-cache store.

probe() and get_batch() may be called concurrently from several threads;
put_batch() and maintenance_tick() are serialized inside the engine.
"""

from __future__ import annotations

from typing import Any, Mapping, Optional, Sequence

from ._kvlsm import (
    CorruptionError,
    Engine as _Engine,
    Error,
    IoError,
    StaleLocationError,
    UnrecoverableError,
    UsageError,
)

__all__ = [
    "Engine",
    "open",
    "Error",
    "UsageError",
    "CorruptionError",
    "IoError",
    "StaleLocationError",
    "UnrecoverableError",
]


class Engine:
    """Handle to an open store directory. At most one per directory per process."""

    def __init__(self, dir: str, config: Optional[Mapping[str, Any]] = None):
        self._h = _Engine(str(dir), dict(config) if config is not None else None)

    def close(self) -> None:
        self._h.close()

    @property
    def closed(self) -> bool:
        return self._h.closed

    @property
    def dir(self) -> str:
        return self._h.dir

    @property
    def block_tokens(self) -> int:
        return self._h.block_tokens

    def put_batch(self, tokens: Sequence[int], tensors: Sequence[Any]) -> int:
        """Store one bytes-like tensor per full block; returns blocks newly stored."""
        return self._h.put_batch(tokens, tensors)

    def probe(self, tokens: Sequence[int]) -> int:
        """Longest stored prefix of `tokens`, in blocks."""
        return self._h.probe(tokens)

    def get_batch(self, tokens: Sequence[int], upto: int) -> list[bytes]:
        return self._h.get_batch(tokens, upto)

    def maintenance_tick(self) -> dict:
        return self._h.maintenance_tick()

    def stats(self, total: bool = False) -> dict:
        """Counters of the current controller window, or since open with total=True."""
        return self._h.stats(total)

    def __enter__(self) -> "Engine":
        return self

    def __exit__(self, *exc) -> None:
        if not self.closed:
            self.close()


def open(dir: str, config: Optional[Mapping[str, Any]] = None) -> Engine:  # noqa: A001
    """Open (creating if needed) the store in `dir`.

    `config` keys are the engine.conf keys. Without it an existing store keeps
    its persisted config and a new one uses the defaults.
    """
    return Engine(dir, config)
