"""Candidate modulation alphabets and the hypothesis set."""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError

SUPPORTED_FORMATS = ("BPSK", "QPSK", "8PSK", "8QAM", "16PSK", "16QAM")
QUATERNARY_SET = ("8PSK", "8QAM", "16PSK", "16QAM")


def _psk(m):
    return np.exp(2j * np.pi * np.arange(m) / m)


def _qam16():
    levels = np.array([-3.0, -1.0, 1.0, 3.0])
    return np.array([complex(i, q) for i in levels for q in levels])


def _qam8():
    # Inner QPSK ring on the diagonals, outer ring on the axes at radius
    # 1 + sqrt(3) relative to the unit inner coordinates: every nearest
    # neighbour pair is then at distance 2.
    inner = np.sqrt(2.0) * np.exp(1j * (np.pi / 4 + np.pi / 2 * np.arange(4)))
    outer = (1.0 + np.sqrt(3.0)) * np.exp(1j * np.pi / 2 * np.arange(4))
    return np.concatenate([inner, outer])


_BUILDERS = {
    "BPSK": lambda: _psk(2),
    "QPSK": lambda: _psk(4),
    "8PSK": lambda: _psk(8),
    "8QAM": _qam8,
    "16PSK": lambda: _psk(16),
    "16QAM": _qam16,
}


@dataclass(frozen=True)
class ConstellationSet:
    """A unit mean-power symbol alphabet for one hypothesis."""

    format_id: str
    symbols: np.ndarray = field(repr=False)

    def __post_init__(self):
        symbols = np.asarray(self.symbols, dtype=complex)
        symbols.setflags(write=False)
        object.__setattr__(self, "symbols", symbols)

    @property
    def cardinality(self):
        return self.symbols.size

    @property
    def energies(self):
        return np.abs(self.symbols) ** 2

    def __len__(self):
        return self.symbols.size


def build_constellation(format_id, symbols=None):
    """Return the unit mean-power alphabet for ``format_id``.

    Args:
        format_id: one of ``SUPPORTED_FORMATS``.
        symbols: optional custom point layout (e.g. another 8-QAM geometry);
            it is rescaled to unit mean power.

    Raises:
        ConfigurationError: unsupported format or degenerate custom layout.
    """
    if symbols is None:
        try:
            raw = _BUILDERS[format_id]()
        except KeyError:
            raise ConfigurationError(
                f"unsupported modulation format {format_id!r}; "
                f"expected one of {', '.join(SUPPORTED_FORMATS)}"
            ) from None
    else:
        raw = np.asarray(symbols, dtype=complex).ravel()
        if raw.size == 0 or len(set(raw.tolist())) != raw.size:
            raise ConfigurationError(f"{format_id}: custom symbols must be nonempty and distinct")
    power = np.mean(np.abs(raw) ** 2)
    if power <= 0:
        raise ConfigurationError(f"{format_id}: alphabet has zero power")
    return ConstellationSet(format_id, raw / np.sqrt(power))


@dataclass(frozen=True)
class HypothesisSet:
    constellations: tuple

    @property
    def count(self):
        return len(self.constellations)

    @property
    def format_ids(self):
        return tuple(c.format_id for c in self.constellations)

    def __len__(self):
        return len(self.constellations)

    def __iter__(self):
        return iter(self.constellations)

    def __getitem__(self, i):
        return self.constellations[i]

    def index(self, format_id):
        return self.format_ids.index(format_id)


def build_hypothesis_set(format_ids):
    """Build the ordered hypothesis set; decision indices follow this order."""
    format_ids = list(format_ids)
    if not format_ids:
        raise ConfigurationError("hypothesis set must contain at least one format")
    if len(set(format_ids)) != len(format_ids):
        raise ConfigurationError(f"duplicate formats in hypothesis set: {format_ids}")
    return HypothesisSet(tuple(build_constellation(f) for f in format_ids))
