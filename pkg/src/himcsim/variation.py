"""Monte Carlo sense-current distributions under resistance variation.

Currents are normalised so that one parallel-state cell at nominal
resistance conducts 1.0.  Each sensed pair draws two independent cell
resistances from a Gaussian around the nominal value (truncated at zero).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .bitline import SenseLevel

# generating class for each sensed level, ordered from highest to lowest current
CLASSES = ("PP", "APP", "APAP")
CLASS_LEVEL = {
    "PP": SenseLevel.BOTH_ZERO,
    "APP": SenseLevel.MIXED,
    "APAP": SenseLevel.BOTH_ONE,
}


@dataclass(frozen=True)
class VariationSpec:
    tmr_ratio: float = 1.5
    sigma_fraction: float = 0.05
    n_samples: int = 10_000
    seed: int = 2024

    def __post_init__(self):
        if not self.tmr_ratio > 0:
            raise ValueError("tmr_ratio must be > 0")
        if not 0 <= self.sigma_fraction < 0.5:
            raise ValueError("sigma_fraction must be in [0, 0.5)")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


@dataclass
class MarginSamples:
    samples: dict[str, np.ndarray]
    mean: dict[str, float] = field(init=False)
    std: dict[str, float] = field(init=False)

    def __post_init__(self):
        self.mean = {c: float(np.mean(s)) for c, s in self.samples.items()}
        self.std = {}
        for c, s in self.samples.items():
            std = float(np.std(s))
            # rounding noise of a constant sample is not spread
            self.std[c] = 0.0 if std <= 1e-12 * abs(self.mean[c]) else std


@dataclass(frozen=True)
class References:
    i_ref_and: float  # between AP-AP and the mixed level
    i_ref_or: float  # between the mixed level and P-P


def _stream(seed: int, index: int) -> np.random.Generator:
    # Philox is counter based: each class gets its own key, so a class's
    # samples do not depend on how the work is partitioned.
    return np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, index]))


def _draw_resistance(rng: np.random.Generator, nominal: float, sigma: float, n: int) -> np.ndarray:
    r = rng.normal(nominal, sigma * nominal, size=n)
    bad = r <= 0
    while bad.any():
        r[bad] = rng.normal(nominal, sigma * nominal, size=int(bad.sum()))
        bad = r <= 0
    return r


def sample_currents(spec: VariationSpec) -> MarginSamples:
    r_p = 1.0
    r_ap = (1.0 + spec.tmr_ratio) * r_p
    nominal = {"PP": (r_p, r_p), "APP": (r_ap, r_p), "APAP": (r_ap, r_ap)}
    samples = {}
    for index, cls in enumerate(CLASSES):
        rng = _stream(spec.seed, index)
        first, second = nominal[cls]
        r1 = _draw_resistance(rng, first, spec.sigma_fraction, spec.n_samples)
        r2 = _draw_resistance(rng, second, spec.sigma_fraction, spec.n_samples)
        samples[cls] = 1.0 / r1 + 1.0 / r2
    return MarginSamples(samples)


def equal_error_point(mean_hi: float, std_hi: float, mean_lo: float, std_lo: float) -> float:
    """Current r with (mean_hi - r)/std_hi == (r - mean_lo)/std_lo.

    Falls back to the midpoint when either distribution has no spread.
    """
    if std_hi == 0 or std_lo == 0:
        return (mean_hi + mean_lo) / 2
    return (std_lo * mean_hi + std_hi * mean_lo) / (std_hi + std_lo)


def choose_references(samples: MarginSamples) -> References:
    m, s = samples.mean, samples.std
    if not m["PP"] > m["APP"] > m["APAP"]:
        raise ValueError("class means are not strictly ordered PP > APP > APAP")
    return References(
        i_ref_and=equal_error_point(m["APP"], s["APP"], m["APAP"], s["APAP"]),
        i_ref_or=equal_error_point(m["PP"], s["PP"], m["APP"], s["APP"]),
    )


def classify(current, refs: References):
    """Map sensed current(s) to :class:`SenseLevel` values.

    Scalars give a ``SenseLevel``; arrays give an integer array of levels.
    """
    cur = np.asarray(current)
    levels = np.where(
        cur < refs.i_ref_and,
        int(SenseLevel.BOTH_ONE),
        np.where(cur < refs.i_ref_or, int(SenseLevel.MIXED), int(SenseLevel.BOTH_ZERO)),
    )
    if levels.ndim == 0:
        return SenseLevel(int(levels))
    return levels


def _boundary_margin(samples: MarginSamples, hi: str, lo: str, ref: float) -> float:
    m, s = samples.mean, samples.std
    terms = []
    for cls in (hi, lo):
        gap = abs(m[cls] - ref)
        terms.append(float("inf") if s[cls] == 0 else gap / s[cls])
    return min(terms)


def margin_report(spec: VariationSpec) -> dict:
    samples = sample_currents(spec)
    refs = choose_references(samples)
    wrong = 0
    total = 0
    for cls in CLASSES:
        labels = classify(samples.samples[cls], refs)
        wrong += int(np.count_nonzero(labels != int(CLASS_LEVEL[cls])))
        total += labels.size
    return {
        "spec": {
            "tmr_ratio": spec.tmr_ratio,
            "sigma_fraction": spec.sigma_fraction,
            "n_samples": spec.n_samples,
            "seed": spec.seed,
        },
        "classes": {c: {"mean": samples.mean[c], "std": samples.std[c]} for c in CLASSES},
        "references": {"i_ref_and": refs.i_ref_and, "i_ref_or": refs.i_ref_or},
        "margins": {
            "APP_PP": _boundary_margin(samples, "PP", "APP", refs.i_ref_or),
            "APP_APAP": _boundary_margin(samples, "APP", "APAP", refs.i_ref_and),
        },
        "misclassification_rate": wrong / total,
    }


def histogram_csv(spec: VariationSpec, bins: int = 200) -> str:
    """Per-class histogram of sensed current on shared bins, as CSV text."""
    samples = sample_currents(spec)
    pooled = np.concatenate([samples.samples[c] for c in CLASSES])
    lo, hi = float(pooled.min()), float(pooled.max())
    if hi == lo:
        hi = lo + 1e-9
    edges = np.linspace(lo, hi, bins + 1)
    counts = {c: np.histogram(samples.samples[c], bins=edges)[0] for c in CLASSES}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bin_lo", "bin_hi", *CLASSES])
    for i in range(bins):
        writer.writerow([f"{edges[i]:.6f}", f"{edges[i + 1]:.6f}", *(int(counts[c][i]) for c in CLASSES)])
    return buf.getvalue()
