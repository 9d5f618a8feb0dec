"""Procedural paired PET/MR brain-like phantoms.

Each phantom is a smooth blob of overlapping ellipses carrying a tissue
label map. PET activity and MR intensity derive from the same labels via
distinct class->level tables, so the pair is co-registered by construction.
Optional PET-hot lesions are absent from MR; optional mismatch regions alter
exactly one modality and are recorded as extra label classes so region
statistics can be audited straight from the label map.

Determinism: everything is a pure function of the spec seed. Per-sample RNG
streams in dataset building are seeded from
(master_seed, phantom_id, slice_id, angle_index) so parallel and serial
builds emit identical data.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .diffcore import ptns
from .errors import ConfigError, GenerationError, ShapeError

ACTIVITY_TEXTURE_SIGMA = 0.01   # relative, keeps within-class std nonzero
MR_TEXTURE_SIGMA = 0.02
LESION_ACTIVITY_GAIN = 1.8
MISMATCH_MR_DELTA = 0.2
MISMATCH_ACTIVITY_GAIN = 1.4


@dataclass(frozen=True)
class PhantomSpec:
    seed: int
    size: int = 64
    n_tissue_classes: int = 3
    lesion_count: int = 1
    mismatch_count: int = 1
    lesion_radius: tuple[float, float] = (2.0, 4.0)
    lesion_gain: float = LESION_ACTIVITY_GAIN

    def validate(self):
        if self.size < 32 or self.size > 192:
            raise ConfigError(f"phantom size must lie in [32, 192], got {self.size}")
        if self.n_tissue_classes < 3:
            raise ConfigError(f"need at least 3 tissue classes, got {self.n_tissue_classes}")
        if self.lesion_count < 0 or self.mismatch_count < 0:
            raise ConfigError("lesion/mismatch counts must be nonnegative")
        if self.lesion_radius[0] < 2.0:
            raise ConfigError(f"lesion radius must be >= 2 px, got {self.lesion_radius[0]}")


@dataclass
class PhantomPair:
    activity: np.ndarray      # nonnegative float32, the noiseless x_S source
    mr: np.ndarray            # float32 in [0, 1]
    labels: np.ndarray        # int32; 0 outside support, >0 tissue/mismatch classes
    lesion_mask: np.ndarray   # bool

    def validate(self):
        shapes = {self.activity.shape, self.mr.shape, self.labels.shape, self.lesion_mask.shape}
        if len(shapes) != 1:
            raise ShapeError(f"phantom maps disagree in shape: {sorted(shapes)}")
        if (self.activity < 0).any():
            raise ShapeError("activity must be nonnegative")
        if self.mr.min() < 0 or self.mr.max() > 1:
            raise ShapeError("mr must lie in [0, 1]")


@dataclass(frozen=True)
class AugmentationSpec:
    n_angles: int = 5
    angle_range_deg: tuple[float, float] = (0.0, 15.0)

    def validate(self):
        if self.n_angles < 1:
            raise ConfigError("augmentation needs at least one angle")
        lo, hi = self.angle_range_deg
        if not (0.0 <= lo <= hi):
            raise ConfigError(f"bad angle range {self.angle_range_deg}")


def _ellipse_mask(size: int, cy, cx, a, b, theta) -> np.ndarray:
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    y = ys - cy
    x = xs - cx
    ct, st = np.cos(theta), np.sin(theta)
    u = x * ct + y * st
    v = -x * st + y * ct
    return (u / a) ** 2 + (v / b) ** 2 <= 1.0


def _disc_mask(size: int, cy, cx, r) -> np.ndarray:
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    return (ys - cy) ** 2 + (xs - cx) ** 2 <= r * r


def _place_disc(rng, labels, support, radius, attempts=100, single_class=False):
    """Random disc fully inside the support (optionally inside one class)."""
    size = labels.shape[0]
    for _ in range(attempts):
        cy = rng.uniform(radius, size - radius)
        cx = rng.uniform(radius, size - radius)
        disc = _disc_mask(size, cy, cx, radius)
        if not support[disc].all():
            continue
        if single_class and len(np.unique(labels[disc])) != 1:
            continue
        return disc
    return None


def generate(spec: PhantomSpec) -> PhantomPair:
    """Deterministic phantom pair for a spec; see module docstring."""
    spec.validate()
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    size = spec.size
    c = size / 2.0

    # smooth brain support from 3 jittered ellipses
    support = np.zeros((size, size), dtype=bool)
    for _ in range(3):
        cy = c + rng.uniform(-0.06, 0.06) * size
        cx = c + rng.uniform(-0.06, 0.06) * size
        a = rng.uniform(0.26, 0.40) * size
        b = rng.uniform(0.26, 0.40) * size
        theta = rng.uniform(0, np.pi)
        support |= _ellipse_mask(size, cy, cx, a, b, theta)
    smooth = ndimage.gaussian_filter(support.astype(np.float64), sigma=size / 32.0)
    support = smooth > 0.5

    # tissue classes: quantile bands of a smooth random field inside the support
    k = spec.n_tissue_classes
    f = ndimage.gaussian_filter(rng.normal(size=(size, size)), sigma=size / 10.0)
    labels = np.zeros((size, size), dtype=np.int32)
    inside = f[support]
    qs = np.quantile(inside, np.linspace(0, 1, k + 1)[1:-1])
    labels[support] = 1 + np.searchsorted(qs, inside)

    # class -> level tables; MR uses a shuffled assignment for distinct contrast
    act_levels = np.concatenate([[0.0], np.linspace(0.3, 1.0, k) * rng.uniform(0.9, 1.1)])
    mr_order = rng.permutation(k)
    mr_levels = np.concatenate([[0.0], np.linspace(0.35, 0.9, k)[mr_order]])

    # mismatch regions become extra label classes k+1.. ; even index alters MR
    # only, odd index alters activity only
    mis_act = list(act_levels)
    mis_mr = list(mr_levels)
    for j in range(spec.mismatch_count):
        radius = rng.uniform(3.0, 5.0)
        disc = _place_disc(rng, labels, support, radius, single_class=True)
        if disc is None:
            raise GenerationError(
                f"could not place mismatch region {j} inside one tissue class after 100 attempts"
            )
        host = int(labels[disc][0])
        new_label = k + 1 + j
        if j % 2 == 0:
            delta = MISMATCH_MR_DELTA if mr_levels[host] <= 0.7 else -MISMATCH_MR_DELTA
            mis_act.append(act_levels[host])
            mis_mr.append(mr_levels[host] + delta)
        else:
            mis_act.append(act_levels[host] * MISMATCH_ACTIVITY_GAIN)
            mis_mr.append(mr_levels[host])
        labels[disc] = new_label

    act_table = np.asarray(mis_act, dtype=np.float64)
    mr_table = np.asarray(mis_mr, dtype=np.float64)
    activity = act_table[labels]
    mr = mr_table[labels]

    # fine texture keeps within-class variance nonzero in both modalities
    activity = activity * (1.0 + ACTIVITY_TEXTURE_SIGMA * rng.normal(size=activity.shape))
    activity[~support] = 0.0
    mr = mr + MR_TEXTURE_SIGMA * rng.normal(size=mr.shape)
    mr[~support] = 0.0

    lesion_mask = np.zeros((size, size), dtype=bool)
    for j in range(spec.lesion_count):
        radius = rng.uniform(*spec.lesion_radius)
        disc = _place_disc(rng, labels, support, radius)
        if disc is None:
            raise GenerationError(f"could not place lesion {j} inside the support after 100 attempts")
        activity[disc] *= spec.lesion_gain
        lesion_mask |= disc

    pair = PhantomPair(
        activity=np.clip(activity, 0.0, None).astype(np.float32),
        mr=np.clip(mr, 0.0, 1.0).astype(np.float32),
        labels=labels,
        lesion_mask=lesion_mask,
    )
    pair.validate()
    return pair


def rotate(pair: PhantomPair, angle_deg: float) -> PhantomPair:
    """Rotate a pair; bilinear for continuous maps, nearest for labels/masks."""
    if not np.isfinite(angle_deg):
        raise ConfigError(f"rotation angle must be finite, got {angle_deg}")
    if angle_deg == 0.0:
        return PhantomPair(pair.activity.copy(), pair.mr.copy(),
                           pair.labels.copy(), pair.lesion_mask.copy())

    def _rot(arr, order):
        return ndimage.rotate(arr, angle_deg, reshape=False, order=order,
                              mode="constant", cval=0.0, prefilter=False)

    act = np.clip(_rot(pair.activity.astype(np.float64), 1), 0.0, None).astype(np.float32)
    mr = np.clip(_rot(pair.mr.astype(np.float64), 1), 0.0, 1.0).astype(np.float32)
    labels = _rot(pair.labels, 0).astype(np.int32)
    mask = _rot(pair.lesion_mask.astype(np.uint8), 0).astype(bool)
    return PhantomPair(act, mr, labels, mask)


# ---------------------------------------------------------------------------
# dataset building
# ---------------------------------------------------------------------------

MANIFEST_COLUMNS = ["sample_id", "phantom_id", "split", "angle_deg",
                    "activity_path", "mr_path", "rng_seed"]


@dataclass
class DatasetManifest:
    rows: list[dict] = field(default_factory=list)

    def write_csv(self, path, columns=None):
        columns = columns or list(self.rows[0].keys())
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=columns)
            w.writeheader()
            for r in self.rows:
                w.writerow({k: r.get(k, "") for k in columns})

    @staticmethod
    def read_csv(path) -> "DatasetManifest":
        with open(path, newline="") as fh:
            return DatasetManifest(rows=list(csv.DictReader(fh)))

    def split_ids(self) -> dict[str, set]:
        out: dict[str, set] = {}
        for r in self.rows:
            out.setdefault(r["split"], set()).add(r["phantom_id"])
        return out


def sample_seed(master_seed: int, phantom_id: int, slice_id: int, angle_index: int) -> int:
    ss = np.random.SeedSequence((master_seed, phantom_id, slice_id, angle_index))
    return int(ss.generate_state(1, np.uint64)[0])


def make_phantom_specs(n_phantoms: int, slices_per_phantom: int, master_seed: int,
                       **spec_kwargs) -> dict[int, list[PhantomSpec]]:
    """One independent spec per (phantom, slice); slices share a phantom lineage."""
    specs: dict[int, list[PhantomSpec]] = {}
    for p in range(n_phantoms):
        specs[p] = [
            PhantomSpec(seed=sample_seed(master_seed, p, s, -1), **spec_kwargs)
            for s in range(slices_per_phantom)
        ]
    return specs


def assign_splits(phantom_ids: list[int], fractions: tuple[float, float, float],
                  master_seed: int) -> dict[int, str]:
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must sum to 1, got {fractions}")
    n = len(phantom_ids)
    counts = [int(round(f * n)) for f in fractions[:2]]
    counts.append(n - sum(counts))
    for f, c in zip(fractions, counts):
        if f > 0 and c < 1:
            raise ConfigError(
                f"too few phantoms ({n}) to populate every split with fractions {fractions}"
            )
        if f == 0 and c != 0:
            raise ConfigError(f"split fractions {fractions} inconsistent for {n} phantoms")
    rng = np.random.default_rng(np.random.SeedSequence((master_seed, 0xC0FFEE)))
    order = list(rng.permutation(phantom_ids))
    out = {}
    names = ["train", "val", "test"]
    idx = 0
    for name, c in zip(names, counts):
        for pid in order[idx : idx + c]:
            out[int(pid)] = name
        idx += c
    return out


def build_dataset(specs: dict[int, list[PhantomSpec]], augmentation: AugmentationSpec,
                  split: tuple[float, float, float], out_dir: str,
                  master_seed: int) -> DatasetManifest:
    """Generate, augment, and persist a phantom dataset.

    The split is assigned at the phantom level before augmentation so no
    phantom contributes samples to two splits. Emits PTNS maps under
    out_dir/samples and a phantoms.csv manifest.
    """
    augmentation.validate()
    split_of = assign_splits(sorted(specs), split, master_seed)
    samples_dir = os.path.join(out_dir, "samples")
    os.makedirs(samples_dir, exist_ok=True)
    manifest = DatasetManifest()
    lo, hi = augmentation.angle_range_deg
    for pid in sorted(specs):
        for sid, spec in enumerate(specs[pid]):
            pair = generate(spec)
            angle_rng = np.random.default_rng(
                np.random.SeedSequence((master_seed, pid, sid, 0xA46E)))
            angles = angle_rng.uniform(lo, hi, size=augmentation.n_angles)
            for aidx, angle in enumerate(angles):
                rotated = rotate(pair, float(angle))
                sample_id = f"p{pid:03d}_s{sid:02d}_a{aidx}"
                act_path = os.path.join("samples", sample_id + "_act.ptns")
                mr_path = os.path.join("samples", sample_id + "_mr.ptns")
                ptns.write(os.path.join(out_dir, act_path), rotated.activity)
                ptns.write(os.path.join(out_dir, mr_path), rotated.mr)
                manifest.rows.append({
                    "sample_id": sample_id,
                    "phantom_id": f"p{pid:03d}",
                    "split": split_of[pid],
                    "angle_deg": f"{float(angle):.9g}",
                    "activity_path": act_path,
                    "mr_path": mr_path,
                    "rng_seed": str(sample_seed(master_seed, pid, sid, aidx)),
                })
    manifest.write_csv(os.path.join(out_dir, "phantoms.csv"), MANIFEST_COLUMNS)
    return manifest
