"""Moving target-domain images toward the source distribution by Gibbs sampling.

Each target image is used as the starting visible state of a k-step Gibbs
chain in an RBM trained on source data only; the chain's final state is then
scored by a classifier that was also trained on source data only.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .classifier import accuracy
from .errors import DimensionError, InvalidArgumentError
from .rbm import free_energy, gibbs_chain
from .rng import derive_seed, stream

OUTPUT_MODES = ("mean_field", "binary_sample")


@dataclass(frozen=True)
class TransferConfig:
    k: int = 1
    output_mode: str = "mean_field"
    seed: int = 0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise InvalidArgumentError(f"k must be a positive integer, got {self.k}")
        if self.output_mode not in OUTPUT_MODES:
            raise InvalidArgumentError(f"output_mode must be one of {OUTPUT_MODES}")


@dataclass
class TransferReport:
    source_accuracy: float
    target_direct_accuracy: float
    target_transferred_accuracy: dict
    target_oracle_accuracy: float = None
    free_energy_raw_target: float = None
    free_energy_transferred_target: dict = field(default_factory=dict)
    n_samples: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)

    @property
    def best_transferred_accuracy(self):
        return max(self.target_transferred_accuracy.values())

    def to_dict(self):
        d = asdict(self)
        d["target_transferred_accuracy"] = {str(k): v for k, v in self.target_transferred_accuracy.items()}
        d["free_energy_transferred_target"] = {
            str(k): v for k, v in self.free_energy_transferred_target.items()
        }
        return d

    def rows(self):
        """(condition, k, accuracy) rows in a fixed order."""
        out = [("source", "", self.source_accuracy), ("target_direct", "", self.target_direct_accuracy)]
        out += [("target_transferred", k, a) for k, a in sorted(self.target_transferred_accuracy.items())]
        if self.target_oracle_accuracy is not None:
            out.append(("target_oracle", "", self.target_oracle_accuracy))
        return out


def transfer_instance(rbm, x, config, rng):
    """Run ``config.k`` Gibbs steps from ``x``; return final probabilities or the binary sample."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != rbm.n_visible:
        raise DimensionError(f"input has {x.shape[-1]} pixels, the RBM has {rbm.n_visible} visible units")
    final = gibbs_chain(rbm, x, config.k, rng)
    return final.p_v if config.output_mode == "mean_field" else final.v


def transfer_dataset(rbm, data, config, rng=None, threads=1):
    """Transfer every row; row ``i`` uses its own stream derived from ``(seed, i)``.

    ``seed`` is ``config.seed`` unless ``rng`` is given, in which case it is
    drawn from ``rng``.  Labels are carried over unchanged and the output does
    not depend on ``threads``.
    """
    if data.n_pixels != rbm.n_visible:
        raise DimensionError(f"images have {data.n_pixels} pixels, the RBM has {rbm.n_visible} visible units")
    seed = config.seed if rng is None else derive_seed(rng)
    out = np.empty_like(data.pixels)

    def run(rows):
        for i in rows:
            out[i] = transfer_instance(rbm, data.pixels[i], config, stream(seed, i))

    if threads > 1 and data.n > 1:
        chunks = np.array_split(np.arange(data.n), threads)
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(run, chunks))
    else:
        run(range(data.n))
    return data.with_pixels(out)


def mean_free_energy(rbm, data):
    return float(np.mean(free_energy(rbm, data.pixels)))


def evaluate_pipeline(rbm, clf, source_test, target_test, ks=(1, 3), config=None, target_clf=None, threads=1):
    """Accuracies for the source, raw target and transferred target conditions.

    ``target_clf``, when given, is a classifier trained on labelled target data
    and supplies the oracle row; it never influences the transferred rows.
    """
    config = config or TransferConfig()
    if source_test.n == 0 or target_test.n == 0:
        raise InvalidArgumentError("evaluation datasets must be non-empty")
    if source_test.n_pixels != target_test.n_pixels:
        raise DimensionError("source and target images differ in size")
    transferred_acc, transferred_fe = {}, {}
    for k in ks:
        cfg = TransferConfig(k=int(k), output_mode=config.output_mode, seed=config.seed)
        moved = transfer_dataset(rbm, target_test, cfg, threads=threads)
        transferred_acc[int(k)] = accuracy(clf, moved)
        transferred_fe[int(k)] = mean_free_energy(rbm, moved)
    return TransferReport(
        source_accuracy=accuracy(clf, source_test),
        target_direct_accuracy=accuracy(clf, target_test),
        target_transferred_accuracy=transferred_acc,
        target_oracle_accuracy=None if target_clf is None else accuracy(target_clf, target_test),
        free_energy_raw_target=mean_free_energy(rbm, target_test),
        free_energy_transferred_target=transferred_fe,
        n_samples={"source_test": source_test.n, "target_test": target_test.n},
        seeds={"transfer": config.seed},
    )
