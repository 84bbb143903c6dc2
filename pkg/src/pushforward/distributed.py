import atexit
import logging
import traceback
from dataclasses import dataclass
from typing import Callable, Generic, List, Optional, Sequence, TypeVar

import ray
from tqdm import tqdm

from pushforward.utils.py_utils import logical_cpu_core_count


logger = logging.getLogger(__name__)

T = TypeVar("T")

_already_initialized = False


@dataclass(frozen=True)
class RayConfig:
    address: Optional[str] = None  # None starts a local cluster sized to the job count
    namespace: str = "pushforward"

    def initialize(self, num_cpus: int):
        global _already_initialized
        if _already_initialized or ray.is_initialized():
            logger.debug("ray is already initialized")
            return

        kwargs = {} if self.address is not None else {"num_cpus": num_cpus}
        logger.info(f"ray.init(address={self.address!r}, namespace={self.namespace!r}, **{kwargs!r})")
        ray.init(address=self.address, namespace=self.namespace, **kwargs)
        atexit.register(lambda: ray.shutdown())
        _already_initialized = True


@dataclass(frozen=True)
class SeedOutcome(Generic[T]):
    """The result of one seed, or the formatted exception it failed with."""

    seed: int
    result: Optional[T]
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def resolve_jobs(jobs: Optional[int]) -> int:
    if jobs is None:
        return logical_cpu_core_count()
    if jobs < 1:
        raise ValueError(f"jobs must be positive, got {jobs}")
    return jobs


def _run_one(fn: Callable[[int], T], seed: int) -> SeedOutcome[T]:
    try:
        return SeedOutcome(seed, fn(seed))
    except Exception:
        logger.exception(f"seed {seed} failed")
        return SeedOutcome(seed, None, traceback.format_exc())


def map_seeds(
    fn: Callable[[int], T],
    seeds: Sequence[int],
    jobs: int = 1,
    ray_config: Optional[RayConfig] = None,
    desc: str = "seeds",
) -> List[SeedOutcome[T]]:
    """
    Runs `fn(seed)` for every seed and returns the outcomes in the order of `seeds`. Seeds share no state, so the
    outcome list is the same whether they run serially (jobs == 1) or as ray tasks. A failing seed is recorded in its
    outcome instead of aborting the others.
    """
    seeds = list(seeds)
    if jobs <= 1 or len(seeds) <= 1:
        return [_run_one(fn, seed) for seed in tqdm(seeds, desc=desc, leave=False)]

    (ray_config or RayConfig()).initialize(jobs)
    remote_run = ray.remote(num_cpus=1)(_run_one)
    refs = [remote_run.remote(fn, seed) for seed in seeds]
    index_of = {ref: i for i, ref in enumerate(refs)}

    outcomes: List[Optional[SeedOutcome[T]]] = [None] * len(seeds)
    pending = list(refs)
    with tqdm(total=len(seeds), desc=desc, leave=False) as pbar:
        while pending:
            done, pending = ray.wait(pending, num_returns=1)
            for ref in done:
                i = index_of[ref]
                try:
                    outcomes[i] = ray.get(ref)
                except ray.exceptions.RayError:
                    logger.exception(f"seed {seeds[i]} failed in its worker")
                    outcomes[i] = SeedOutcome(seeds[i], None, traceback.format_exc())
                pbar.update(1)

    return outcomes  # type: ignore[return-value]
