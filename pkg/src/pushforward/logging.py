import contextlib
import dataclasses
import logging as pylogging
import os
import time
from dataclasses import dataclass
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import List, Optional, Union

import wandb
from draccus import field
from git import GitCommandError, InvalidGitRepositoryError, NoSuchPathError, Repo


logger = pylogging.getLogger(__name__)


def init_logger(path: Optional[Union[str, Path]], level: int = pylogging.INFO) -> None:
    """
    Initialize logging.Logger with the appropriate name, console, and file handlers.

    :param path: Path for writing log file. None logs to the console only.
    :param level: Default logging level
    """
    log_format = "%(asctime)s - %(name)s - %(filename)s:%(lineno)d - %(levelname)s :: %(message)s"
    # use ISO 8601 format for timestamps, except no TZ, because who cares
    date_format = "%Y-%m-%dT%H:%M:%S"

    handlers: List[pylogging.Handler] = [pylogging.StreamHandler()]
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(pylogging.FileHandler(path, mode="a"))

    # Create Root Logger w/ Base Formatting
    pylogging.basicConfig(level=level, format=log_format, datefmt=date_format, handlers=handlers, force=True)


@contextlib.contextmanager
def capture_time():
    start = time.perf_counter()
    done = False

    def fn():
        if done:
            return end - start
        else:
            return time.perf_counter() - start

    yield fn
    end = time.perf_counter()
    done = True


def _git_repo(path: Optional[str] = None) -> Optional[Repo]:
    try:
        return Repo(path or os.path.dirname(__file__), search_parent_directories=True)
    except (NoSuchPathError, InvalidGitRepositoryError):
        return None


def describe_version() -> str:
    """A git-describe-style version string, or the installed package version outside a git checkout."""
    repo = _git_repo()
    if repo is not None:
        try:
            return repo.git.describe("--tags", "--always", "--dirty")
        except GitCommandError:
            logger.debug("git describe failed, falling back to the package version")
    try:
        return version("pushforward")
    except PackageNotFoundError:
        return "unknown"


@dataclass
class WandbConfig:
    """
    Configuration for wandb. Runs are not tracked unless `mode` is set to "online" or "offline".
    """

    entity: Optional[str] = None  # An entity is a username or team name where you send runs
    project: Optional[str] = "pushforward"  # The name of the project where you are sending the new run.
    name: Optional[str] = None  # A short display name for this run, which is how you'll identify this run in the UI.
    tags: List[str] = field(default_factory=list)  # Will populate the list of tags on this run in the UI.
    group: Optional[str] = None  # Specify a group to organize individual runs into a larger experiment.
    mode: str = "disabled"  # Can be "online", "offline" or "disabled".

    @property
    def enabled(self) -> bool:
        return self.mode != "disabled"

    def init(self, hparams=None, **extra_hparams):
        if dataclasses.is_dataclass(hparams):
            hparams_to_save = dataclasses.asdict(hparams)
        else:
            hparams_to_save = dict(hparams or {})
        hparams_to_save.update(extra_hparams)

        # wandb isn't reliably populating the git commit, so we do it here
        repo = _git_repo()
        if repo is not None:
            try:
                hparams_to_save["git_commit"] = repo.head.commit.hexsha
            except ValueError:
                logger.warning(f"Could not read HEAD of git repo at {repo.working_dir}")

        return wandb.init(
            entity=self.entity,
            project=self.project,
            name=self.name,
            tags=self.tags,
            group=self.group,
            mode=self.mode,
            config=hparams_to_save,
        )


def is_wandb_available():
    return wandb is not None and wandb.run is not None
