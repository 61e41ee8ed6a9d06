"""
Utilities for caching expensive intermediate results on disk.

Computing the feature matrices of a training corpus runs proposal generation and prediction
for every scenario, which dominates the cost of IRL training. The Checkpointer stores such
results under a key derived from their inputs, so repeated runs over the same scenarios and
predictor settings load them instead of recomputing.

Key components:
- Checkpointer: saves and loads pickled results under a content-derived key
- cache_key: digest of the inputs that determine a result

Example:
    checkpointer = Checkpointer(cache_key(scenarios_path, predictor_cfg), '.checkpoints')
    samples = build_irl_samples(scenarios, planner, checkpointer)
"""

import hashlib
import logging
import pickle
from pathlib import Path
from typing import Any, Callable, Tuple


logger = logging.getLogger(__name__)


def cache_key(*parts: Any) -> str:
    """
    Short stable digest of ``parts``.

    Pydantic models contribute their JSON dump, files their contents, everything else its repr.
    """
    digest = hashlib.sha256()
    for part in parts:
        if hasattr(part, 'model_dump_json'):
            digest.update(part.model_dump_json().encode('utf-8'))
        elif isinstance(part, (str, Path)) and Path(part).is_file():
            digest.update(Path(part).read_bytes())
        else:
            digest.update(repr(part).encode('utf-8'))
        digest.update(b'\0')
    return digest.hexdigest()[:16]


class Checkpointer:
    """
    Disk cache for results of long-running stages.

    Results are written to a temporary file and renamed into place, so an interrupted run never
    leaves a partial checkpoint behind. An unreadable checkpoint is recomputed and overwritten.

    Attributes:
        checkpoint_key (str): Prefix of every file written by this instance
        checkpoint_dir (Path): Directory holding the pickled results
        enabled (bool): When False, :meth:`checkpoint` always recomputes and writes nothing
    """

    def __init__(self, key: str, checkpoint_dir: str = '.checkpoints', enabled: bool = True):
        self.checkpoint_key = key
        self.checkpoint_dir = Path(checkpoint_dir)
        self.enabled = enabled
        if self.enabled:
            self.checkpoint_dir.mkdir(parents=True, exist_ok=True)
        logger.debug(f'Checkpointer {key} in {self.checkpoint_dir} (enabled={enabled})')

    def path(self, stage_name: str) -> Path:
        return self.checkpoint_dir / f'{self.checkpoint_key}_{stage_name}.pkl'

    def _load(self, stage_file: Path) -> Tuple[bool, Any]:
        try:
            with stage_file.open('rb') as f:
                return True, pickle.load(f)
        except FileNotFoundError:
            return False, None
        except (pickle.UnpicklingError, EOFError, AttributeError) as e:
            logger.warning(f'Ignoring unreadable checkpoint {stage_file}: {e}')
            return False, None

    def checkpoint(self, fn: Callable, args: list, stage_name: str = 'result') -> Any:
        """
        Return ``fn(*args)``, loading it from disk when a checkpoint for the stage exists.

        Args:
            fn: Function computing the result
            args: Positional arguments of ``fn``
            stage_name: Suffix distinguishing results stored under the same key

        Returns:
            The computed or cached result
        """
        if not self.enabled:
            return fn(*args)

        stage_file = self.path(stage_name)
        found, cached = self._load(stage_file)
        if found:
            logger.info(f'Loaded {stage_name} from {stage_file}')
            return cached

        result = fn(*args)
        partial = stage_file.with_suffix('.tmp')
        with partial.open('wb') as f:
            pickle.dump(result, f, protocol=pickle.HIGHEST_PROTOCOL)
        partial.replace(stage_file)
        logger.info(f'Saved {stage_name} to {stage_file}')
        return result
