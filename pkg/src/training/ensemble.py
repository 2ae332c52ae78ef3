"""Training targets for the attack: a single victim or an ensemble of stand-in detectors."""
import logging
import math
from typing import Iterable, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from models.detectors import DetectorNet

logger = logging.getLogger(__name__)


class EnsembleSpec(BaseModel):
    """Detectors the generator is trained against, with their loss weights (uniform when omitted)."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    names: Tuple[str, ...] = Field(min_length=1)
    detectors: Tuple[DetectorNet, ...]
    beta: Tuple[float, ...] = ()
    victim: Optional[str] = None

    @model_validator(mode="after")
    def _check_members(self) -> "EnsembleSpec":
        if len(self.names) != len(self.detectors):
            raise ValueError(f"{len(self.names)} names for {len(self.detectors)} detectors")
        if self.victim is not None and self.victim in self.names:
            raise ValueError(f"victim '{self.victim}' must not be part of the training ensemble")
        if not self.beta:
            self.beta = tuple(1.0 / len(self.names) for _ in self.names)
        if len(self.beta) != len(self.names):
            raise ValueError(f"{len(self.beta)} beta weights for {len(self.names)} detectors")
        if any(b < 0 for b in self.beta):
            raise ValueError(f"beta weights must be non-negative, got {list(self.beta)}")
        if not math.isclose(sum(self.beta), 1.0, abs_tol=1e-9):
            raise ValueError(f"beta weights must sum to 1, got {sum(self.beta)}")
        return self

    @property
    def trained_against(self) -> Tuple[str, ...]:
        return self.names

    @classmethod
    def single(cls, name: str, detector: DetectorNet) -> "EnsembleSpec":
        """White-box target: the victim itself, weight 1."""
        return cls(names=(name,), detectors=(detector,), beta=(1.0,))


def leave_one_out(available: Iterable[str], victim: str, always_exclude: Sequence[str] = ()) -> List[str]:
    """
    Every available detector except the victim and the always-excluded ones,
    in the given order.

    Raises:
        ValueError: nothing left to train against
    """
    available = list(available)
    members = [name for name in available if name != victim and name not in always_exclude]
    if not members:
        raise ValueError(f"no detectors left for an ensemble excluding '{victim}' and {list(always_exclude)} "
                         f"from {available}")
    logger.debug(f"zero-knowledge ensemble for {victim}: {members}")
    return members
