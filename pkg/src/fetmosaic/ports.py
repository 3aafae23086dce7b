from typing import Optional, Protocol

from .homography import Homography
from .models import RegistrationConfig, RegistrationResult
from .warp import FovMask, Image


class PairRegistrar(Protocol):
    def __call__(
        self,
        fixed: Image,
        moving: Image,
        mask: FovMask,
        cfg: Optional[RegistrationConfig] = None,
        init: Optional[Homography] = None,
    ) -> RegistrationResult: ...
