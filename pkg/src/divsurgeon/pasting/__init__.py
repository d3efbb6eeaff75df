"""Conservative pasting, flux obstructions, smoothing and regular extension."""

from divsurgeon.pasting.flux import Circle, Hypersurface, Slice, Sphere, flux
from divsurgeon.pasting.obstruction import ObstructionRecord, check_obstruction
from divsurgeon.pasting.paste import PasteReport, paste, scaling_sweep
from divsurgeon.pasting.regions import PasteRegions, derive_regions
from divsurgeon.pasting.smoothing import extend_regular, smooth_global

__all__ = [
    "Circle",
    "Hypersurface",
    "ObstructionRecord",
    "PasteRegions",
    "PasteReport",
    "Slice",
    "Sphere",
    "check_obstruction",
    "derive_regions",
    "extend_regular",
    "flux",
    "paste",
    "scaling_sweep",
    "smooth_global",
]
