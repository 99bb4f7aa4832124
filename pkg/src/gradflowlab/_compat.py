"""Small compatibility shims."""

import numpy as _np

# numpy 2 renamed trapz; keep one spelling across the package
trapezoid = getattr(_np, "trapezoid", None) or _np.trapz
