"""Non-commutative formulas, linear pencils and symbolic matrices."""

from .formula import *  # noqa: F401,F403
from .formula import __all__ as _formula_all
from .matrix import *  # noqa: F401,F403
from .matrix import __all__ as _matrix_all
from .pencil import *  # noqa: F401,F403
from .pencil import __all__ as _pencil_all
from .rit import *  # noqa: F401,F403
from .rit import __all__ as _rit_all

__all__ = [*_formula_all, *_matrix_all, *_pencil_all, *_rit_all]
