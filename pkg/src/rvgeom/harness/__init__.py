"""Instance generation, the verification suite and figure-data emission."""

from .figures import FIGURE_FIXTURES, FIGURES, emit_figure_data
from .generate import SuiteConfig, generate_instance
from .suite import CHECKS, SuiteReport, run_suite
