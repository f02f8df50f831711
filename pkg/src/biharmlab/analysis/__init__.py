"""Identity and inequality checks, constant estimates and the verify suite."""

from .reports import ConstantEstimate, InequalityReport
from .suite import SuiteResult, SuiteSettings, run_suite
from .threshold import lambda0_search

__all__ = ["ConstantEstimate", "InequalityReport", "SuiteResult", "SuiteSettings",
           "lambda0_search", "run_suite"]
