"""The full identity and inequality suite behind ``biharmlab verify``."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from ..grid import DEFAULT_N_NODES, DEFAULT_R_MAX, DEFAULT_R_MIN, Quadrature, build_grid, \
    make_quadrature
from ..params import OperatorParams
from ..testfn import family_of_size, family_pairs
from .chain import (chain_checks, d2_apriori_check, merge_reports, potential_check,
                    weighted_cz_check, weighted_interp_check)
from .identities import (accretivity_check, continuity_check, duality_check,
                         form_identity_check, norm_equivalence_check)
from .lemma import lemma21_check, rellich_check, stima_identity_check
from .potential import m_function_check, reverse_holder_check, tilde_v_bounds_check
from .reports import InequalityReport
from .sweep import Sweep
from .threshold import Lambda0Result, lambda0_search

SCHEMA_VERSION = "1.0"


@dataclass
class SuiteSettings:
    pairs: int = 20
    continuity_pairs: int = 80      # doubled for the stability check
    accretivity_members: int = 100
    lemma_members: int = 24
    sweep_size: int = 30            # doubled for the stability check
    descent_iters: int = 100
    seed: int = 0
    threads: int = 1
    stability_samples: int = 1000
    grid: tuple = (DEFAULT_R_MIN, DEFAULT_R_MAX, DEFAULT_N_NODES)

    def quadrature(self, N: int) -> Quadrature:
        return make_quadrature(build_grid(*self.grid), N)

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["grid"] = list(self.grid)
        return out


def lemma_gammas(alpha: float, beta: float) -> List[float]:
    """``{1, 2, 3, 4, 2 alpha, 2 beta}`` without repeats, in that order."""
    out: List[float] = []
    for g in (1.0, 2.0, 3.0, 4.0, 2 * alpha, 2 * beta):
        if g not in out:
            out.append(float(g))
    return out


def lemma_suite(N: int, alpha: float, beta: float, members: int = 24,
                seed: int = 0, quad: Optional[Quadrature] = None) -> InequalityReport:
    """Identity residuals and lower-bound margins for every gamma at one N."""
    quad = quad or make_quadrature(build_grid(), N)
    fam = family_of_size(members, N, alpha, beta, seed)
    reps = []
    for g in lemma_gammas(alpha, beta):
        ident = [stima_identity_check(u, g, N, quad) for u in fam]
        reps.append(merge_reports(f"stima[gamma={g},N={N}]", ident))
        reps.append(lemma21_check(fam, g, N, quad))
    return merge_reports(f"lemma21[N={N}]", reps)


@dataclass
class SuiteResult:
    params: OperatorParams
    settings: SuiteSettings
    lambda0: Lambda0Result
    reports: List[InequalityReport] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    def summary(self) -> Dict[str, int]:
        out = {"PASS": 0, "FAIL": 0, "SKIPPED": 0}
        for r in self.reports:
            out[r.status] += 1
        return out

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "kind": "verify",
                "params": self.params.to_dict(), "settings": self.settings.to_dict(),
                "lambda0": self.lambda0.to_dict(), "passed": self.passed,
                "summary": self.summary(), "reports": [r.to_dict() for r in self.reports]}


def run_suite(params: OperatorParams, settings: Optional[SuiteSettings] = None,
              only: Optional[Sequence[str]] = None) -> SuiteResult:
    """Run every check at ``params`` (lambda is raised to lambda0 if below it).

    ``only`` restricts the run to the named groups: form, lemma, rellich,
    chain, potential-class.
    """
    st = settings or SuiteSettings()
    params.require_dim(5)
    lam0 = lambda0_search(params)
    p = params.with_lambda0(lam0.value)
    if p.lam < lam0.value:
        p = p.with_lambda(lam0.value)
    groups = set(only) if only else {"form", "lemma", "rellich", "chain", "potential-class"}
    N, al, be = p.N, p.alpha, p.beta
    quad = st.quadrature(N)
    reps: List[InequalityReport] = []

    if "form" in groups:
        pairs = family_pairs(st.pairs, N, al, be, st.seed)
        reps.append(form_identity_check(pairs, p, quad))
        reps.append(accretivity_check(family_of_size(st.accretivity_members, N, al, be,
                                                     st.seed), p, quad))
        reps.append(duality_check(pairs, p, quad))
        cont = family_pairs(2 * st.continuity_pairs, N, al, be, st.seed)
        reps.append(continuity_check(cont[:st.continuity_pairs], p, quad, cont))
        reps.append(norm_equivalence_check(family_of_size(20, N, al, be, st.seed),
                                           family_of_size(60, N, al, be, st.seed), p, quad))
    if "lemma" in groups:
        reps.append(lemma_suite(N, al, be, st.lemma_members, st.seed, quad))
    if "rellich" in groups:
        reps.append(rellich_check(family_of_size(st.accretivity_members, N, al, be, st.seed),
                                  N, quad))
    if "chain" in groups:
        big = Sweep(family_of_size(2 * st.sweep_size, N, al, be, st.seed), quad, st.threads)
        sw = big.prefix(st.sweep_size)
        kw = {"seed": st.seed, "iters": st.descent_iters}
        reps.append(weighted_interp_check(sw, big, 2 * al - 3, 1, **kw))
        reps.append(chain_checks(sw, big, al, N, **kw))
        reps.append(weighted_cz_check(sw, big, al, N, **kw))
        reps.append(weighted_cz_check(sw, big, 0.0, N, **kw))
        reps.append(potential_check(sw, big, p, **kw))
        reps.append(d2_apriori_check(sw, big, p, **kw))
    if "potential-class" in groups:
        reps.append(reverse_holder_check(p))
        reps.append(m_function_check(p))
        reps.append(tilde_v_bounds_check(p, samples=st.stability_samples))
    return SuiteResult(p, st, lam0, reps)
