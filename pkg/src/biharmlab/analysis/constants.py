"""The table of constants emitted by ``biharmlab constants``."""

from __future__ import annotations

import csv
import io
from typing import List, Optional, Sequence

from ..params import OperatorParams, lemma_constant_k, rellich_constants
from ..testfn import family_of_size
from .chain import EPSILONS, interp_inequality
from .potential import tilde_v_bounds_check
from .reports import _clean
from .suite import SCHEMA_VERSION, SuiteSettings, lemma_gammas
from .sweep import Sweep, estimate_constant
from .threshold import lambda0_search

COLUMNS = ("name", "value", "kind", "reference", "stability", "note")
K_TABLE_N = (5, 9, 11)


def _row(name, value, kind, reference=None, stability=None, note="") -> dict:
    return {"name": name, "value": value, "kind": kind, "reference": reference,
            "stability": stability, "note": note}


def _rellich_ratio(s):
    return s.integral(s.Lu ** 2) / s.integral(s.r ** -4.0 * s.f ** 2)


def _higher_rellich_sup(s):
    return s.norm(s.r ** -4.0 * s.f) / s.norm(s.L2u)


def constants_table(params: OperatorParams, settings: Optional[SuiteSettings] = None,
                    k_dims: Sequence[int] = K_TABLE_N) -> List[dict]:
    st = settings or SuiteSettings()
    N, al, be = params.N, params.alpha, params.beta
    quad = st.quadrature(N)
    big = Sweep(family_of_size(2 * st.sweep_size, N, al, be, st.seed), quad, st.threads)
    sw = big.prefix(st.sweep_size)
    rows: List[dict] = []

    rc = rellich_constants(N)
    rows.append(_row(f"c0_sharp[N={N}]", rc.c0_sharp, "closed-form", note="(N(N-4)/4)^2"))
    c0 = estimate_constant("c0_empirical", _rellich_ratio, sw, "inf", seed=st.seed,
                           iters=st.descent_iters, doubled=big, reference=rc.c0_sharp)
    rows.append(_row(f"c0_empirical[N={N}]", c0.value, "family-inf", rc.c0_sharp,
                     c0.stability, "must not fall below c0_sharp"))
    rows.append(_row(f"c_hardy[N={N}]", rc.c_hardy, "closed-form", note="((N-2)/2)^2"))
    if N > 8:
        ch = estimate_constant("C_hor", _higher_rellich_sup, sw, "sup", seed=st.seed,
                               iters=st.descent_iters, doubled=big)
        rows.append(_row(f"C_hor[N={N}]", ch.value, "family-sup", None, ch.stability,
                         "||r^-4 u|| <= C ||Delta^2 u||; empirical only"))

    g = 2 * al - 3
    for e in EPSILONS:
        q = interp_inequality(g, 1, e)
        c = estimate_constant(q.id, q.ratio, sw, "sup", seed=st.seed,
                              iters=st.descent_iters, doubled=big)
        rows.append(_row(f"C_eps[gamma={g},h=1,eps={e}]", c.value, "family-sup", None,
                         c.stability))

    tv = tilde_v_bounds_check(params, samples=st.stability_samples)
    low, high = ("C1", "C2") if be >= al else ("C3", "C4")
    rows.append(_row(low, tv.details["C_low"], "sample-inf", note=tv.details["case"]))
    rows.append(_row(high, tv.details["C_high"], "sample-sup", note=tv.details["case"]))

    lam0 = lambda0_search(params)
    rows.append(_row("lambda0", lam0.value, "grid-search",
                     note="max of potential and accretivity thresholds"))
    rows.append(_row("lambda0_potential", lam0.potential, "grid-search"))
    rows.append(_row("lambda0_accretivity", lam0.accretivity, "grid-search"))
    for key, val in lam0.k.items():
        rows.append(_row(f"potential_{key}", val, "closed-form"))

    gammas = sorted(set(lemma_gammas(al, be)))
    for n in k_dims:
        for gm in gammas:
            lc = lemma_constant_k(gm, n)
            rows.append(_row(f"k[gamma={gm},N={n}]", lc.k, "closed-form",
                             note=f"c2={lc.c2}, c3={lc.c3}, c4={lc.c4}"))
    return [_clean(r) for r in rows]


def table_to_dict(params: OperatorParams, rows: List[dict]) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": "constants",
            "params": params.to_dict(), "rows": rows}


def table_to_csv(rows: List[dict]) -> str:
    """CSV mirror of the JSON rows; floats use ``repr`` so both carry the same digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow(["" if r[c] is None else (repr(r[c]) if isinstance(r[c], float) else r[c])
                    for c in COLUMNS])
    return buf.getvalue()
