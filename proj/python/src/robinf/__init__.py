"""Robust regression inference: sandwich variances, multiple testing and resampling.

Every entry point runs the same core as the ``robinf`` command line tool and
returns its report as a dict. Failures raise :class:`RobinfError`.
"""

import json
import math
import os

from . import _core

__version__ = _core.__version__
__all__ = ["RobinfError", "analyze", "fit", "vcov", "mht", "adjust", "bootstrap", "ri"]


class RobinfError(Exception):
    """Core failure. ``exit_code`` matches the command line tool (2 config, 3 data, 4 numeric)."""

    def __init__(self, code, exit_code, message, hint="", indices=()):
        super().__init__(message)
        self.code = code
        self.exit_code = exit_code
        self.message = message
        self.hint = hint
        self.indices = list(indices)


_core._set_error_type(RobinfError)


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def _table(table):
    if hasattr(table, "to_dict") and hasattr(table, "columns"):
        table = {str(c): list(table[c]) for c in table.columns}
    columns = [str(c) for c in table]
    values = [list(table[c]) for c in table]
    lengths = {len(v) for v in values}
    if len(lengths) > 1:
        raise RobinfError("ShapeMismatch", 3, "table columns differ in length")
    n = lengths.pop() if lengths else 0
    rows = [[_cell(v[i]) for v in values] for i in range(n)]
    return columns, rows


def analyze(config, table=None, base_dir=None):
    """Run a full analysis.

    ``config`` uses the keys of the JSON configuration file. ``table`` maps
    column names to equal-length sequences (a pandas DataFrame also works);
    without it the configured ``input`` file is read.
    """
    config = dict(config)
    if table is not None:
        config.setdefault("input", "<table>")
    text = json.dumps(config)
    base = os.fspath(base_dir) if base_dir is not None else ""
    if table is None:
        report = _core.analyze(text, base)
    else:
        columns, rows = _table(table)
        report = _core.analyze(text, base, columns, rows)
    return json.loads(report)


def _base(outcome, covariates, clusters, treatment, vcov, alpha, extra):
    config = {"outcome": outcome if isinstance(outcome, str) else list(outcome)}
    if covariates:
        config["covariates"] = list(covariates)
    if clusters:
        config["clusters"] = [clusters] if isinstance(clusters, str) else list(clusters)
    if treatment is not None:
        config["treatment"] = treatment
    if vcov is not None:
        config["vcov"] = vcov
    if alpha is not None:
        config["alpha"] = alpha
    config.update(extra)
    return config


def fit(table, outcome, covariates=(), clusters=None, treatment=None, vcov="hc1", alpha=None, **extra):
    """OLS with the chosen variance estimator and its tests."""
    return analyze(_base(outcome, covariates, clusters, treatment, vcov, alpha, extra), table)


def vcov(table, outcome, covariates=(), kind="hc1", clusters=None, treatment=None, **extra):
    """Standard errors under one variance estimator, keyed by outcome then coefficient."""
    report = fit(table, outcome, covariates, clusters, treatment, kind, **extra)
    return {a["outcome"]: {c["name"]: c["se"] for c in a["coefficients"]} for a in report["analyses"]}


def mht(table, outcomes, covariates=(), method="holm", treatment=None, family=None, resample=None, **extra):
    """Fit several outcomes and adjust the target coefficient's p-values across them."""
    block = {"method": method}
    if family is not None:
        block["family"] = list(family)
    config = _base(list(outcomes), covariates, None, treatment, None, None, extra)
    config["mht"] = block
    if resample is not None:
        config["resample"] = dict(resample)
    return analyze(config, table)


def adjust(pvalues, method="holm", alpha=0.05, ids=None):
    """Adjust raw p-values directly (Bonferroni, Holm, BH, BKY)."""
    pvalues = [float(p) for p in pvalues]
    ids = [str(i) for i in ids] if ids is not None else [f"H{i + 1}" for i in range(len(pvalues))]
    return _core.adjust(ids, pvalues, method, alpha)


def bootstrap(table, outcome, covariates=(), scheme="pairs", replications=1000, seed=None, clusters=None,
              treatment=None, vcov="hc1", workers=0, **options):
    """Resample the fitted regression. ``seed`` is required."""
    resample = {"scheme": scheme, "replications": replications, "seed": seed, "workers": workers}
    resample.update(options)
    config = _base(outcome, covariates, clusters, treatment, vcov, None, {})
    config["resample"] = resample
    return analyze(config, table)


def ri(table, outcome, treatment, covariates=(), replications=10000, seed=None, assignment="complete",
       clusters=None, workers=0, **options):
    """Randomization inference for the treatment coefficient. ``seed`` is required."""
    return bootstrap(table, outcome, covariates, "ri", replications, seed, clusters, treatment, "hc1", workers,
                     assignment=assignment, **options)
