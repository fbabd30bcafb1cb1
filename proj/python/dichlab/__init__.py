"""Numerical lab for (mu, nu)-dichotomies via admissibility.

Reports and certificates come back as dicts; non-finite numbers are the
strings "inf", "-inf" and "nan".
"""

import json as _json

from . import _core
from ._core import (
    AnalysisError,
    ConfigError,
    GrowthRate,
    LinearSystem,
    PlantedModel,
    ProjectionFamily,
    library_version,
    paper_example,
)

__version__ = library_version()


def _dumps(value):
    return None if value is None else _json.dumps(value)


def rate(spec):
    """Growth rate from a dict such as {"kind", "domain", "window"}."""
    return GrowthRate.from_json(_json.dumps(spec))


def system(spec):
    """Linear system from its JSON form."""
    return LinearSystem.from_json(_json.dumps(spec))


def planted_model(rate, lambda_s, lambda_u, d_s, d_u, cond, seed, nu=None):
    return _core.planted_model(rate, lambda_s, lambda_u, d_s, d_u, cond, seed, _dumps(nu))


def verify_dichotomy(system, projections, rate, D, lam, nu=None):
    return _json.loads(_core.verify_dichotomy(system, projections, rate, D, lam, _dumps(nu)))


def fit_certificate(system, projections, rate, nu=None):
    return _json.loads(_core.fit_certificate(system, projections, rate, _dumps(nu)))


def characterize(system, rate, nu=None):
    return _json.loads(_core.characterize(system, rate, _dumps(nu)))


def operator_norm(system, projections, rate, beta, nu=None):
    return _json.loads(_core.operator_norm(system, projections, rate, beta, _dumps(nu)))


def smallness_margin(system, projections, rate, c, beta=0.0, seed=0, nu=None):
    return _json.loads(_core.smallness_margin(system, projections, rate, c, beta, seed, _dumps(nu)))


def counterexample(n_max):
    """CSV text with columns n, log_x, log_bound."""
    return _core.counterexample(n_max)


def config_schema():
    return _json.loads(_core.config_schema())


def report_schema():
    return _json.loads(_core.report_schema())


def validate(instance, schema):
    return _core.validate(_json.dumps(instance), _json.dumps(schema))


def run_scenario(config, scenario=None, seed=None, threads=1, base_dir="."):
    """Runs a scenario config. Returns (report, tables, exit_code)."""
    report, tables, code = _core.run_scenario(_json.dumps(config), scenario, seed, threads, base_dir)
    return _json.loads(report), dict(tables), code
